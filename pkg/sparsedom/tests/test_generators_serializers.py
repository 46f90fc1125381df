import math
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from sparsedom.biparam import ProductGrid, Rectangle, biparam_greedy
from sparsedom.dyadic import Cube, GridFunction, build_grid
from sparsedom.euclid import LineGrid
from sparsedom.generators import (
    GENERATORS,
    generate,
    haar,
    random_doubling_measure,
    random_function,
    random_grid,
    random_line_function,
)
from sparsedom.reports import check_domination
from sparsedom.serializers import (
    decode_mask,
    dump_json,
    encode_mask,
    family_from_dict,
    family_to_dict,
    grid_function_frame,
    grid_function_from_frame,
    line_function_frame,
    line_function_from_frame,
    load_json,
    points_frame,
    product_function_frame,
    product_function_from_frame,
    read_csv,
    reports_from_json,
    write_csv,
)
from sparsedom.sparse import random_sparse_family


class GeneratorTests(SimpleTestCase):
    def test_every_generator_fills_the_grid(self):
        grid = build_grid(4)
        for name in GENERATORS:
            f = generate(name, grid, np.random.default_rng(0))
            self.assertEqual(f.values.shape, (16,))

    def test_unknown_generator(self):
        with self.assertRaises(ValueError):
            generate("gaussian", build_grid(2), np.random.default_rng(0))

    def test_haar_needs_depth(self):
        with self.assertRaises(ValueError):
            haar(build_grid(0), np.random.default_rng(0))
        f = haar(build_grid(2), np.random.default_rng(0), Cube(0, 0))
        self.assertEqual(f.values.tolist(), [1.0, 1.0, -1.0, -1.0])

    def test_doubling_measure(self):
        masses = random_doubling_measure(6, np.random.default_rng(1))
        self.assertAlmostEqual(float(masses.sum()), 1.0)
        grid = build_grid(6, masses)
        self.assertLessEqual(float(grid.regularity), 4.0 + 1e-9)
        with self.assertRaises(ValueError):
            random_doubling_measure(2, np.random.default_rng(1), (0.3, 0.6))

    def test_seeded_inputs_repeat(self):
        first = random_function(random_grid(5, np.random.default_rng(7)), np.random.default_rng(8))
        second = random_function(random_grid(5, np.random.default_rng(7)), np.random.default_rng(8))
        np.testing.assert_array_equal(first.values, second.values)
        self.assertTrue(random_grid(3, np.random.default_rng(0), uniform=True).is_uniform)

    def test_line_function_support(self):
        grid = LineGrid(0.0, 1.0, 32)
        f = random_line_function(grid, np.random.default_rng(2), (8, 24))
        self.assertEqual(float(np.abs(f.values[:8]).sum() + np.abs(f.values[24:]).sum()), 0.0)
        with self.assertRaises(ValueError):
            random_line_function(grid, np.random.default_rng(2), (8, 40))


class MaskAndFamilyTests(SimpleTestCase):
    def test_mask_encoding(self):
        mask = np.random.default_rng(0).random((3, 5)) > 0.5
        np.testing.assert_array_equal(decode_mask(encode_mask(mask)), mask)

    def test_adapted_family(self):
        rng = np.random.default_rng(4)
        family = random_sparse_family(random_grid(4, rng), rng)
        restored = family_from_dict(family_to_dict(family))
        np.testing.assert_array_equal(restored.leaf_masks(), family.leaf_masks())
        self.assertEqual(restored.eta, family.eta)
        np.testing.assert_allclose(restored.grid.leaf_measure, family.grid.leaf_measure)

    def test_flat_family_keeps_rectangle_labels(self):
        rng = np.random.default_rng(5)
        pg = ProductGrid(build_grid(2), build_grid(2))
        family = biparam_greedy(rng.standard_normal(pg.shape), pg).family
        restored = family_from_dict(family_to_dict(family))
        self.assertEqual(restored.labels, family.labels)
        self.assertTrue(all(isinstance(label, Rectangle) for label in restored.labels))
        for left, right in zip(restored.sets, family.sets):
            np.testing.assert_array_equal(left, right)

    def test_unknown_kind(self):
        with self.assertRaises(ValueError):
            family_from_dict({"kind": "tree"})


class TableTests(SimpleTestCase):
    def test_grid_function_frame(self):
        rng = np.random.default_rng(6)
        f = random_function(random_grid(3, rng), rng)
        frame = grid_function_frame(f)
        self.assertEqual(list(frame.columns), ["leaf", "measure", "value"])
        restored = grid_function_from_frame(frame.iloc[::-1])
        np.testing.assert_array_equal(restored.values, f.values)
        with self.assertRaises(ValueError):
            grid_function_from_frame(frame.iloc[:3])

    def test_uniform_grid_is_recognized(self):
        f = GridFunction.constant(build_grid(2), 1.0)
        self.assertTrue(grid_function_from_frame(grid_function_frame(f)).grid.is_uniform)

    def test_line_function_frame(self):
        f = random_line_function(LineGrid(-1.0, 1.0, 16), np.random.default_rng(1), (0, 16))
        restored = line_function_from_frame(line_function_frame(f))
        self.assertAlmostEqual(restored.grid.a, -1.0)
        self.assertEqual(restored.grid.cells, 16)
        with self.assertRaises(ValueError):
            line_function_from_frame(pd.DataFrame({"x_midpoint": [0.0, 1.0, 3.0], "value": [1.0, 2.0, 3.0]}))

    def test_product_function_frame(self):
        pg = ProductGrid(build_grid(1), build_grid(2))
        values = np.arange(8.0).reshape(2, 4)
        frame = product_function_frame(values, pg)
        self.assertEqual(frame.loc[5, ["n1", "n2"]].tolist(), [1, 1])
        np.testing.assert_array_equal(product_function_from_frame(frame.sample(frac=1.0, random_state=0), pg), values)

    def test_points_frame_orders_columns(self):
        frame = points_frame([{"ratio": 2.0, "rhs": 1.0, "lhs": 2.0, "Aq": 3.0, "eps": 0.5}])
        self.assertEqual(list(frame.columns), ["eps", "Aq", "lhs", "rhs", "ratio"])
        with self.assertRaises(ValueError):
            points_frame([{"eps": 0.5}])


class FileTests(SimpleTestCase):
    def test_json_keeps_unbounded_constants(self):
        report = check_domination([1.0], [0.0], 1.0, "toy")
        with tempfile.TemporaryDirectory() as tmp:
            path = dump_json({"reports": [report.to_dict()]}, Path(tmp) / "nested" / "report.json")
            restored = reports_from_json(load_json(path)["reports"])
        self.assertTrue(math.isinf(restored[0].best_constant))

    def test_csv_round_trip(self):
        frame = pd.DataFrame({"eps": [0.5, 0.25], "value": [1.0 / 3.0, 2.0]})
        with tempfile.TemporaryDirectory() as tmp:
            restored = read_csv(write_csv(frame, Path(tmp) / "points.csv"))
        pd.testing.assert_frame_equal(restored, frame)
