import numpy as np
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsedom.biparam import (
    ProductGrid,
    axis_maximal,
    biparam_greedy,
    enumerate_rectangles,
    rect_percentile_maximal,
    strong_maximal,
)
from sparsedom.dyadic import build_grid
from sparsedom.generators import random_grid


class ProductGridTests(SimpleTestCase):
    def test_rectangle_count(self):
        pg = ProductGrid(build_grid(2), build_grid(1))
        self.assertEqual(pg.rectangle_count(), 21)
        self.assertEqual(len(enumerate_rectangles(np.ones(pg.shape), pg)), 21)
        self.assertEqual(pg.rectangle_count((0, 0)), 1)

    @override_settings(SPARSEDOM_PRODUCT_DEPTH_CAP=4)
    def test_depth_cap(self):
        with self.assertRaises(ValueError):
            ProductGrid(build_grid(3), build_grid(2))

    def test_exact_grids_are_rejected(self):
        with self.assertRaises(ValueError):
            ProductGrid(build_grid(1, exact=True), build_grid(1))

    def test_shape_is_checked(self):
        pg = ProductGrid(build_grid(1), build_grid(1))
        with self.assertRaises(ValueError):
            strong_maximal(np.ones((2, 3)), pg)

    def test_top_rectangle_average(self):
        rng = np.random.default_rng(2)
        pg = ProductGrid(random_grid(2, rng), random_grid(3, rng))
        values = rng.standard_normal(pg.shape)
        expected = float((values * pg.cell_measure).sum())
        self.assertAlmostEqual(float(pg.block_averages(values, 0, 0)[0, 0]), expected)


class StrongMaximalTests(SimpleTestCase):
    def test_dominates_the_axis_maximal_functions(self):
        rng = np.random.default_rng(5)
        pg = ProductGrid(build_grid(3), build_grid(2))
        values = rng.standard_normal(pg.shape)
        strong = strong_maximal(values, pg)
        self.assertTrue(np.all(strong >= np.abs(values) - 1e-12))
        self.assertTrue(np.all(strong >= axis_maximal(values, pg, 0) - 1e-12))
        self.assertTrue(np.all(strong >= axis_maximal(values, pg, 1) - 1e-12))

    def test_percentile_maximal_of_a_constant(self):
        pg = ProductGrid(build_grid(2), build_grid(2))
        np.testing.assert_allclose(rect_percentile_maximal(np.full(pg.shape, -3.0), pg, 0.5), 3.0)

    @settings(deadline=None, max_examples=10)
    @given(seed=st.integers(0, 10_000))
    def test_greedy_rectangles(self, seed):
        rng = np.random.default_rng(seed)
        pg = ProductGrid(random_grid(3, rng), random_grid(3, rng))
        extraction = biparam_greedy(rng.standard_normal(pg.shape), pg)
        self.assertTrue(extraction.sparsity.passed)
        self.assertTrue(extraction.domination.passed, extraction.domination.to_dict())
        self.assertEqual(extraction.domination.inequality_id, "biparam-strong-max")
