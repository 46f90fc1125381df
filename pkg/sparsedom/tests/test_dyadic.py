from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsedom.dyadic import (
    Cube,
    GridFunction,
    StoppingTime,
    as_ratio,
    build_grid,
    cond_expect,
    cond_percentile,
    cond_percentile_properties,
    doob_maximal,
    doob_weak_audit,
    mart_diff,
    percentile_maximal,
    percentile_moment_audit,
    percentile_norm_audit,
    percentile_on_cube,
    weak_type_audit,
)
from sparsedom.generators import random_function, random_grid


class CubeTests(SimpleTestCase):
    def test_children_and_containment(self):
        cube = Cube(2, 1)
        left, right = cube.children()
        self.assertEqual((left, right), (Cube(3, 2), Cube(3, 3)))
        self.assertTrue(cube.contains(Cube(4, 7)))
        self.assertFalse(cube.contains(Cube(4, 8)))
        self.assertEqual(Cube(4, 7).ancestor(2), cube)

    def test_leaf_slice(self):
        self.assertEqual(Cube(1, 1).leaf_slice(3), slice(4, 8))
        with self.assertRaises(ValueError):
            Cube(4, 0).leaf_slice(3)

    def test_index_out_of_range(self):
        with self.assertRaises(ValueError):
            Cube(2, 4)
        with self.assertRaises(ValueError):
            Cube(0, 0).parent()


class GridTests(SimpleTestCase):
    def test_uniform_grid_regularity(self):
        grid = build_grid(4)
        self.assertTrue(grid.is_uniform)
        self.assertEqual(grid.regularity, 2.0)
        self.assertEqual(grid.leaf_count, 16)

    def test_regularity_follows_the_definition(self):
        grid = build_grid(2, [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8), Fraction(1, 8)], exact=True)
        self.assertEqual(grid.regularity, Fraction(4))

    def test_invalid_grids(self):
        with self.assertRaises(ValueError):
            build_grid(-1)
        with self.assertRaises(ValueError):
            build_grid(1, [0.5, 0.0])
        with self.assertRaises(ValueError):
            build_grid(2, [0.5, 0.5])
        with self.assertRaises(ValueError):
            build_grid(13, exact=True)

    def test_function_shape_is_checked(self):
        with self.assertRaises(ValueError):
            GridFunction(build_grid(2), [1.0, 2.0])
        with self.assertRaises(ValueError):
            GridFunction(build_grid(1), [1.0, np.inf])

    def test_exact_averages(self):
        grid = build_grid(2, exact=True)
        f = GridFunction(grid, [1, 2, 3, 5])
        self.assertEqual(cond_expect(f, 1).values.tolist(), [Fraction(3, 2)] * 2 + [Fraction(4)] * 2)
        self.assertEqual(f.mean(), Fraction(11, 4))

    def test_ratio_validation(self):
        self.assertEqual(as_ratio("1/4"), 0.25)
        self.assertEqual(as_ratio("1/10", exact=True), Fraction(1, 10))
        for bad in (0, 1, 1.5, -0.1):
            with self.assertRaises(ValueError):
                as_ratio(bad)


class StoppingTimeTests(SimpleTestCase):
    def test_non_adapted_time_is_rejected(self):
        grid = build_grid(1)
        with self.assertRaises(ValueError):
            StoppingTime(grid, [0, 1])

    def test_infinite_levels(self):
        grid = build_grid(2)
        nu = StoppingTime(grid, [1, 1, None, None])
        self.assertEqual(nu.finite.tolist(), [True, True, False, False])
        self.assertEqual(nu.clipped().tolist(), [1, 1, 2, 2])

    def test_doob_maximal_from_a_stopping_time(self):
        grid = build_grid(2)
        f = GridFunction(grid, [4.0, 0.0, 0.0, 0.0])
        nu = StoppingTime(grid, [1, 1, None, None])
        maximal = doob_maximal(f, nu).values
        np.testing.assert_array_equal(maximal, [4.0, 2.0, 0.0, 0.0])


class MartingaleDifferenceTests(SimpleTestCase):
    def test_differences_telescope(self):
        rng = np.random.default_rng(3)
        grid = random_grid(5, rng)
        f = random_function(grid, rng)
        total = sum(mart_diff(f, k).values for k in range(grid.depth + 1))
        np.testing.assert_allclose(total, f.values, atol=1e-9)

    def test_median_on_a_cube(self):
        grid = build_grid(2)
        f = GridFunction(grid, [1.0, 2.0, 3.0, 4.0])
        self.assertEqual(percentile_on_cube(f, Cube(0, 0), 0.5), 2.0)
        self.assertEqual(percentile_on_cube(f, Cube(0, 0), 0.25), 3.0)

    def test_conditional_percentile_per_cube(self):
        f = GridFunction(build_grid(2), [4.0, 1.0, 3.0, 2.0])
        self.assertEqual(cond_percentile(f, 1, 0.5).values.tolist(), [1.0, 1.0, 2.0, 2.0])
        self.assertEqual(cond_percentile(f, 0, 0.25).values.tolist(), [3.0] * 4)

    def test_percentile_maximal_of_a_constant(self):
        f = GridFunction.constant(build_grid(3), -2.0)
        np.testing.assert_array_equal(percentile_maximal(f, 0.5).values, np.full(8, 2.0))


class PercentileAuditTests(SimpleTestCase):
    @settings(deadline=None, max_examples=25)
    @given(seed=st.integers(0, 10_000), ratio=st.sampled_from([0.25, 0.5]))
    def test_weak_type_bound(self, seed, ratio):
        rng = np.random.default_rng(seed)
        f = random_function(build_grid(6), rng)
        report = weak_type_audit(f, ratio)
        self.assertTrue(report.passed, report.to_dict())

    @settings(deadline=None, max_examples=25)
    @given(seed=st.integers(0, 10_000), k=st.integers(0, 5))
    def test_conditional_percentile_bounds(self, seed, k):
        rng = np.random.default_rng(seed)
        f = random_function(build_grid(5), rng)
        self.assertTrue(cond_percentile_properties(f, k, 0.5).passed)

    @settings(deadline=None, max_examples=20)
    @given(seed=st.integers(0, 10_000))
    def test_norm_and_moment_bounds(self, seed):
        rng = np.random.default_rng(seed)
        f = random_function(build_grid(6), rng)
        self.assertTrue(percentile_norm_audit(f, 0.25, 1.0).passed)
        self.assertTrue(percentile_norm_audit(f, 0.5, 0.5).passed)
        self.assertTrue(percentile_moment_audit(f, 2, 0.5, 2.0).passed)

    @settings(deadline=None, max_examples=20)
    @given(seed=st.integers(0, 10_000))
    def test_doob_weak_type(self, seed):
        rng = np.random.default_rng(seed)
        f = random_function(random_grid(6, rng), rng)
        self.assertTrue(doob_weak_audit(f).passed)
