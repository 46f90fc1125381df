import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsedom.dyadic import GridFunction, StoppingTime, build_grid
from sparsedom.generators import random_function, random_grid
from sparsedom.martingale import (
    SQUARE,
    TRANSFORM,
    PredictableSigns,
    conditional_isometry_gap,
    martingale_transform,
    median_bound_audit,
    square_function,
    square_partials,
    transform_max_trunc,
    transform_partials,
)


class PredictableSignsTests(SimpleTestCase):
    def test_one_value_per_parent_cube(self):
        grid = build_grid(3)
        sigma = PredictableSigns.constant(grid)
        self.assertEqual([len(level) for level in sigma.levels], [1, 1, 2, 4])
        self.assertEqual(sigma.leaf_stack().shape, (4, 8))

    def test_wrong_level_size(self):
        grid = build_grid(2)
        with self.assertRaises(ValueError):
            PredictableSigns(grid, (np.ones(1), np.ones(2), np.ones(2)))

    def test_bound_is_enforced(self):
        grid = build_grid(1)
        with self.assertRaises(ValueError):
            PredictableSigns(grid, (np.ones(1), np.array([2.0])))

    def test_mapping_outside_the_grid(self):
        with self.assertRaises(ValueError):
            PredictableSigns.from_mapping(build_grid(2), {5: [1.0]})

    def test_rademacher_is_seeded(self):
        grid = build_grid(4)
        first = PredictableSigns.rademacher(grid, 11).leaf_stack()
        second = PredictableSigns.rademacher(grid, 11).leaf_stack()
        np.testing.assert_array_equal(first, second)
        self.assertTrue(set(np.unique(first)) <= {-1.0, 1.0})


class TransformTests(SimpleTestCase):
    def test_unit_signs_reproduce_f(self):
        rng = np.random.default_rng(5)
        f = random_function(random_grid(5, rng), rng)
        sigma = PredictableSigns.constant(f.grid)
        np.testing.assert_allclose(martingale_transform(f, sigma).values, f.values, atol=1e-9)

    def test_last_partial_is_the_transform(self):
        rng = np.random.default_rng(8)
        f = random_function(build_grid(4), rng)
        sigma = PredictableSigns.rademacher(f.grid, 2)
        partials = transform_partials(f, sigma)
        np.testing.assert_allclose(partials[-1], martingale_transform(f, sigma).values, atol=1e-9)
        self.assertTrue(np.all(transform_max_trunc(f, sigma).values >= np.abs(partials[-1]) - 1e-12))

    def test_never_stopping_gives_zero(self):
        f = GridFunction(build_grid(2), [1.0, 2.0, 3.0, 4.0])
        sigma = PredictableSigns.constant(f.grid)
        nu = StoppingTime.never(f.grid)
        np.testing.assert_array_equal(martingale_transform(f, sigma, nu).values, np.zeros(4))
        np.testing.assert_array_equal(square_function(f, nu).values, np.zeros(4))


class SquareFunctionTests(SimpleTestCase):
    @settings(deadline=None, max_examples=20)
    @given(seed=st.integers(0, 10_000))
    def test_l2_isometry(self, seed):
        rng = np.random.default_rng(seed)
        f = random_function(random_grid(5, rng), rng)
        measure = np.asarray(f.grid.leaf_measure, dtype=float)
        lhs = float(np.sum(square_function(f).values ** 2 * measure))
        rhs = float(np.sum(f.as_float() ** 2 * measure))
        self.assertAlmostEqual(lhs, rhs, delta=1e-9 * max(1.0, rhs))

    @settings(deadline=None, max_examples=20)
    @given(seed=st.integers(0, 10_000), k=st.integers(0, 4))
    def test_conditional_isometry(self, seed, k):
        rng = np.random.default_rng(seed)
        f = random_function(random_grid(4, rng), rng)
        scale = max(1.0, float(np.sum(f.as_float() ** 2)))
        self.assertLess(conditional_isometry_gap(f, k), 1e-9 * scale)

    def test_partials_increase(self):
        rng = np.random.default_rng(1)
        f = random_function(build_grid(4), rng)
        partials = square_partials(f)
        self.assertTrue(np.all(np.diff(partials, axis=0) >= -1e-12))
        np.testing.assert_allclose(partials[-1], square_function(f).values)


class MedianBoundTests(SimpleTestCase):
    @settings(deadline=None, max_examples=10)
    @given(seed=st.integers(0, 10_000))
    def test_square_function_median_bound(self, seed):
        rng = np.random.default_rng(seed)
        f = random_function(build_grid(5), rng)
        report = median_bound_audit(f, operator=SQUARE)
        self.assertTrue(report.passed, report.to_dict())

    @settings(deadline=None, max_examples=10)
    @given(seed=st.integers(0, 10_000))
    def test_transform_median_bound(self, seed):
        rng = np.random.default_rng(seed)
        f = random_function(build_grid(5), rng)
        sigma = PredictableSigns.rademacher(f.grid, seed)
        report = median_bound_audit(f, sigma, operator=TRANSFORM)
        self.assertTrue(report.passed, report.to_dict())

    def test_ratio_above_the_ceiling(self):
        f = GridFunction.constant(build_grid(2), 1.0)
        with self.assertRaises(ValueError):
            median_bound_audit(f, operator=SQUARE, r=0.5)

    def test_transform_needs_signs(self):
        f = GridFunction.constant(build_grid(2), 1.0)
        with self.assertRaises(ValueError):
            median_bound_audit(f, operator=TRANSFORM)
