import numpy as np
from django.core.cache import cache
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsedom.dyadic import Cube, GridFunction, build_grid
from sparsedom.generators import random_function, random_grid
from sparsedom.haar import (
    HaarShiftSpec,
    apply_shift,
    complexity_constant,
    enlarge,
    haar_coefficients,
    haar_expand,
    haar_function,
    haar_synthesize,
    local_median_audit,
    maximal_subcubes,
    measure_shift_norms,
    shift_max_trunc,
)


class HaarBasisTests(SimpleTestCase):
    def test_synthesis_inverts_the_coefficients(self):
        rng = np.random.default_rng(4)
        f = random_function(build_grid(5), rng)
        rebuilt = haar_synthesize(f.grid, haar_coefficients(f), f.mean())
        np.testing.assert_allclose(rebuilt.values, f.values, atol=1e-9)

    def test_expansion_is_keyed_by_cube(self):
        f = GridFunction(build_grid(1), [3.0, 1.0])
        self.assertEqual(haar_expand(f), {Cube(0, 0): 1.0})
        self.assertEqual(len(haar_expand(GridFunction.constant(build_grid(3), 1.0))), 7)

    def test_haar_function_is_normalized(self):
        grid = build_grid(3)
        h = haar_function(grid, Cube(1, 1)).values
        self.assertAlmostEqual(float(np.sum(h ** 2) / grid.leaf_count), 1.0)
        self.assertEqual(float(h.sum()), 0.0)
        with self.assertRaises(ValueError):
            haar_function(grid, Cube(3, 0))

    def test_non_uniform_grid_is_rejected(self):
        rng = np.random.default_rng(0)
        grid = random_grid(3, rng)
        with self.assertRaises(ValueError):
            haar_coefficients(GridFunction.constant(grid, 1.0))


class HaarShiftSpecTests(SimpleTestCase):
    def test_identity_removes_the_mean(self):
        rng = np.random.default_rng(9)
        f = random_function(build_grid(4), rng)
        spec = HaarShiftSpec.identity(4)
        np.testing.assert_allclose(apply_shift(f, spec).values, f.values - f.mean(), atol=1e-9)
        self.assertEqual(spec.block_norm(), 1.0)

    def test_invalid_generation(self):
        with self.assertRaises(ValueError):
            HaarShiftSpec(0, 1, {(Cube(0, 0), Cube(0, 0), Cube(2, 0)): 1.0})
        with self.assertRaises(ValueError):
            HaarShiftSpec(-1, 0)

    def test_spec_deeper_than_the_grid(self):
        with self.assertRaises(ValueError):
            HaarShiftSpec.identity(4).check_grid(build_grid(3))

    def test_transpose_swaps_complexity(self):
        spec = HaarShiftSpec.random(4, 1, 2, seed=3)
        self.assertEqual((spec.transpose().t, spec.transpose().s), (2, 1))
        self.assertAlmostEqual(spec.transpose().block_norm(), spec.block_norm())

    def test_complexity_constant(self):
        self.assertEqual(complexity_constant(HaarShiftSpec(0, 0)), 4)
        self.assertEqual(complexity_constant(HaarShiftSpec(1, 2)), 82)

    def test_maximal_truncation_dominates_the_shift(self):
        rng = np.random.default_rng(12)
        f = random_function(build_grid(5), rng)
        spec = HaarShiftSpec.random(5, 0, 1, seed=12)
        self.assertTrue(np.all(shift_max_trunc(f, spec).values >= np.abs(apply_shift(f, spec).values) - 1e-9))


@override_settings(SPARSEDOM_POWER_ITERATIONS=30)
class ShiftNormTests(SimpleTestCase):
    def setUp(self):
        cache.clear()

    def test_power_estimate_stays_below_the_block_norm(self):
        spec = HaarShiftSpec.random(5, 1, 0, seed=1)
        norms = measure_shift_norms(spec, build_grid(5))
        self.assertEqual(norms["iterations"], 30)
        self.assertLessEqual(max(norms["linear"]), norms["block_norm"] * (1 + 1e-9))

    def test_norms_are_cached(self):
        spec = HaarShiftSpec.random(4, 0, 0, seed=2)
        first = measure_shift_norms(spec, build_grid(4))
        self.assertEqual(cache.get(f"haar_norms:{spec.fingerprint}:4:30"), first)

    @settings(deadline=None, max_examples=5)
    @given(seed=st.integers(0, 1_000))
    def test_local_median_estimate(self, seed):
        rng = np.random.default_rng(seed)
        f = random_function(build_grid(5), rng)
        report = local_median_audit(f, HaarShiftSpec.random(5, 0, 1, seed=seed))
        self.assertTrue(report.passed, report.to_dict())

    def test_ratio_must_stay_below_the_complexity_bound(self):
        f = GridFunction.constant(build_grid(3), 1.0)
        with self.assertRaises(ValueError):
            local_median_audit(f, HaarShiftSpec.identity(3), r=0.25)


class EnlargementTests(SimpleTestCase):
    def test_half_filled_root_enlarges_to_the_root(self):
        grid = build_grid(3)
        mask = np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=bool)
        self.assertTrue(enlarge(mask, Cube(0, 0), 1, grid).all())
        np.testing.assert_array_equal(enlarge(mask, Cube(0, 0), 0, grid), mask)

    def test_maximal_subcubes(self):
        mask = np.array([1, 1, 1, 1, 0, 0, 1, 0], dtype=bool)
        self.assertEqual(maximal_subcubes(mask, Cube(0, 0)), [Cube(1, 0), Cube(3, 6)])
        self.assertEqual(maximal_subcubes(np.zeros(4, dtype=bool), Cube(2, 1)), [])
