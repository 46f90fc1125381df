import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsedom.dyadic import Cube, GridFunction, build_grid
from sparsedom.generators import random_uniform
from sparsedom.haar import HaarShiftSpec
from sparsedom.sparse import SparseFamily
from sparsedom.weights import (
    ALL_INTERVALS,
    DYADIC,
    Weight,
    ainf_characteristic,
    aq_characteristic,
    flat_bump_sharpness,
    power_aq,
    power_chain_sharpness,
    rdq_audit,
    weighted_haar_shift_audit,
    weighted_norm,
    weighted_sparse_experiment,
)


class WeightTests(SimpleTestCase):
    def test_invalid_weights(self):
        with self.assertRaises(ValueError):
            Weight("gaussian")
        with self.assertRaises(ValueError):
            Weight.power(0.0)
        with self.assertRaises(ValueError):
            Weight.constant(-1.0)
        with self.assertRaises(ValueError):
            Weight.from_grid([1.0, 2.0, 3.0])
        with self.assertRaises(ValueError):
            Weight.from_grid([1.0, -2.0])
        with self.assertRaises(ValueError):
            Weight.flat_bump(0.5, (0.5, 0.25))

    def test_dict_round_trip(self):
        weight = Weight.flat_bump(0.25, (0.0, 0.5)).scaled(2.0)
        self.assertEqual(Weight.from_dict(weight.to_dict()), weight)
        grid_weight = Weight.from_grid([1.0, 2.0, 3.0, 4.0])
        self.assertEqual(grid_weight.to_dict(), {"grid": 2, "values": [1.0, 2.0, 3.0, 4.0]})
        with self.assertRaises(ValueError):
            Weight.from_dict({"grid": 3, "values": [1.0, 2.0]})

    def test_power_weight_has_unit_mass(self):
        weight = Weight.power(0.25)
        self.assertAlmostEqual(float(weight.cell_masses(6).sum()), 1.0)
        self.assertAlmostEqual(float(weight.primitive(1.0)), 1.0)

    def test_flat_bump_primitive(self):
        self.assertAlmostEqual(float(Weight.flat_bump(0.5).primitive(1.0)), 0.75)

    def test_grid_weight_limits(self):
        weight = Weight.from_grid([1.0, 2.0, 3.0, 4.0])
        with self.assertRaises(ValueError):
            weight.cell_masses(1)
        with self.assertRaises(ValueError):
            weight.dual_primitive(0.5, 2.0)
        np.testing.assert_allclose(weight.cell_masses(3), np.repeat([1.0, 2.0, 3.0, 4.0], 2) / 8)


class CharacteristicTests(SimpleTestCase):
    def test_constant_weight(self):
        weight = Weight.constant(3.0)
        self.assertAlmostEqual(aq_characteristic(weight, 2.0, DYADIC, 6), 1.0)
        self.assertAlmostEqual(aq_characteristic(weight, 3.0, ALL_INTERVALS, 5), 1.0)
        self.assertAlmostEqual(ainf_characteristic(weight, 6), 1.0)

    def test_power_weight_matches_the_closed_form(self):
        self.assertAlmostEqual(power_aq(0.5, 2.0), 4.0 / 3.0)
        self.assertAlmostEqual(aq_characteristic(Weight.power(0.5), 2.0, DYADIC, 8), 4.0 / 3.0, places=9)

    def test_all_intervals_bound_the_dyadic_supremum(self):
        weight = Weight.from_grid([1.0, 8.0, 2.0, 0.5])
        self.assertGreaterEqual(
            aq_characteristic(weight, 2.0, ALL_INTERVALS, 4), aq_characteristic(weight, 2.0, DYADIC, 4),
        )

    def test_exponent_and_family_checks(self):
        with self.assertRaises(ValueError):
            aq_characteristic(Weight.constant(), 1.0)
        with self.assertRaises(ValueError):
            aq_characteristic(Weight.constant(), 2.0, "balls")

    def test_weighted_norm_of_a_constant_weight(self):
        self.assertAlmostEqual(weighted_norm(np.full(8, 2.0), Weight.constant(), 2.0), 2.0)
        with self.assertRaises(ValueError):
            weighted_norm(np.ones(3), Weight.constant(), 2.0)

    @settings(deadline=None, max_examples=10)
    @given(seed=st.integers(0, 10_000), eps=st.sampled_from([0.5, 0.25, 0.125]))
    def test_reverse_doubling_bound(self, seed, eps):
        report = rdq_audit(Weight.power(eps), 2.0, np.random.default_rng(seed), pairs=50, depth=6)
        self.assertTrue(report.passed, report.to_dict())


class WeightedSparseTests(SimpleTestCase):
    def test_proof_chain_on_the_root(self):
        rng = np.random.default_rng(1)
        f = random_uniform(build_grid(6), rng)
        family = SparseFamily.from_cubes(f.grid, [Cube(0, 0)], eta=0.75)
        report = weighted_sparse_experiment(family, f, Weight.constant(), 2.0, 2.0, 0.5, 2.0)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.proof_constant, 64.0)
        self.assertIn("chain_lhs", report.measured)

    def test_reported_only_when_exponents_differ(self):
        f = GridFunction.constant(build_grid(3), 1.0)
        family = SparseFamily.from_cubes(f.grid, [Cube(0, 0)], eta=0.75)
        report = weighted_sparse_experiment(family, f, Weight.power(0.5), 2.0, 1.0, 0.5, 2.0)
        self.assertIsNone(report.proof_constant)
        self.assertTrue(report.passed)

    def test_invalid_exponents(self):
        f = GridFunction.constant(build_grid(2), 1.0)
        family = SparseFamily.from_cubes(f.grid, [Cube(0, 0)])
        with self.assertRaises(ValueError):
            weighted_sparse_experiment(family, f, Weight.constant(), 0.0, 1.0, 0.5, 2.0)


class SharpnessTests(SimpleTestCase):
    EPS = [2.0 ** -k for k in range(3, 7)]

    def test_flat_bump_growth(self):
        result = flat_bump_sharpness(2.0, 0.25, 2.0, self.EPS, depth=8)
        self.assertEqual(len(result.points), 4)
        self.assertTrue(result.report.passed, result.report.to_dict())
        self.assertAlmostEqual(result.report.measured["target"], 0.5)

    def test_flat_bump_needs_a_small_ratio(self):
        with self.assertRaises(ValueError):
            flat_bump_sharpness(2.0, 0.5, 2.0, self.EPS)

    def test_power_chain_growth(self):
        result = power_chain_sharpness(2.0, 2.0, 2.0, [2.0 ** -k for k in range(4, 9)])
        self.assertTrue(result.report.passed, result.report.to_dict())
        ratios = [point.ratio for point in result.points]
        self.assertEqual(ratios, sorted(ratios))

    def test_power_chain_matches_the_sparse_sum_on_a_grid(self):
        #Ring sums in closed form against the chain [0, 2^-k) summed cell by cell
        grid = build_grid(12)
        f = GridFunction.constant(grid, 1.0)
        chain = SparseFamily.from_cubes(grid, [Cube(k, 0) for k in range(grid.depth + 1)], eta=0.5)
        for eps in (1.0, 0.5):
            point = power_chain_sharpness(2.0, 2.0, 2.0, [eps]).points[0]
            report = weighted_sparse_experiment(chain, f, Weight.power(eps), 2.0, 2.0, 0.5, 2.0)
            self.assertAlmostEqual(report.measured["rhs"], point.rhs, places=9)
            self.assertLess(abs(report.measured["lhs"] - point.lhs) / point.lhs, 0.02)

    def test_haar_shift_growth_is_bounded(self):
        report = weighted_haar_shift_audit(HaarShiftSpec.identity(6), 2.0, 2.0, self.EPS, depth=6, seed=0)
        self.assertTrue(report.passed, report.to_dict())
