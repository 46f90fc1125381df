import numpy as np
from django.test import SimpleTestCase

from sparsedom.czo import (
    OVERLAP_BOUND,
    UNITS_PER_CELL,
    CellInterval,
    czo_extract_sparse,
    doubling_audit,
    estontf_audit,
    estontf_batch,
    grand_sharp_maximal,
    hilbert_sharpness_experiment,
    mesh_doubling,
    smooth_cz_decomposition,
    whitney_bounds,
    whitney_decomposition,
)
from sparsedom.dyadic import Cube
from sparsedom.euclid import CZKernelSpec, LineFunction, LineGrid, SmoothBumpDictionary, smooth_maximal


def supported_on_middle(seed, cells=24, start=8, length=8):
    rng = np.random.default_rng(seed)
    values = np.zeros(cells)
    values[start:start + length] = rng.uniform(0.5, 2.0, size=length)
    return LineFunction(LineGrid(-1.0, 2.0, cells), values)


class CellIntervalTests(SimpleTestCase):
    def test_tripled_and_containment(self):
        interval = CellInterval(4, 2)
        self.assertEqual(interval.tripled(), CellInterval(2, 6))
        self.assertTrue(interval.tripled().contains(interval))
        self.assertFalse(interval.contains(CellInterval(5, 2)))

    def test_empty_interval(self):
        with self.assertRaises(ValueError):
            CellInterval(0, 0)

    def test_mesh_doubling(self):
        f = LineFunction(LineGrid(0.0, 1.0, 2), [1.0, 3.0])
        doubled = mesh_doubling(f)
        self.assertEqual(doubled.grid.cells, 4)
        self.assertEqual(doubled.values.tolist(), [1.0, 1.0, 3.0, 3.0])


class WhitneyTests(SimpleTestCase):
    def test_distance_bounds_and_disjointness(self):
        mask = np.zeros(12, dtype=bool)
        mask[2:10] = True
        intervals = whitney_decomposition(mask)
        self.assertTrue(intervals)
        bounds = whitney_bounds(intervals, mask)
        self.assertGreaterEqual(bounds["min_ratio"], 1.0)
        self.assertLess(bounds["max_ratio"], 3.0)
        self.assertLessEqual(bounds["overlap"], OVERLAP_BOUND)
        for left, right in zip(intervals, intervals[1:]):
            self.assertLessEqual(left.stop, right.start)

    def test_intervals_tile_every_component(self):
        mask = np.zeros(12, dtype=bool)
        mask[2:10] = True
        mask[11] = True
        intervals = whitney_decomposition(mask)
        bounds = whitney_bounds(intervals, mask)
        self.assertEqual(bounds["coverage"], 1.0)
        #Only the unit at each end of a component touches the complement
        self.assertEqual(bounds["boundary_units"], 4)
        covered = np.zeros(12 * UNITS_PER_CELL, dtype=int)
        for interval in intervals:
            covered[interval.start:interval.stop] += 1
        np.testing.assert_array_equal(covered, np.repeat(mask, UNITS_PER_CELL).astype(int))

    def test_empty_mask(self):
        self.assertEqual(whitney_decomposition(np.zeros(4, dtype=bool)), [])
        self.assertEqual(whitney_bounds([], np.zeros(4, dtype=bool))["overlap"], 0)


class CZDecompositionTests(SimpleTestCase):
    def setUp(self):
        self.f = supported_on_middle(1)
        self.dictionary = SmoothBumpDictionary(1.0, size=6)
        self.Q = CellInterval(8, 8)
        maximal = smooth_maximal(self.f, 1.0, self.dictionary, localize=(0, 24)).values
        self.threshold = 0.9 * float(maximal.max())

    def test_parts_reassemble_f(self):
        decomposition = smooth_cz_decomposition(self.f, self.Q, self.threshold, 1.0, self.dictionary)
        self.assertLess(decomposition.report.measured["reconstruction_error"], 1e-9)
        np.testing.assert_allclose(decomposition.reconstruction(), decomposition.f.values, atol=1e-9)
        for part in decomposition.parts:
            self.assertAlmostEqual(part.integral(decomposition.g.grid.h), 0.0, places=9)

    def test_threshold_below_the_maximal_function(self):
        with self.assertRaises(ValueError):
            smooth_cz_decomposition(self.f, self.Q, 0.0, 1.0, self.dictionary)

    def test_whitney_cover_of_omega(self):
        decomposition = smooth_cz_decomposition(self.f, self.Q, self.threshold, 1.0, self.dictionary)
        whitney = decomposition.report.measured["whitney"]
        self.assertEqual(whitney["coverage"], 1.0)
        self.assertLessEqual(whitney["overlap"], OVERLAP_BOUND)

    def test_good_part_is_stable_under_mesh_doubling(self):
        #On a plateau of ones the good part peaks at exactly 1 on either mesh
        values = np.zeros(24)
        values[8:16] = 1.0
        plateau = LineFunction(LineGrid(-1.0, 2.0, 24), values)
        maximal = smooth_maximal(plateau, 1.0, self.dictionary, localize=(0, 24)).values
        threshold = 0.9 * float(maximal.max())

        def good_part(f, Q):
            return smooth_cz_decomposition(f, Q, threshold, 1.0, self.dictionary).report

        coarse = good_part(plateau, self.Q)
        self.assertAlmostEqual(coarse.measured["lhs"], 1.0, places=9)
        report = doubling_audit(good_part, plateau, self.Q)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.measured["fine"], report.measured["coarse"], places=9)

    def test_single_spike(self):
        values = np.zeros(24)
        values[12] = 10.0
        spike = LineFunction(LineGrid(-1.0, 2.0, 24), values)
        maximal = smooth_maximal(spike, 1.0, self.dictionary, localize=(0, 24)).values
        decomposition = smooth_cz_decomposition(spike, self.Q, 0.9 * float(maximal.max()), 1.0, self.dictionary)
        edges = np.flatnonzero(np.diff(np.concatenate([[0], decomposition.omega.astype(int), [0]])))
        self.assertEqual(len(edges), 2)
        h = decomposition.g.grid.h
        self.assertTrue(decomposition.parts)
        for part in decomposition.parts:
            self.assertAlmostEqual(part.integral(h), 0.0, places=9)
        self.assertAlmostEqual(decomposition.g.values.sum() * h, decomposition.f.values.sum() * h, places=9)
        self.assertLessEqual(np.abs(decomposition.g.values).max(), 10.0 + 1e-9)


class SharpMaximalTests(SimpleTestCase):
    def test_interval_checks(self):
        f = supported_on_middle(2)
        with self.assertRaises(ValueError):
            grand_sharp_maximal(f, CellInterval(8, 6), CZKernelSpec.hilbert())
        with self.assertRaises(ValueError):
            grand_sharp_maximal(f, CellInterval(0, 8), CZKernelSpec.hilbert())

    def test_sharp_maximal_is_nonnegative(self):
        f = supported_on_middle(2)
        values = grand_sharp_maximal(f, CellInterval(8, 8), CZKernelSpec.hilbert()).values
        self.assertEqual(values.shape, (8,))
        self.assertTrue(np.all(values >= 0.0))


class EstimateTests(SimpleTestCase):
    def setUp(self):
        self.dictionary = SmoothBumpDictionary(1.0, size=6)
        self.kernel = CZKernelSpec.hilbert()

    def test_percentile_estimate_is_reported(self):
        report = estontf_audit(supported_on_middle(3), CellInterval(8, 8), self.kernel, dictionary=self.dictionary)
        self.assertTrue(report.passed)
        self.assertIsNone(report.proof_constant)

    def test_support_and_ratio_checks(self):
        f = supported_on_middle(3, start=0)
        with self.assertRaises(ValueError):
            estontf_audit(f, CellInterval(12, 4), self.kernel, dictionary=self.dictionary)
        with self.assertRaises(ValueError):
            estontf_audit(supported_on_middle(3), CellInterval(8, 8), self.kernel, r=0.75)

    def test_batch_keeps_the_worst_constant(self):
        pairs = [(supported_on_middle(seed), CellInterval(8, 8)) for seed in range(3)]
        merged = estontf_batch(pairs, self.kernel)
        self.assertEqual(merged.measured["merged"], 3)

    def test_doubling_audit_compares_two_meshes(self):
        report = doubling_audit(
            estontf_audit, supported_on_middle(4), CellInterval(8, 8), kernel=self.kernel, dictionary=self.dictionary,
        )
        self.assertEqual(report.inequality_id, "estontf-doubling")
        self.assertIn("coarse", report.measured)
        self.assertIn("fine", report.measured)


class CZOExtractionTests(SimpleTestCase):
    def test_zero_function(self):
        f = LineFunction(LineGrid(-1.0, 2.0, 24), np.zeros(24))
        extraction = czo_extract_sparse(f, CZKernelSpec.hilbert(), CellInterval(8, 8), dictionary=SmoothBumpDictionary(1.0, size=6))
        self.assertEqual(len(extraction.family), 0)
        self.assertTrue(extraction.domination.passed)

    def test_random_function(self):
        extraction = czo_extract_sparse(
            supported_on_middle(5), CZKernelSpec.hilbert(), CellInterval(8, 8), dictionary=SmoothBumpDictionary(1.0, size=6),
        )
        self.assertIn(Cube(0, 0), extraction.bounds)
        self.assertTrue(extraction.domination.passed)

    def test_support_and_size_checks(self):
        with self.assertRaises(ValueError):
            czo_extract_sparse(supported_on_middle(5, start=0), CZKernelSpec.hilbert(), CellInterval(8, 8))
        with self.assertRaises(ValueError):
            czo_extract_sparse(supported_on_middle(5), CZKernelSpec.hilbert(), CellInterval(8, 6))


class HilbertSharpnessTests(SimpleTestCase):
    def test_smoothness_floor(self):
        with self.assertRaises(ValueError):
            hilbert_sharpness_experiment(0.5, 1.0, [0.5, 0.25])
