import math

import numpy as np
from django.test import SimpleTestCase

from sparsedom.euclid import (
    CZKernelSpec,
    LineFunction,
    LineGrid,
    SmoothBumpDictionary,
    alternating_function,
    alternating_indicator,
    cutoff,
    hilbert_at,
    hilbert_transform,
    moments,
    smooth_maximal,
    smooth_step,
)


class LineGridTests(SimpleTestCase):
    def test_geometry(self):
        grid = LineGrid(0.0, 1.0, 4)
        self.assertEqual(grid.h, 0.25)
        np.testing.assert_allclose(grid.midpoints, [0.125, 0.375, 0.625, 0.875])
        self.assertEqual(grid.cell_of(0.5), 2)
        self.assertEqual(grid.refined().cells, 8)
        with self.assertRaises(ValueError):
            grid.cell_of(1.0)

    def test_invalid_grids(self):
        with self.assertRaises(ValueError):
            LineGrid(0.0, 1.0, 1)
        with self.assertRaises(ValueError):
            LineGrid(1.0, 1.0, 4)

    def test_function_checks(self):
        grid = LineGrid(0.0, 1.0, 2)
        with self.assertRaises(ValueError):
            LineFunction(grid, [1.0])
        with self.assertRaises(ValueError):
            LineFunction(grid, [1.0, math.nan])
        np.testing.assert_array_equal(LineFunction(grid, [1.0, 1.0]).jumps(), [1.0, 0.0, -1.0])


class KernelTests(SimpleTestCase):
    def test_hilbert_of_an_indicator(self):
        f = LineFunction(LineGrid(0.0, 1.0, 2), [1.0, 1.0])
        self.assertAlmostEqual(float(hilbert_at(f, 2.0)[0]), math.log(2.0))
        self.assertAlmostEqual(float(hilbert_at(f, 0.5)[0]), 0.0)

    def test_transform_at_midpoints(self):
        f = LineFunction(LineGrid(0.0, 1.0, 2), [1.0, 1.0])
        np.testing.assert_allclose(hilbert_transform(f).values, [-math.log(3.0), math.log(3.0)])

    def test_principal_value_at_a_jump(self):
        f = LineFunction(LineGrid(0.0, 1.0, 2), [1.0, 1.0])
        with self.assertRaises(ValueError):
            hilbert_at(f, 0.0)

    def test_kernel_spec_checks(self):
        with self.assertRaises(ValueError):
            CZKernelSpec("riesz")
        with self.assertRaises(ValueError):
            CZKernelSpec.hilbert(s=0.0)
        with self.assertRaises(ValueError):
            CZKernelSpec(tau=0.5)
        with self.assertRaises(ValueError):
            CZKernelSpec.smoothed_power(0.0)

    def test_dict_round_trip(self):
        kernel = CZKernelSpec.smoothed_power(0.25, s=1.5)
        self.assertEqual(CZKernelSpec.from_dict(kernel.to_dict()), kernel)
        self.assertEqual(kernel.order, (1, 0.5))

    def test_hilbert_constant(self):
        self.assertAlmostEqual(CZKernelSpec.hilbert().validate(), 2.0, places=9)
        with self.assertRaises(ValueError):
            CZKernelSpec(constant=1.0).validate()


class CutoffTests(SimpleTestCase):
    def test_smooth_step(self):
        np.testing.assert_allclose(smooth_step([-1.0, 0.0, 0.5, 1.0, 2.0]), [0.0, 0.0, 0.5, 1.0, 1.0])

    def test_step_is_flat_at_both_ends(self):
        t = np.array([0.01, 0.02, 0.05])
        self.assertTrue(np.all(smooth_step(t) < 1e-8))
        np.testing.assert_allclose(smooth_step(t) + smooth_step(1.0 - t), 1.0)
        np.testing.assert_allclose(smooth_step(1.0 - t), 1.0, atol=1e-8)

    def test_cutoff_profile(self):
        np.testing.assert_allclose(cutoff([0.0, 0.5, -0.5, 0.6, 1.0]), [1.0, 1.0, 1.0, 0.0, 0.0])
        values = cutoff(np.linspace(-1.0, 1.0, 101))
        self.assertTrue(np.all((values >= 0.0) & (values <= 1.0)))


class DictionaryTests(SimpleTestCase):
    def test_members_respect_their_bounds(self):
        dictionary = SmoothBumpDictionary(1.0, size=8)
        self.assertTrue(dictionary.check().passed)

    def test_dictionaries_are_nested(self):
        small = SmoothBumpDictionary(0.5, size=4)
        large = SmoothBumpDictionary(0.5, size=8)
        points = np.linspace(0.0, 1.0, 33)
        np.testing.assert_allclose(large.evaluate(points)[:4], small.evaluate(points))

    def test_invalid_dictionaries(self):
        with self.assertRaises(ValueError):
            SmoothBumpDictionary(-1.0)
        with self.assertRaises(ValueError):
            SmoothBumpDictionary(1.0, size=0)
        with self.assertRaises(ValueError):
            SmoothBumpDictionary(1.0, size=10_000)


class SmoothMaximalTests(SimpleTestCase):
    def test_rough_maximal_of_a_constant(self):
        f = LineFunction(LineGrid(0.0, 1.0, 16), np.full(16, -3.0))
        np.testing.assert_allclose(smooth_maximal(f, 0.0).values, 3.0)

    def test_localization(self):
        f = LineFunction(LineGrid(0.0, 1.0, 16), np.ones(16))
        values = smooth_maximal(f, 0.0, localize=(4, 12)).values
        self.assertEqual(float(values[:4].sum() + values[12:].sum()), 0.0)
        with self.assertRaises(ValueError):
            smooth_maximal(f, 0.0, localize=(8, 20))

    def test_dictionary_smoothness_must_match(self):
        f = LineFunction(LineGrid(0.0, 1.0, 8), np.ones(8))
        with self.assertRaises(ValueError):
            smooth_maximal(f, 1.0, SmoothBumpDictionary(0.5, size=4))

    def test_larger_dictionaries_never_lower_the_maximal_function(self):
        rng = np.random.default_rng(3)
        f = LineFunction(LineGrid(0.0, 1.0, 32), rng.standard_normal(32))
        small = smooth_maximal(f, 1.0, SmoothBumpDictionary(1.0, size=4)).values
        large = smooth_maximal(f, 1.0, SmoothBumpDictionary(1.0, size=12)).values
        self.assertTrue(np.all(large >= small - 1e-12))


class AlternatingFunctionTests(SimpleTestCase):
    def test_binomial_coefficients(self):
        np.testing.assert_array_equal(alternating_indicator(1), [1.0, -2.0, 1.0])
        with self.assertRaises(ValueError):
            alternating_indicator(-1)

    def test_vanishing_moments(self):
        self.assertEqual(moments(1), [0.0, 0.0])
        self.assertEqual(moments(1, up_to=2)[2], 2.0)

    def test_sampled_on_a_grid(self):
        f = alternating_function(LineGrid(-1.0, 4.0, 10), 1)
        self.assertEqual(f.values.tolist(), [0.0, 0.0, 1.0, 1.0, -2.0, -2.0, 1.0, 1.0, 0.0, 0.0])
