import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgeom.curves import PlanarCurve
from qgeom.errors import (
    ChartSingular,
    DeltaTooLarge,
    FoldOver,
    GridTooCoarse,
    UnsupportedScheme,
)
from qgeom.potentials import SchemeId
from qgeom.spectral import (
    AnnulusProblem,
    TubeProblem,
    annulus_spectrum,
    area_ratio,
    area_ratio_expansion,
    curve_effective_spectrum,
    delta_sweep,
    harmonic_multiplicity,
    sphere_shift,
    sphere_spectrum,
    transverse_energy,
    tube_band_spectrum,
    _tube_operator,
)


def aitken(values):
    d1, d2 = values[1] - values[0], values[2] - values[1]
    return values[2] - d2 * d2 / (d2 - d1)


CIRCLE = PlanarCurve.circle(1.0)


class TestSphereSpectrum:
    def test_circle_podolsky_ladder(self):
        spec = sphere_spectrum(2, 1.0, SchemeId.podolsky, 2)
        assert np.allclose(spec.eigenvalues, [0.0, 0.5, 0.5, 2.0, 2.0])

    def test_circle_thin_layer_shift(self):
        spec = sphere_spectrum(2, 1.0, SchemeId.thin_layer, 2)
        assert np.allclose(spec.eigenvalues,
                           [-0.125, 0.375, 0.375, 1.875, 1.875])

    def test_s2_dirac_distance(self):
        spec = sphere_spectrum(3, 1.0, SchemeId.dirac_distance, 2)
        expected = [l * (l + 1) / 2 + 0.5 for l in (0, 1, 1, 1, 2, 2, 2, 2, 2)]
        assert np.allclose(spec.eigenvalues, expected)

    def test_multiplicities(self):
        assert [harmonic_multiplicity(l, 2) for l in range(4)] == [1, 2, 2, 2]
        assert [harmonic_multiplicity(l, 3) for l in range(4)] == [1, 3, 5, 7]
        assert [harmonic_multiplicity(l, 4) for l in range(4)] == [1, 4, 9, 16]

    def test_shift_identities(self):
        for n, R in ((2, 1.0), (3, 0.5), (4, 2.0)):
            assert sphere_shift(SchemeId.thin_layer, 3, R) == 0.0  # da Costa zero
            gap = sphere_shift(SchemeId.dirac_distance, n, R) \
                - sphere_shift(SchemeId.podolsky, n, R)
            assert gap == (n - 1) ** 2 / (8 * R * R)

    def test_unsupported_scheme(self):
        with pytest.raises(UnsupportedScheme):
            sphere_spectrum(3, 1.0, SchemeId.flat_bundle, 2)


class TestCurveEffective:
    def test_circle_curve_scheme(self):
        spec = curve_effective_spectrum(CIRCLE, SchemeId.curve, 512, 7)
        target = sorted(m * m / 2 - 0.125 for m in range(-3, 4))
        assert np.max(np.abs(spec.eigenvalues - target)) <= 1e-3

    def test_circle_podolsky(self):
        spec = curve_effective_spectrum(CIRCLE, SchemeId.podolsky, 512, 7)
        target = sorted(m * m / 2 for m in range(-3, 4))
        assert np.max(np.abs(spec.eigenvalues - target)) <= 1e-3

    def test_grid_doubling_second_order(self):
        e = PlanarCurve.ellipse(1.0, 0.6)
        values = [curve_effective_spectrum(e, SchemeId.curve, n, 3).eigenvalues[2]
                  for n in (128, 256, 512)]
        order = math.log2(abs(values[1] - values[0]) / abs(values[2] - values[1]))
        assert 1.8 <= order <= 2.2

    def test_too_coarse(self):
        with pytest.raises(GridTooCoarse):
            curve_effective_spectrum(CIRCLE, SchemeId.curve, 8, 2)

    def test_unsupported_scheme(self):
        with pytest.raises(UnsupportedScheme):
            curve_effective_spectrum(CIRCLE, SchemeId.thin_layer, 64, 2)


class TestAnnulus:
    def test_m0_and_m2_near_thin_layer_targets(self):
        spec = annulus_spectrum(1.0, 0.05, 2, 5000)
        sub = spec.subtracted
        assert abs(sub[0] + 0.125) <= 5e-3
        assert abs(sub[2] - 1.875) <= 2e-2

    def test_monotone_approach(self):
        devs = []
        for delta in (0.1, 0.05, 0.025):
            spec = annulus_spectrum(1.0, delta, 1, max(2000, int(250 / delta)))
            devs.append(abs(spec.subtracted[1] - 0.375))
        assert devs[0] > devs[1] > devs[2]

    def test_numerical_transverse_diagnostic(self):
        spec = annulus_spectrum(1.0, 0.05, 0, 4000)
        assert abs(spec.meta["transverse_energy_fd"]
                   - spec.meta["transverse_energy"]) <= 1e-3

    def test_delta_too_large(self):
        with pytest.raises(DeltaTooLarge):
            annulus_spectrum(1.0, 1.5, 1, 100)


class TestTube:
    def test_operator_exactly_symmetric(self):
        K, M = _tube_operator(PlanarCurve.ellipse(1.0, 0.6), 0.05, 32, 16)
        asym = abs(K - K.T).max()
        assert asym <= 1e-12

    def test_ground_state_sign_definite(self):
        spec = tube_band_spectrum(CIRCLE, 0.05, 32, 40, 1, return_vectors=True)
        v = spec.meta["vectors"][:, 0]
        v = v[np.abs(v) > 1e-9 * np.abs(v).max()]
        assert (v > 0).all() or (v < 0).all()

    def test_matches_annulus_across_coordinates(self):
        # same operator in polar vs tube coordinates; both grid-converged
        tube = aitken([tube_band_spectrum(CIRCLE, 0.05, 16, g, 1).eigenvalues[0]
                       for g in (200, 400, 800)])
        ann = aitken([annulus_spectrum(1.0, 0.05, 0, g).eigenvalues[0]
                      for g in (2000, 4000, 8000)])
        assert abs(tube - ann) <= 1e-6

    def test_orientation_flip_invariance(self):
        fwd = tube_band_spectrum(CIRCLE, 0.1, 32, 48, 3).eigenvalues
        rev = tube_band_spectrum(CIRCLE.reversed(), 0.1, 32, 48, 3).eigenvalues
        assert np.max(np.abs(fwd - rev)) <= 1e-10 * np.max(np.abs(fwd))

    def test_large_radius_limit(self):
        c = PlanarCurve.circle(50.0)
        values = [tube_band_spectrum(c, 0.02, 16, g, 1).subtracted[0]
                  for g in (200, 400, 800)]
        limit = aitken(values)
        assert abs(limit + 1.0 / (8 * 50.0 ** 2)) <= 1e-5

    def test_chart_singular(self):
        with pytest.raises(ChartSingular):
            tube_band_spectrum(PlanarCurve.ellipse(1.0, 0.6), 0.5, 32, 16, 1)

    def test_grid_doubling_second_order(self):
        e = PlanarCurve.ellipse(1.0, 0.6)
        values = [tube_band_spectrum(e, 0.05, 64, g, 1).eigenvalues[0]
                  for g in (40, 80, 160)]
        order = math.log2(abs(values[1] - values[0]) / abs(values[2] - values[1]))
        assert order >= 1.8


class TestAreaRatio:
    def test_two_equal_curvatures_exact_at_second_order(self):
        assert abs(area_ratio([1, 1], 0.1) - 1.21) <= 1e-15
        assert abs(area_ratio_expansion([1, 1], 0.1) - 1.21) <= 1e-15

    def test_single_factor(self):
        assert abs(area_ratio([2], 0.1) - 1.2) <= 1e-15
        assert abs(area_ratio_expansion([2], 0.1) - 1.2) <= 1e-15

    def test_third_order_gap(self):
        value = area_ratio([1, 2, 3], 0.1)
        expansion = area_ratio_expansion([1, 2, 3], 0.1)
        assert abs(value - 1.716) <= 1e-15
        assert abs(expansion - 1.71) <= 1e-15
        assert abs(value - expansion - 0.006) <= 1e-15

    def test_fold_over(self):
        with pytest.raises(FoldOver):
            area_ratio([-3.0, 1.0], 0.5)

    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=5),
           st.floats(0.001, 0.2))
    @settings(max_examples=60, deadline=None)
    def test_expansion_error_is_cubic(self, k, eps):
        if any(1 + eps * ki <= 0 for ki in k):
            return
        gap = abs(area_ratio(k, eps) - area_ratio_expansion(k, eps))
        bound = 20.0 * (eps * max(1.0, max(abs(v) for v in k))) ** 3
        assert gap <= bound + 1e-12


class TestDeltaSweep:
    def test_annulus_sweep_extrapolates_to_targets(self):
        problem = AnnulusProblem(R=1.0, modes=(0, 1))
        sweep = delta_sweep(problem, [0.1, 0.05, 0.025])
        targets = problem.targets()
        for entry, target in zip(sweep.entries, targets):
            assert abs(entry.extrapolated - target) <= 1e-3
            assert 0.8 <= entry.rate <= 2.2
            devs = np.abs(entry.values - target)
            assert np.all(np.diff(devs) < 0)

    def test_podolsky_control_gap_persists(self):
        problem = AnnulusProblem(R=1.0, modes=(0, 1))
        sweep = delta_sweep(problem, [0.1, 0.05, 0.025])
        for entry in sweep.entries:
            gap = abs(entry.extrapolated - entry.label ** 2 / 2.0)
            assert abs(gap - 0.125) <= 0.01

    def test_m1_limit_value(self):
        problem = AnnulusProblem(R=1.0, modes=(1,))
        sweep = delta_sweep(problem, [0.1, 0.05, 0.025])
        assert abs(sweep.entries[0].extrapolated - 0.375) <= 1e-3
