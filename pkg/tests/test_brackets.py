import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgeom.brackets import (
    ConstraintSet,
    Observable,
    PhasePoint,
    constraints_from_surface,
    coordinate_observable,
    dirac_bracket,
    dirac_bracket_expr,
    momentum_observable,
    poisson,
    second_class_check,
    selfadjoint_correction,
)
from qgeom.errors import OddConstraintCount, SingularConstraintMatrix
from qgeom.geometry import SurfaceSpec, sample_on_surface

small = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False,
                  allow_infinity=False)


def sphere_surface(n=2, R=1.0):
    coords = ["x", "y", "z", "w"][:n]
    src = "+".join(f"{c}^2" for c in coords) + f"-{R * R!r}"
    return SurfaceSpec.from_sources(src, coords)


def tangent_phase_point(s, x, rng):
    """On-surface x with p orthogonal to grad f."""
    g = s.gradient(x)
    p = rng.normal(size=len(x))
    p -= (p @ g) / (g @ g) * g
    return PhasePoint(x, p)


class TestPoisson:
    def test_canonical_pairs(self):
        z = PhasePoint([0.3, -0.7], [1.1, 0.2])
        assert poisson(coordinate_observable(0, 2), momentum_observable(0, 2), z) == 1.0
        assert poisson(coordinate_observable(0, 2), coordinate_observable(1, 2), z) == 0.0

    def test_sphere_constraint_bracket(self):
        A = Observable.from_source("x1^2+x2^2", 2)
        B = Observable.from_source("x1*p1+x2*p2", 2)
        z = PhasePoint([1, 0], [0.4, -0.9])
        assert poisson(A, B, z) == 2.0  # 2 |x|^2 at |x| = 1


class TestConstraintsFromSurface:
    def test_sphere_secondary(self):
        C = constraints_from_surface(sphere_surface(3))
        z = PhasePoint([0.2, 0.3, 0.4], [1.0, -1.0, 2.0])
        # grad f . p with f = |x|^2 - 1 is 2 x.p
        assert abs(C.constraints[1](z) - 2 * (0.2 - 0.3 + 0.8)) < 1e-14

    def test_plane_secondary_is_normal_momentum(self):
        s = SurfaceSpec.from_sources("z", ["x", "y", "z"])
        C = constraints_from_surface(s)
        z = PhasePoint([1.0, 2.0, 0.0], [5.0, 6.0, 7.0])
        assert C.constraints[1](z) == 7.0

    def test_parabola_secondary(self):
        s = SurfaceSpec.from_sources("y-x^2/2+1", ["x", "y"])
        C = constraints_from_surface(s)
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = rng.normal(size=2)
            p = rng.normal(size=2)
            got = C.constraints[1](PhasePoint(x, p))
            assert abs(got - (-x[0] * p[0] + p[1])) < 1e-12


class TestSecondClassCheck:
    def test_sphere_paper_normalization(self):
        phi1 = Observable.from_source("x1^2+x2^2-1", 2)
        phi2 = Observable.from_source("x1*p1+x2*p2", 2)
        mat, det, flag = second_class_check(ConstraintSet((phi1, phi2)),
                                            PhasePoint([1, 0], [0, 1]))
        assert mat[0, 1] == 2.0
        assert det == 4.0
        assert flag

    def test_duplicated_constraint_degenerate(self):
        phi1 = Observable.from_source("x1^2+x2^2-1", 2)
        phi2 = Observable.from_source("2*x1^2+2*x2^2-2", 2)
        _, det, flag = second_class_check(ConstraintSet((phi1, phi2)),
                                          PhasePoint([1, 0], [0, 1]))
        assert det == 0.0
        assert not flag

    def test_parabola_on_surface(self):
        C = constraints_from_surface(
            SurfaceSpec.from_sources("y-x^2/2+1", ["x", "y"]))
        mat, det, flag = second_class_check(C, PhasePoint([0, -1], [0.3, 0.7]))
        assert abs(mat[0, 1] - 1.0) < 1e-14  # (grad f)^2 = 1 at the vertex
        assert abs(det - 1.0) < 1e-14
        assert flag

    def test_odd_count_rejected(self):
        phi = Observable.from_source("x1", 1)
        with pytest.raises(OddConstraintCount):
            second_class_check(ConstraintSet((phi,)), PhasePoint([1.0], [0.0]))


class TestDiracBracketSphere:
    def setup_method(self):
        self.C = constraints_from_surface(sphere_surface(2))
        self.z = PhasePoint([1, 0], [0, 1])

    def test_xx_vanishes(self):
        for i in range(2):
            for j in range(2):
                v = dirac_bracket(coordinate_observable(i, 2),
                                  coordinate_observable(j, 2), self.C, self.z)
                assert abs(v) <= 1e-14

    def test_xp_projector(self):
        expected = np.array([[0.0, 0.0], [0.0, 1.0]])
        for i in range(2):
            for j in range(2):
                v = dirac_bracket(coordinate_observable(i, 2),
                                  momentum_observable(j, 2), self.C, self.z)
                assert abs(v - expected[i, j]) <= 1e-12

    def test_pp_angular(self):
        v = dirac_bracket(momentum_observable(0, 2), momentum_observable(1, 2),
                          self.C, self.z)
        assert abs(v + 1.0) <= 1e-12

    def test_singular_matrix_raises(self):
        phi1 = Observable.from_source("x1^2+x2^2-1", 2)
        C = ConstraintSet((phi1, phi1))
        with pytest.raises(SingularConstraintMatrix):
            dirac_bracket(coordinate_observable(0, 2),
                          momentum_observable(0, 2), C, self.z)


class TestDiracBracketGeneralSurface:
    def test_xp_matches_normal_projector(self):
        s = SurfaceSpec.from_sources("y-x^2/2+1", ["x", "y"])
        C = constraints_from_surface(s)
        rng = np.random.default_rng(8)
        for point in sample_on_surface(s, 20, seed=15):
            g = s.gradient(point)
            n = g / np.linalg.norm(g)
            z = PhasePoint(point, rng.normal(size=2))
            for i in range(2):
                for j in range(2):
                    v = dirac_bracket(coordinate_observable(i, 2),
                                      momentum_observable(j, 2), C, z)
                    expected = (1.0 if i == j else 0.0) - n[i] * n[j]
                    assert abs(v - expected) <= 1e-10

    def test_pp_matches_hessian_formula(self):
        for surface, point in seeded_quartics_cached():
            rng = np.random.default_rng(int(1000 * abs(point[0])) + 1)
            p = rng.normal(size=3)
            z = PhasePoint(point, p)
            C = constraints_from_surface(surface)
            g = surface.gradient(point)
            H = surface.hessian(point)
            g2 = float(g @ g)
            for i in range(3):
                for j in range(i + 1, 3):
                    v = dirac_bracket(momentum_observable(i, 3),
                                      momentum_observable(j, 3), C, z)
                    expected = float((g[j] * H[i] - g[i] * H[j]) @ p) / g2
                    assert abs(v - expected) <= 1e-9 * max(1.0, abs(expected))


_QUARTICS = None


def seeded_quartics_cached():
    global _QUARTICS
    if _QUARTICS is None:
        from helpers import seeded_quartic_surfaces
        _QUARTICS = seeded_quartic_surfaces(seed=31, count=6)
    return _QUARTICS


class TestBracketProperties:
    def setup_method(self):
        self.s = sphere_surface(2)
        self.C = constraints_from_surface(self.s)
        self.rng = np.random.default_rng(23)

    def _random_observable(self, rng):
        terms = ["x1^2", "x2^2", "p1^2", "p2^2", "x1*p2", "x2*p1", "x1*x2",
                 "p1*p2", "x1", "p2"]
        picks = rng.choice(len(terms), size=4, replace=False)
        coeffs = rng.uniform(-2, 2, size=4)
        src = "+".join(f"{c:.4f}*{terms[t]}" for c, t in zip(coeffs, picks))
        return Observable.from_source(src, 2)

    def _on_surface_point(self, rng):
        theta = rng.uniform(0, 2 * np.pi)
        x = np.array([np.cos(theta), np.sin(theta)])
        return tangent_phase_point(self.s, x, rng)

    def test_antisymmetry(self):
        for _ in range(20):
            A = self._random_observable(self.rng)
            B = self._random_observable(self.rng)
            z = PhasePoint(self.rng.normal(size=2) + [2, 0], self.rng.normal(size=2))
            ab = dirac_bracket(A, B, self.C, z)
            ba = dirac_bracket(B, A, self.C, z)
            assert abs(ab + ba) <= 1e-12 * max(1.0, abs(ab))

    def test_leibniz(self):
        for _ in range(10):
            A = self._random_observable(self.rng)
            B = self._random_observable(self.rng)
            Cc = self._random_observable(self.rng)
            z = self._on_surface_point(self.rng)
            product = Observable(A.expr * B.expr)
            lhs = dirac_bracket(product, Cc, self.C, z)
            rhs = A(z) * dirac_bracket(B, Cc, self.C, z) \
                + B(z) * dirac_bracket(A, Cc, self.C, z)
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_constraints_central(self):
        for _ in range(20):
            B = self._random_observable(self.rng)
            z = self._on_surface_point(self.rng)
            for phi in self.C.constraints:
                assert abs(dirac_bracket(phi, B, self.C, z)) <= 1e-10

    def test_jacobi_on_surface(self):
        for _ in range(8):
            A = self._random_observable(self.rng)
            B = self._random_observable(self.rng)
            Cc = self._random_observable(self.rng)
            z = self._on_surface_point(self.rng)
            total = (dirac_bracket(A, dirac_bracket_expr(B, Cc, self.C), self.C, z)
                     + dirac_bracket(B, dirac_bracket_expr(Cc, A, self.C), self.C, z)
                     + dirac_bracket(Cc, dirac_bracket_expr(A, B, self.C), self.C, z))
            assert abs(total) <= 1e-8

    @given(a=small, b=small, c=small, d=small)
    @settings(max_examples=30, deadline=None)
    def test_antisymmetry_hypothesis(self, a, b, c, d):
        A = Observable.from_source(f"{a!r}*x1*p2+{b!r}*x2^2", 2)
        B = Observable.from_source(f"{c!r}*p1^2+{d!r}*x1*x2", 2)
        z = PhasePoint([1.0, 0.5], [-0.3, 0.8])
        ab = dirac_bracket(A, B, self.C, z)
        ba = dirac_bracket(B, A, self.C, z)
        assert abs(ab + ba) <= 1e-12 * max(1.0, abs(ab))


class TestSelfadjointCorrection:
    def test_sphere_closed_form(self):
        for n in (2, 3, 4):
            s = sphere_surface(n)
            rng = np.random.default_rng(n)
            x = rng.normal(size=n)
            x /= np.linalg.norm(x)
            c = selfadjoint_correction(s, x)
            assert np.max(np.abs(c - (n - 1) / 2.0 * x)) <= 1e-12

    def test_plane_zero(self):
        s = SurfaceSpec.from_sources("z", ["x", "y", "z"])
        assert np.max(np.abs(selfadjoint_correction(s, [0.4, -0.2, 0.0]))) == 0.0

    def test_parabola_against_fd_of_projector_field(self):
        s = SurfaceSpec.from_sources("y-x^2/2+1", ["x", "y"])
        x0 = np.array([1.0, -0.5])
        got = selfadjoint_correction(s, x0)

        def projector_entry(i, j):
            def fn(pt):
                g = s.gradient(pt)
                return g[i] * g[j] / (g @ g)
            return fn

        for i in range(2):
            oracle = 0.5 * sum(
                fd_derivative_component(projector_entry(i, j), x0, j)
                for j in range(2))
            assert abs(got[i] - oracle) <= 1e-7 * max(1.0, abs(oracle))


def fd_derivative_component(fn, x, j, h=1e-4):
    e = np.zeros_like(x)
    e[j] = 1.0
    coarse = (fn(x + h * e) - fn(x - h * e)) / (2 * h)
    fine = (fn(x + h / 2 * e) - fn(x - h / 2 * e)) / h
    return (4 * fine - coarse) / 3
