"""Closed planar curves: exact-derivative arclength and signed curvature.

Curves are parametrized by expressions x(t), y(t) over t in [0, 2*pi).
Arclength is integrated by adaptive Simpson quadrature to 1e-10 and the
inverse map s -> t is refined by Newton using the exact speed, so curvature
can be sampled at strictly uniform arclength.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import QgeomError
from .fieldexpr import FieldExpr, parse_field

TWO_PI = 2.0 * math.pi

__all__ = ["PlanarCurve"]


def _adaptive_simpson(fn, a, b, tol):
    fa, fm, fb = fn(a), fn(0.5 * (a + b)), fn(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = fn(lm), fn(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth > 40 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
                + recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))

    return recurse(a, b, fa, fm, fb, whole, tol, 0)


class PlanarCurve:
    """A closed regular plane curve given by parametric expressions."""

    CLOSURE_TOL = 1e-10
    REGULARITY_FLOOR = 1e-8

    def __init__(self, x_expr: FieldExpr, y_expr: FieldExpr, name: str = ""):
        if x_expr.coords != ("t",) or y_expr.coords != ("t",):
            raise ValueError("curve components must be expressions over ('t',)")
        self.x_expr = x_expr
        self.y_expr = y_expr
        self.name = name
        self._dx = x_expr.diff("t")
        self._dy = y_expr.diff("t")
        self._ddx = self._dx.diff("t")
        self._ddy = self._dy.diff("t")

        gap = math.hypot(x_expr([TWO_PI]) - x_expr([0.0]),
                         y_expr([TWO_PI]) - y_expr([0.0]))
        if gap > self.CLOSURE_TOL:
            raise QgeomError(f"curve is not closed: endpoint gap {gap:.3e}")
        probe = np.linspace(0.0, TWO_PI, 4097)
        speeds = np.array([self.speed(t) for t in probe])
        if speeds.min() < self.REGULARITY_FLOOR:
            raise QgeomError(f"curve is not regular: min |r'| = {speeds.min():.3e}")

        # cumulative arclength on a uniform t-grid, each panel integrated
        # adaptively; total length to ~1e-12 relative
        self._t_grid = np.linspace(0.0, TWO_PI, 2049)
        seg = [0.0]
        for a, b in zip(self._t_grid[:-1], self._t_grid[1:]):
            seg.append(_adaptive_simpson(lambda u: self.speed(u), a, b, 1e-13))
        self._s_grid = np.cumsum(seg)
        self.length = float(self._s_grid[-1])

    # -- constructors --------------------------------------------------------

    @classmethod
    def from_sources(cls, x_src: str, y_src: str, name: str = "") -> "PlanarCurve":
        return cls(parse_field(x_src, ["t"]), parse_field(y_src, ["t"]), name=name)

    @classmethod
    def circle(cls, radius: float = 1.0) -> "PlanarCurve":
        r = repr(float(radius))
        return cls.from_sources(f"{r}*cos(t)", f"{r}*sin(t)", name=f"circle:{radius}")

    @classmethod
    def ellipse(cls, a: float, b: float) -> "PlanarCurve":
        return cls.from_sources(f"{float(a)!r}*cos(t)", f"{float(b)!r}*sin(t)",
                                name=f"ellipse:{a},{b}")

    # -- pointwise data -------------------------------------------------------

    def point(self, t: float) -> tuple[float, float]:
        return self.x_expr([t]), self.y_expr([t])

    def speed(self, t: float) -> float:
        return math.hypot(self._dx([t]), self._dy([t]))

    def curvature(self, t: float) -> float:
        """Signed curvature (x'y'' - y'x'') / |r'|^3 at parameter t."""
        dx, dy = self._dx([t]), self._dy([t])
        ddx, ddy = self._ddx([t]), self._ddy([t])
        return (dx * ddy - dy * ddx) / math.hypot(dx, dy) ** 3

    def reversed(self) -> "PlanarCurve":
        """Same trace with opposite orientation (normal and curvature flip)."""
        sub = {"t": FieldExpr.constant(TWO_PI, ("t",)) - FieldExpr.coordinate("t", ("t",))}
        return PlanarCurve(self.x_expr.substitute(sub), self.y_expr.substitute(sub),
                           name=self.name + ":reversed")

    # -- arclength parametrization --------------------------------------------

    def arclength(self, t: float) -> float:
        idx = int(np.searchsorted(self._t_grid, t, side="right")) - 1
        idx = min(max(idx, 0), len(self._t_grid) - 2)
        base_t = self._t_grid[idx]
        return float(self._s_grid[idx]) + _adaptive_simpson(
            lambda u: self.speed(u), base_t, t, 1e-13)

    def parameter_at_arclength(self, s: float) -> float:
        """Invert s(t) by bracketing on the table plus Newton with exact speed."""
        s = s % self.length
        idx = int(np.searchsorted(self._s_grid, s, side="right")) - 1
        idx = min(max(idx, 0), len(self._t_grid) - 2)
        t = self._t_grid[idx]
        lo, hi = self._t_grid[idx], self._t_grid[idx + 1]
        for _ in range(60):
            err = self.arclength(t) - s
            if abs(err) <= 1e-12 * max(1.0, self.length):
                break
            if err > 0:
                hi = t
            else:
                lo = t
            t_newton = t - err / self.speed(t)
            t = t_newton if lo < t_newton < hi else 0.5 * (lo + hi)
        return t

    def curvature_at_arclength(self, s_values: np.ndarray) -> np.ndarray:
        return np.array([self.curvature(self.parameter_at_arclength(s))
                         for s in np.asarray(s_values, dtype=float)])
