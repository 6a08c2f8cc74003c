"""Differential geometry of implicitly defined submanifolds of R^n.

Surfaces are zero sets of one or more scalar constraint fields.  All
derivative data (normals, shape operator, curvature traces) come from exact
symbolic differentiation of the constraint fields; linear algebra on the
resulting small dense matrices is numerical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Sequence

import numpy as np
from scipy.linalg import null_space

from .errors import (
    DegenerateGradient,
    DependentGradients,
    DimensionMismatch,
    NoConvergence,
    OffSurface,
)
from .fieldexpr import FieldExpr, parse_field, sqrt

GRADIENT_FLOOR = 1e-10
ON_SURFACE_TOL = 1e-8  # scaled by (1 + |x|)


class SurfaceSpec:
    """A submanifold {x : f_a(x) = 0 for all a} of codimension N = len(fields)."""

    def __init__(self, fields: Sequence[FieldExpr], label: str = ""):
        fields = tuple(fields)
        if not fields:
            raise ValueError("at least one constraint field required")
        coords = fields[0].coords
        for f in fields[1:]:
            if f.coords != coords:
                raise DimensionMismatch("constraint fields use different coordinates")
        if not (1 <= len(fields) < len(coords)):
            raise ValueError(
                f"codimension must satisfy 1 <= N < n, got N={len(fields)}, n={len(coords)}"
            )
        self.fields = fields
        self.label = label

    @classmethod
    def from_sources(cls, sources: str | Sequence[str], coords: Sequence[str],
                     label: str = "") -> "SurfaceSpec":
        if isinstance(sources, str):
            sources = [sources]
        return cls([parse_field(src, coords) for src in sources], label=label)

    @property
    def coords(self) -> tuple[str, ...]:
        return self.fields[0].coords

    @property
    def ndim(self) -> int:
        return len(self.coords)

    @property
    def codim(self) -> int:
        return len(self.fields)

    # -- cached symbolic derivative fields ----------------------------------

    @cached_property
    def grad_exprs(self) -> tuple[tuple[FieldExpr, ...], ...]:
        return tuple(f.gradient() for f in self.fields)

    @cached_property
    def hessian_exprs(self) -> tuple[tuple[tuple[FieldExpr, ...], ...], ...]:
        out = []
        for grad in self.grad_exprs:
            rows = []
            for gi in grad:
                rows.append(tuple(gi.diff(c) for c in self.coords))
            out.append(tuple(rows))
        return tuple(out)

    @cached_property
    def normal_exprs(self) -> tuple[FieldExpr, ...]:
        """Components of grad f / |grad f| as symbolic fields (codim 1)."""
        self._require_codim1()
        grad = self.grad_exprs[0]
        norm = sqrt(reduce(lambda a, b: a + b, (g * g for g in grad)))
        return tuple(g / norm for g in grad)

    def _require_codim1(self):
        if self.codim != 1:
            raise ValueError("operation defined for codimension-1 surfaces only")

    # -- pointwise numeric evaluation ---------------------------------------

    def value(self, x, a: int = 0) -> float:
        return self.fields[a](x)

    def gradient(self, x, a: int = 0) -> np.ndarray:
        return np.array([g(x) for g in self.grad_exprs[a]], dtype=float)

    def hessian(self, x, a: int = 0) -> np.ndarray:
        n = self.ndim
        H = np.empty((n, n), dtype=float)
        rows = self.hessian_exprs[a]
        for i in range(n):
            for j in range(n):
                H[i, j] = rows[i][j](x)
        return H

    def check_on_surface(self, x):
        scale = 1.0 + float(np.linalg.norm(np.asarray(x, dtype=float)))
        for a, f in enumerate(self.fields):
            v = f(x)
            if abs(v) > ON_SURFACE_TOL * scale:
                raise OffSurface(
                    f"constraint {a} evaluates to {v:.3e} at {np.asarray(x)}"
                )


@dataclass
class CurvatureFrame:
    """Normal frame and curvature data of a surface at one point."""

    point: np.ndarray
    normals: list[np.ndarray]
    principal_curvatures: np.ndarray  # empty unless codimension 1
    mean_div: list[float]             # div of each unit normal field

    def to_dict(self) -> dict:
        return {
            "point": [float(v) for v in self.point],
            "normals": [[float(v) for v in n] for n in self.normals],
            "principal_curvatures": [float(v) for v in self.principal_curvatures],
            "mean_div": [float(v) for v in self.mean_div],
        }


def _checked_gradient(s: SurfaceSpec, x, a: int = 0) -> np.ndarray:
    g = s.gradient(x, a)
    if np.linalg.norm(g) <= GRADIENT_FLOOR:
        raise DegenerateGradient(f"|grad f| = {np.linalg.norm(g):.3e} at {np.asarray(x)}")
    return g


def unit_normal(s: SurfaceSpec, x) -> np.ndarray:
    """grad f / |grad f| for a codimension-1 surface."""
    s._require_codim1()
    g = _checked_gradient(s, x)
    return g / np.linalg.norm(g)


def shape_spectrum(s: SurfaceSpec, x) -> CurvatureFrame:
    """Principal curvatures at an on-surface point.

    Eigenvalues of the normal field's Jacobian restricted to the tangent
    space, ascending; signs follow the returned normal's orientation.
    """
    s._require_codim1()
    s.check_on_surface(x)
    g = _checked_gradient(s, x)
    gn = np.linalg.norm(g)
    n = g / gn
    H = s.hessian(x)
    # tangent-restricted Jacobian of the unit normal: T' H T / |grad f|
    T = null_space(n[None, :])
    M = T.T @ H @ T / gn
    M = 0.5 * (M + M.T)
    curvatures = np.linalg.eigvalsh(M)
    mean_div = float((np.trace(H) - n @ H @ n) / gn)
    return CurvatureFrame(
        point=np.asarray(x, dtype=float),
        normals=[n],
        principal_curvatures=curvatures,
        mean_div=[mean_div],
    )


def eikonal_residual(s: SurfaceSpec, x) -> float:
    """| |grad f| - 1 | ; zero exactly for signed-distance representations."""
    s._require_codim1()
    g = _checked_gradient(s, x)
    return abs(float(np.linalg.norm(g)) - 1.0)


def eikonal_diagnostics(s: SurfaceSpec, x) -> dict:
    """Distance-representation diagnostics: eikonal defect and (n.grad)n."""
    s._require_codim1()
    g = _checked_gradient(s, x)
    gn = np.linalg.norm(g)
    n = g / gn
    H = s.hessian(x)
    # dn_ij = d n_i / d x_j;  (n.grad)n_i = sum_j n_j dn_ij
    J = H / gn - np.outer(n, H @ n) / gn
    transport = J @ n
    return {
        "eikonal_residual": abs(float(gn) - 1.0),
        "normal_transport_max": float(np.max(np.abs(transport))),
    }


def closest_point(s: SurfaceSpec, x, max_iter: int = 100,
                  tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Project x onto the surface (codim 1); returns (point, signed distance).

    Damped Newton on the stationarity system x - y = lam * grad f(y),
    f(y) = 0, started at y = x; sign of the distance is the sign of f(x).
    Ties between equidistant feet go to the branch Newton reaches from x.
    """
    s._require_codim1()
    x = np.asarray(x, dtype=float)
    n = s.ndim
    g0 = _checked_gradient(s, x)
    y = x.copy()
    lam = s.value(x) / float(g0 @ g0)

    def residual(yv, lamv):
        g = s.gradient(yv)
        return np.concatenate([x - yv - lamv * g, [s.value(yv)]])

    r = residual(y, lam)
    scale_tol = tol * (1.0 + float(np.linalg.norm(x)))
    for iteration in range(max_iter):
        if np.linalg.norm(r) <= scale_tol:
            break
        g = s.gradient(y)
        H = s.hessian(y)
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = -np.eye(n) - lam * H
        J[:n, n] = -g
        J[n, :n] = g
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            # medial-axis degeneracy: fall back to the minimum-norm step
            step = np.linalg.lstsq(J, -r, rcond=None)[0]
        if np.linalg.norm(step) <= tol:
            break
        scale = 1.0
        for _ in range(30):  # halve while the residual grows
            y_new = y + scale * step[:n]
            lam_new = lam + scale * step[n]
            r_new = residual(y_new, lam_new)
            if np.linalg.norm(r_new) < np.linalg.norm(r) or scale < 1e-8:
                break
            scale *= 0.5
        y, lam, r = y_new, lam_new, r_new
    else:
        raise NoConvergence(max_iter, float(np.linalg.norm(r)))
    distance = float(np.linalg.norm(x - y))
    if s.value(x) < 0:
        distance = -distance
    return y, distance


def orthonormal_frame(s: SurfaceSpec, x) -> CurvatureFrame:
    """Gram-Schmidt frame of the constraint gradients (codimension >= 2).

    The orthonormalized normal fields are built symbolically so each
    mean_div entry is the exact divergence of the corresponding field.
    """
    if s.codim < 2:
        raise ValueError("orthonormal_frame requires codimension >= 2")
    grads = [_checked_gradient(s, x, a) for a in range(s.codim)]
    G = np.array([[gi @ gj for gj in grads] for gi in grads])
    if np.linalg.det(G) <= 1e-12 * float(np.prod([g @ g for g in grads])):
        raise DependentGradients("constraint gradients are linearly dependent")

    coords = s.coords
    frame_exprs: list[tuple[FieldExpr, ...]] = []
    for a in range(s.codim):
        v = list(s.grad_exprs[a])
        for prev in frame_exprs:
            dot = reduce(lambda p, q: p + q, (v[i] * prev[i] for i in range(s.ndim)))
            v = [v[i] - dot * prev[i] for i in range(s.ndim)]
        norm = sqrt(reduce(lambda p, q: p + q, (vi * vi for vi in v)))
        frame_exprs.append(tuple(vi / norm for vi in v))

    normals = []
    mean_div = []
    for unit in frame_exprs:
        normals.append(np.array([c(x) for c in unit], dtype=float))
        div = reduce(lambda p, q: p + q,
                     (unit[i].diff(coords[i]) for i in range(s.ndim)))
        mean_div.append(float(div(x)))
    return CurvatureFrame(
        point=np.asarray(x, dtype=float),
        normals=normals,
        principal_curvatures=np.empty(0),
        mean_div=mean_div,
    )


def project_orthogonal_pair(v, a1, a2) -> np.ndarray:
    """Component of v orthogonal to both a1 and a2 (not assumed orthonormal)."""
    v = np.asarray(v, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    a11 = float(a1 @ a1)
    a22 = float(a2 @ a2)
    a12 = float(a1 @ a2)
    den = a11 * a22 - a12 * a12
    if den <= 1e-12 * max(a11 * a22, 1e-300):
        raise DependentGradients("a1, a2 are linearly dependent")
    num = (a1 * (a22 * (a1 @ v)) + a2 * (a11 * (a2 @ v))
           - a12 * (a2 * (a1 @ v) + a1 * (a2 @ v)))
    return v - num / den


def sample_on_surface(s: SurfaceSpec, count: int, seed: int,
                      scale: float = 1.5) -> list[np.ndarray]:
    """Deterministic on-surface sample: seeded ambient draws projected by Newton."""
    rng = np.random.default_rng(seed)
    points = []
    attempts = 0
    while len(points) < count:
        attempts += 1
        if attempts > 200 * count:
            raise NoConvergence(attempts, float("nan"))
        x0 = rng.normal(scale=scale, size=s.ndim)
        try:
            y, _ = closest_point(s, x0)
            _checked_gradient(s, y)
            s.check_on_surface(y)
        except (NoConvergence, DegenerateGradient, OffSurface):
            continue
        points.append(y)
    return points
