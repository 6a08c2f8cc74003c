"""Diagnostics for trading second-class constraints for commuting ones.

The phase space is enlarged by one canonical pair (Q, K); the converted
constraints sigma_1 = f + K and sigma_2 = n.p + |grad f| Q commute
identically.  Whether a pure Laplace-Beltrami effective Hamiltonian then
closes is decided pointwise by residual matrices; this module reports the
residuals and never attempts to solve for the Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .brackets import PhasePoint
from .errors import DegenerateGradient, NotDistanceNormalized, ZeroPosition
from .fieldexpr import FieldExpr
from .geometry import SurfaceSpec

__all__ = [
    "ExtendedPhasePoint",
    "conversion_constraints",
    "conversion_residual_strict",
    "conversion_residual_weak",
    "angular_identity_gap",
]


@dataclass
class ExtendedPhasePoint:
    base: PhasePoint
    Q: float = 0.0
    K: float = 0.0


def _normal_data(s: SurfaceSpec, x):
    s._require_codim1()
    g = s.gradient(x)
    gn = float(np.linalg.norm(g))
    if gn <= 1e-10:
        raise DegenerateGradient(f"|grad f| = {gn:.3e}")
    n = g / gn
    H = s.hessian(x)
    # dn[i, k] = d n_i / d x_k
    dn = H / gn - np.outer(n, H @ n) / gn
    return n, gn, dn


def conversion_constraints(s: SurfaceSpec, z: ExtendedPhasePoint) -> tuple[float, float]:
    """Values of the converted constraint pair (sigma_1, sigma_2).

    sigma_1 = f(x) + K and sigma_2 = n.p + |grad f| Q; the gradient-norm
    factor on Q is essential for {sigma_1, sigma_2} = 0 to hold identically.
    """
    x = z.base.x
    n, gn, _ = _normal_data(s, x)
    sigma1 = s.value(x) + z.K
    sigma2 = float(n @ z.base.p) + gn * z.Q
    return sigma1, sigma2


def _g_data(g_expr: FieldExpr, x):
    gval = g_expr(x)
    ggrad = np.array([g_expr.diff(c)(x) for c in g_expr.coords], dtype=float)
    return gval, ggrad


def conversion_residual_strict(s: SurfaceSpec, g: FieldExpr, x) -> np.ndarray:
    """Closure residual of the Laplace-Beltrami ansatz, distance representation.

    M_ik = (n.grad g)(delta_ik - n_i n_k) - 2 g d_i n_k.  An all-zero matrix
    at x certifies the ansatz closes there; requires |grad f(x)| = 1.
    """
    n, gn, dn = _normal_data(s, x)
    if abs(gn - 1.0) > 1e-8:
        raise NotDistanceNormalized(f"|grad f| = {gn!r} at {np.asarray(x)}")
    gval, ggrad = _g_data(g, x)
    ng = float(n @ ggrad)
    P = np.eye(s.ndim) - np.outer(n, n)
    # d_i n_k in index order (i, k): transpose of dn
    return ng * P - 2.0 * gval * dn.T


def conversion_residual_weak(s: SurfaceSpec, g: FieldExpr, x) -> np.ndarray:
    """Closure residual with Q eliminated through sigma_2 (weak sense).

    M_ik = (n.grad g)(delta_ik - n_i n_k) + 2 g (n_i (n.grad) n_k - d_i n_k);
    no distance normalization required.
    """
    n, gn, dn = _normal_data(s, x)
    gval, ggrad = _g_data(g, x)
    ng = float(n @ ggrad)
    P = np.eye(s.ndim) - np.outer(n, n)
    transport = dn @ n          # (n.grad) n_k
    return ng * P + 2.0 * gval * (np.outer(n, transport) - dn.T)


def angular_identity_gap(z: PhasePoint) -> float:
    """Defect of sum_{i<k}(x_i p_k - x_k p_i)^2 = x^2 (p^2 - (n.p)^2), n = x/|x|."""
    x, p = z.x, z.p
    x2 = float(x @ x)
    if x2 == 0.0:
        raise ZeroPosition("identity undefined at x = 0")
    lhs = 0.0
    for i in range(len(x)):
        for k in range(i + 1, len(x)):
            lhs += (x[i] * p[k] - x[k] * p[i]) ** 2
    np_dot = float(x @ p) / np.sqrt(x2)
    rhs = x2 * (float(p @ p) - np_dot ** 2)
    return abs(lhs - rhs)
