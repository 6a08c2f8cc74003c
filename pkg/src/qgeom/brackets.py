"""Poisson and Dirac brackets of phase-space observables.

Observables are expressions over the canonical coordinates x1..xn, p1..pn,
so every bracket uses exact symbolic partial derivatives; only the
constraint-matrix inversion is numeric.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateGradient,
    DimensionMismatch,
    OddConstraintCount,
    SingularConstraintMatrix,
)
from .fieldexpr import FieldExpr, parse_field
from .geometry import SurfaceSpec

__all__ = [
    "PhasePoint",
    "Observable",
    "ConstraintSet",
    "phase_coords",
    "poisson",
    "poisson_expr",
    "constraints_from_surface",
    "second_class_check",
    "dirac_bracket",
    "dirac_bracket_expr",
    "selfadjoint_correction",
    "coordinate_observable",
    "momentum_observable",
]


def phase_coords(n: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(1, n + 1)) + tuple(f"p{i}" for i in range(1, n + 1))


@dataclass
class PhasePoint:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.x.shape != self.p.shape:
            raise DimensionMismatch("position and momentum lengths differ")

    @property
    def n(self) -> int:
        return len(self.x)

    def values(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])


class Observable:
    """Phase-space function with cached exact partial derivatives."""

    def __init__(self, expr: FieldExpr):
        n2 = len(expr.coords)
        if n2 % 2 or expr.coords != phase_coords(n2 // 2):
            raise DimensionMismatch(
                "observable coordinates must be x1..xn, p1..pn in order"
            )
        self.expr = expr
        self.n = n2 // 2
        self._partials: dict[str, FieldExpr] = {}

    @classmethod
    def from_source(cls, src: str, n: int) -> "Observable":
        return cls(parse_field(src, phase_coords(n)))

    def partial(self, coord: str) -> FieldExpr:
        d = self._partials.get(coord)
        if d is None:
            d = self.expr.diff(coord)
            self._partials[coord] = d
        return d

    def __call__(self, z: PhasePoint) -> float:
        return self.expr(z.values())

    def __repr__(self):
        return f"Observable({self.expr.source()!r}, n={self.n})"


@dataclass
class ConstraintSet:
    constraints: tuple[Observable, ...]

    def __post_init__(self):
        self.constraints = tuple(self.constraints)

    @property
    def n(self) -> int:
        return self.constraints[0].n


def coordinate_observable(i: int, n: int) -> Observable:
    return Observable(FieldExpr.coordinate(f"x{i + 1}", phase_coords(n)))


def momentum_observable(i: int, n: int) -> Observable:
    return Observable(FieldExpr.coordinate(f"p{i + 1}", phase_coords(n)))


def poisson(A: Observable, B: Observable, z: PhasePoint) -> float:
    """Canonical bracket sum_i (dA/dx_i dB/dp_i - dA/dp_i dB/dx_i) at z."""
    if A.n != B.n or A.n != z.n:
        raise DimensionMismatch("observable/phase-point dimensions differ")
    vals = z.values()
    total = 0.0
    for i in range(1, A.n + 1):
        total += A.partial(f"x{i}")(vals) * B.partial(f"p{i}")(vals)
        total -= A.partial(f"p{i}")(vals) * B.partial(f"x{i}")(vals)
    return total


def poisson_expr(A: Observable, B: Observable) -> Observable:
    """Canonical bracket as a symbolic observable."""
    if A.n != B.n:
        raise DimensionMismatch("observable dimensions differ")
    terms = []
    for i in range(1, A.n + 1):
        terms.append(A.partial(f"x{i}") * B.partial(f"p{i}")
                     - A.partial(f"p{i}") * B.partial(f"x{i}"))
    return Observable(reduce(lambda a, b: a + b, terms))


def constraints_from_surface(s: SurfaceSpec) -> ConstraintSet:
    """Primary constraint f(x) and secondary constraint grad f . p."""
    s._require_codim1()
    n = s.ndim
    names = phase_coords(n)
    f = s.fields[0].rename_coords(names[:n]).substitute({}, coords=names)
    grads = [g.rename_coords(names[:n]).substitute({}, coords=names)
             for g in s.grad_exprs[0]]
    momenta = [FieldExpr.coordinate(f"p{i + 1}", names) for i in range(n)]
    phi2 = reduce(lambda a, b: a + b, (grads[i] * momenta[i] for i in range(n)))
    return ConstraintSet((Observable(f), Observable(phi2)))


def second_class_check(C: ConstraintSet, z: PhasePoint,
                       det_floor: float = 1e-10) -> tuple[np.ndarray, float, bool]:
    """Constraint bracket matrix, its determinant, and the second-class flag."""
    m = len(C.constraints)
    if m % 2:
        raise OddConstraintCount(f"{m} constraints")
    mat = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1, m):
            mat[a, b] = poisson(C.constraints[a], C.constraints[b], z)
            mat[b, a] = -mat[a, b]
    det = float(np.linalg.det(mat))
    return mat, det, abs(det) >= det_floor


def dirac_bracket(A: Observable, B: Observable, C: ConstraintSet,
                  z: PhasePoint) -> float:
    """{A,B} - sum_ab {A,phi_a} Delta_ab {phi_b,B} with Delta = inverse bracket matrix."""
    mat, det, _ = second_class_check(C, z)
    row_scale = float(np.prod(np.maximum(np.abs(mat).sum(axis=1), 1e-30)))
    if abs(det) < 1e-10 * max(row_scale, 1e-30):
        raise SingularConstraintMatrix(f"det {det:.3e}")
    delta = np.linalg.inv(mat)
    a_phi = np.array([poisson(A, phi, z) for phi in C.constraints])
    phi_b = np.array([poisson(phi, B, z) for phi in C.constraints])
    return poisson(A, B, z) - float(a_phi @ delta @ phi_b)


def dirac_bracket_expr(A: Observable, B: Observable, C: ConstraintSet) -> Observable:
    """Symbolic Dirac bracket for a single constraint pair (codimension 1)."""
    if len(C.constraints) != 2:
        raise OddConstraintCount("symbolic form implemented for one constraint pair")
    phi1, phi2 = C.constraints
    c = poisson_expr(phi1, phi2)
    ab = poisson_expr(A, B)
    a1 = poisson_expr(A, phi1)
    a2 = poisson_expr(A, phi2)
    b1 = poisson_expr(phi1, B)
    b2 = poisson_expr(phi2, B)
    corr = (a1.expr * b2.expr - a2.expr * b1.expr) / c.expr
    return Observable(ab.expr + corr)


def selfadjoint_correction(s: SurfaceSpec, x) -> np.ndarray:
    """Scalar coefficients of the anti-Hermitian momentum correction.

    c_i = (1/2) sum_j d_j( d_i f d_j f / |grad f|^2 ), the factor multiplying
    i*hbar when the projected momenta are symmetrized.
    """
    s._require_codim1()
    g = s.gradient(x)
    if np.linalg.norm(g) <= 1e-10:
        raise DegenerateGradient(f"|grad f| = {np.linalg.norm(g):.3e}")
    coords = s.coords
    grads = s.grad_exprs[0]
    S = reduce(lambda a, b: a + b, (gi * gi for gi in grads))
    out = np.zeros(s.ndim)
    for i in range(s.ndim):
        terms = []
        for j in range(s.ndim):
            m_ij = grads[i] * grads[j] / S
            terms.append(m_ij.diff(coords[j]))
        total = reduce(lambda a, b: a + b, terms)
        out[i] = 0.5 * total(x)
    return out
