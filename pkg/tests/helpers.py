"""Shared test utilities: finite-difference oracles and seeded random surfaces."""

import itertools

import numpy as np

from qgeom.geometry import SurfaceSpec, closest_point

_MONOMIALS_3D = [(i, j, k) for i, j, k in itertools.product(range(5), repeat=3)
                 if 0 < i + j + k <= 4]


def fd_derivative(fn, x, order=1, h=1e-3, richardson=True):
    """Central finite difference of a scalar callable, one Richardson level."""

    def central(step):
        if order == 1:
            return (fn(x + step) - fn(x - step)) / (2 * step)
        if order == 2:
            return (fn(x + step) - 2 * fn(x) + fn(x - step)) / step ** 2
        if order == 3:
            return (fn(x + 2 * step) - 2 * fn(x + step)
                    + 2 * fn(x - step) - fn(x - 2 * step)) / (2 * step ** 3)
        raise ValueError(order)

    coarse = central(h)
    if not richardson:
        return coarse
    fine = central(h / 2)
    return (4 * fine - coarse) / 3


def fd_partial(e, point, index, order=1, h=1e-3):
    """Finite-difference partial of a FieldExpr along one coordinate."""
    point = np.asarray(point, dtype=float)

    def section(t):
        q = point.copy()
        q[index] = t
        return e(q)

    return fd_derivative(section, point[index], order=order, h=h)


def random_quartic_source(rng, n_terms=7):
    """Sparse random quartic in (x, y, z) with the constant shifted off zero."""
    picks = rng.choice(len(_MONOMIALS_3D), size=n_terms, replace=False)
    coeffs = rng.uniform(-2.0, 2.0, size=n_terms)
    parts = []
    for pick, coeff in zip(picks, coeffs):
        i, j, k = _MONOMIALS_3D[pick]
        factors = [f"{coeff:.6f}"]
        if i:
            factors.append(f"x^{i}")
        if j:
            factors.append(f"y^{j}")
        if k:
            factors.append(f"z^{k}")
        parts.append("*".join(factors))
    return "+".join(parts) + "-1"


def seeded_quartic_surfaces(seed, count, min_grad=1e-2, max_curv=50.0):
    """Deterministic stream of (surface, on-surface point) pairs in R^3."""
    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 400 * count:
            raise RuntimeError("surface generation stalled")
        src = random_quartic_source(rng)
        surface = SurfaceSpec.from_sources(src, ["x", "y", "z"])
        x0 = rng.normal(size=3)
        try:
            y, _ = closest_point(surface, x0)
        except Exception:
            continue
        grad = surface.gradient(y)
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) > 10.0:
            continue
        if np.linalg.norm(grad) < min_grad:
            continue
        hess = surface.hessian(y)
        if np.linalg.norm(hess) / np.linalg.norm(grad) > max_curv:
            continue
        try:
            surface.check_on_surface(y)
        except Exception:
            continue
        out.append((surface, y))
    return out
