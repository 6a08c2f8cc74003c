"""Spectra of the competing quantizations: analytic sphere ladders, 1D
effective operators on closed plane curves, and Dirichlet thin-layer solvers
(annulus and curved tube) with delta -> 0 convergence studies.

All discrete operators are assembled in forms that are exactly symmetric
with respect to their natural inner products; thin-layer energies are
reported raw and with the analytic transverse energy pi^2/(8 delta^2)
subtracted (half-width delta, hbar = m = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .curves import PlanarCurve
from .errors import (
    ChartSingular,
    DeltaTooLarge,
    FoldOver,
    GridTooCoarse,
    UnsupportedScheme,
)
from .potentials import SchemeId

__all__ = [
    "SpectrumResult",
    "sphere_shift",
    "harmonic_multiplicity",
    "sphere_spectrum",
    "curve_effective_spectrum",
    "annulus_spectrum",
    "tube_band_spectrum",
    "area_ratio",
    "area_ratio_expansion",
    "AnnulusProblem",
    "TubeProblem",
    "delta_sweep",
    "SweepResult",
    "transverse_energy",
]


def transverse_energy(delta: float) -> float:
    """Ground energy of the transverse well of width 2*delta: pi^2/(8 delta^2)."""
    return math.pi ** 2 / (8.0 * delta ** 2)


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray          # ascending
    labels: list                     # angular mode m or band index, per eigenvalue
    scheme: SchemeId | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        if not np.all(np.isfinite(self.eigenvalues)):
            raise ValueError("non-finite eigenvalues")
        if np.any(np.diff(self.eigenvalues) < -1e-12):
            raise ValueError("eigenvalues not ascending")

    @property
    def subtracted(self) -> np.ndarray:
        """Eigenvalues minus the analytic transverse energy (thin-layer solves)."""
        if "transverse_energy" not in self.meta:
            raise KeyError("not a thin-layer spectrum")
        return self.eigenvalues - self.meta["transverse_energy"]

    def to_dict(self) -> dict:
        out = {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "labels": list(self.labels),
            "scheme": self.scheme.value if self.scheme else None,
            "meta": {k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                     for k, v in self.meta.items()},
        }
        if "transverse_energy" in self.meta:
            out["subtracted"] = [float(v) for v in self.subtracted]
        return out


# --------------------------------------------------------------------------
# analytic sphere ladders with per-scheme shifts
# --------------------------------------------------------------------------

_SPHERE_SHIFTS = {
    SchemeId.dirac_distance: lambda n, R: (n - 1) ** 2 / (8.0 * R * R),
    SchemeId.dirac_raw: lambda n, R: (n * n - 1) / (8.0 * R * R),
    SchemeId.podolsky: lambda n, R: 0.0,
    SchemeId.conversion: lambda n, R: 0.0,
    SchemeId.thin_layer: lambda n, R: (n - 1) * (n - 3) / (8.0 * R * R),
}


def sphere_shift(scheme: SchemeId, n: int, R: float) -> float:
    try:
        return _SPHERE_SHIFTS[SchemeId(scheme)](n, R)
    except KeyError:
        raise UnsupportedScheme(f"no sphere shift for scheme {scheme}")


def harmonic_multiplicity(l: int, n: int) -> int:
    """Dimension of degree-l spherical harmonics on S^(n-1)."""
    if l < 2:
        return 1 if l == 0 else n
    return comb(n + l - 1, l) - comb(n + l - 3, l - 2)


def sphere_spectrum(n: int, R: float, scheme: SchemeId, l_max: int) -> SpectrumResult:
    """Laplace-Beltrami ladder l(l+n-2)/(2R^2) shifted by the scheme potential."""
    if n < 2 or R <= 0:
        raise ValueError("need ambient dimension n >= 2 and R > 0")
    shift = sphere_shift(scheme, n, R)
    eigenvalues = []
    labels = []
    for l in range(l_max + 1):
        lam = l * (l + n - 2) / (2.0 * R * R) + shift
        mult = harmonic_multiplicity(l, n)
        eigenvalues.extend([lam] * mult)
        labels.extend([l] * mult)
    return SpectrumResult(
        eigenvalues=np.array(eigenvalues),
        labels=labels,
        scheme=SchemeId(scheme),
        meta={"n": n, "R": R, "shift": shift, "l_max": l_max},
    )


# --------------------------------------------------------------------------
# 1D effective operator on a closed plane curve
# --------------------------------------------------------------------------

_CURVE_POTENTIALS = {
    SchemeId.curve: lambda k: -(k ** 2) / 8.0,
    SchemeId.podolsky: lambda k: np.zeros_like(k),
    SchemeId.dirac_distance: lambda k: (k ** 2) / 8.0,
}


def curve_effective_spectrum(curve: PlanarCurve, scheme: SchemeId, grid: int,
                             count: int) -> SpectrumResult:
    """Eigenvalues of -(1/2) d^2/ds^2 + V(s) on the curve, periodic FD."""
    if grid < 16:
        raise GridTooCoarse(f"grid {grid} < 16")
    scheme = SchemeId(scheme)
    if scheme not in _CURVE_POTENTIALS:
        raise UnsupportedScheme(f"no 1D effective potential for scheme {scheme}")
    L = curve.length
    ds = L / grid
    s = np.arange(grid) * ds
    k = curve.curvature_at_arclength(s)
    V = _CURVE_POTENTIALS[scheme](k)
    H = np.zeros((grid, grid))
    idx = np.arange(grid)
    H[idx, idx] = 1.0 / ds ** 2 + V
    H[idx, (idx + 1) % grid] = -0.5 / ds ** 2
    H[idx, (idx - 1) % grid] = -0.5 / ds ** 2
    H = 0.5 * (H + H.T)
    eigenvalues = scipy.linalg.eigvalsh(H)[:count]
    return SpectrumResult(
        eigenvalues=eigenvalues,
        labels=list(range(count)),
        scheme=scheme,
        meta={"grid": grid, "length": L, "curve": curve.name},
    )


# --------------------------------------------------------------------------
# annulus: per-angular-mode radial Dirichlet problems
# --------------------------------------------------------------------------

def _annulus_mode_energy(R: float, delta: float, m2: float, radial_grid: int) -> float:
    """Lowest Dirichlet eigenvalue for (effective) m^2, u = sqrt(r) g form."""
    N = radial_grid
    dr = 2.0 * delta / N
    r = R - delta + dr * np.arange(1, N)
    diag = 1.0 / dr ** 2 + (m2 - 0.25) / (2.0 * r ** 2)
    off = np.full(N - 2, -0.5 / dr ** 2)
    vals = scipy.linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, 0),
                                         eigvals_only=True)
    return float(vals[0])


def annulus_spectrum(R: float, delta: float, m_max: int,
                     radial_grid: int) -> SpectrumResult:
    """Lowest Dirichlet energy per angular mode on R-delta <= r <= R+delta.

    The radial operator -(1/2)(g'' + g'/r - m^2 g / r^2) is solved in the
    substituted u = sqrt(r) g form, which is symmetric tridiagonal.  Returns
    raw energies; `subtracted` removes the analytic pi^2/(8 delta^2).
    """
    if not 0.0 < delta < R:
        raise DeltaTooLarge(f"delta {delta} incompatible with R {R}")
    if radial_grid < 16:
        raise GridTooCoarse(f"radial grid {radial_grid} < 16")
    energies = [_annulus_mode_energy(R, delta, float(m * m), radial_grid)
                for m in range(m_max + 1)]
    # diagnostic: transverse ground energy on the same grid, no angular term
    dr = 2.0 * delta / radial_grid
    diag = np.full(radial_grid - 1, 1.0 / dr ** 2)
    off = np.full(radial_grid - 2, -0.5 / dr ** 2)
    e_perp_fd = float(scipy.linalg.eigh_tridiagonal(
        diag, off, select="i", select_range=(0, 0), eigvals_only=True)[0])
    return SpectrumResult(
        eigenvalues=np.array(energies),
        labels=list(range(m_max + 1)),
        meta={
            "R": R,
            "delta": delta,
            "radial_grid": radial_grid,
            "transverse_energy": transverse_energy(delta),
            "transverse_energy_fd": e_perp_fd,
        },
    )


# --------------------------------------------------------------------------
# 2D tube around a closed plane curve
# --------------------------------------------------------------------------

def _tube_operator(curve: PlanarCurve, delta: float, grid_s: int, grid_w: int):
    """Assemble stiffness K and mass M of the tube problem (flux form).

    Coordinates (s, w): s arclength (periodic), w offset along the left
    normal (-y', x')/|r'|, Dirichlet at w = +-delta; metric factor
    h = 1 + w k(s).  K is exactly symmetric; the generalized problem
    K u = E M u is self-adjoint under the h-weighted inner product.
    """
    L = curve.length
    ds = L / grid_s
    dw = 2.0 * delta / grid_w
    s_nodes = np.arange(grid_s) * ds
    s_faces = (np.arange(grid_s) + 0.5) * ds
    k_nodes = curve.curvature_at_arclength(s_nodes)
    k_faces = curve.curvature_at_arclength(s_faces)
    w_nodes = -delta + dw * np.arange(1, grid_w)        # interior levels

    k_max = float(np.max(np.abs(np.concatenate([k_nodes, k_faces]))))
    if delta * k_max >= 0.9:
        raise ChartSingular(f"delta*max|k| = {delta * k_max:.3f} >= 0.9")

    n_w = grid_w - 1
    size = grid_s * n_w

    def node(j, i):
        return j * n_w + (i - 1)

    rows, cols, vals = [], [], []
    diag = np.zeros(size)

    # s-direction faces (periodic): coefficient (1/2) / (h_face ds^2)
    for j in range(grid_s):
        jn = (j + 1) % grid_s
        for i in range(1, grid_w):
            h_face = 1.0 + w_nodes[i - 1] * k_faces[j]
            c = 0.5 / (h_face * ds * ds)
            a, b = node(j, i), node(jn, i)
            diag[a] += c
            diag[b] += c
            rows.extend([a, b])
            cols.extend([b, a])
            vals.extend([-c, -c])

    # w-direction faces (Dirichlet walls): coefficient (1/2) h_face / dw^2
    for j in range(grid_s):
        for i in range(grid_w):  # face between levels i and i+1 (0 and grid_w are walls)
            w_face = -delta + dw * (i + 0.5)
            h_face = 1.0 + w_face * k_nodes[j]
            c = 0.5 * h_face / (dw * dw)
            lower_interior = 1 <= i
            upper_interior = i + 1 <= grid_w - 1
            if lower_interior:
                diag[node(j, i)] += c
            if upper_interior:
                diag[node(j, i + 1)] += c
            if lower_interior and upper_interior:
                a, b = node(j, i), node(j, i + 1)
                rows.extend([a, b])
                cols.extend([b, a])
                vals.extend([-c, -c])

    rows.extend(range(size))
    cols.extend(range(size))
    vals.extend(diag)
    K = sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))

    h_nodes = 1.0 + np.repeat(w_nodes[None, :], grid_s, axis=0) * k_nodes[:, None]
    M = sparse.diags(h_nodes.reshape(size))
    return K, M


def tube_band_spectrum(curve: PlanarCurve, delta: float, grid_s: int, grid_w: int,
                       count: int, return_vectors: bool = False) -> SpectrumResult:
    """Lowest `count` eigenvalues of the Dirichlet tube of half-width delta."""
    if grid_s < 16 or grid_w < 8:
        raise GridTooCoarse(f"grid_s {grid_s} / grid_w {grid_w} too coarse")
    K, M = _tube_operator(curve, delta, grid_s, grid_w)
    # shift below the lowest discrete eigenvalue: the transverse well energy
    # of this w-grid minus a curvature margin, so nearest-sigma = lowest
    dw = 2.0 * delta / grid_w
    perp_fd = (1.0 - math.cos(math.pi / grid_w)) / (dw * dw)
    k_max = max(abs(curve.curvature(t)) for t in np.linspace(0.0, 2 * math.pi, 257))
    sigma = perp_fd - 0.25 * k_max * k_max - 1.0
    vals, vecs = spla.eigsh(K, k=count, M=M, sigma=sigma, which="LM")
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    meta = {
        "delta": delta,
        "grid_s": grid_s,
        "grid_w": grid_w,
        "length": curve.length,
        "curve": curve.name,
        "transverse_energy": transverse_energy(delta),
    }
    result = SpectrumResult(eigenvalues=vals, labels=list(range(count)), meta=meta)
    if return_vectors:
        result.meta["vectors"] = vecs
    return result


# --------------------------------------------------------------------------
# offset-surface area ratio
# --------------------------------------------------------------------------

def area_ratio(k: Sequence[float], eps: float) -> float:
    """Exact area element ratio prod_a (1 + eps k_a) of the offset surface."""
    k = np.asarray(k, dtype=float)
    factors = 1.0 + eps * k
    if np.any(factors <= 0.0):
        raise FoldOver(f"offset folds over: min factor {factors.min():.3e}")
    return float(np.prod(factors))


def area_ratio_expansion(k: Sequence[float], eps: float) -> float:
    """Second-order expansion 1 + eps sum k + eps^2/2 ((sum k)^2 - sum k^2)."""
    k = np.asarray(k, dtype=float)
    sk = float(k.sum())
    sk2 = float((k ** 2).sum())
    return 1.0 + eps * sk + 0.5 * eps * eps * (sk * sk - sk2)


# --------------------------------------------------------------------------
# delta -> 0 convergence studies
# --------------------------------------------------------------------------

@dataclass
class AnnulusProblem:
    """Thin annulus around a circle of radius R; modes are angular numbers."""

    R: float
    modes: tuple[int, ...] = (0, 1, 2, 3)
    grid_rule: int = 250  # radial points = max(2000, grid_rule / delta)

    def solve(self, delta: float) -> tuple[np.ndarray, list]:
        grid = max(2000, int(math.ceil(self.grid_rule / delta)))
        spec = annulus_spectrum(self.R, delta, max(self.modes), grid)
        sub = spec.subtracted
        return np.array([sub[m] for m in self.modes]), list(self.modes)

    def targets(self, scheme: SchemeId = SchemeId.thin_layer) -> np.ndarray:
        scheme = SchemeId(scheme)
        if scheme == SchemeId.curve:  # circle as a curve: same shift as thin layer
            shift = -1.0 / (8.0 * self.R ** 2)
        else:
            shift = sphere_shift(scheme, 2, self.R)
        return np.array([m * m / (2.0 * self.R ** 2) + shift for m in self.modes])


@dataclass
class TubeProblem:
    """Thin tube around a closed plane curve; bands indexed from the bottom."""

    curve: PlanarCurve
    count: int = 5
    grid_s: int = 256
    grid_w: int = 200
    richardson_w: bool = True  # refine grid_w once and extrapolate

    def solve(self, delta: float) -> tuple[np.ndarray, list]:
        coarse = tube_band_spectrum(self.curve, delta, self.grid_s, self.grid_w,
                                    self.count).subtracted
        if not self.richardson_w:
            return coarse, list(range(self.count))
        fine = tube_band_spectrum(self.curve, delta, self.grid_s, 2 * self.grid_w,
                                  self.count).subtracted
        return (4.0 * fine - coarse) / 3.0, list(range(self.count))

    def targets(self, scheme: SchemeId = SchemeId.curve,
                grid: int = 2048) -> np.ndarray:
        spec = curve_effective_spectrum(self.curve, scheme, grid, self.count)
        return spec.eigenvalues


@dataclass
class SweepEntry:
    label: object
    deltas: np.ndarray
    values: np.ndarray
    diffs: np.ndarray
    rate: float
    extrapolated: float


@dataclass
class SweepResult:
    entries: list[SweepEntry]

    def entry(self, label) -> SweepEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)


def _fit_rate_and_limit(deltas: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Convergence rate from the last three deltas and the extrapolated limit."""
    d = deltas[-3:]
    v = values[-3:]
    diffs = np.diff(v)
    if np.any(diffs == 0.0):
        return float("nan"), float(v[-1])
    mids = np.sqrt(d[:-1] * d[1:])
    slope = np.polyfit(np.log(mids), np.log(np.abs(diffs)), 1)[0]
    ratio = (d[-2] / d[-1]) ** slope
    limit = v[-1] + diffs[-1] / (ratio - 1.0) if ratio != 1.0 else v[-1]
    return float(slope), float(limit)


def delta_sweep(problem, deltas: Sequence[float]) -> SweepResult:
    """Solve at each delta (descending) and extrapolate the delta -> 0 limit."""
    deltas = np.asarray(sorted(deltas, reverse=True), dtype=float)
    if np.any(deltas <= 0):
        raise DeltaTooLarge("deltas must be positive")
    per_label: dict = {}
    labels_order = None
    for delta in deltas:
        values, labels = problem.solve(float(delta))
        labels_order = labels
        for lab, v in zip(labels, values):
            per_label.setdefault(lab, []).append(v)
    entries = []
    for lab in labels_order:
        vals = np.array(per_label[lab])
        diffs = np.diff(vals)
        if len(deltas) >= 3:
            rate, limit = _fit_rate_and_limit(deltas, vals)
        else:
            rate, limit = float("nan"), float(vals[-1])
        entries.append(SweepEntry(lab, deltas.copy(), vals, diffs, rate, limit))
    return SweepResult(entries)
