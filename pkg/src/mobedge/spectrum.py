"""Finite truncations H|[n0, n0+N-1] with Dirichlet ends and their spectral data.

The eigensolver is self-contained: Sturm-count bisection for eigenvalues and
inverse iteration (with in-cluster re-orthogonalization) for eigenvectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as K
from ._parallel import pmap
from .errors import ConvergenceError, DomainError
from .models import ModelSpec, chebyshev_a, potential_sequence

__all__ = [
    "TridiagonalOperator",
    "EigenDecomposition",
    "IdsTable",
    "SpectrumBounds",
    "truncation",
    "eigenvalues",
    "eigenvector",
    "eigh",
    "sturm_count",
    "spectrum_bounds",
    "sample_spectrum",
    "ids_table",
    "ids",
    "thouless_le",
    "ids_growth_exponent",
    "ipr",
    "distance_to_spectrum",
    "mirror_symmetry_check",
    "special_energies",
    "special_energies_check",
]

EIG_TOL = 2e-13
CLUSTER_TOL = 1e-7  # relative to the matrix scale
DEFAULT_SEED = 12345
EDGE_STATE_WEIGHT = 0.5  # eigenvector mass near the cut above which a state is a boundary state


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Symmetric tridiagonal matrix with unit off-diagonals."""

    diagonal: np.ndarray
    theta: float = 0.0
    n0: int = 0

    @property
    def size(self) -> int:
        return int(self.diagonal.shape[0])

    @property
    def scale(self) -> float:
        return 2.0 + float(np.max(np.abs(self.diagonal)))

    def gershgorin(self) -> tuple[float, float]:
        off = 2.0 if self.size > 2 else (1.0 if self.size == 2 else 0.0)
        return float(self.diagonal.min()) - off, float(self.diagonal.max()) + off

    def dense(self) -> np.ndarray:
        n = self.size
        return np.diag(self.diagonal) + np.eye(n, k=1) + np.eye(n, k=-1)

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.diagonal * v
        out[1:] += v[:-1]
        out[:-1] += v[1:]
        return out


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray | None = None
    residuals: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class IdsTable:
    """Empirical IDS: the merged eigenvalue multiset and its CDF values."""

    energies: np.ndarray
    values: np.ndarray
    N: int
    theta_count: int

    def __call__(self, E):
        return np.searchsorted(self.energies, E, side="right") / self.energies.size


@dataclass(frozen=True)
class SpectrumBounds:
    lower: float
    upper: float
    drift_lower: float  # estimate(2N) - estimate(N)
    drift_upper: float


def truncation(model: ModelSpec, theta: float, N: int, n0: int = 0) -> TridiagonalOperator:
    if N < 1:
        raise DomainError("N must be >= 1")
    return TridiagonalOperator(potential_sequence(model, theta, n0, N), float(theta), n0)


def sturm_count(op: TridiagonalOperator, s: float) -> int:
    """#{eigenvalues < s}."""
    return int(K.sturm_count(op.diagonal, float(s)))


def eigenvalues(op: TridiagonalOperator) -> np.ndarray:
    lo, hi = op.gershgorin()
    pad = 1e-12 * max(1.0, abs(lo), abs(hi))
    return K.bisect_all(op.diagonal, lo - pad, hi + pad, EIG_TOL)


def _starts(n: int, m: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n, m))


def eigh(op: TridiagonalOperator, vectors: bool = True, seed: int = DEFAULT_SEED) -> EigenDecomposition:
    vals = eigenvalues(op)
    if not vectors:
        return EigenDecomposition(vals)
    vecs, res, restarts = K.inverse_iteration(
        op.diagonal, vals, _starts(op.size, op.size, seed), CLUSTER_TOL * op.scale, op.scale)
    if restarts >= 10 and np.any(res > 1e-8 * op.scale):
        raise ConvergenceError("inverse iteration did not converge after 10 restarts")
    return EigenDecomposition(vals, vecs, res)


def eigenvector(op: TridiagonalOperator, lam: float, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Unit eigenvector for an eigenvalue returned by :func:`eigenvalues`."""
    vecs, res, restarts = K.inverse_iteration(
        op.diagonal, np.array([float(lam)]), _starts(op.size, 1, seed), 0.0, op.scale)
    if res[0] > 1e-8 * op.scale:
        raise ConvergenceError(f"inverse iteration residual {res[0]:.3g} at lambda={lam}")
    return vecs[:, 0]


def ipr(v) -> float:
    v = np.asarray(v)
    w = np.abs(v) ** 2
    tot = float(w.sum())
    if tot == 0:
        raise DomainError("zero vector")
    return float((w * w).sum() / tot**2)


# ---------------------------------------------------------------------------
# theta-sampled spectra


def theta_grid(count: int) -> np.ndarray:
    return np.arange(count) / count


@lru_cache(maxsize=64)
def _sample(model: ModelSpec, N: int, theta_count: int, vectors: bool):
    def one(t):
        op = truncation(model, t, N)
        dec = eigh(op, vectors=vectors)
        if vectors:
            w = np.abs(dec.vectors) ** 2
            iprs = (w * w).sum(axis=0)
            edge = max(1, N // 20)
            edge_weight = w[:edge].sum(axis=0) + w[-edge:].sum(axis=0)
            return dec.values, iprs, edge_weight
        return dec.values, None, None

    return pmap(one, theta_grid(theta_count))


@dataclass(frozen=True, eq=False)
class SpectrumSample:
    """Truncation eigenvalues on a theta grid (and IPRs when requested).

    ``edge_weight`` is the eigenvector mass within N/20 sites of either end,
    which identifies boundary states created by the Dirichlet cut.
    """

    model: ModelSpec
    N: int
    thetas: np.ndarray
    values: tuple
    iprs: tuple | None
    edge_weight: tuple | None

    def merged(self, bulk_only: bool = False) -> np.ndarray:
        """All sampled eigenvalues, sorted; optionally without boundary states."""
        if bulk_only and self.edge_weight is not None:
            keep = [v[w <= EDGE_STATE_WEIGHT] for v, w in zip(self.values, self.edge_weight)]
            return np.sort(np.concatenate(keep))
        return np.sort(np.concatenate(self.values))

    @property
    def mean_spacing(self) -> float:
        m = self.merged()
        return float(m[-1] - m[0]) / max(self.N - 1, 1)


def sample_spectrum(model: ModelSpec, N: int, theta_count: int = 16,
                    vectors: bool = False) -> SpectrumSample:
    rows = _sample(model, int(N), int(theta_count), bool(vectors))
    vals = tuple(r[0] for r in rows)
    iprs = tuple(r[1] for r in rows) if vectors else None
    edges = tuple(r[2] for r in rows) if vectors else None
    return SpectrumSample(model, N, theta_grid(theta_count), vals, iprs, edges)


def spectrum_bounds(model: ModelSpec, N: int = 1024, theta_count: int = 16) -> SpectrumBounds:
    """min/max truncation eigenvalue over a theta grid, with the N -> 2N drift."""
    if N < 512:
        raise DomainError("N must be >= 512")

    def extremes(n):
        lows, highs = [], []
        for t in theta_grid(theta_count):
            op = truncation(model, t, n)
            lo, hi = op.gershgorin()
            lows.append(K.eig_index(op.diagonal, 0, lo - 1e-9, hi + 1e-9, EIG_TOL))
            highs.append(K.eig_index(op.diagonal, n - 1, lo - 1e-9, hi + 1e-9, EIG_TOL))
        return min(lows), max(highs)

    l1, u1 = extremes(N)
    l2, u2 = extremes(2 * N)
    return SpectrumBounds(l1, u1, l2 - l1, u2 - u1)


def ids_table(model: ModelSpec, N: int = 2048, theta_count: int = 16) -> IdsTable:
    if N < 512:
        raise DomainError("N must be >= 512")
    merged = sample_spectrum(model, N, theta_count).merged()
    return IdsTable(merged, np.arange(1, merged.size + 1) / merged.size, N, theta_count)


def ids(model: ModelSpec, E, N: int = 2048, theta_count: int = 16):
    """Fraction of truncation eigenvalues <= E, averaged over the theta grid."""
    out = ids_table(model, N, theta_count)(E)
    return float(out) if np.ndim(out) == 0 else out


def _mean_log_cell(a: float, b: float, E: float) -> float:
    """(1/(b-a)) int_a^b ln|x - E| dx."""
    def F(u):
        return u * math.log(abs(u)) - u if u != 0 else 0.0
    return (F(b - E) - F(a - E)) / (b - a)


def thouless_le(E: float, table: IdsTable) -> float:
    """int ln|E - E'| dN(E'): point masses, except the cell containing E is integrated exactly."""
    ev = table.energies
    M = ev.size
    j = int(np.clip(np.searchsorted(ev, E), 0, M - 1))
    if j > 0 and abs(ev[j - 1] - E) < abs(ev[j] - E):
        j -= 1
    # the cell of ev[j] spans the neighbour midpoints; collapse ties into one cell
    lo_idx, hi_idx = j, j
    while lo_idx > 0 and ev[lo_idx - 1] == ev[j]:
        lo_idx -= 1
    while hi_idx < M - 1 and ev[hi_idx + 1] == ev[j]:
        hi_idx += 1
    left = 0.5 * (ev[lo_idx - 1] + ev[j]) if lo_idx > 0 else None
    right = 0.5 * (ev[j] + ev[hi_idx + 1]) if hi_idx < M - 1 else None
    if left is None and right is None:
        left, right = ev[j] - 0.5, ev[j] + 0.5
    elif left is None:
        left = 2 * ev[j] - right
    elif right is None:
        right = 2 * ev[j] - left
    mass = hi_idx - lo_idx + 1
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(E - ev))
    others = float(np.sum(logs[:lo_idx]) + np.sum(logs[hi_idx + 1:]))
    return (others + mass * _mean_log_cell(left, right, E)) / M


def ids_growth_exponent(table: IdsTable, E: float, widths=None) -> float:
    """Least-squares slope of ln(N(E + w) - N(E - w)) against ln w.

    A diagnostic for the local regularity of the IDS: about 1 inside an
    absolutely continuous band, 1/2 at a square-root band edge.  Widths
    default to a log-spaced range well above the empirical resolution.
    """
    if widths is None:
        res = 1.0 / table.energies.size
        spread = float(table.energies[-1] - table.energies[0])
        widths = np.geomspace(max(200 * res * spread, 1e-4), 0.05 * spread, 12)
    widths = np.asarray(widths, dtype=float)
    mass = table(E + widths) - table(E - widths)
    keep = mass > 0
    if keep.sum() < 3:
        raise DomainError("E is not in the support of the IDS at these widths")
    slope, _ = np.polyfit(np.log(widths[keep]), np.log(mass[keep]), 1)
    return float(slope)


def distance_to_spectrum(sample: SpectrumSample, E, bulk_only: bool = True) -> np.ndarray:
    """Distance from each E to the nearest eigenvalue over all sampled theta.

    With eigenvectors available, boundary states of the Dirichlet cut (which
    sit in spectral gaps of the infinite operator) are ignored by default.
    """
    merged = sample.merged(bulk_only)
    E = np.atleast_1d(np.asarray(E, dtype=float))
    idx = np.clip(np.searchsorted(merged, E), 1, merged.size - 1)
    return np.minimum(np.abs(E - merged[idx - 1]), np.abs(E - merged[idx]))


# ---------------------------------------------------------------------------
# exact spectral identities of the mosaic model


def mirror_symmetry_check(model: ModelSpec, theta: float, N: int) -> float:
    """Hausdorff distance between spec(H_theta) and -spec(H_{theta+1/2})."""
    if model.kind != "mosaic":
        raise DomainError("mirror symmetry check is for the mosaic model")
    if model.kappa % 2:
        raise DomainError("mirror symmetry check needs even kappa")
    a = eigenvalues(truncation(model, theta, N))
    b = np.sort(-eigenvalues(truncation(model, theta + 0.5, N)))
    return float(np.max(np.abs(a - b)))


def special_energies(model: ModelSpec) -> np.ndarray:
    """Zeros E_l = 2 cos(pi l / kappa) of a_kappa, plus 0 for odd kappa."""
    kap = model.kappa
    Es = [2 * math.cos(math.pi * l / kap) for l in range(1, kap)]
    if kap % 2 and 0.0 not in Es:
        Es.append(0.0)
    out = np.array(sorted(Es))
    out[np.abs(out) < 1e-15] = 0.0
    return out


def special_energies_check(model: ModelSpec, N: int = 4096, theta_count: int = 16) -> dict[float, float]:
    """For each special energy, the distance to the nearest truncation eigenvalue over a theta grid."""
    if model.kind != "mosaic" or model.kappa < 2:
        raise DomainError("needs a mosaic model with kappa >= 2")
    out = {}
    ops = [truncation(model, t, N) for t in theta_grid(theta_count)]
    for E in special_energies(model):
        best = math.inf
        for op in ops:
            lo, hi = op.gershgorin()
            k = K.sturm_count(op.diagonal, E)
            for idx in (k - 1, k):
                if 0 <= idx < N:
                    ev = K.eig_index(op.diagonal, idx, lo - 1e-9, hi + 1e-9, EIG_TOL)
                    best = min(best, abs(ev - E))
        out[float(E)] = best
    return out
