"""Determinant sequences, restricted Green's functions and site regularity.

Conventions: c_n = V(theta, n) - E and Delta_{m,n} = det[(H - E)|[m, n]]
(Delta_{m, m-1} = 1).  P_k = Delta_{0,k-1} and Q_k = Delta_{1,k}, so that
the k-step transfer matrix is (-1)^k [[P_k, Q_{k-1}], [-P_{k-1}, -Q_{k-2}]].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DomainError, SingularError
from .models import ModelSpec, potential_sequence

__all__ = [
    "DeterminantSequence",
    "GreenEvaluation",
    "RegularityReport",
    "det_sequences",
    "log_transfer_product",
    "transfer_identity_residual",
    "interval_det",
    "green",
    "green_direct",
    "reconstruct",
    "classify_site",
    "gaa_structure_check",
    "mosaic_recurrence_check",
    "uniformity",
    "two_block_nodes",
    "jensen_average",
]

PLAIN_LIMIT = 60


def _shifted(model: ModelSpec, theta: float, E: float, n0: int, size: int) -> np.ndarray:
    return potential_sequence(model, theta, n0, size) - E


@dataclass(frozen=True, eq=False)
class DeterminantSequence:
    """P_k and Q_k for k = 0..kmax as (sign, log|.|) pairs.

    ``P(k)`` / ``Q(k)`` return plain floats (defined for k >= -2); beyond
    k = 60 use the log arrays, plain values may overflow.
    """

    model: ModelSpec
    theta: float
    E: float
    kmax: int
    P_sign: np.ndarray
    P_log: np.ndarray
    Q_sign: np.ndarray
    Q_log: np.ndarray

    def _val(self, sign, lg, k, below):
        if k < 0:
            return below[k]
        return float(sign[k] * math.exp(lg[k])) if sign[k] != 0 else 0.0

    def P(self, k: int) -> float:
        return self._val(self.P_sign, self.P_log, k, {-1: 0.0, -2: -1.0})

    def Q(self, k: int) -> float:
        return self._val(self.Q_sign, self.Q_log, k, {-1: 0.0, -2: -1.0})

    def log_abs(self, which: str, k: int) -> tuple[float, float]:
        """(sign, log|.|) of P_k or Q_k, with the k < 0 seeds included."""
        if k < 0:
            v = self.P(k) if which == "P" else self.Q(k)
            return (math.copysign(1.0, v) if v else 0.0), (math.log(abs(v)) if v else -math.inf)
        s, lg = (self.P_sign, self.P_log) if which == "P" else (self.Q_sign, self.Q_log)
        return float(s[k]), float(lg[k])

    def plain(self) -> tuple[np.ndarray, np.ndarray]:
        m = min(self.kmax, PLAIN_LIMIT)
        return (np.array([self.P(k) for k in range(m + 1)]),
                np.array([self.Q(k) for k in range(m + 1)]))


def det_sequences(model: ModelSpec, theta: float, E: float, kmax: int) -> DeterminantSequence:
    if kmax < 2:
        raise DomainError("kmax must be >= 2")
    c = _shifted(model, theta, E, 0, kmax + 1)
    ps, pl = K.det_log_sequence(c, kmax)
    qs, ql = K.det_log_sequence(c[1:], kmax)
    return DeterminantSequence(model, float(theta), float(E), kmax, ps, pl, qs, ql)


def log_transfer_product(model: ModelSpec, E: float, theta: float, k: int) -> tuple[np.ndarray, float]:
    """M_k = exp(scale) * Mhat with max|Mhat| = 1, from the direct product."""
    c = E - potential_sequence(model, theta, 0, k)
    M = np.eye(2)
    scale = 0.0
    for j in range(k):
        M = np.array([[c[j] * M[0, 0] - M[1, 0], c[j] * M[0, 1] - M[1, 1]], [M[0, 0], M[0, 1]]])
        s = np.abs(M).max()
        if s > 1e50 or j == k - 1:
            M /= s
            scale += math.log(s)
    return M, scale


def transfer_identity_residual(seq: DeterminantSequence, k: int) -> float:
    """Deviation between M_k and (-1)^k [[P_k, Q_{k-1}], [-P_{k-1}, -Q_{k-2}]].

    Both sides are normalized by the largest entry, so the value is a relative
    entrywise error valid at any k <= kmax.
    """
    if not 0 <= k <= seq.kmax:
        raise DomainError("k outside the computed range")
    Mhat, scale = log_transfer_product(seq.model, seq.E, seq.theta, k)
    entries = [seq.log_abs("P", k), seq.log_abs("Q", k - 1),
               seq.log_abs("P", k - 1), seq.log_abs("Q", k - 2)]
    signs = np.array([e[0] for e in entries]) * np.array([1, 1, -1, -1]) * (-1) ** k
    logs = np.array([e[1] for e in entries])
    top = logs.max()
    formula = (signs * np.exp(logs - top)).reshape(2, 2)
    return float(np.abs(formula * math.exp(top - scale) - Mhat).max())


# ---------------------------------------------------------------------------
# restricted Green's functions


def interval_det(model: ModelSpec, theta: float, E: float, m: int, n: int) -> tuple[float, float]:
    """(sign, log|Delta_{m,n}|); the empty interval gives (1, 0)."""
    if n < m:
        return 1.0, 0.0
    c = _shifted(model, theta, E, m, n - m + 1)
    s, lg = K.det_log_sequence(c, n - m + 1)
    return float(s[-1]), float(lg[-1])


@dataclass(frozen=True)
class GreenEvaluation:
    """Boundary values G(n, n1), G(n, n2) of (H|[n1,n2] - E)^{-1}."""

    n1: int
    n2: int
    n: int
    E: float
    g_left: float
    g_right: float
    log_left: float
    log_right: float


def _restriction_gap(model, theta, E, n1, n2):
    d = potential_sequence(model, theta, n1, n2 - n1 + 1)
    lo = float(d.min()) - 2.0 - 1e-9
    hi = float(d.max()) + 2.0 + 1e-9
    k = K.sturm_count(d, E)
    gap = math.inf
    for idx in (k - 1, k):
        if 0 <= idx < d.size:
            gap = min(gap, abs(K.eig_index(d, idx, lo, hi, 1e-15) - E))
    return gap, hi - lo


def green(model: ModelSpec, theta: float, E: float, n1: int, n2: int, n: int) -> GreenEvaluation:
    """Boundary Green values by Cramer's rule on tridiagonal determinants."""
    if not n1 <= n <= n2:
        raise DomainError("need n1 <= n <= n2")
    gap, width = _restriction_gap(model, theta, E, n1, n2)
    if gap <= 1e-12 * max(width, 1.0):
        raise SingularError(f"E is within {gap:.3g} of an eigenvalue of the restriction")
    s, lg = interval_det(model, theta, E, n1, n2)
    sl, ll = interval_det(model, theta, E, n + 1, n2)
    sr, lr = interval_det(model, theta, E, n1, n - 1)
    log_left, log_right = ll - lg, lr - lg
    g_left = (-1) ** (n - n1) * sl * s * math.exp(log_left) if sl else 0.0
    g_right = (-1) ** (n2 - n) * sr * s * math.exp(log_right) if sr else 0.0
    return GreenEvaluation(n1, n2, n, float(E), g_left, g_right, log_left, log_right)


def green_direct(model: ModelSpec, theta: float, E: float, n1: int, n2: int, n: int) -> tuple[float, float]:
    """(G(n, n1), G(n, n2)) from a pivoted tridiagonal solve."""
    d = _shifted(model, theta, E, n1, n2 - n1 + 1)
    rhs = np.zeros(d.size)
    rhs[n - n1] = 1.0
    x = K.tridiag_solve(d, rhs, 1e-300)
    return float(x[0]), float(x[-1])


def reconstruct(ge: GreenEvaluation, u_outside_left: float, u_outside_right: float) -> float:
    """u(n) = -G(n, n1) u(n1 - 1) - G(n, n2) u(n2 + 1) for a solution of Hu = Eu."""
    return -ge.g_left * u_outside_left - ge.g_right * u_outside_right


@dataclass(frozen=True)
class RegularityReport:
    n: int
    k: int
    xi: float
    flag: str  # "regular", "singular" or "undecidable"
    n1: int | None = None
    n2: int | None = None
    margin: float = -math.inf  # best min_i(-log|G(n, n_i)| - xi |n - n_i|)


def classify_site(model: ModelSpec, theta: float, E: float, n: int, k: int, xi: float,
                  stride: int | None = None) -> RegularityReport:
    """Search windows [n1, n1 + k - 1] containing n with both ends at least k/7 away."""
    if k < 7:
        raise DomainError("k must be >= 7")
    margin_min = math.ceil(k / 7)
    stride = max(1, k // 50) if stride is None else stride
    first = n - (k - 1) + margin_min
    last = n - margin_min
    if first > last:
        return RegularityReport(n, k, xi, "undecidable")
    base = first
    c = _shifted(model, theta, E, base, (last + k - 1) - base + 1)
    # Delta_{n+1, m} for every m, shared by all windows
    rs, rl = K.det_log_sequence(c[n + 1 - base:], c.size - (n + 1 - base))
    best = -math.inf
    witness = None
    any_ok = False
    for n1 in range(first, last + 1, stride):
        n2 = n1 + k - 1
        seg = c[n1 - base:n2 - base + 1]
        ls, ll = K.det_log_sequence(seg, k)
        if ls[k] == 0:
            continue
        any_ok = True
        log_left = rl[n2 - n] - ll[k]  # |Delta_{n+1,n2}| / |Delta_{n1,n2}|
        log_right = ll[n - n1] - ll[k]  # |Delta_{n1,n-1}| / |Delta_{n1,n2}|
        m = min(-log_left - xi * (n - n1), -log_right - xi * (n2 - n))
        if m > best:
            best = m
            if m > 0:
                witness = (n1, n2)
    if not any_ok:
        return RegularityReport(n, k, xi, "undecidable")
    if witness is not None:
        return RegularityReport(n, k, xi, "regular", witness[0], witness[1], best)
    return RegularityReport(n, k, xi, "singular", margin=best)


# ---------------------------------------------------------------------------
# structural identities


def gaa_structure_check(model: ModelSpec, E: float, k: int, grid: int | None = None) -> tuple[float, float]:
    """(reflection asymmetry, high-mode amplitude) of g_k = Q_k * prod_j (1 - tau cos 2pi(theta + j alpha)).

    Both numbers are relative to max|g_k| on the grid.
    """
    if model.kind not in ("gaa", "amo"):
        raise DomainError("needs a GAA (or AMO) model")
    if model.kind == "gaa" and abs(model.tau) >= 1:
        raise DomainError("needs |tau| < 1")
    grid = 8 * (k + 1) if grid is None else grid
    if grid <= 4 * k:
        raise DomainError("grid must exceed 4k")
    tau = model.tau if model.kind == "gaa" else 0.0
    alpha = model.alpha

    def g(theta):
        seq_c = _shifted(model, theta, E, 1, k)
        s, lg = K.det_log_sequence(seq_c, k)
        q = s[k] * math.exp(lg[k]) if s[k] else 0.0
        j = np.arange(1, k + 1)
        return q * float(np.prod(1 - tau * np.cos(2 * np.pi * (theta + j * alpha))))

    t = np.arange(grid) / grid
    shift = (k + 1) * alpha / 2
    plus = np.array([g(x - shift) for x in t])
    minus = np.array([g(-x - shift) for x in t])
    top = float(np.abs(plus).max())
    asym = float(np.abs(plus - minus).max()) / top
    coef = np.fft.fft(plus) / grid
    modes = np.fft.fftfreq(grid, 1.0 / grid)
    high = float(np.abs(coef[np.abs(modes) > k]).max()) / float(np.abs(coef).max())
    return asym, high


def mosaic_recurrence_check(lam: float, E: float, theta: float, k: int,
                            alpha: float | None = None) -> tuple[float, float, float]:
    """Relative residuals of the three kappa = 2 mosaic determinant identities.

    E Q_{2k-2} = -Q_{2k-1} - Q_{2k-3}
    E P_{2k} = -Q_{2k+1}(theta - 2 alpha) - Q_{2k-1}(theta)
    E^2 P_{2k-1} = Q_{2k+1}(theta - 2 alpha) + Q_{2k-1}(theta) + Q_{2k-1}(theta - 2 alpha) + Q_{2k-3}(theta)
    Each residual is |lhs - rhs| / max(1, |terms|).
    """
    if k < 2:
        raise DomainError("k must be >= 2")
    kw = {} if alpha is None else {"alpha": alpha}
    model = ModelSpec("mosaic", lam, kappa=2, **kw)
    a = det_sequences(model, theta, E, 2 * k + 1)
    b = det_sequences(model, theta - 2 * model.alpha, E, 2 * k + 1)

    def rel(lhs, *terms):
        return abs(lhs - sum(terms)) / max(1.0, abs(lhs), *(abs(t) for t in terms))

    r1 = rel(E * a.Q(2 * k - 2), -a.Q(2 * k - 1), -a.Q(2 * k - 3))
    r2 = rel(E * a.P(2 * k), -b.Q(2 * k + 1), -a.Q(2 * k - 1))
    r3 = rel(E * E * a.P(2 * k - 1), b.Q(2 * k + 1), a.Q(2 * k - 1), b.Q(2 * k - 1), a.Q(2 * k - 3))
    return r1, r2, r3


def uniformity(nodes, x_grid=None) -> float:
    """Smallest eps for which the projected nodes cos 2pi theta_j are eps-uniform.

    Returns (1/k) ln max_{x, i} prod_{j != i} |x - x_j| / |x_i - x_j| with k + 1
    nodes, the max taken over ``x_grid`` (default: 4(k+1) Chebyshev points and +-1).
    """
    x = np.cos(2 * np.pi * np.asarray(nodes, dtype=float))
    k = x.size - 1
    if k < 1:
        raise DomainError("need at least two nodes")
    diff = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(diff, np.inf)
    if diff.min() <= 1e-12:
        raise DomainError("degenerate nodes: two projections coincide")
    if x_grid is None:
        m = 4 * (k + 1)
        x_grid = np.concatenate([[-1.0, 1.0], np.cos(np.pi * (2 * np.arange(m) + 1) / (2 * m))])
    x_grid = np.asarray(x_grid, dtype=float)
    logdiff = np.log(diff)
    np.fill_diagonal(logdiff, 0.0)
    denom = logdiff.sum(axis=1)  # sum_{j != i} ln|x_i - x_j|
    with np.errstate(divide="ignore"):
        lx = np.log(np.abs(x_grid[:, None] - x[None, :]))  # (grid, nodes)
    total = lx.sum(axis=1)  # sum_j ln|x - x_j|
    # numerator for node i excludes j = i
    num = total[:, None] - lx
    finite = np.isfinite(lx)
    # at x == x_i the i-th factor is exactly 1 (numerator excludes the zero)
    num = np.where(finite, num, -denom[None, :])
    num = np.where(np.isfinite(num), num, -np.inf)
    val = float(np.max(num - denom[None, :]))
    return val / k


def two_block_nodes(theta: float, alpha: float, k: int, y: int | None = None) -> np.ndarray:
    """Phases from two length-(k+1)/2 blocks of the orbit, around n1 and n2.

    With y given, k = 2 floor(3y/8) + 1, n1 = -floor(3k/4) and n2 = y - floor(3k/4);
    block one contributes theta + (n1 + (k-1)/2 + j) alpha for j < (k+1)/2 and
    block two theta + (n2 + (k-1)/2 + j - (k+1)/2) alpha for the rest.
    """
    if y is None:
        y = math.ceil(8 * (k - 1) / 6)
        while 2 * (3 * y // 8) + 1 != k:
            y += 1
            if y > 8 * k:
                raise DomainError("no y gives this k")
    if 2 * (3 * y // 8) + 1 != k:
        raise DomainError("k and y are inconsistent")
    n1 = -(3 * k // 4)
    n2 = y - 3 * k // 4
    half = (k + 1) // 2
    j = np.arange(k + 1)
    offs = np.where(j < half, n1 + (k - 1) / 2 + j, n2 + (k - 1) / 2 + j - half)
    return theta + offs * alpha


def jensen_average(tau: float, theta: float, alpha: float, k: int) -> float:
    """(1/k) sum_{j=1}^k ln(1 - tau cos 2pi(theta + j alpha)); tends to ln((1 + sqrt(1 - tau^2))/2)."""
    j = np.arange(1, k + 1)
    return float(np.mean(np.log(1 - tau * np.cos(2 * np.pi * (theta + np.mod(j * alpha, 1.0))))))
