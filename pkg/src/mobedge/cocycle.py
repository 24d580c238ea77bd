"""Schrodinger cocycles: Lyapunov exponents, acceleration, rotation number.

The one-step map is S(theta) = [[E - V(theta), -1], [1, 0]] over the
rotation theta -> theta + alpha.  For the mosaic family the kappa-fold block
D(theta) = S(theta, kappa-1) ... S(theta, 0) is a cocycle over kappa*alpha
with a closed form in terms of the Chebyshev-type coefficients a_k(E).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels as K
from ._parallel import pmap
from .arithmetic import cf_expand, torus_dist
from .errors import DomainError, SingularError
from .models import ModelSpec, chebyshev_a, potential, strip_width

__all__ = [
    "OneStepCocycle",
    "BlockCocycle",
    "LyapunovEstimate",
    "Acceleration",
    "ConjugacyResult",
    "chebyshev_a",
    "one_step_matrix",
    "block_matrix",
    "transfer_product",
    "lyapunov",
    "lyapunov_complexified",
    "acceleration",
    "rotation_number",
    "zero_energy_conjugacy",
    "furman_max",
    "pseudo_period_ok",
]

DEFAULT_STEPS = 100_000
DEFAULT_SAMPLES = 8


@dataclass(frozen=True)
class OneStepCocycle:
    model: ModelSpec
    E: float

    @property
    def alpha(self) -> float:
        return self.model.alpha

    @property
    def strip(self) -> float:
        """Half-width of the strip where the cocycle is analytic."""
        return strip_width(self.model)

    def matrix(self, theta, n: int = 0) -> np.ndarray:
        return one_step_matrix(self.model, self.E, theta, n)


@dataclass(frozen=True)
class BlockCocycle:
    """Mosaic block cocycle over the rotation by kappa*alpha."""

    model: ModelSpec
    E: float
    coefficients: tuple[float, float, float] = field(init=False)

    def __post_init__(self):
        if self.model.kind != "mosaic":
            raise DomainError("block cocycles exist only for the mosaic model")
        k = self.model.kappa
        coeffs = tuple(float(chebyshev_a(j, self.E)) if j >= 0 else -1.0
                       for j in (k, k - 1, k - 2))
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def kappa(self) -> int:
        return self.model.kappa

    @property
    def alpha(self) -> float:
        return self.model.alpha

    @property
    def frequency(self) -> float:
        return self.kappa * self.model.alpha

    @property
    def strip(self) -> float:
        return math.inf

    def matrix(self, theta) -> np.ndarray:
        return block_matrix(self.model, self.E, theta)


@dataclass(frozen=True)
class LyapunovEstimate:
    """Averaged log-norm growth per step (per block for block cocycles)."""

    value: float
    steps: int
    renorm: int
    samples: int
    dispersion: float
    stderr: float
    per_sample: tuple[float, ...] = ()
    converged: bool = True
    identity_value: float | None = None  # (1/kappa) L(kappa alpha, D) for mosaic one-step input


@dataclass(frozen=True)
class Acceleration:
    raw: float
    quantized: int
    unresolved: bool
    L_minus: float
    L_plus: float


@dataclass(frozen=True)
class ConjugacyResult:
    energy: float
    h_plus: complex
    h_minus: complex
    sign: int
    residual: float


# ---------------------------------------------------------------------------
# matrices


def one_step_matrix(model: ModelSpec, E: float, theta, n: int = 0) -> np.ndarray:
    c = E - potential(model, theta, n)
    return np.array([[c, -1.0], [1.0, 0.0]], dtype=np.result_type(c, float))


def transfer_product(model: ModelSpec, E: float, theta, k: int, n0: int = 0) -> np.ndarray:
    """Direct product S(n0+k-1) ... S(n0) without rescaling (small k only)."""
    M = np.eye(2, dtype=np.result_type(np.asarray(theta), float))
    for n in range(n0, n0 + k):
        M = one_step_matrix(model, E, theta, n) @ M
    return M


def block_matrix(model: ModelSpec, E: float, theta) -> np.ndarray:
    """Closed-form mosaic block [[a_k w - a_{k-1}, -a_k], [a_{k-1} w - a_{k-2}, -a_{k-1}]]."""
    if model.kind != "mosaic":
        raise DomainError("block_matrix needs a mosaic model")
    k = model.kappa
    a0 = chebyshev_a(k, E)
    a1 = chebyshev_a(k - 1, E)
    a2 = chebyshev_a(k - 2, E) if k >= 2 else -1.0
    w = E - 2 * model.lam * np.cos(2 * np.pi * np.asarray(theta))
    return np.array([[a0 * w - a1, -a0 + 0 * w], [a1 * w - a2, -a1 + 0 * w]])


# ---------------------------------------------------------------------------
# Lyapunov exponents


@lru_cache(maxsize=256)
def _trusted_q(alpha: float) -> int:
    """Largest convergent denominator of the double ``alpha`` below 1e8."""
    cf = cf_expand(alpha, 60)
    qs = [q for q in cf.q[:-1] if q <= 10**8] if not cf.terminated else list(cf.q)
    return max(qs) if qs else 1


def pseudo_period_ok(alpha: float, N: int) -> bool:
    """False when N exceeds q^2/100 for the last trustworthy convergent q of alpha."""
    frac = alpha - math.floor(alpha)
    if frac == 0:
        return False
    return N <= _trusted_q(frac) ** 2 / 100


def theta_offsets(samples: int, seed: int) -> np.ndarray:
    u = np.random.default_rng(seed).random()
    return np.mod(u + np.arange(samples) / samples, 1.0)


def _as_block(cocycle):
    if isinstance(cocycle, OneStepCocycle) and cocycle.model.kind == "mosaic":
        return BlockCocycle(cocycle.model, cocycle.E)
    return cocycle


def _growth_per_step(cocycle, thetas, N, threads):
    if isinstance(cocycle, BlockCocycle):
        a0, a1, a2 = cocycle.coefficients
        lam, freq, E = cocycle.model.lam, cocycle.frequency, cocycle.E

        def one(t):
            return K.block_log_growth(lam, a0, a1, a2, freq, t, E, N) / N
    else:
        kind, prm = K.pack(cocycle.model)
        alpha, E = cocycle.alpha, cocycle.E

        def one(t):
            return K.log_growth(kind, prm, alpha, t, E, 0, N) / N

    return np.array(pmap(one, list(thetas), threads))


def lyapunov(cocycle, N: int = DEFAULT_STEPS, theta_samples: int = DEFAULT_SAMPLES,
             seed: int = 0, threads: int | None = None) -> LyapunovEstimate:
    """Renormalized estimate of L averaged over equidistributed phases."""
    if N < 1000:
        raise DomainError("N must be at least 1000")
    if theta_samples < 1:
        raise DomainError("need at least one theta sample")
    thetas = theta_offsets(theta_samples, seed)
    vals = _growth_per_step(cocycle, thetas, N, threads)
    disp = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    freq = cocycle.frequency if isinstance(cocycle, BlockCocycle) else cocycle.alpha
    identity = None
    if isinstance(cocycle, OneStepCocycle) and cocycle.model.kind == "mosaic":
        kap = cocycle.model.kappa
        blocks = max(1000, N // kap)
        bvals = _growth_per_step(BlockCocycle(cocycle.model, cocycle.E), thetas, blocks, threads)
        identity = float(np.mean(bvals)) / kap
    return LyapunovEstimate(
        value=max(float(np.mean(vals)), 0.0),
        steps=N,
        renorm=K.RENORM,
        samples=theta_samples,
        dispersion=disp,
        stderr=disp / math.sqrt(vals.size),
        per_sample=tuple(float(v) for v in vals),
        converged=pseudo_period_ok(freq, N),
        identity_value=identity,
    )


def _check_strip(cocycle, eps: float):
    h = cocycle.strip
    if abs(eps) >= h:
        raise DomainError(f"|eps|={abs(eps):g} outside the analyticity strip (half-width {h:g})")


def lyapunov_complexified(cocycle, eps: float, N: int = 20_000,
                          theta_samples: int = DEFAULT_SAMPLES, seed: int = 0,
                          threads: int | None = None) -> float:
    """L(alpha, A(. + i eps)) averaged over real phase offsets."""
    _check_strip(cocycle, eps)
    thetas = theta_offsets(theta_samples, seed) + 1j * eps
    return float(np.mean(_growth_per_step(cocycle, thetas, N, threads)))


def acceleration(cocycle, eps: float, delta: float = 0.02, N: int = 20_000,
                 theta_samples: int = DEFAULT_SAMPLES, seed: int = 0,
                 threads: int | None = None) -> Acceleration:
    """Central-difference slope of L(eps)/(2 pi), rounded to the nearest integer.

    Mosaic one-step input is promoted to its block cocycle, whose acceleration
    is the quantized one.
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    cocycle = _as_block(cocycle)
    _check_strip(cocycle, abs(eps) + delta)
    lm = lyapunov_complexified(cocycle, eps - delta, N, theta_samples, seed, threads)
    lp = lyapunov_complexified(cocycle, eps + delta, N, theta_samples, seed, threads)
    raw = (lp - lm) / (4 * math.pi * delta)
    q = int(round(raw))
    return Acceleration(raw, q, abs(raw - q) > 0.15, lm, lp)


def rotation_number(cocycle: OneStepCocycle, theta0: float = 0.0, N: int = DEFAULT_STEPS) -> float:
    """Fibered rotation number in [0, 1/2]; the IDS is 1 - 2 rho."""
    if isinstance(cocycle, BlockCocycle):
        raise DomainError("rotation number is defined here for the one-step cocycle")
    kind, prm = K.pack(cocycle.model)
    total = K.rotation_angle(kind, prm, cocycle.alpha, float(theta0), cocycle.E, 0, N)
    return float(min(max(total / (2 * math.pi * N), 0.0), 0.5))


def furman_max(model: ModelSpec, E: float, k: int, grid: int = 256,
               threads: int | None = None) -> float:
    """max over a uniform theta grid of (1/k) ln ||M_k(theta)||."""
    kind, prm = K.pack(model)
    thetas = np.arange(grid) / grid
    vals = pmap(lambda t: K.log_growth(kind, prm, model.alpha, t, E, 0, k) / k, thetas, threads)
    return float(max(vals))


# ---------------------------------------------------------------------------
# explicit conjugacy at the zeros of a_kappa


def zero_energy_conjugacy(model: ModelSpec, l: int, grid: int = 2048) -> ConjugacyResult:
    """Conjugate the mosaic block at E_l = 2 cos(pi l / kappa) to +-Id.

    Solves h(theta + kappa alpha) - h(theta) = 2 lam cos 2 pi theta with
    h_hat(+-1) = lam / (exp(+-2 pi i kappa alpha) - 1), and measures
    max_theta ||B(theta + kappa alpha)^{-1} D(theta) B(theta) -+ Id|| where D
    is the direct kappa-fold product and B = [[1, 0], [h, 1]].
    """
    if model.kind != "mosaic":
        raise DomainError("conjugacy is for the mosaic model")
    kap = model.kappa
    if not 1 <= l <= kap - 1:
        raise DomainError("need 1 <= l <= kappa - 1")
    freq = kap * model.alpha
    if torus_dist(freq) < 1e-10:
        raise SingularError("kappa*alpha is too close to an integer")
    E = 2 * math.cos(math.pi * l / kap)
    hp = model.lam / (np.exp(2j * np.pi * freq) - 1)
    hm = model.lam / (np.exp(-2j * np.pi * freq) - 1)
    sign = -int(round(float(chebyshev_a(kap - 1, E))))

    def h(t):
        return (hp * np.exp(2j * np.pi * t) + hm * np.exp(-2j * np.pi * t)).real

    worst = 0.0
    for t in np.arange(grid) / grid:
        D = transfer_product(model, E, t, kap)
        B = np.array([[1.0, 0.0], [h(t), 1.0]])
        Binv_next = np.array([[1.0, 0.0], [-h(t + freq), 1.0]])
        R = Binv_next @ D @ B - sign * np.eye(2)
        worst = max(worst, float(np.linalg.norm(R, 2)))
    return ConjugacyResult(E, complex(hp), complex(hm), sign, worst)
