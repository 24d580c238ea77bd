"""Continued fractions, Diophantine certificates and small-divisor sums.

Everything here works on exact rationals (``fractions.Fraction``) where the
integer structure matters, and on floats where only magnitudes are needed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import mpmath
import numpy as np

from .errors import DomainError, SingularError

__all__ = [
    "ContinuedFraction",
    "DiophantineProfile",
    "torus_dist",
    "to_fraction",
    "golden_mean",
    "from_partial_quotients",
    "cf_expand",
    "best_approx_check",
    "min_sin_sum",
    "in_theta_set",
    "diophantine_profile",
]

# remainder below which an expansion is treated as terminated (rational input)
TERMINATION_TOL = Fraction(1, 10**15)


@dataclass(frozen=True)
class ContinuedFraction:
    """Expansion x = [0; a_1, a_2, ...] with its convergents.

    ``p[k]/q[k]`` is the k-th convergent, seeded with p_0=0, p_1=1,
    q_0=1, q_1=a_1, so ``len(p) == len(q) == len(partial_quotients) + 1``.
    """

    x: Fraction
    partial_quotients: tuple[int, ...]
    p: tuple[int, ...]
    q: tuple[int, ...]
    terminated: bool = False

    @property
    def depth(self) -> int:
        return len(self.partial_quotients)

    def convergent(self, k: int) -> Fraction:
        return Fraction(self.p[k], self.q[k])


@dataclass(frozen=True)
class DiophantineProfile:
    gamma: float
    sigma: float
    verified_range: int
    holds_on_range: bool
    worst_ratio: float  # min over k of ||k alpha|| |k|^sigma / gamma


class ThetaCertificate(NamedTuple):
    member: bool
    eta_max: float


def torus_dist(x):
    """Distance to the nearest integer, ``||x||`` on R/Z (vectorised)."""
    return np.abs(x - np.rint(x))


def to_fraction(x) -> Fraction:
    """Exact rational value of a float, mpf, Fraction or decimal string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, mpmath.mpf):
        man, exp = x.man_exp
        return Fraction(int(man)) * (Fraction(2) ** int(exp))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(float(x))


def golden_mean(dps: int = 60) -> Fraction:
    """(sqrt(5) - 1)/2 evaluated with ``dps`` decimal digits, as a rational."""
    with mpmath.workdps(dps):
        return to_fraction((mpmath.sqrt(5) - 1) / 2)


def from_partial_quotients(quotients: Sequence[int], depth: int = 80) -> Fraction:
    """Value of the purely periodic expansion [0; a_1, ..., a_m, a_1, ...].

    The period is repeated to ``depth`` terms, which pins a quadratic
    irrational far below double precision.
    """
    quotients = [int(a) for a in quotients]
    if not quotients or min(quotients) < 1:
        raise DomainError("partial quotients must be positive integers")
    terms = [quotients[i % len(quotients)] for i in range(depth)]
    value = Fraction(0)
    for a in reversed(terms):
        value = 1 / (a + value)
    return value


def cf_expand(x, depth: int = 30) -> ContinuedFraction:
    """Continued-fraction expansion of ``x`` in (0, 1).

    Quotients follow a_k = floor(1/b_{k-1}), b_k = 1/b_{k-1} - a_k with
    b_0 = x, carried out in exact rational arithmetic on the (dyadic) input.
    If a remainder drops below 1e-15 the input is treated as rational and
    the expansion stops early with ``terminated=True``.
    """
    if depth < 1:
        raise DomainError("depth must be positive")
    xf = to_fraction(x)
    if not 0 < xf < 1:
        raise DomainError(f"x must lie in (0, 1), got {float(xf)!r}")

    quotients: list[int] = []
    b = xf
    terminated = False
    while len(quotients) < depth:
        inv = 1 / b
        a = math.floor(inv)
        quotients.append(a)
        b = inv - a
        if b < TERMINATION_TOL:
            terminated = True
            break

    p = [0, 1]
    q = [1, quotients[0]]
    for a in quotients[1:]:
        p.append(a * p[-1] + p[-2])
        q.append(a * q[-1] + q[-2])
    return ContinuedFraction(xf, tuple(quotients), tuple(p), tuple(q), terminated)


def best_approx_check(cf: ContinuedFraction) -> tuple[bool, float]:
    """Check 1/(2 q_{n+1}) <= |q_n x - p_n| <= 1/q_{n+1} for n < depth - 1.

    Returns ``(holds, slack)`` where slack is the smallest margin of
    ``q_{n+1} |q_n x - p_n|`` to either end of [1/2, 1].  For n >= 1 the
    distance |q_n x - p_n| is exactly ||q_n x||.
    """
    if cf.terminated:
        raise DomainError("best-approximation bounds need an unterminated expansion")
    if cf.depth < 2:
        raise DomainError("need depth >= 2")
    slack = math.inf
    for n in range(cf.depth - 1):
        scaled = cf.q[n + 1] * abs(cf.q[n] * cf.x - cf.p[n])
        slack = min(slack, float(scaled - Fraction(1, 2)), float(1 - scaled))
    return slack >= 0, slack


def min_sin_sum(x: float, alpha: float, qn: int, tol: float = 1e-14) -> tuple[int, float]:
    """Centered small-divisor sum over one convergent period.

    Finds l0 minimising |sin pi(x + l alpha)| over 0 <= l < qn and returns
    ``(l0, S)`` with S = sum_{l != l0} ln|sin pi(x + l alpha)| + (qn - 1) ln 2.
    A vanishing factor is allowed only at the excluded index l0.
    """
    if qn < 1:
        raise DomainError("qn must be positive")
    phases = np.fmod(x + np.arange(qn) * alpha, 1.0)
    s = np.abs(np.sin(np.pi * phases))
    l0 = int(np.argmin(s))
    rest = np.delete(s, l0)
    if rest.size and rest.min() < tol:
        raise SingularError("two vanishing factors: singular configuration")
    total = float(np.sum(np.log(rest))) + (qn - 1) * math.log(2.0)
    return l0, total


def in_theta_set(theta: float, alpha: float, sigma: float, eta: float,
                 kmax: int = 10_000) -> ThetaCertificate:
    """Finite-range membership test for the phase set Theta(eta).

    theta belongs when ||2 theta - k alpha|| >= eta / |k|^sigma for every
    0 < |k| <= kmax.  ``eta_max`` is the largest eta that would pass.
    """
    if kmax < 1:
        raise DomainError("kmax must be >= 1")
    k = np.arange(1, kmax + 1, dtype=float)
    weight = k**sigma
    worst = min(
        float(np.min(torus_dist(2 * theta - k * alpha) * weight)),
        float(np.min(torus_dist(2 * theta + k * alpha) * weight)),
    )
    return ThetaCertificate(worst >= eta, worst)


def diophantine_profile(alpha: float, gamma: float, sigma: float,
                        kmax: int = 10_000) -> DiophantineProfile:
    k = np.arange(1, kmax + 1, dtype=float)
    ratio = float(np.min(torus_dist(k * alpha) * k**sigma)) / gamma
    return DiophantineProfile(gamma, sigma, kmax, ratio >= 1.0, ratio)
