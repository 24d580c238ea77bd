"""Quasiperiodic potentials, their GAA reductions and closed-form Lyapunov data.

Five families are supported, all on the lattice Schrodinger operator
``(Hu)_n = u_{n+1} + u_{n-1} + V(theta + n alpha) u_n``:

* ``amo``        2 lam cos 2pi x
* ``gaa``        2 lam cos 2pi x / (1 - tau cos 2pi x)
* ``mosaic``     2 lam cos 2pi x on sites n = 0 mod kappa, 0 elsewhere
* ``longrange``  the on-site dual of the exponential long-range hopping model
* ``peaky``      lam / (1 + 4K sin^2 pi x)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError, SingularError

KINDS = ("amo", "gaa", "mosaic", "longrange", "peaky")
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ModelSpec:
    """Tagged parameter record for one potential family.

    Only the couplings relevant to ``kind`` are read; the rest keep their
    defaults.  ``alpha`` is the rotation frequency.
    """

    kind: str
    lam: float
    alpha: float = GOLDEN
    tau: float = 0.0
    kappa: int = 1
    p: float = 1.0
    K: float = 1.0
    flags: frozenset = field(default=frozenset(), compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if not math.isfinite(self.lam) or not math.isfinite(self.alpha):
            raise DomainError("couplings must be finite reals")
        flags = set(self.flags)
        if self.kind == "gaa":
            if abs(self.tau) > 1:
                raise DomainError("GAA needs |tau| <= 1")
            if abs(self.tau) == 1:
                flags.add("unbounded")
        elif self.kind == "mosaic":
            if int(self.kappa) != self.kappa or self.kappa < 1:
                raise DomainError("mosaic needs an integer kappa >= 1")
            if self.lam == 0:
                raise DomainError("mosaic needs lam != 0")
            object.__setattr__(self, "kappa", int(self.kappa))
        elif self.kind == "longrange":
            if self.p <= 0:
                raise DomainError("long-range model needs p > 0")
            if self.lam == 0:
                raise DomainError("long-range model needs lam != 0")
        elif self.kind == "peaky":
            if self.K <= 0 or self.lam <= 0:
                raise DomainError("peaky potential needs K > 0 and lam > 0")
        object.__setattr__(self, "flags", frozenset(flags))

    @property
    def unbounded(self) -> bool:
        return "unbounded" in self.flags

    @property
    def period(self) -> int:
        """Number of sites per quasi-periodic block (kappa for mosaic, else 1)."""
        return self.kappa if self.kind == "mosaic" else 1

    def with_lam(self, lam: float) -> "ModelSpec":
        return replace(self, lam=lam)

    def label(self) -> str:
        extra = {
            "amo": "",
            "gaa": f",tau={self.tau:g}",
            "mosaic": f",kappa={self.kappa}",
            "longrange": f",p={self.p:g}",
            "peaky": f",K={self.K:g}",
        }[self.kind]
        return f"{self.kind}(lambda={self.lam:g}{extra})"

    def params(self) -> dict:
        keys = {"amo": (), "gaa": ("tau",), "mosaic": ("kappa",),
                "longrange": ("p",), "peaky": ("K",)}[self.kind]
        out = {"model": self.kind, "lambda": self.lam}
        out.update({k: getattr(self, k) for k in keys})
        out["alpha"] = self.alpha
        return out


@dataclass(frozen=True)
class GaaReduction:
    """V(x) = shift + 2 lam_eff cos 2pi x / (1 - tau cos 2pi x).

    ``scale`` maps the reduced operator's spectrum to the spectrum of the
    physical model it stands for (the long-range hopping operator has
    spectrum ``scale * Sigma``); it is 1 for the on-site families.
    """

    lam_eff: float
    tau: float
    shift: float = 0.0
    scale: float = 1.0

    def model(self, alpha: float) -> ModelSpec:
        return ModelSpec("gaa", self.lam_eff, alpha, tau=self.tau)


# ---------------------------------------------------------------------------
# potentials


def _gaa_value(lam, tau, c):
    den = 1.0 - tau * c
    if np.any(np.abs(den) < 1e-14):
        raise SingularError("GAA potential evaluated at its pole")
    return 2.0 * lam * c / den


def potential_at_phase(model: ModelSpec, x, site=0):
    """V evaluated at phase ``x`` (real or complex) for lattice site ``site``.

    ``site`` only matters for the mosaic family.
    """
    x = np.asarray(x)
    c = np.cos(2 * np.pi * x)
    kind = model.kind
    if kind == "amo":
        return 2.0 * model.lam * c
    if kind == "gaa":
        return _gaa_value(model.lam, model.tau, c)
    if kind == "mosaic":
        on = (np.asarray(site) % model.kappa) == 0
        return np.where(on, 2.0 * model.lam * c, 0.0 * c)
    if kind == "longrange":
        r = math.exp(-model.p)
        return (4.0 / model.lam) * (-r * r + r * c) / (1.0 + r * r - 2.0 * r * c)
    # peaky
    s = np.sin(np.pi * x)
    return model.lam / (1.0 + 4.0 * model.K * s * s)


def potential(model: ModelSpec, theta, n):
    """Sample of the potential at site ``n`` for phase ``theta`` (vectorised)."""
    n = np.asarray(n)
    x = np.asarray(theta) + n * model.alpha
    return potential_at_phase(model, x, n)


def potential_sequence(model: ModelSpec, theta: float, n0: int, size: int) -> np.ndarray:
    """V(theta, n) for n = n0, ..., n0 + size - 1."""
    n = np.arange(n0, n0 + size)
    frac = np.mod(n * model.alpha, 1.0)
    return np.asarray(potential_at_phase(model, theta + frac, n), dtype=float)


def potential_range(model: ModelSpec) -> tuple[float, float]:
    """Exact (inf, sup) of V over all phases and sites."""
    lam = model.lam
    if model.kind == "amo":
        return -2 * abs(lam), 2 * abs(lam)
    if model.kind == "mosaic":
        lo, hi = -2 * abs(lam), 2 * abs(lam)
        return (lo, hi) if model.kappa == 1 else (min(lo, 0.0), max(hi, 0.0))
    if model.kind == "gaa":
        if model.unbounded:
            return -math.inf, math.inf
        ends = (2 * lam / (1 - model.tau), -2 * lam / (1 + model.tau))
        return min(ends), max(ends)
    red = reduce_to_gaa(model)
    ends = (2 * red.lam_eff / (1 - red.tau), -2 * red.lam_eff / (1 + red.tau))
    return red.shift + min(ends), red.shift + max(ends)


def spectrum_bound(model: ModelSpec) -> tuple[float, float]:
    """A priori interval containing the spectrum: [-2 + inf V, 2 + sup V]."""
    lo, hi = potential_range(model)
    return lo - 2.0, hi + 2.0


# ---------------------------------------------------------------------------
# reductions


def reduce_to_gaa(model: ModelSpec) -> GaaReduction:
    """Rewrite the potential as a shifted GAA potential."""
    kind = model.kind
    if kind == "amo":
        return GaaReduction(model.lam, 0.0)
    if kind == "gaa":
        return GaaReduction(model.lam, model.tau)
    if kind == "peaky":
        K, lam = model.K, model.lam
        return GaaReduction(lam * K / (2 * K + 1) ** 2, 2 * K / (2 * K + 1),
                            shift=lam / (2 * K + 1))
    if kind == "longrange":
        p, lam = model.p, model.lam
        ch = math.cosh(p)
        return GaaReduction(math.tanh(p) / (lam * ch), 1.0 / ch,
                            shift=-2 * math.exp(-p) / (lam * ch), scale=lam / 2.0)
    raise DomainError("the mosaic potential has no GAA form")


# ---------------------------------------------------------------------------
# Chebyshev-type block coefficients


def chebyshev_a(kappa: int, E):
    """a_kappa(E) from a_0 = 0, a_1 = 1, a_k = E a_{k-1} - a_{k-2}."""
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    E = np.asarray(E)
    prev, cur = np.zeros_like(E, dtype=np.result_type(E, float)), np.ones_like(E, dtype=np.result_type(E, float))
    if kappa == 0:
        return prev if prev.ndim else prev.item()
    for _ in range(kappa - 1):
        prev, cur = cur, E * cur - prev
    return cur if cur.ndim else cur.item()


def chebyshev_a_closed(kappa: int, E: float) -> float:
    """Closed form ((r+)^k - (r-)^k)/sqrt(E^2 - 4); (-1)^(k-1) k at E = -2."""
    if E == 2.0:
        return float(kappa)
    if E == -2.0:
        return float((-1) ** (kappa - 1) * kappa)
    root = np.sqrt(complex(E * E - 4.0))
    plus, minus = (E + root) / 2, (E - root) / 2
    return float(((plus**kappa - minus**kappa) / root).real)


def chebyshev_poly(kappa: int) -> np.polynomial.Polynomial:
    P = np.polynomial.Polynomial
    prev, cur = P([0.0]), P([1.0])
    if kappa == 0:
        return prev
    x = P([0.0, 1.0])
    for _ in range(kappa - 1):
        prev, cur = cur, x * cur - prev
    return cur


# ---------------------------------------------------------------------------
# closed-form Lyapunov exponents


def _gaa_le(lam: float, tau: float, E):
    E = np.asarray(E, dtype=float)
    if abs(tau) == 1.0:
        y = E + 2 * lam * tau
        disc = y * y - 4.0
        h = np.where(disc >= 0, (np.abs(y) + np.sqrt(np.maximum(disc, 0.0))) / 2, 1.0)
        return np.maximum(np.log(h), 0.0)
    x = tau * E + 2 * lam
    disc = x * x - 4 * tau * tau
    # below the branch point the pair is complex conjugate with modulus |tau|
    h = np.where(disc >= 0, (np.abs(x) + np.sqrt(np.maximum(disc, 0.0))) / 2, abs(tau))
    with np.errstate(divide="ignore"):
        val = np.log(h / (1 + math.sqrt(1 - tau * tau)))
    return np.maximum(val, 0.0)


def closed_form_le(model: ModelSpec, E):
    """The exact Lyapunov exponent formula, valid for E in the spectrum.

    Off the spectrum the same expression is returned so that sweeps have a
    total function; only the joint (spectrum, formula) reading is meaningful.
    """
    kind = model.kind
    if kind == "amo":
        out = np.full(np.shape(E), max(0.0, math.log(abs(model.lam))) if model.lam else 0.0)
    elif kind == "mosaic":
        a = np.abs(model.lam * chebyshev_a(model.kappa, np.asarray(E, dtype=float)))
        with np.errstate(divide="ignore"):
            out = np.maximum(np.log(a), 0.0) / model.kappa
    elif kind == "gaa":
        out = _gaa_le(model.lam, model.tau, E)
    else:
        red = reduce_to_gaa(model)
        out = _gaa_le(red.lam_eff, red.tau, np.asarray(E, dtype=float) - red.shift)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# mobility-edge prediction


@dataclass(frozen=True)
class MEPrediction:
    """Critical energies and the signed critical function.

    ``critical(E) > 0`` on the supercritical side, ``< 0`` on the
    subcritical side and vanishes exactly on the critical set.
    ``dual_energies`` holds the edges of the long-range hopping model
    (``scale * energies``); it equals ``energies`` for on-site families.
    """

    model: ModelSpec
    energies: tuple[float, ...]
    relation: str
    critical: Callable = field(compare=False, repr=False)
    dual_energies: tuple[float, ...] = ()


def _gaa_critical(lam, tau, shift):
    sgn = 1.0 if lam >= 0 else -1.0

    def g(E):
        return sgn * (tau * (np.asarray(E, dtype=float) - shift) + 2 * lam) - 2.0

    return g


def me_prediction(model: ModelSpec) -> MEPrediction:
    """Predicted mobility edges inside the a priori spectral interval."""
    if model.lam == 0:
        raise DomainError("lam must be nonzero")
    lo, hi = spectrum_bound(model)
    kind = model.kind
    if kind == "amo":
        c = math.log(abs(model.lam))
        return MEPrediction(model, (), "|lambda| = 1 (energy independent)",
                            lambda E: np.full(np.shape(E), c) if np.ndim(E) else c)
    if kind == "mosaic":
        kappa, lam = model.kappa, model.lam
        poly = chebyshev_poly(kappa)
        roots = []
        for sign in (1.0, -1.0):
            if poly.degree() == 0:
                break
            for r in (lam * poly - sign).roots():
                if abs(r.imag) > 1e-9:
                    continue
                x = r.real
                for _ in range(8):  # Newton polish on the recurrence
                    val = lam * chebyshev_a(kappa, x) - sign
                    der = lam * poly.deriv()(x)
                    if der == 0:
                        break
                    x -= val / der
                if lo <= x <= hi:
                    roots.append(float(x))
        roots = tuple(sorted(set(round(r, 14) for r in roots)))

        def crit(E):
            a = np.abs(lam * chebyshev_a(kappa, np.asarray(E, dtype=float)))
            with np.errstate(divide="ignore"):
                return np.log(a)

        return MEPrediction(model, roots, "|lambda a_kappa(E)| = 1", crit, roots)

    red = reduce_to_gaa(model)
    g = _gaa_critical(red.lam_eff, red.tau, red.shift)
    if red.tau == 0:
        energies: tuple[float, ...] = ()
    else:
        sgn = 1.0 if red.lam_eff >= 0 else -1.0
        Ec = red.shift + 2 * (1 - abs(red.lam_eff)) / (sgn * red.tau)
        energies = (Ec,) if lo <= Ec <= hi else ()
    relation = {
        "gaa": "sgn(lambda) tau E = 2(1 - |lambda|)",
        "longrange": "sgn(lambda) E = 2 cosh p - 2/|lambda|  (hopping model: E + 1 = |lambda| cosh p)",
        "peaky": "E = 2 + 1/K",
    }[kind]
    return MEPrediction(model, energies, relation, g,
                        tuple(red.scale * e for e in energies))


def gaa_strip_width(tau: float) -> float:
    """Half-width of the analyticity strip of the GAA potential (inf for tau=0)."""
    if tau == 0:
        return math.inf
    if abs(tau) >= 1:
        return 0.0
    return math.log((1 + math.sqrt(1 - tau * tau)) / abs(tau)) / (2 * math.pi)


def strip_width(model: ModelSpec) -> float:
    if model.kind in ("amo", "mosaic"):
        return math.inf
    return gaa_strip_width(reduce_to_gaa(model).tau)
