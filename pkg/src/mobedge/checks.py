"""Verification suite shared by ``mobedge verify`` and the acceptance tests.

Every check returns a :class:`CheckResult` carrying the measured value, the
tolerance it is compared against and the wall time.  ``quick=True`` shrinks
sizes for smoke runs; the acceptance tests always use the full sizes.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import arithmetic as ar
from .cocycle import (BlockCocycle, OneStepCocycle, acceleration, furman_max, lyapunov,
                      rotation_number, zero_energy_conjugacy)
from .errors import MobedgeError
from .greens import (det_sequences, gaa_structure_check, mosaic_recurrence_check,
                     transfer_identity_residual)
from .models import GOLDEN, ModelSpec, chebyshev_a, closed_form_le, reduce_to_gaa, spectrum_bound
from .phase import PhaseConfig, detect_me
from .spectrum import (EDGE_STATE_WEIGHT, eigh, ids_table, mirror_symmetry_check,
                       sample_spectrum, thouless_le, truncation)

__all__ = ["CheckResult", "VerifyReport", "CHECKS", "run_check", "run_suite", "bulk_energies"]

SINE_SUM_QN = (13, 34, 89, 233, 610, 1597, 10946)


@dataclass
class CheckResult:
    name: str
    status: str  # "pass", "fail" or "skip"
    value: float | None
    tolerance: float | None
    comparison: str  # how value relates to tolerance when passing: "<", "<=", ">=" or "=="
    runtime: float = 0.0
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        v = "-" if self.value is None else f"{self.value:.6g}"
        t = "-" if self.tolerance is None else f"{self.tolerance:.6g}"
        return f"{self.status.upper():4s} {self.name}: value={v} {self.comparison} {t} ({self.runtime:.1f}s)"


@dataclass
class VerifyReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return not any(c.status == "fail" for c in self.checks)

    def to_dict(self) -> dict:
        return {"status": "pass" if self.passed else "fail",
                "checks": [asdict(c) for c in self.checks]}


def _compare(value: float, tol: float, how: str) -> bool:
    if how == "<":
        return value < tol
    if how == "<=":
        return value <= tol
    if how == ">=":
        return value >= tol
    if how == "==":
        return value == tol
    raise ValueError(how)


def _result(name, value, tol, how, t0, **detail) -> CheckResult:
    ok = value is not None and bool(np.isfinite(value)) and _compare(value, tol, how)
    return CheckResult(name, "pass" if ok else "fail", None if value is None else float(value),
                       tol, how, time.perf_counter() - t0, detail)


# ---------------------------------------------------------------------------
# energy selection


def bulk_energies(model: ModelSpec, count: int, N: int = 2048, theta: float = 0.0,
                  keep: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """``count`` truncation eigenvalues spread evenly over the bulk states.

    Boundary states created by the Dirichlet cut (eigenvector mass near either
    end above EDGE_STATE_WEIGHT) are excluded; ``keep`` filters further.
    """
    dec = eigh(truncation(model, theta, N))
    w = dec.vectors ** 2
    edge = max(1, N // 20)
    bulk = (w[:edge].sum(axis=0) + w[-edge:].sum(axis=0)) <= EDGE_STATE_WEIGHT
    vals = dec.values[bulk]
    if keep is not None:
        vals = vals[keep(vals)]
    if vals.size < count:
        raise MobedgeError(f"only {vals.size} admissible eigenvalues")
    idx = np.linspace(0, vals.size - 1, count + 2)[1:-1].round().astype(int)
    return vals[idx]


def _grid(model: ModelSpec, lo: float | None = None, hi: float | None = None, step: float = 0.01):
    b = spectrum_bound(model)
    lo = b[0] if lo is None else lo
    hi = b[1] if hi is None else hi
    return np.round(np.arange(math.floor(lo / step) * step, hi + step / 2, step), 10)


def _me_check(name: str, model: ModelSpec, targets, tol: float, t0: float, lo=None, hi=None,
              cfg: PhaseConfig | None = None) -> CheckResult:
    det = detect_me(model, _grid(model, lo, hi), cfg)
    found = sorted(c.best for c in det.crossings)
    worst = 0.0
    for t in targets:
        worst = max(worst, min((abs(f - t) for f in found), default=math.inf))
    # every detected crossing must also be near some target
    for f in found:
        worst = max(worst, min(abs(f - t) for t in targets))
    res = _result(name, worst if found else math.inf, tol, "<=", t0,
                  crossings=found, targets=list(targets))
    return res


# ---------------------------------------------------------------------------
# checks


def amo_baseline(quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    model = ModelSpec("amo", 2.0)
    Es = bulk_energies(model, 20, 2048)
    steps = 20_000 if quick else 100_000
    L = np.array([lyapunov(OneStepCocycle(model, float(E)), steps).value for E in Es])
    return _result("amo_baseline", float(np.abs(L - math.log(2)).max()), 1e-2, "<=", t0)


def gaa_formula(quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    model = ModelSpec("gaa", 0.5, tau=0.5)
    Es = bulk_energies(model, 20, 2048)
    steps = 20_000 if quick else 100_000
    L = np.array([lyapunov(OneStepCocycle(model, float(E)), steps).value for E in Es])
    err = np.abs(L - closed_form_le(model, Es))
    return _result("gaa_formula", float(err.max()), 2e-2, "<=", t0)


def gaa_me(quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    model = ModelSpec("gaa", 0.5, tau=0.5)
    lo, hi = (0.4, 2.6) if quick else (None, None)
    return _me_check("gaa_me", model, [2.0], 0.05, t0, lo, hi)


def mosaic2_me(quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    model = ModelSpec("mosaic", 2.0, kappa=2)
    lo, hi = (-1.0, 1.0) if quick else (None, None)
    return _me_check("mosaic2_me", model, [-0.5, 0.5], 0.05, t0, lo, hi)


def mosaic2_ipr_contrast(quick: bool = False) -> CheckResult:
    """Median IPR of bulk states beyond the edge over the median inside it."""
    t0 = time.perf_counter()
    model = ModelSpec("mosaic", 2.0, kappa=2)
    s = sample_spectrum(model, 2048, 4 if quick else 16, vectors=True)
    vals = np.concatenate(s.values)
    iprs = np.concatenate(s.iprs)
    bulk = np.concatenate(s.edge_weight) <= EDGE_STATE_WEIGHT
    inner = bulk & (np.abs(vals) < 0.45)
    outer = bulk & (np.abs(vals) > 0.55)
    ratio = float(np.median(iprs[outer]) / np.median(iprs[inner]))
    return _result("mosaic2_ipr_contrast", ratio, 10.0, ">=", t0,
                   ipr_localized=float(np.median(iprs[outer])),
                   ipr_extended=float(np.median(iprs[inner])))


def mosaic3_me(quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    model = ModelSpec("mosaic", 2.0, kappa=3)
    targets = [-math.sqrt(1.5), -math.sqrt(0.5), math.sqrt(0.5), math.sqrt(1.5)]
    lo, hi = (-1.4, 1.4) if quick else (None, None)
    return _me_check("mosaic3_me", model, targets, 0.05, t0, lo, hi)


def mosaic_acceleration(quick: bool = False) -> CheckResult:
    """Block-cocycle acceleration at eps = 0.5 on 20 spectral energies.

    L(eps) = max(ln|lam a_kappa(E)| + 2 pi eps, 0) for the block, so eps = 0.5
    is past the kink whenever |lam a_kappa(E)| > e^{-pi}; energies with
    |lam a_kappa| <= 0.1 are skipped.
    """
    t0 = time.perf_counter()
    model = ModelSpec("mosaic", 2.0, kappa=2)
    Es = bulk_energies(model, 20, 2048,
                       keep=lambda v: np.abs(model.lam * chebyshev_a(model.kappa, v)) > 0.1)
    steps = 5_000 if quick else 20_000
    worst = 0.0
    quantized = []
    for E in Es:
        acc = acceleration(BlockCocycle(model, float(E)), 0.5, 0.02, steps)
        quantized.append(acc.quantized)
        worst = max(worst, abs(acc.raw - 1.0))
    ok_q = all(q == 1 for q in quantized)
    res = _result("mosaic_acceleration", worst, 0.1, "<", t0, quantized=quantized)
    if not ok_q:
        res.status = "fail"
    return res


THOULESS_MODELS = {
    "amo": ModelSpec("amo", 2.0),
    "gaa": ModelSpec("gaa", 0.5, tau=0.5),
    "mosaic": ModelSpec("mosaic", 2.0, kappa=2),
    "longrange": ModelSpec("longrange", 2.0, p=1.0),
    "peaky": ModelSpec("peaky", 5.0, K=1),
}


def thouless(family: str, quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    model = THOULESS_MODELS[family]
    N, thetas = (1024, 8) if quick else (2048, 16)
    table = ids_table(model, N, thetas)
    Es = bulk_energies(model, 20, N)
    steps = 20_000 if quick else 100_000
    err = [abs(thouless_le(float(E), table) - lyapunov(OneStepCocycle(model, float(E)), steps).value)
           for E in Es]
    return _result(f"thouless_{family}", float(max(err)), 5e-2, "<", t0)


def ids_rotation(family: str, quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    model = THOULESS_MODELS[family]
    N, thetas = (1024, 8) if quick else (2048, 16)
    table = ids_table(model, N, thetas)
    lo, hi = table.energies[0], table.energies[-1]
    Es = np.linspace(lo, hi, 22)[1:-1]
    steps = 20_000 if quick else 100_000
    err = [abs(float(table(E)) - (1 - 2 * rotation_number(OneStepCocycle(model, float(E)), 0.0, steps)))
           for E in Es]
    return _result(f"ids_rotation_{family}", float(max(err)), 1e-2, "<", t0)


def conjugacy(quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    grid = 256 if quick else 2048
    worst = max(zero_energy_conjugacy(ModelSpec("mosaic", lam, kappa=2), 1, grid).residual
                for lam in (0.5, 1.0, 2.0))
    return _result("zero_energy_conjugacy", worst, 1e-10, "<", t0)


def mirror_symmetry(quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    model = ModelSpec("mosaic", 2.0, kappa=2)
    rng = np.random.default_rng(7)
    thetas = rng.random(4 if quick else 16)
    worst = max(mirror_symmetry_check(model, float(t), 64) for t in thetas)
    return _result("mirror_symmetry", worst, 1e-12, "<=", t0)


def transfer_identity(quick: bool = False) -> CheckResult:
    """M_k against the determinant form on randomized models, phases, energies and k."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for i in range(20 if quick else 100):
        kind = ("amo", "gaa", "mosaic")[i % 3]
        lam = float(rng.uniform(0.2, 3.0))
        model = ModelSpec(kind, lam, tau=float(rng.uniform(-0.8, 0.8)) if kind == "gaa" else 0.0,
                          kappa=int(rng.integers(2, 5)) if kind == "mosaic" else 1)
        lo, hi = spectrum_bound(model)
        E = float(rng.uniform(lo, hi))
        k = int(rng.integers(2, 2000))
        seq = det_sequences(model, float(rng.random()), E, k)
        worst = max(worst, transfer_identity_residual(seq, k))
    return _result("transfer_identity", worst, 1e-8, "<", t0)


def mosaic_recurrences(quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(20 if quick else 100):
        lam = float(rng.uniform(0.2, 3.0))
        E = float(rng.uniform(-2 - 2 * lam, 2 + 2 * lam))
        k = int(rng.integers(2, 30))
        worst = max(worst, *mosaic_recurrence_check(lam, E, float(rng.random()), k))
    return _result("mosaic_recurrences", worst, 1e-8, "<", t0)


def _gaa_instances(quick: bool):
    rng = np.random.default_rng(303)
    for _ in range(20 if quick else 100):
        lam = float(rng.uniform(-2.0, 2.0))
        tau = float(rng.uniform(-0.9, 0.9))
        model = ModelSpec("gaa", lam, tau=tau)
        lo, hi = spectrum_bound(model)
        yield model, float(rng.uniform(lo, hi)), int(rng.integers(1, 25))


def gaa_symmetry_degree(quick: bool = False) -> list[CheckResult]:
    t0 = time.perf_counter()
    asym = high = 0.0
    for model, E, k in _gaa_instances(quick):
        a, h = gaa_structure_check(model, E, k)
        asym, high = max(asym, a), max(high, h)
    return [_result("gaa_symmetry", asym, 1e-8, "<", t0),
            _result("gaa_degree", high, 1e-8, "<", t0)]


def sine_sum(quick: bool = False) -> CheckResult:
    """max |S| / ln q_n over random x and the listed convergent denominators (bound C = 10)."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    qns = SINE_SUM_QN[:5] if quick else SINE_SUM_QN
    worst = 0.0
    for x in rng.random(10 if quick else 50):
        for q in qns:
            _, S = ar.min_sin_sum(float(x), GOLDEN, q)
            worst = max(worst, abs(S) / math.log(q))
    return _result("sine_sum", worst, 10.0, "<=", t0, q_n=list(qns))


def furman(quick: bool = False) -> CheckResult:
    """max_theta (1/k) ln||M_k|| - L for AMO lam = 2 at k = 10^4 (bound 0.05)."""
    t0 = time.perf_counter()
    model = ModelSpec("amo", 2.0)
    excess = 0.0
    for E in (0.0, 1.3, 2.5):
        L = lyapunov(OneStepCocycle(model, E), 100_000).value
        excess = max(excess, furman_max(model, E, 1000 if quick else 10_000) - L)
    return _result("furman", excess, 0.05, "<=", t0)


# extra invariants surfaced by `verify`


def continued_fraction(quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    bad = 0
    for x in (GOLDEN, math.sqrt(2) - 1, math.pi - 3, math.e - 2):
        cf = ar.cf_expand(x, 20)
        p, q = cf.p, cf.q
        bad += sum(abs(p[k] * q[k - 1] - p[k - 1] * q[k]) != 1 for k in range(1, len(q)))
        ok, _ = ar.best_approx_check(cf)
        bad += not ok
    return _result("continued_fraction", bad, 0, "==", t0)


def reduction_example(quick: bool = False) -> CheckResult:
    t0 = time.perf_counter()
    red = reduce_to_gaa(ModelSpec("peaky", 5.0, K=1))
    err = max(abs(red.lam_eff - 5 / 9), abs(red.tau - 2 / 3), abs(red.shift - 5 / 3))
    return _result("peaky_reduction", err, 1e-14, "<", t0)


def _expand(fn, **kw):
    def run(quick: bool):
        return fn(quick=quick, **kw)
    return run


CHECKS: dict[str, Callable[[bool], CheckResult | list[CheckResult]]] = {
    "amo_baseline": amo_baseline,
    "gaa_formula": gaa_formula,
    "gaa_me": gaa_me,
    "mosaic2_me": mosaic2_me,
    "mosaic2_ipr_contrast": mosaic2_ipr_contrast,
    "mosaic3_me": mosaic3_me,
    "mosaic_acceleration": mosaic_acceleration,
    **{f"thouless_{k}": _expand(thouless, family=k) for k in THOULESS_MODELS},
    "ids_rotation_amo": _expand(ids_rotation, family="amo"),
    "ids_rotation_mosaic": _expand(ids_rotation, family="mosaic"),
    "zero_energy_conjugacy": conjugacy,
    "mirror_symmetry": mirror_symmetry,
    "transfer_identity": transfer_identity,
    "mosaic_recurrences": mosaic_recurrences,
    "gaa_structure": gaa_symmetry_degree,
    "sine_sum": sine_sum,
    "furman": furman,
    "continued_fraction": continued_fraction,
    "peaky_reduction": reduction_example,
}


def run_check(name: str, quick: bool = False) -> list[CheckResult]:
    t0 = time.perf_counter()
    try:
        out = CHECKS[name](quick)
    except MobedgeError as exc:
        return [CheckResult(name, "fail", None, None, "-", time.perf_counter() - t0,
                            {"error": f"{type(exc).__name__}: {exc}"})]
    return out if isinstance(out, list) else [out]


def run_suite(names=None, quick: bool = False, skip=()) -> VerifyReport:
    results = []
    for name in names or CHECKS:
        if name in skip:
            results.append(CheckResult(name, "skip", None, None, "-"))
            continue
        results.extend(run_check(name, quick))
    return VerifyReport(results)
