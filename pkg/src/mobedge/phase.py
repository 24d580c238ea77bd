"""Energy classification, mobility-edge detection and phase-diagram sweeps.

An energy in the spectrum is supercritical when L(0) > 0, subcritical when
L vanishes on a small complex strip |Im theta| <= eps, and critical
otherwise.  Energies away from the spectrum are uniformly hyperbolic: L > 0
with zero acceleration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._parallel import pmap
from .cocycle import (BlockCocycle, OneStepCocycle, acceleration, lyapunov,
                      lyapunov_complexified)
from .errors import BudgetError, DomainError
from .models import (ModelSpec, chebyshev_a, closed_form_le, me_prediction,
                     reduce_to_gaa)
from .spectrum import distance_to_spectrum, sample_spectrum, spectrum_bounds

__all__ = [
    "PhaseConfig",
    "EnergyClass",
    "Crossing",
    "MEDetection",
    "CoexistenceReport",
    "PhaseDiagram",
    "classify_energy",
    "classify_grid",
    "detect_me",
    "coexistence_window",
    "sweep",
    "LABELS",
]

SUB, CRIT, SUPER, OUT, UNDET = "Subcritical", "Critical-band", "Supercritical", "OutsideSpectrum", "Undetermined"
LABELS = (SUB, CRIT, SUPER, OUT, UNDET)


@dataclass(frozen=True)
class PhaseConfig:
    steps: int = 100_000  # one-step LE budget per cell
    theta_samples: int = 8
    complex_steps: int = 20_000
    spec_N: int = 2048
    spec_thetas: int = 16
    eps_sub: tuple[float, ...] = (0.02, 0.05, 0.1)
    eps_accel: float = 0.05  # cap for the small-eps slope used to certify a gap
    eps_branch: float = 0.15  # where the affine branch of eps -> L(eps) is read
    delta: float = 0.02
    tol_floor: float = 0.01
    band: float = 0.01  # critical band half-width (one E-grid cell)
    refine: bool = True
    with_ipr: bool = False
    max_cells: int = 1_000_000
    seed: int = 0
    threads: int | None = None


@dataclass(frozen=True)
class EnergyClass:
    label: str
    E: float
    L0: float
    L_formula: float
    tol: float
    in_spectrum: bool
    distance: float
    delta_spec: float
    L_eps: dict = field(default_factory=dict)
    accel: int | None = None
    accel_raw: float | None = None
    strip: float | None = None  # largest tested eps with L(eps) <= tol
    branch: float | None = None  # per-site intercept of the slope-omega piece of L(eps)
    ipr_median: float | None = None


@dataclass(frozen=True)
class Crossing:
    E: float  # midpoint of the bracketing cells
    refined: float | None  # zero of the branch intercept inside the bracket
    lower: float
    upper: float
    direction: str  # "sub->super" or "super->sub" with increasing E
    predicted: float | None
    gap: float | None

    @property
    def best(self) -> float:
        return self.refined if self.refined is not None else self.E


@dataclass(frozen=True)
class MEDetection:
    model: ModelSpec
    crossings: tuple[Crossing, ...]
    predicted: tuple[float, ...]
    classes: tuple[EnergyClass, ...]
    diagnostic: str = ""


@dataclass(frozen=True)
class CoexistenceReport:
    verdict: str  # "coexistence", "all-subcritical", "all-supercritical" or "undetermined"
    guaranteed: bool  # settled by an a priori parameter condition
    reason: str
    spectrum: tuple[float, float] | None = None
    critical: tuple[float, ...] = ()
    details: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class PhaseDiagram:
    energies: np.ndarray
    params: np.ndarray
    param_name: str
    labels: np.ndarray  # (len(params), len(energies)) of str
    L_numeric: np.ndarray
    L_formula: np.ndarray
    accel: np.ndarray  # float, nan where not computed
    in_spectrum: np.ndarray
    ipr_median: np.ndarray
    predicted: tuple[tuple[float, ...], ...]
    crossings: tuple[tuple[Crossing, ...], ...] = ()


# ---------------------------------------------------------------------------


def _ipr_lookup(model, cfg):
    s = sample_spectrum(model, cfg.spec_N, cfg.spec_thetas, vectors=True)
    vals = np.concatenate(s.values)
    iprs = np.concatenate(s.iprs)
    order = np.argsort(vals)
    return vals[order], iprs[order]


def _ipr_near(table, E, width):
    vals, iprs = table
    lo, hi = np.searchsorted(vals, [E - width, E + width])
    return float(np.median(iprs[lo:hi])) if hi > lo else None


BRANCH_SLACK = 0.05  # max |raw - omega| for a window free of kinks
FIT_SLACK = 0.01  # stricter version for points used in extrapolation


def _branch(coc: OneStepCocycle, cfg: PhaseConfig, slack: float = BRANCH_SLACK):
    """(acceleration, per-site intercept) of the affine piece of eps -> L(eps) at eps_branch.

    Beyond every kink L(eps) = c + 2 pi omega eps; the intercept c is the
    analytic continuation of L from the supercritical side and changes sign at
    a mobility edge.  None when the window is not on a single affine piece.
    """
    eb = min(cfg.eps_branch, 0.6 * coc.strip)
    if eb - cfg.delta <= 0:
        return None, None
    acc = acceleration(coc, eb, cfg.delta, cfg.complex_steps, cfg.theta_samples, cfg.seed, threads=1)
    if acc.quantized < 1 or abs(acc.raw - acc.quantized) > slack:
        return acc, None
    mid = 0.5 * (acc.L_minus + acc.L_plus)
    return acc, (mid - 2 * math.pi * acc.quantized * eb) / coc.model.period


def _gap_slope(coc: OneStepCocycle, L0: float, cfg: PhaseConfig) -> float | None:
    """Slope of L(eps)/(2 pi) on [0, eps_u] with eps_u ~ L(0)/(4 pi).

    A uniformly hyperbolic cocycle keeps L constant on a strip whose width
    scales with L(0), so the slope there is 0; mosaic input is measured on
    its block cocycle.
    """
    target = BlockCocycle(coc.model, coc.E) if coc.model.kind == "mosaic" else coc
    eu = min(cfg.eps_accel, max(0.002, L0 / (4 * math.pi)), 0.5 * target.strip)
    if eu <= 0:
        return None
    l0 = lyapunov_complexified(target, 0.0, cfg.complex_steps, cfg.theta_samples, cfg.seed, threads=1)
    l1 = lyapunov_complexified(target, eu, cfg.complex_steps, cfg.theta_samples, cfg.seed, threads=1)
    return (l1 - l0) / (2 * math.pi * eu)


def classify_energy(model: ModelSpec, E: float, cfg: PhaseConfig | None = None,
                    predicted: tuple[float, ...] | None = None, _ipr=None) -> EnergyClass:
    """Label one energy from L(0), L on a thin strip, the branch of L(eps) and distance to the spectrum."""
    cfg = cfg or PhaseConfig()
    sample = sample_spectrum(model, cfg.spec_N, cfg.spec_thetas, vectors=True)
    delta_spec = 10.0 * sample.mean_spacing
    dist = float(distance_to_spectrum(sample, E)[0])
    in_spec = dist <= delta_spec
    coc = OneStepCocycle(model, float(E))

    est = lyapunov(coc, cfg.steps, cfg.theta_samples, cfg.seed, threads=1)
    tol = max(cfg.tol_floor, 3.0 * est.stderr)
    if cfg.refine and 0.5 * tol < est.value < 2.0 * tol:
        est = lyapunov(coc, 10 * cfg.steps, cfg.theta_samples, cfg.seed, threads=1)
        tol = max(cfg.tol_floor, 3.0 * est.stderr)
    L0 = est.value
    L_formula = float(closed_form_le(model, E))
    if predicted is None:
        predicted = me_prediction(model).energies if model.lam != 0 else ()
    ipr_med = _ipr_near(_ipr, E, cfg.band) if _ipr is not None else None

    def make(label, **kw):
        return EnergyClass(label, float(E), L0, L_formula, tol, in_spec, dist, delta_spec,
                           ipr_median=ipr_med, **kw)

    if not in_spec:
        if L0 <= tol:
            return make(UNDET)
        raw = _gap_slope(coc, L0, cfg)
        if raw is not None and abs(raw) <= 0.15:
            return make(OUT, accel=0, accel_raw=raw)
        return make(UNDET, accel_raw=raw)

    if any(abs(E - p) <= cfg.band for p in predicted):
        return make(CRIT)

    if L0 > tol:
        acc, icpt = _branch(coc, cfg)
        kw = {} if acc is None else dict(accel=acc.quantized, accel_raw=acc.raw, branch=icpt)
        # L > 0 on the spectrum is supercritical only if the affine branch through
        # eps = 0 is positive; otherwise L(0) is a gap plateau the finite-size
        # membership test could not exclude
        if icpt is not None and icpt > 0.5 * tol:
            return make(SUPER, **kw)
        return make(UNDET, **kw)

    L_eps = {}
    widest = None
    strip = coc.strip
    for eps in sorted(cfg.eps_sub):
        if eps >= strip:
            break
        val = lyapunov_complexified(coc, eps, cfg.complex_steps, cfg.theta_samples, cfg.seed, threads=1)
        L_eps[eps] = val
        if val > tol:
            break
        widest = eps
    if widest is not None:
        return make(SUB, L_eps=L_eps, strip=widest, accel=0)
    if L_eps:
        return make(CRIT, L_eps=L_eps)
    return make(UNDET, L_eps=L_eps)


def classify_grid(model: ModelSpec, energies, cfg: PhaseConfig | None = None) -> list[EnergyClass]:
    cfg = cfg or PhaseConfig()
    predicted = me_prediction(model).energies if model.lam != 0 else ()
    sample_spectrum(model, cfg.spec_N, cfg.spec_thetas, vectors=True)  # warm the cache before fanning out
    ipr = _ipr_lookup(model, cfg) if cfg.with_ipr else None
    return pmap(lambda E: classify_energy(model, float(E), cfg, predicted, ipr),
                list(np.asarray(energies, dtype=float)), cfg.threads)


def _branch_zero(Es, vals, direction: str, max_step: float) -> list[float]:
    """Linearly interpolated sign changes of the intercept in the given direction."""
    sign = 1.0 if direction == "sub->super" else -1.0
    out = []
    for (e1, v1), (e2, v2) in zip(zip(Es, vals), zip(Es[1:], vals[1:])):
        if e2 - e1 > max_step + 1e-12:
            continue
        if sign * v1 < 0 <= sign * v2:
            out.append(e1 + (e2 - e1) * v1 / (v1 - v2))
    return out


def _refine(model: ModelSpec, cfg: PhaseConfig, lower: float, upper: float, direction: str,
            pad: float = 0.05, step: float = 0.01, fit_points: int = 4) -> float | None:
    """Zero of the branch intercept between the bracketing cells.

    The intercept is read on a regular sub-grid of [lower - pad, upper + pad];
    points whose eps-window straddles a kink are dropped, and sign changes
    across at most five sub-grid steps are interpolated.  When only the
    supercritical side is readable (a gap plateau wider than the strip hides
    the other), the nearest kink-free points are extrapolated linearly.
    """
    n = int(math.ceil((upper - lower + 2 * pad) / step)) + 1
    grid = np.linspace(lower - pad, upper + pad, n)
    reads = pmap(lambda E: _branch(OneStepCocycle(model, float(E)), cfg, FIT_SLACK)[1], list(grid),
                 cfg.threads)
    pts = [(float(E), v) for E, v in zip(grid, reads) if v is not None]
    mid = 0.5 * (lower + upper)
    if len(pts) >= 2:
        Es, vals = zip(*pts)
        zeros = _branch_zero(list(Es), list(vals), direction, 5 * (grid[1] - grid[0]))
        if zeros:
            z = min(zeros, key=lambda x: abs(x - mid))
            return float(min(max(z, lower), upper))
    # positive readings closest to the sign change
    side = sorted((p for p in pts if p[1] > 0), reverse=direction != "sub->super")[:fit_points]
    if len(side) < 3:
        return None
    slope, icpt = np.polyfit([p[0] for p in side], [p[1] for p in side], 1)
    if slope == 0 or (slope > 0) != (direction == "sub->super"):
        return None
    return float(min(max(-icpt / slope, lower), upper))


def _crossings(model: ModelSpec, classes: list[EnergyClass], predicted,
               cfg: PhaseConfig) -> list[Crossing]:
    labeled = [c for c in classes if c.in_spectrum and c.label in (SUB, SUPER)]
    out = []
    for a, b in zip(labeled, labeled[1:]):
        if a.label == b.label:
            continue
        direction = "sub->super" if a.label == SUB else "super->sub"
        mid = 0.5 * (a.E + b.E)
        refined = _refine(model, cfg, a.E, b.E, direction)
        best = refined if refined is not None else mid
        pred = min(predicted, key=lambda p: abs(p - best)) if predicted else None
        out.append(Crossing(mid, refined, a.E, b.E, direction, pred,
                            None if pred is None else abs(pred - best)))
    return out


def detect_me(model: ModelSpec, energies, cfg: PhaseConfig | None = None) -> MEDetection:
    """Sub/super flips between consecutive labeled in-spectrum cells, matched to predictions."""
    energies = np.sort(np.asarray(energies, dtype=float))
    if energies.size < 2:
        raise DomainError("need at least two energies")
    if np.max(np.diff(energies)) > 0.01 + 1e-12:
        raise DomainError("energy grid spacing must be <= 0.01")
    cfg = cfg or PhaseConfig()
    cfg = replace(cfg, band=float(np.max(np.diff(energies))))
    predicted = me_prediction(model).energies if model.lam != 0 else ()
    classes = classify_grid(model, energies, cfg)
    if not any(c.in_spectrum for c in classes):
        return MEDetection(model, (), predicted, tuple(classes), "no in-spectrum cells on the grid")
    cross = _crossings(model, classes, predicted, cfg)
    return MEDetection(model, tuple(cross), predicted, tuple(classes))


# ---------------------------------------------------------------------------
# coexistence windows


def _numeric_sides(model: ModelSpec, lo: float, hi: float, crit) -> tuple[bool, bool]:
    """Whether spectral points exist on the sub (crit < 0) and super (crit > 0) sides."""
    s = sample_spectrum(model, 1024, 8).merged()
    vals = np.asarray(crit(s))
    return bool(np.any(vals < 0)), bool(np.any(vals > 0))


def coexistence_window(model: ModelSpec, N: int = 1024) -> CoexistenceReport:
    """Whether sub- and supercritical energies are both present in the spectrum."""
    lam = model.lam
    kind = model.kind
    if lam == 0:
        return CoexistenceReport("all-subcritical", True, "lambda = 0 is the free operator")
    b = spectrum_bounds(model, N)
    bounds = (b.lower, b.upper)
    pred = me_prediction(model)

    def numeric_verdict(sub, sup):
        if sub and sup:
            return "coexistence"
        return "all-subcritical" if sub else ("all-supercritical" if sup else "undetermined")

    if kind == "amo":
        if abs(lam) == 1:
            return CoexistenceReport("undetermined", True, "|lambda| = 1: the whole spectrum is critical", bounds)
        v = "all-subcritical" if abs(lam) < 1 else "all-supercritical"
        return CoexistenceReport(v, True, "no mobility edge for the almost Mathieu operator", bounds)

    if kind == "mosaic":
        sub, sup = _numeric_sides(model, *bounds, pred.critical)
        kap = model.kappa
        details = {"max_abs_lambda_a": float(np.max(np.abs(lam * chebyshev_a(kap, np.array(bounds)))))}
        if kap == 2 and abs(lam) > math.sqrt(2) / 2:
            return CoexistenceReport("coexistence", True, "kappa = 2 and |lambda| > sqrt(2)/2",
                                     bounds, pred.energies, details)
        if kap == 2:
            top = max(abs(b.lower), abs(b.upper))
            v = "all-subcritical" if abs(lam) * top < 1 else "coexistence"
            return CoexistenceReport(v, False, "|lambda| * max|E| versus 1 on the numerical spectrum",
                                     bounds, pred.energies, details)
        if kap == 3:
            top = max(abs(b.lower), abs(b.upper))
            v = "all-subcritical" if abs(lam) * (top * top - 1) < 1 else "coexistence"
            return CoexistenceReport(v, False, "|lambda| (max E^2 - 1) versus 1 on the numerical spectrum",
                                     bounds, pred.energies, details)
        # zeros of a_kappa always lie in the spectrum, so the subcritical side is never empty
        return CoexistenceReport(numeric_verdict(True, sup), False,
                                 "sign of ln|lambda a_kappa| over truncation eigenvalues",
                                 bounds, pred.energies, details)

    red = reduce_to_gaa(model)
    lt, tau = red.lam_eff, red.tau
    details = {}
    if kind == "gaa":
        at = abs(tau)
        if abs(lt) < (1 - at) ** 2:
            return CoexistenceReport("all-subcritical", True, "|lambda| < (1 - |tau|)^2", bounds, pred.energies)
        if 1 - at < abs(lt) < 1 + at:
            return CoexistenceReport("coexistence", True, "1 - |tau| < |lambda| < 1 + |tau|", bounds, pred.energies)
        if abs(lt) > (1 + at) ** 2:
            return CoexistenceReport("all-supercritical", True, "|lambda| > (1 + |tau|)^2", bounds, pred.energies)
    if kind == "peaky":
        K = model.K
        Kq = K / (2 * K + 1)
        details["window_K_form"] = bool(
            1 - Kq * b.upper < lt < 1 - Kq * b.lower)
        details["sufficient_condition"] = bool(1 < lam * K / (2 * K + 1) < 4 * K + 1)
    # exact statement after the GAA reduction: the critical energy lies inside (E_lower, E_upper)
    Ec = pred.energies
    if tau == 0:
        return CoexistenceReport("all-subcritical" if abs(lt) < 1 else "all-supercritical", True,
                                 "tau = 0 reduces to the almost Mathieu operator", bounds)
    sgn = 1.0 if lt >= 0 else -1.0
    ec = red.shift + 2 * (1 - abs(lt)) / (sgn * tau)
    details["critical_energy"] = ec
    if b.lower < ec < b.upper:
        v = "coexistence"
    else:
        # critical side: sgn(lam) tau (E - shift) > 2(1 - |lam|) is supercritical
        above = pred.critical(0.5 * (b.lower + b.upper)) > 0
        v = "all-supercritical" if above else "all-subcritical"
    return CoexistenceReport(v, False, "critical energy against the numerical spectrum bounds",
                             bounds, Ec, details)


# ---------------------------------------------------------------------------


def sweep(model: ModelSpec, energies, params, cfg: PhaseConfig | None = None,
          param: str = "lam", detect: bool = True) -> PhaseDiagram:
    """Classify every (param, E) cell; ``param`` names the ModelSpec field varied."""
    cfg = cfg or PhaseConfig()
    energies = np.asarray(energies, dtype=float)
    params = np.asarray(params, dtype=float)
    if energies.size == 0 or params.size == 0:
        raise DomainError("grids must be nonempty")
    cells = energies.size * params.size
    if cells > cfg.max_cells:
        raise BudgetError(f"{cells} cells exceed the budget of {cfg.max_cells} "
                          f"(about {cells * (cfg.steps * cfg.theta_samples) / 5e7:.0f} s of LE work)")
    if not hasattr(model, param):
        raise DomainError(f"unknown parameter {param!r}")
    if energies.size > 1:
        cfg = replace(cfg, band=float(np.max(np.diff(np.sort(energies)))) )
    shape = (params.size, energies.size)
    labels = np.empty(shape, dtype=object)
    Ln, Lf, acc, ins, iprm = (np.full(shape, np.nan) for _ in range(5))
    preds, crosses = [], []
    for i, pv in enumerate(params):
        kw = {param: int(pv) if param == "kappa" else float(pv)}
        m = replace(model, **kw)
        p = me_prediction(m).energies if m.lam != 0 else ()
        preds.append(tuple(p))
        classes = classify_grid(m, energies, cfg)
        for j, c in enumerate(classes):
            labels[i, j] = c.label
            Ln[i, j] = c.L0
            Lf[i, j] = c.L_formula
            acc[i, j] = np.nan if c.accel is None else c.accel
            ins[i, j] = float(c.in_spectrum)
            iprm[i, j] = np.nan if c.ipr_median is None else c.ipr_median
        crosses.append(tuple(_crossings(m, classes, p, cfg)) if detect else ())
    return PhaseDiagram(energies, params, param, labels, Ln, Lf, acc, ins.astype(bool), iprm,
                        tuple(preds), tuple(crosses))
