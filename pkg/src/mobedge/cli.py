"""Command-line front end.

    mobedge <subcommand> key=value ... [@config-file]

Subcommands: lyapunov, spectrum, phase-diagram, detect-me, reduce, verify.
A config file holds one ``key=value`` per line.  Output goes to ``out=`` (or
stdout); CSV output starts with ``#`` header lines recording the full
configuration, seed, thread count and tool version.

Exit codes: 0 success, 1 a verify check failed, 2 invalid configuration,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from . import arithmetic as ar
from ._parallel import default_threads
from .checks import CHECKS, run_suite
from .cocycle import OneStepCocycle, lyapunov
from .errors import BudgetError, ConvergenceError, DomainError, MobedgeError, SingularError
from .models import KINDS, ModelSpec, closed_form_le, me_prediction, reduce_to_gaa, spectrum_bound
from .phase import PhaseConfig, detect_me, sweep
from .spectrum import eigh, theta_grid, truncation

SUBCOMMANDS = ("lyapunov", "spectrum", "phase-diagram", "detect-me", "reduce", "verify")
EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str = "amo"
    lam: float = 2.0
    tau: float = 0.0
    kappa: int = 1
    p: float = 1.0
    K: float = 1.0
    alpha: str = "golden"
    N: int = 2048
    steps: int = 100_000
    thetas: int = 16
    seed: int = 0
    threads: int = 1
    out: str = "-"
    format: str = "csv"
    E: str = ""  # comma list or start:stop:step
    lambdas: str = ""
    quick: bool = False
    checks: str = ""

    def header(self, subcommand: str) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "out"}
        d["subcommand"] = subcommand
        d["alpha_value"] = repr(resolve_alpha(self.alpha))
        return d


ALIASES = {"lambda": "lam", "theta_samples": "thetas", "energies": "E"}


def _coerce(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    t = kinds[name]
    try:
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
        if t == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_settings(tokens) -> RunConfig:
    values: dict = {}
    for tok in tokens:
        if "=" not in tok:
            raise ConfigError(f"expected key=value, got {tok!r}")
        key, raw = tok.split("=", 1)
        key = ALIASES.get(key.strip(), key.strip())
        if key not in {f.name for f in fields(RunConfig)}:
            raise ConfigError(f"unknown setting {key!r}")
        values[key] = _coerce(key, raw.strip())
    cfg = RunConfig(**values)
    if cfg.model not in KINDS:
        raise ConfigError(f"model must be one of {', '.join(KINDS)}")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if cfg.threads < 1 or cfg.N < 2 or cfg.steps < 1 or cfg.thetas < 1:
        raise ConfigError("threads, N, steps and thetas must be positive")
    return cfg


def resolve_alpha(sel: str) -> float:
    """'golden', a decimal in (0, 1), or 'cf:a1,a2,...' (periodic partial quotients)."""
    if sel == "golden":
        return float(ar.golden_mean())
    if sel.startswith("cf:"):
        try:
            quotients = [int(a) for a in sel[3:].split(",") if a.strip()]
        except ValueError:
            raise ConfigError(f"bad partial quotients in {sel!r}") from None
        return float(ar.from_partial_quotients(quotients))
    try:
        x = float(sel)
    except ValueError:
        raise ConfigError(f"alpha must be golden, a decimal or cf:..., got {sel!r}") from None
    if not 0 < x < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    cf = ar.cf_expand(x, 30)
    if cf.terminated:
        raise ConfigError(f"alpha={sel} is numerically rational (continued fraction terminates)")
    ok, _ = ar.best_approx_check(cf)
    if not ok:
        raise ConfigError(f"alpha={sel} fails the convergent certification")
    return x


def build_model(cfg: RunConfig, lam: float | None = None) -> ModelSpec:
    return ModelSpec(cfg.model, cfg.lam if lam is None else lam, resolve_alpha(cfg.alpha),
                     tau=cfg.tau, kappa=cfg.kappa, p=cfg.p, K=cfg.K)


def parse_grid(spec: str, default: np.ndarray | None = None) -> np.ndarray:
    if not spec:
        if default is None:
            raise ConfigError("a grid is required")
        return default
    try:
        if ":" in spec:
            a, b, s = (float(x) for x in spec.split(":"))
            if s <= 0 or b < a:
                raise ConfigError(f"bad range {spec!r}")
            return np.round(np.arange(a, b + s / 2, s), 12)
        return np.array([float(x) for x in spec.split(",") if x.strip()])
    except ValueError:
        raise ConfigError(f"bad grid {spec!r}") from None


def _energy_default(model: ModelSpec, step: float) -> np.ndarray:
    lo, hi = spectrum_bound(model)
    return np.round(np.arange(math.floor(lo / step) * step, hi + step / 2, step), 12)


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "" if not np.isfinite(v) else repr(float(v))
    return str(v)


def write_csv(buf: io.StringIO, header: dict, columns, rows, trailer=()):
    buf.write(f"# mobedge {__version__}\n")
    buf.write("# config " + json.dumps(header, sort_keys=True) + "\n")
    buf.write(f"# seed={header['seed']} threads={header['threads']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    for line in trailer:
        buf.write(f"# {line}\n")


def _emit(cfg: RunConfig, text: str, stdout):
    if cfg.out == "-":
        stdout.write(text)
    else:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _plain(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def _phase_cfg(cfg: RunConfig) -> PhaseConfig:
    return PhaseConfig(steps=cfg.steps, spec_N=cfg.N, spec_thetas=cfg.thetas, seed=cfg.seed,
                       threads=cfg.threads, with_ipr=True)


def cmd_lyapunov(cfg: RunConfig) -> tuple[str, int]:
    model = build_model(cfg)
    Es = parse_grid(cfg.E, _energy_default(model, 0.05))
    rows = []
    for E in Es:
        est = lyapunov(OneStepCocycle(model, float(E)), cfg.steps, 8, cfg.seed, cfg.threads)
        rows.append((float(E), est.value, est.stderr, float(closed_form_le(model, E)), est.converged))
    cols = ("E", "L_numeric", "stderr", "L_formula", "converged")
    if cfg.format == "json":
        return _json({"config": cfg.header("lyapunov"), "rows": [dict(zip(cols, r)) for r in rows]}), EXIT_OK
    buf = io.StringIO()
    write_csv(buf, cfg.header("lyapunov"), cols, rows)
    return buf.getvalue(), EXIT_OK


def cmd_spectrum(cfg: RunConfig) -> tuple[str, int]:
    model = build_model(cfg)
    rows = []
    for t in theta_grid(cfg.thetas):
        dec = eigh(truncation(model, float(t), cfg.N), seed=cfg.seed + 12345)
        w = dec.vectors ** 2
        iprs = (w * w).sum(axis=0)
        rows.extend((model.label(), float(t), cfg.N, i, float(v), float(q))
                    for i, (v, q) in enumerate(zip(dec.values, iprs)))
    cols = ("model_id", "theta", "N", "index", "eigenvalue", "ipr")
    if cfg.format == "json":
        return _json({"config": cfg.header("spectrum"), "rows": [dict(zip(cols, r)) for r in rows]}), EXIT_OK
    buf = io.StringIO()
    write_csv(buf, cfg.header("spectrum"), cols, rows)
    return buf.getvalue(), EXIT_OK


def _crossing_dict(c) -> dict:
    return {"E": c.E, "refined": c.refined, "best": c.best, "lower": c.lower, "upper": c.upper,
            "direction": c.direction, "predicted": c.predicted, "gap": c.gap}


def cmd_phase_diagram(cfg: RunConfig) -> tuple[str, int]:
    model = build_model(cfg)
    Es = parse_grid(cfg.E, _energy_default(model, 0.01))
    lams = parse_grid(cfg.lambdas, np.array([cfg.lam]))
    diag = sweep(model, Es, lams, _phase_cfg(cfg), param="lam")
    rows = []
    for i, lam in enumerate(diag.params):
        for j, E in enumerate(diag.energies):
            acc = diag.accel[i, j]
            rows.append((float(lam), float(E), diag.labels[i, j], diag.L_numeric[i, j], diag.L_formula[i, j],
                         None if np.isnan(acc) else int(acc), bool(diag.in_spectrum[i, j]),
                         diag.ipr_median[i, j]))
    summary = {
        "config": cfg.header("phase-diagram"),
        "predicted": {repr(float(l)): list(p) for l, p in zip(diag.params, diag.predicted)},
        "crossings": {repr(float(l)): [_crossing_dict(c) for c in cs]
                      for l, cs in zip(diag.params, diag.crossings)},
    }
    cols = ("lambda", "E", "class", "L_numeric", "L_formula", "accel", "in_spectrum", "ipr_median")
    if cfg.format == "json":
        summary["rows"] = [dict(zip(cols, r)) for r in rows]
        return _json(summary), EXIT_OK
    trailer = []
    for lam, cs, pr in zip(diag.params, diag.crossings, diag.predicted):
        trailer.append(f"predicted lambda={float(lam)!r}: " + " ".join(f"{p:.6g}" for p in pr))
        for c in cs:
            trailer.append(f"crossing lambda={float(lam)!r} E={c.best:.6f} bracket=[{c.lower:.4f},{c.upper:.4f}] "
                           f"{c.direction} predicted={_fmt(c.predicted)} gap={_fmt(c.gap)}")
    buf = io.StringIO()
    write_csv(buf, cfg.header("phase-diagram"), cols, rows, trailer)
    if cfg.out != "-":
        side = cfg.out.rsplit(".", 1)[0] + ".json"
        with open(side, "w", encoding="utf-8") as fh:
            fh.write(_json(summary))
    return buf.getvalue(), EXIT_OK


def cmd_detect_me(cfg: RunConfig) -> tuple[str, int]:
    model = build_model(cfg)
    Es = parse_grid(cfg.E, _energy_default(model, 0.01))
    det = detect_me(model, Es, _phase_cfg(cfg))
    cols = ("E_mid", "refined", "best", "lower", "upper", "direction", "predicted", "gap")
    rows = [(c.E, c.refined, c.best, c.lower, c.upper, c.direction, c.predicted, c.gap) for c in det.crossings]
    if cfg.format == "json":
        return _json({"config": cfg.header("detect-me"), "predicted": list(det.predicted),
                      "crossings": [_crossing_dict(c) for c in det.crossings],
                      "diagnostic": det.diagnostic}), EXIT_OK
    buf = io.StringIO()
    trailer = ["predicted " + " ".join(f"{p:.6g}" for p in det.predicted)]
    if det.diagnostic:
        trailer.append(det.diagnostic)
    write_csv(buf, cfg.header("detect-me"), cols, rows, trailer)
    return buf.getvalue(), EXIT_OK


def cmd_reduce(cfg: RunConfig) -> tuple[str, int]:
    model = build_model(cfg)
    red = reduce_to_gaa(model)
    pred = me_prediction(model)
    return _json({"model": model.params(), "lambda_eff": red.lam_eff, "tau": red.tau,
                  "shift": red.shift, "scale": red.scale,
                  "critical_energies": list(pred.energies), "relation": pred.relation}), EXIT_OK


def cmd_verify(cfg: RunConfig) -> tuple[str, int]:
    names = [n.strip() for n in cfg.checks.split(",") if n.strip()] or list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks: {', '.join(unknown)}")
    report = run_suite(names, quick=cfg.quick)
    out = report.to_dict()
    out["config"] = {"quick": cfg.quick, "threads": cfg.threads, "seed": cfg.seed, "version": __version__}
    return _json(out), EXIT_OK if report.passed else EXIT_CHECK_FAILED


COMMANDS = {
    "lyapunov": cmd_lyapunov,
    "spectrum": cmd_spectrum,
    "phase-diagram": cmd_phase_diagram,
    "detect-me": cmd_detect_me,
    "reduce": cmd_reduce,
    "verify": cmd_verify,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobedge", fromfile_prefix_chars="@",
        description="Spectra, Lyapunov exponents and mobility edges of 1D quasiperiodic operators.",
        epilog="Settings are key=value pairs, e.g. model=mosaic kappa=2 lambda=2 alpha=golden; "
               "@file reads one setting per line.")
    parser.add_argument("--version", action="version", version=f"mobedge {__version__}")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("settings", nargs="*", help="key=value settings")
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        tokens = [t for t in args.settings if not t.lstrip().startswith("#")]
        if not any(t.startswith("threads=") for t in tokens):
            tokens.append(f"threads={default_threads()}")
        cfg = parse_settings(tokens)
        text, code = COMMANDS[args.subcommand](cfg)
    except (ConfigError, DomainError, BudgetError) as exc:
        stderr.write(f"mobedge: invalid configuration: {exc}\n")
        return EXIT_CONFIG
    except (ConvergenceError, SingularError, MobedgeError, FloatingPointError) as exc:
        stderr.write(f"mobedge: numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        stderr.write(f"mobedge: {exc}\n")
        return EXIT_CONFIG
    _emit(cfg, text, stdout)
    return code


def main() -> None:
    sys.exit(run())
