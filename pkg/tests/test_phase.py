import math
from dataclasses import replace

import numpy as np
import pytest

from mobedge.errors import BudgetError, DomainError
from mobedge.models import ModelSpec
from mobedge.phase import (
    CRIT, LABELS, OUT, SUB, SUPER, PhaseConfig, classify_energy, classify_grid,
    coexistence_window, detect_me, sweep,
)

FAST = PhaseConfig(steps=20_000, spec_N=512, spec_thetas=8, complex_steps=10_000)
MOSAIC2 = ModelSpec("mosaic", 2.0, kappa=2)


def test_mosaic_sides():
    sub = classify_energy(MOSAIC2, 0.2, FAST)
    assert sub.label == SUB and sub.in_spectrum and sub.strip is not None
    sup = classify_energy(MOSAIC2, 1.2, FAST)
    assert sup.label == SUPER and sup.in_spectrum
    assert sup.L0 == pytest.approx(0.5 * math.log(2 * 1.2), abs=2e-2)


def test_outside_spectrum():
    c = classify_energy(ModelSpec("amo", 1.0), 10.0, FAST)
    assert c.label == OUT and not c.in_spectrum and c.L0 > 0


def test_critical_band():
    # an in-spectrum energy one band away from a supplied edge
    c = classify_energy(MOSAIC2, 0.2, FAST, predicted=(0.205,))
    assert c.label == CRIT and c.in_spectrum


def test_grid_consistency():
    Es = np.linspace(-3.5, 3.5, 29)
    classes = classify_grid(MOSAIC2, Es, FAST)
    assert [c.E for c in classes] == pytest.approx(list(Es))
    for c in classes:
        assert c.label in LABELS
        if c.label == OUT:
            assert c.distance > c.delta_spec
        if c.label in (SUB, SUPER):
            assert abs(c.L0 - c.L_formula) <= max(0.02, 3 * c.tol)
        if c.label == SUB:
            assert abs(c.E) < 0.5
        if c.label == SUPER:
            assert abs(c.E) > 0.5


def test_detect_symmetric_crossings():
    Es = np.round(np.arange(-0.8, 0.8001, 0.01), 10)
    det = detect_me(MOSAIC2, Es, FAST)
    assert det.predicted == pytest.approx((-0.5, 0.5))
    best = sorted(c.best for c in det.crossings)
    assert len(best) == 2
    assert best[0] == pytest.approx(-0.5, abs=0.05) and best[1] == pytest.approx(0.5, abs=0.05)
    assert best[0] == pytest.approx(-best[1], abs=0.02)
    assert {c.direction for c in det.crossings} == {"sub->super", "super->sub"}


def test_coexistence_examples():
    r = coexistence_window(ModelSpec("mosaic", 1.0, kappa=2), 512)
    assert r.verdict == "coexistence" and r.guaranteed
    r = coexistence_window(ModelSpec("gaa", 1.0, tau=0.5), 512)
    assert r.verdict == "coexistence" and r.guaranteed
    r = coexistence_window(ModelSpec("gaa", 0.1, tau=0.5), 512)
    assert r.verdict == "all-subcritical" and r.guaranteed
    assert coexistence_window(ModelSpec("amo", 2.0), 512).verdict == "all-supercritical"


def test_coexistence_peaky_uses_reduction():
    r = coexistence_window(ModelSpec("peaky", 5.0, K=1.0), 512)
    assert r.verdict == "coexistence"
    assert r.details["critical_energy"] == pytest.approx(3.0)


def test_sweep_dimensions_and_weak_coupling():
    Es = np.linspace(-2.5, 2.5, 11)
    lams = np.array([0.1, 2.0])
    diag = sweep(MOSAIC2, Es, lams, FAST, detect=False)
    assert diag.labels.shape == (2, 11) == diag.L_numeric.shape
    weak = diag.labels[0][diag.in_spectrum[0]]
    assert weak.size > 0 and all(lab == SUB for lab in weak)


def test_sweep_budget():
    with pytest.raises(BudgetError):
        sweep(MOSAIC2, np.linspace(-1, 1, 100), np.linspace(1, 2, 100), PhaseConfig(max_cells=1000))
    with pytest.raises(DomainError):
        sweep(MOSAIC2, [], [1.0], FAST)


def test_supercritical_cells_are_localized():
    cfg = replace(FAST, with_ipr=True, band=0.05)
    classes = classify_grid(MOSAIC2, [-0.3, -0.15, 0.15, 0.3, 1.2, 1.5, 2.5, -1.2], cfg)
    sub = [c.ipr_median for c in classes if c.label == SUB and c.ipr_median is not None]
    sup = [c.ipr_median for c in classes if c.label == SUPER and c.ipr_median is not None]
    assert sub and sup
    assert np.median(sup) >= 5 * np.median(sub)
