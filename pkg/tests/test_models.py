import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mobedge.errors import DomainError, SingularError
from mobedge.models import (
    GOLDEN, ModelSpec, chebyshev_a, chebyshev_a_closed, closed_form_le, me_prediction,
    potential, potential_at_phase, potential_range, reduce_to_gaa, spectrum_bound, strip_width,
)

# tanh(1)/(2 cosh 1), 1/cosh 1 and -2 e^-1/(2 cosh 1), 30-digit evaluation
LR_LAM_EFF = 0.246777173782286537634921232805
LR_TAU = 0.648054273663885399574977353226
LR_SHIFT = -0.238405844044235111880541717395
LR_ME = 2.08616126963048755695581124151  # 2 cosh 1 - 1
FREE3 = 0.962423650119206894995517826849  # ln((3 + sqrt 5)/2)


def test_potential_examples():
    assert potential(ModelSpec("gaa", 1.0, tau=0.0), 0.0, 0) == pytest.approx(2.0)
    m = ModelSpec("mosaic", 7.0, kappa=2)
    for theta in (0.0, 0.13, 0.77):
        assert potential(m, theta, 1) == 0.0
    assert potential(m, 0.0, 0) == pytest.approx(14.0)
    assert potential(ModelSpec("peaky", 1.0, K=1.0), 0.0, 0) == pytest.approx(1.0)


def test_potential_uses_orbit():
    m = ModelSpec("amo", 1.5)
    n = np.arange(-5, 6)
    assert np.allclose(potential(m, 0.2, n), 3.0 * np.cos(2 * np.pi * (0.2 + n * GOLDEN)))


@pytest.mark.parametrize("bad", [
    dict(kind="gaa", lam=1.0, tau=1.5), dict(kind="mosaic", lam=0.0, kappa=2),
    dict(kind="mosaic", lam=1.0, kappa=0), dict(kind="longrange", lam=1.0, p=0.0),
    dict(kind="peaky", lam=-1.0), dict(kind="peaky", lam=1.0, K=0.0), dict(kind="xyz", lam=1.0),
])
def test_model_validation(bad):
    with pytest.raises(DomainError):
        ModelSpec(**bad)


def test_unbounded_gaa_pole():
    m = ModelSpec("gaa", 1.0, tau=1.0)
    assert m.unbounded
    with pytest.raises(SingularError):
        potential_at_phase(m, 0.0)


def test_peaky_reduction():
    for lam in (1.0, 4.0, 5.0):
        red = reduce_to_gaa(ModelSpec("peaky", lam, K=1.0))
        assert red.lam_eff == pytest.approx(lam / 9)
        assert red.tau == pytest.approx(2 / 3)
        assert red.shift == pytest.approx(lam / 3)
        assert red.scale == 1.0


def test_longrange_reduction():
    red = reduce_to_gaa(ModelSpec("longrange", 2.0, p=1.0))
    assert red.tau == pytest.approx(LR_TAU, abs=1e-14)
    assert red.lam_eff == pytest.approx(LR_LAM_EFF, abs=1e-14)
    assert red.shift == pytest.approx(LR_SHIFT, abs=1e-14)
    assert red.scale == 1.0


def test_identity_reductions():
    red = reduce_to_gaa(ModelSpec("gaa", 0.7, tau=-0.3))
    assert (red.lam_eff, red.tau, red.shift, red.scale) == (0.7, -0.3, 0.0, 1.0)
    with pytest.raises(DomainError):
        reduce_to_gaa(ModelSpec("mosaic", 1.0, kappa=2))


@given(st.sampled_from(["longrange", "peaky"]), st.floats(0.2, 8.0), st.floats(0.2, 3.0))
def test_reduction_round_trip(kind, lam, extra):
    m = ModelSpec(kind, lam, p=extra, K=extra)
    red = reduce_to_gaa(m)
    g = red.model(m.alpha)
    theta = np.arange(1000) / 1000
    for n in (0, 3, -11):
        lhs = potential(m, theta, n)
        rhs = red.shift + potential(g, theta, n)
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_closed_form_examples():
    assert closed_form_le(ModelSpec("amo", 2.0), 0.3) == pytest.approx(math.log(2))
    assert closed_form_le(ModelSpec("amo", 0.5), 0.3) == 0.0
    assert closed_form_le(ModelSpec("mosaic", 2.0, kappa=2), 1.0) == pytest.approx(0.5 * math.log(2))
    assert closed_form_le(ModelSpec("gaa", 0.5, tau=0.5), 2.0) == pytest.approx(0.0, abs=1e-15)


@given(st.floats(-4, 4), st.floats(0.05, 5.0))
def test_gaa_tau_zero_is_amo(E, lam):
    assert closed_form_le(ModelSpec("gaa", lam, tau=0.0), E) == pytest.approx(
        closed_form_le(ModelSpec("amo", lam), E), abs=1e-14)


def test_closed_form_vectorised():
    Es = np.linspace(-3, 3, 7)
    out = closed_form_le(ModelSpec("gaa", 0.5, tau=0.5), Es)
    assert out.shape == Es.shape and np.all(out >= 0)


def test_me_examples():
    assert me_prediction(ModelSpec("mosaic", 2.0, kappa=2)).energies == pytest.approx((-0.5, 0.5), abs=1e-12)
    m3 = me_prediction(ModelSpec("mosaic", 2.0, kappa=3)).energies
    assert m3 == pytest.approx((-math.sqrt(1.5), -math.sqrt(0.5), math.sqrt(0.5), math.sqrt(1.5)), abs=1e-12)
    for lam in (4.0, 5.0):
        assert me_prediction(ModelSpec("peaky", lam, K=1.0)).energies == pytest.approx((3.0,), abs=1e-12)
    assert me_prediction(ModelSpec("gaa", 0.5, tau=0.5)).energies == pytest.approx((2.0,))
    assert me_prediction(ModelSpec("longrange", 2.0, p=1.0)).energies == pytest.approx((LR_ME,), abs=1e-12)
    assert me_prediction(ModelSpec("amo", 2.0)).energies == ()


def test_me_mirrored_relation():
    # lam tau < 0 mirrors the edge
    assert me_prediction(ModelSpec("gaa", -0.5, tau=0.5)).energies == pytest.approx((-2.0,))


@given(st.integers(2, 6), st.floats(0.3, 4.0))
def test_mosaic_roots_satisfy_relation(kappa, lam):
    pred = me_prediction(ModelSpec("mosaic", lam, kappa=kappa))
    for E in pred.energies:
        assert abs(abs(lam * chebyshev_a(kappa, E)) - 1.0) < 1e-12


@given(st.floats(0.1, 1.9), st.floats(0.05, 0.95))
def test_gaa_le_changes_sign_at_edge(lam, tau):
    m = ModelSpec("gaa", lam, tau=tau)
    pred = me_prediction(m)
    for E in pred.energies:
        h = 1e-3
        assert closed_form_le(m, E - h) == 0.0
        assert closed_form_le(m, E + h) > 0.0
        assert pred.critical(E - h) < 0 < pred.critical(E + h)


def test_chebyshev_examples():
    for E in (-1.0, 0.0, 3.0):
        assert chebyshev_a(2, E) == E
    for E in (0.0, 2.0):
        assert chebyshev_a(3, E) == E * E - 1
    assert chebyshev_a(5, 2.0) == 5
    assert chebyshev_a(4, -2.0) == -4


@given(st.integers(0, 12), st.floats(-2.5, 2.5))
def test_chebyshev_closed_form(kappa, E):
    assert chebyshev_a_closed(kappa, E) == pytest.approx(chebyshev_a(kappa, E), abs=1e-8 * (1 + abs(E)) ** kappa)


def test_bounds_and_strip():
    assert spectrum_bound(ModelSpec("amo", 2.0)) == (-6.0, 6.0)
    assert potential_range(ModelSpec("mosaic", 2.0, kappa=2)) == (-4.0, 4.0)
    lo, hi = potential_range(ModelSpec("gaa", 0.5, tau=0.5))
    assert (lo, hi) == pytest.approx((-1 / 1.5, 1 / 0.5))
    assert strip_width(ModelSpec("amo", 1.0)) == math.inf
    tau = 0.5
    assert strip_width(ModelSpec("gaa", 1.0, tau=tau)) == pytest.approx(
        math.acosh(1 / tau) / (2 * math.pi))
