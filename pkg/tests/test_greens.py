import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mobedge.arithmetic import in_theta_set
from mobedge.cocycle import transfer_product
from mobedge.errors import DomainError, SingularError
from mobedge.greens import (
    classify_site, det_sequences, gaa_structure_check, green, green_direct, interval_det,
    jensen_average, mosaic_recurrence_check, reconstruct, transfer_identity_residual,
    two_block_nodes, uniformity,
)
from mobedge.models import GOLDEN, ModelSpec, closed_form_le, potential_sequence
from mobedge.spectrum import eigh, truncation

FREE = ModelSpec("amo", 0.0)


def dense_det(model, theta, E, n0, size):
    """det(H restricted to [n0, n0 + size - 1] - E) by dense LU."""
    if size <= 0:
        return 1.0 if size == 0 else (0.0 if size == -1 else -1.0)
    d = potential_sequence(model, theta, n0, size) - E
    A = np.diag(d) + np.diag(np.ones(size - 1), 1) + np.diag(np.ones(size - 1), -1)
    return float(np.linalg.det(A))


def test_empty_determinant_and_free_pattern():
    seq = det_sequences(FREE, 0.0, 0.0, 8)
    assert seq.P(0) == 1.0
    P, _ = seq.plain()
    assert np.allclose(P, [1, 0, -1, 0, 1, 0, -1, 0, 1], atol=1e-15)


def test_sequences_match_dense_determinants(rng):
    m = ModelSpec("gaa", 0.8, tau=0.4)
    for _ in range(10):
        theta, E = rng.random(), rng.uniform(-3, 3)
        seq = det_sequences(m, theta, E, 12)
        for k in range(13):
            assert seq.P(k) == pytest.approx(dense_det(m, theta, E, 0, k), rel=1e-10, abs=1e-12)
            assert seq.Q(k) == pytest.approx(dense_det(m, theta, E, 1, k), rel=1e-10, abs=1e-12)


def test_transfer_identity_k5(rng):
    m = ModelSpec("amo", 2.0)
    for _ in range(20):
        theta, E = rng.random(), rng.uniform(-6, 6)
        seq = det_sequences(m, theta, E, 5)
        M = transfer_product(m, E, theta, 5)
        form = -np.array([[seq.P(5), seq.Q(4)], [-seq.P(4), -seq.Q(3)]])
        assert np.max(np.abs(M - form)) < 1e-10
        assert transfer_identity_residual(seq, 5) < 1e-10


@given(st.sampled_from(["amo", "gaa", "mosaic", "peaky"]), st.floats(0, 1), st.floats(-4, 4),
       st.integers(0, 60))
def test_transfer_identity_plain_range(kind, theta, E, k):
    m = ModelSpec(kind, 1.5, tau=0.3, kappa=2)
    seq = det_sequences(m, theta, E, 60)
    assert transfer_identity_residual(seq, k) < 1e-9


def test_transfer_identity_log_form():
    m = ModelSpec("amo", 2.0)
    seq = det_sequences(m, 0.3, 0.7, 10_000)
    assert seq.P_log[-1] > 1000  # far beyond double range in plain form
    for k in (100, 2500, 10_000):
        assert transfer_identity_residual(seq, k) < 1e-8


def test_green_single_site():
    m = ModelSpec("amo", 1.0)
    E, theta = 0.3, 0.1
    g = green(m, theta, E, 0, 0, 0)
    want = 1 / (potential_sequence(m, theta, 0, 1)[0] - E)
    assert g.g_left == pytest.approx(want) and g.g_right == pytest.approx(want)


def test_green_matches_direct_solve(rng):
    done = 0
    while done < 100:
        kind = rng.choice(["amo", "gaa", "mosaic"])
        m = ModelSpec(str(kind), rng.uniform(0.3, 3), tau=0.5, kappa=2)
        theta, E = rng.random(), rng.uniform(-3, 3)
        n1 = int(rng.integers(-50, 50))
        k = int(rng.integers(1, 65))
        n2 = n1 + k - 1
        n = int(rng.integers(n1, n2 + 1))
        try:
            g = green(m, theta, E, n1, n2, n)
        except SingularError:
            continue
        a, b = green_direct(m, theta, E, n1, n2, n)
        assert g.g_left == pytest.approx(a, rel=1e-9, abs=1e-300)
        assert g.g_right == pytest.approx(b, rel=1e-9, abs=1e-300)
        done += 1


def test_green_singular():
    # a single site at its own eigenvalue
    m = ModelSpec("amo", 1.0)
    E = float(potential_sequence(m, 0.2, 0, 1)[0])
    with pytest.raises(SingularError):
        green(m, 0.2, E, 0, 0, 0)
    with pytest.raises(DomainError):
        green(m, 0.2, 0.0, 0, 5, 7)


def test_reconstruction_from_boundary():
    m = ModelSpec("mosaic", 2.0, kappa=2)
    N = 200
    dec = eigh(truncation(m, 0.17, N))
    for idx in (20, 90, 150):
        u, E = dec.vectors[:, idx], dec.values[idx]
        n1, n2 = 60, 120
        for n in (61, 90, 119):
            ge = green(m, 0.17, E, n1, n2, n)
            assert abs(u[n] - reconstruct(ge, u[n1 - 1], u[n2 + 1])) < 1e-8


def test_interval_det_empty():
    assert interval_det(FREE, 0.0, 0.0, 5, 4) == (1.0, 0.0)


def test_regular_sites_supercritical():
    m = ModelSpec("mosaic", 2.0, kappa=2)
    E = 1.2
    dec = eigh(truncation(m, 0.0, 1024), vectors=False)
    E = float(dec.values[np.argmin(np.abs(dec.values - E))])
    xi = 0.8 * closed_form_le(m, E)
    sites = [n for n in range(-400, 401) if 300 <= abs(n) <= 400][::4]
    flags = [classify_site(m, 0.0, E, n, 200, xi).flag for n in sites]
    assert flags.count("regular") >= 0.9 * len(sites)


def test_free_sites_singular():
    for n in (0, 17, -40):
        assert classify_site(FREE, 0.0, 0.3, n, 100, 0.1).flag == "singular"


def test_window_margins_and_monotone_xi():
    m = ModelSpec("amo", 3.0)
    k = 70
    rep = classify_site(m, 0.2, 0.5, 10, k, 0.5)
    assert rep.flag == "regular"
    assert min(abs(10 - rep.n1), abs(10 - rep.n2)) >= k / 7
    assert rep.n2 - rep.n1 == k - 1
    lower = classify_site(m, 0.2, 0.5, 10, k, 0.25)
    assert lower.flag == "regular" and lower.margin >= rep.margin


def test_gaa_structure(rng):
    for _ in range(5):
        asym, high = gaa_structure_check(ModelSpec("gaa", 1.0, tau=0.5), rng.uniform(-3, 3), 32)
        assert asym < 1e-9 and high < 1e-9
    asym, high = gaa_structure_check(ModelSpec("amo", 1.0), 0.4, 32)
    assert asym < 1e-9 and high < 1e-9


@given(st.floats(0.3, 3), st.floats(-3, 3), st.floats(0, 1), st.integers(2, 40))
def test_mosaic_recurrences(lam, E, theta, k):
    assert max(mosaic_recurrence_check(lam, E, theta, k)) < 1e-10


def test_mosaic_recurrence_zero_energy():
    m = ModelSpec("mosaic", 1.7, kappa=2)
    seq = det_sequences(m, 0.3, 0.0, 30)
    for k in range(2, 15):
        assert seq.Q(2 * k - 1) == pytest.approx(-seq.Q(2 * k - 3), rel=1e-12, abs=1e-12)


def test_mosaic_recurrence_base_case():
    lam, E, theta = 1.3, 0.7, 0.21
    m = ModelSpec("mosaic", lam, kappa=2)
    sh = theta - 2 * GOLDEN

    def Q(t, size):
        return dense_det(m, t, E, 1, size)

    def P(t, size):
        return dense_det(m, t, E, 0, size)

    assert E * Q(theta, 2) == pytest.approx(-Q(theta, 3) - Q(theta, 1))
    assert E * P(theta, 4) == pytest.approx(-Q(sh, 5) - Q(theta, 3))
    assert E * E * P(theta, 3) == pytest.approx(Q(sh, 5) + Q(theta, 3) + Q(sh, 3) + Q(theta, 1))
    assert max(mosaic_recurrence_check(lam, E, theta, 2)) < 1e-12


def test_uniformity_chebyshev_nodes():
    k = 32
    nodes = (2 * np.arange(k + 1) + 1) / (4 * (k + 1))
    assert uniformity(nodes) <= 0.05


def test_uniformity_two_block():
    theta = float(np.random.default_rng(7).random())
    assert in_theta_set(theta, GOLDEN, 2.0, 1e-9).member
    nodes = two_block_nodes(theta, GOLDEN, 201)
    assert nodes.size == 202
    assert uniformity(nodes) <= 0.1


def test_uniformity_repeated_node():
    with pytest.raises(DomainError):
        uniformity([0.1, 0.2, 0.1])


@pytest.mark.parametrize("tau", [0.3, 0.7])
def test_jensen_average(tau):
    want = math.log((1 + math.sqrt(1 - tau * tau)) / 2)
    assert jensen_average(tau, 0.123, GOLDEN, 100_000) == pytest.approx(want, abs=1e-2)
