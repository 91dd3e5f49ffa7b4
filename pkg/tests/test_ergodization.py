"""Diophantine constants, ergodization times, epoch schedules."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttsdiffusion import (SystemParams, ergodization_time, estimate_gamma, frequency_vector,
                          lemma33_basis, lemma33_parameters, select_epochs, transition_count)
from ttsdiffusion.ergodization import (CapExceeded, ResonanceError, first_hit_times,
                                       probe_points, torus_distance)

GOLD = (1 + math.sqrt(5)) / 2
PLASTIC = 1.3247179572447460


def test_resonance_witness():
    with pytest.raises(ResonanceError) as e:
        estimate_gamma([1.0, 1.0], 1.0, 10)
    k = e.value.witness
    assert abs(k[0] + k[1]) == 0 and np.any(k != 0)


def test_golden_gamma():
    c = estimate_gamma([1.0, GOLD], 1.0, 100)
    assert c.gamma > 0.38
    # 30-digit brute force over |k| <= 100 with the l1 weight gives 1 at k = (1, 0)
    assert c.gamma == pytest.approx(1.0, rel=1e-12)
    # with the max-norm weight the minimum moves to k = (-1, 1): |1 - g| * 1
    assert estimate_gamma([1.0, GOLD], 1.0, 100, norm="linf").gamma == pytest.approx(GOLD - 1)


def test_plastic_gamma():
    # 30-digit brute force for omega = (1, 1/g, 1/g^2), tau = 2, |k| <= 20
    c = estimate_gamma([1.0, 1 / PLASTIC, 1 / PLASTIC ** 2], 2.0, 20)
    assert c.gamma == pytest.approx(0.5698402909980533, rel=1e-12)


@given(st.integers(3, 15))
@settings(max_examples=10, deadline=None)
def test_gamma_monotone_in_K(K):
    om = frequency_vector(SystemParams(0.04, 0.5, (1.0, 1 / GOLD))).omega
    assert estimate_gamma(om, 2.0, 2 * K).gamma <= estimate_gamma(om, 2.0, K).gamma


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_gamma_is_lower_bound(seed):
    rng = np.random.default_rng(seed)
    om = rng.normal(size=3)
    c = estimate_gamma(om, 2.0, 6)
    ks = rng.integers(-6, 7, (200, 3))
    ks = ks[np.any(ks != 0, axis=1)]
    vals = np.abs(ks @ om) * np.abs(ks).sum(1) ** 2
    assert np.all(vals >= c.gamma * (1 - 1e-12))


def test_one_dimensional_flow():
    # only the first coordinate moves: covers the circle in one period
    om = np.array([3.0, 0.0, 0.0])
    P = np.column_stack([np.linspace(0, 2 * np.pi, 200, endpoint=False), np.zeros(200),
                         np.zeros(200)])
    sigma = 0.05
    T = ergodization_time(om, sigma, P).T_e
    # a continuum of probes needs (2 pi - 2 sigma)/|Omega_1|; the grid loses one step
    assert (2 * np.pi - 2 * sigma - 2 * np.pi / 200) / 3 - 1e-12 <= T <= 2 * np.pi / 3


def test_first_hits_match_scan():
    om = np.array([1.0, 1 / GOLD, 1 / GOLD ** 2 + 0.01])
    sigma = 0.3
    P = probe_points(3, 4)
    t = first_hit_times(om, sigma, P)
    grid = np.arange(0, t.max() + 1, 1e-3)
    X = np.outer(grid, om)
    for p, th in zip(P, t):
        d = torus_distance(X - p)
        first = grid[np.argmax(d < sigma)]
        assert abs(first - th) <= 1.1e-3


def test_ergodization_monotone_in_sigma():
    om = np.array([1.0, 1 / PLASTIC, 1 / PLASTIC ** 2])
    P = probe_points(3, 9)
    Ts = [ergodization_time(om, s, P).T_e for s in (0.4, 0.2, 0.1)]
    assert Ts[0] <= Ts[1] <= Ts[2]


def test_ergodization_bound_ratio_stable():
    om = np.array([1.0, 1 / PLASTIC, 1 / PLASTIC ** 2])
    g = estimate_gamma(om, 2.0, 20).gamma
    P = probe_points(3, 17)
    C = [ergodization_time(om, s, P, omega_norm=np.linalg.norm(om), gamma=g, tau=2.0).bound_ratio
         for s in (0.2, 0.1, 0.05)]
    assert max(C) / min(C) <= 4


def test_golden_2torus_three_distance():
    om = np.array([1.0, 1 / GOLD])
    P = probe_points(2, 40)
    for s in (0.2, 0.1, 0.05):
        T = ergodization_time(om, s, P).T_e
        assert T * s <= 40          # T = O(1/sigma) on T^2


def test_cap_exceeded():
    with pytest.raises(CapExceeded):
        ergodization_time([1.0, 0.0, 0.0], 0.1, np.array([[0.0, 1.0, 0.0]]), t_cap=100)


def test_epochs_periodic_lattice():
    Om1 = np.array([2 * np.pi, 0.0, 0.0])
    sch = select_epochs(Om1, 0.1, 4, 2.5, np.eye(3)[:, 1:])
    assert np.allclose(sch.etas, [0, 3, 6, 9], atol=1e-12)
    assert np.allclose(sch.chis, 0, atol=1e-12)


@given(st.floats(0.01, 0.05), st.integers(2, 6), st.floats(10, 200))
@settings(max_examples=15, deadline=None)
def test_epochs_recheck(eps, k, gap):
    p = SystemParams(eps, 0.5, (1.0, 1 / GOLD))
    b = lemma33_basis(p)
    sigma = lemma33_parameters(p.with_mu(1e-6)).sigma
    sch = select_epochs(b.Omega[:, 0], sigma, k, gap, b.Omega[:, 1:])
    chk = sch.check(b.Omega, sigma)
    assert chk["offsets_ok"] and chk["spacing_ok"]
    assert chk["max_c1"] <= 1e-9
    assert np.all(np.diff(sch.etas) >= gap - 1e-9)
    # chi_i = eta_i Omega_1 mod 2 pi, rebuilt from scratch
    X = np.outer(sch.etas, b.Omega[:, 0])
    R = X - 2 * np.pi * np.round(X / (2 * np.pi))
    assert np.allclose(R, sch.chis @ b.Omega[:, 1:].T, atol=1e-9)


def test_transition_count():
    assert transition_count(1.0, 1.0, 1.0) == 9
    assert transition_count(1e-300, 1.0, 1.0) == 1
    with pytest.raises(ValueError):
        transition_count(0.0, 1.0, 1.0)


def test_k_grows_polynomially():
    ks = []
    eps = np.array([0.04, 0.02, 0.01, 0.005])
    for e in eps:
        p = SystemParams(e, 0.5, (1.0, 1 / GOLD), mu=0.01 * e ** 2)
        cp = lemma33_parameters(p)
        ks.append(8 * 1e-3 * cp.rho / cp.delta3)
    slope = np.polyfit(np.log(1 / eps), np.log(ks), 1)[0]
    assert slope == pytest.approx(3.0, abs=1e-9)     # eps^{-(a+1/2)} / mu = eps^{-3}


def test_schedule_table(tmp_path):
    sch = select_epochs(np.array([1.0, 0.1, 0.05]), 0.2, 3, 50.0, np.eye(3)[:, 1:])
    assert sch.table().shape == (3, 3)
    assert set(sch.to_dict()) == {"etas", "chis", "spacing_lo", "spacing_hi"}
