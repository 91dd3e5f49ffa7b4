"""Homoclinic functions, Melnikov primitive and fast-angle Fourier analysis."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttsdiffusion import (BvpSettings, SystemParams, TrigPerturbation, compute_psi_mu,
                          fourier_fast_angle, frequency_vector, homoclinic_F, homoclinic_G,
                          homoclinic_G_tilde, melnikov_closed_form, melnikov_primitive,
                          predicted_g1, solve_k_bump, solve_one_bump_pi)
from ttsdiffusion.splitting import (FourierSurrogate, action_one_bump, d_eps_bounds,
                                    melnikov_cosine_closed_form, melnikov_cosine_quadrature,
                                    sech2_cos_transform)

F3 = TrigPerturbation.cosine_sum(3)
BETA = (1.0, 0.6180339887498949)
angles = st.lists(st.floats(0, 2 * np.pi), min_size=3, max_size=3).map(np.array)


def params(mu, eps=0.04):
    return SystemParams(eps, 0.5, BETA, mu=mu)


MU_REF = 0.01 * 0.04 ** 2


# -- actions ----------------------------------------------------------------------

def test_action_truncation_independent():
    p = params(MU_REF)
    A = np.array([0.3, 1.2, 2.0])
    vals = [action_one_bump(p, F3, solve_one_bump_pi(p, F3, A, settings=BvpSettings(t_radius=r)))
            for r in (14.0, 16.0, 20.0)]
    assert max(vals) - min(vals) <= 1e-10


def test_action_rejects_chain():
    p = params(MU_REF)
    sol = solve_k_bump(p, F3, np.zeros(3), [0.0, 20.0])
    with pytest.raises(ValueError):
        action_one_bump(p, F3, sol)


@given(angles, st.floats(-3, 3))
@settings(max_examples=10, deadline=None)
def test_F_shift_invariance(A, theta):
    p = params(MU_REF)
    om = frequency_vector(p).omega
    assert homoclinic_F(p, F3, A, theta) == pytest.approx(homoclinic_G(p, F3, A + om * theta),
                                                          abs=1e-9)


def test_G_mu0_constant():
    for A in ([0, 0, 0], [1.0, 2.0, 3.0]):
        assert homoclinic_G(params(0.0), F3, np.array(A)) == pytest.approx(8.0, abs=1e-12)
        assert homoclinic_G_tilde(params(0.0), F3, np.array(A)) == pytest.approx(8.0, abs=1e-12)


def test_G_periodic():
    p = params(MU_REF)
    A = np.array([0.4, 1.1, 2.9])
    g = homoclinic_G(p, F3, A)
    for j in range(3):
        assert homoclinic_G(p, F3, A + 2 * np.pi * np.eye(3)[j]) == pytest.approx(g, abs=1e-10)


def test_G_first_order_melnikov():
    # (G - 8 - mu Gamma) / mu^2 is the same number at both mu: first order is exact
    A = np.array([0.3, 0.5, 0.7])
    q = []
    for mu in (1e-5, 1e-4):
        p = params(mu)
        gam = melnikov_closed_form(F3, frequency_vector(p), A)
        q.append((homoclinic_G(p, F3, A) - 8.0 - mu * gam) / mu ** 2)
    assert abs(q[0] - q[1]) <= 1e-3 * abs(q[1])


def test_action_gradient_matches_fd():
    p = params(1e-3)
    A = np.array([0.3, 0.5, 0.7])
    g = solve_one_bump_pi(p, F3, A).action_gradient_A()
    h = 1e-4
    fd = [(homoclinic_G(p, F3, A + h * e) - homoclinic_G(p, F3, A - h * e)) / (2 * h)
          for e in np.eye(3)]
    assert np.allclose(g, fd, atol=1e-9)


# -- psi_mu ------------------------------------------------------------------------

def test_psi_mu0():
    s = compute_psi_mu(params(0.0), F3, np.array([0.2, 0.4, 0.6]))
    assert s.k_mu == 0.0


@given(angles)
@settings(max_examples=8, deadline=None)
def test_G_tilde_is_G_after_psi(A):
    s = compute_psi_mu(params(MU_REF), F3, A)
    assert s.check_residual <= 1e-8


def test_k_mu_linear_in_mu():
    rng = np.random.default_rng(7)
    As = rng.uniform(0, 2 * np.pi, (6, 3))
    mus = np.array([1e-5, 1e-4, 1e-3])
    kmax = [max(abs(compute_psi_mu(params(m), F3, A, check=False).k_mu) for A in As) for m in mus]
    slope = np.polyfit(np.log(mus), np.log(kmax), 1)[0]
    assert abs(slope - 1.0) <= 0.1


# -- Melnikov -------------------------------------------------------------------------

def test_melnikov_constant_harmonic():
    f1 = TrigPerturbation({(0, 0, 0): 1.0})
    assert melnikov_primitive(f1, np.array([5.0, 0.1, 0.2]), np.zeros(3)) == pytest.approx(4.0,
                                                                                          abs=1e-12)


def test_melnikov_single_cosine():
    f = TrigPerturbation.from_real_terms([((1, 0, 0), 1.0, 0.0)], 3)
    om = np.array([1.0, 0.3, 0.2])
    # 2 pi / sinh(pi/2) from a 30-digit evaluation
    assert melnikov_primitive(f, om, np.zeros(3)) == pytest.approx(2.7302778013234311, abs=1e-10)
    assert melnikov_cosine_closed_form(1.0, 0.0) == pytest.approx(2.7302778013234311, abs=1e-14)
    g = TrigPerturbation.from_real_terms([((1, 0, 0), 0.0, 1.0)], 3)
    assert abs(melnikov_primitive(g, om, np.zeros(3))) <= 1e-14


def test_closed_form_limits():
    assert melnikov_cosine_closed_form(1e-12, 0.0) == pytest.approx(4.0, abs=1e-12)
    assert float(sech2_cos_transform(0.0)) == 4.0
    for w in (0.01, 1.0, 7.0):
        assert abs(melnikov_cosine_closed_form(w, np.pi / 2)) <= 1e-15
    assert float(sech2_cos_transform(1e4)) >= 0.0


@given(st.floats(0.0, 8.0), st.floats(-np.pi, np.pi))
@settings(max_examples=25, deadline=None)
def test_closed_form_vs_quadrature(w, A):
    assert melnikov_cosine_closed_form(w, A) == pytest.approx(melnikov_cosine_quadrature(w, A),
                                                              abs=1e-10)


@given(st.integers(0, 1000))
@settings(max_examples=10, deadline=None)
def test_primitive_dual_path(seed):
    rng = np.random.default_rng(seed)
    terms = [(tuple(rng.integers(-2, 3, 3)), rng.normal(), rng.normal()) for _ in range(4)]
    f = TrigPerturbation.from_real_terms(terms, 3)
    om = frequency_vector(params(0.0)).omega
    A = rng.uniform(0, 2 * np.pi, 3)
    assert melnikov_primitive(f, om, A) == pytest.approx(melnikov_closed_form(f, om, A), abs=1e-10)


def test_d_eps_sandwich():
    for eps in (0.09, 0.0625, 0.04, 0.02, 0.01, 0.005):
        d = 2 * math.pi / (math.sqrt(eps) * math.sinh(math.pi / (2 * math.sqrt(eps))))
        lo, hi = d_eps_bounds(eps)
        assert lo <= d <= hi


# -- fast-angle Fourier analysis ---------------------------------------------------------

@pytest.fixture(scope="module")
def report():
    return fourier_fast_angle(params(MU_REF), F3, [0.0, 1.0, 2.5], M=32)


def test_g1_dominance(report):
    assert report.complete
    assert 0.5 <= report.g1_modulus / report.predicted_g1 <= 2.0
    assert report.predicted_g1 == pytest.approx(predicted_g1(params(MU_REF)))
    assert math.isfinite(report.remainder_R_inf)


def test_g0_is_fast_average(report):
    assert np.allclose(report.samples.mean(axis=1), report.g0_samples, atol=1e-13)


def test_g0_tracks_slow_melnikov(report):
    # g0(A2) - const against mu * (slow-harmonic Melnikov) - const: O(mu^2) discrepancy
    d = (report.g0_samples - report.g0_samples.mean()) - (report.melnikov_g0
                                                           - report.melnikov_g0.mean())
    assert np.max(np.abs(d)) <= 50 * MU_REF ** 2


def test_mu0_no_oscillation():
    r = fourier_fast_angle(params(0.0), F3, [0.5], M=8)
    assert abs(r.g1_samples[0]) <= 1e-14


def test_fft_needs_samples():
    with pytest.raises(ValueError):
        fourier_fast_angle(params(MU_REF), F3, [0.0], M=4)


def test_report_csv(tmp_path, report):
    report.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "A1,A2,A3,G_tilde"
    assert len(lines) == 1 + 3 * 32


# -- Fourier surrogate --------------------------------------------------------------------

def test_surrogate_reproduces_trig_polynomial():
    rng = np.random.default_rng(3)
    terms = [(tuple(rng.integers(-3, 4, 3)), rng.normal(), rng.normal()) for _ in range(6)]
    f = TrigPerturbation.from_real_terms(terms, 3)
    sur = FourierSurrogate.build(lambda A: f.value(np.atleast_2d(A)), 3, M=8, n_check=0)
    P = rng.uniform(0, 2 * np.pi, (50, 3))
    assert np.max(np.abs(sur(P) - f.value(P))) <= 1e-13
    assert np.max(np.abs(sur.gradient(P) - f.gradient(P))) <= 1e-12
    h = 1e-5
    H = sur.hessian(P[:1])[0]
    fd = np.array([(sur.gradient(P[:1] + h * e)[0] - sur.gradient(P[:1] - h * e)[0]) / (2 * h)
                   for e in np.eye(3)])
    assert np.allclose(H, fd, atol=1e-8)
