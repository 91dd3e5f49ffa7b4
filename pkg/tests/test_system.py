"""Model definition, perturbation evaluation and the two integrators."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttsdiffusion import (FullState, SystemParams, TrigPerturbation, eval_perturbation,
                          frequency_vector, integrate_full, integrate_pendulum,
                          unperturbed_separatrix)
from ttsdiffusion.io import trajectory_from_csv, trajectory_to_csv


def test_frequency_vector_examples():
    fv = frequency_vector(SystemParams(1.0, 1.0, (1.0, 0.0)))
    assert np.allclose(fv.omega, [1, 1, 0], atol=0)
    fv = frequency_vector(SystemParams(0.25, 0.5, (1.0, 0.0)))
    assert np.allclose(fv.omega, [2, 0.5, 0], rtol=1e-15)
    fv = frequency_vector(SystemParams(0.04, 1.0, (0.6, 0.8)))
    assert np.allclose(fv.omega, [5, 0.024, 0.032], rtol=1e-14)
    assert fv.norm == pytest.approx(math.sqrt(25 + 0.024 ** 2 + 0.032 ** 2), rel=1e-15)


@given(st.floats(1e-4, 1.0), st.floats(0.05, 3.0))
def test_fast_frequency_exact(eps, a):
    fv = frequency_vector(SystemParams(eps, a, (0.3, 0.7)))
    assert fv.omega[0] == 1.0 / math.sqrt(eps)
    assert np.linalg.norm(fv.omega[1:]) == pytest.approx(eps ** a, rel=1e-13)


def test_params_invariants():
    with pytest.raises(ValueError):
        SystemParams(0.0, 0.5, (1, 0))
    with pytest.raises(ValueError):
        SystemParams(0.1, 0.5, (1,))          # n = 2
    with pytest.raises(ValueError):
        SystemParams(0.1, 0.5, (0, 0))
    p = SystemParams(0.04, 0.5, (3, 4), mu=1e-6)
    assert p.beta == pytest.approx((0.6, 0.8))
    assert p.admissible
    assert not p.with_mu(1.0).admissible
    assert SystemParams(0.04, 0.5, (3, 4), normalize_beta=False).beta == (3.0, 4.0)


def test_cosine_sum_examples():
    f = TrigPerturbation.cosine_sum(4)
    v, g = eval_perturbation(f, np.zeros(4))
    assert v == pytest.approx(4.0, abs=1e-15)
    assert np.allclose(g, 0, atol=1e-15)
    v, _ = eval_perturbation(f, [np.pi, 0, 0, 0])
    assert v == pytest.approx(2.0, abs=1e-14)


def test_empty_table_is_zero():
    f = TrigPerturbation({}, n=3)
    v, g = eval_perturbation(f, np.ones(3))
    assert v == 0 and np.all(g == 0)
    assert f.sup_norm == 0.0


def test_conjugate_symmetry_enforced():
    with pytest.raises(ValueError):
        TrigPerturbation({(1, 0, 0): 1.0}, n=3)


def _random_terms(rng, n=3, m=5):
    return [(tuple(rng.integers(-3, 4, n)), rng.normal(), rng.normal()) for _ in range(m)]


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_eval_matches_termwise_oracle(seed):
    rng = np.random.default_rng(seed)
    terms = _random_terms(rng)
    f = TrigPerturbation.from_real_terms(terms, 3, widths=[0.5, 0.25])
    phi = rng.uniform(-10, 10, 3)
    val = sum(a * math.cos(np.dot(k, phi)) + b * math.sin(np.dot(k, phi)) for k, a, b in terms)
    grad = sum(np.asarray(k) * (-a * math.sin(np.dot(k, phi)) + b * math.cos(np.dot(k, phi)))
               for k, a, b in terms)
    v, g = eval_perturbation(f, phi)
    assert v == pytest.approx(val, abs=1e-14 * (1 + abs(val)) * 10)
    assert np.allclose(g, grad, atol=1e-13)
    # real for real phi and the strip bound dominates the real sup
    grid = rng.uniform(0, 2 * np.pi, (500, 3))
    assert np.max(np.abs(f.value(grid))) <= f.sup_norm + 1e-12


def test_perturbation_roundtrip():
    f = TrigPerturbation.cosine_sum(3)
    g = TrigPerturbation.from_dict(f.to_dict())
    phi = np.array([0.3, 1.1, -2.0])
    assert g.value(phi) == f.value(phi)


def test_separatrix_examples():
    q, p = unperturbed_separatrix(1.7, 1.7)
    assert q == pytest.approx(np.pi, abs=1e-15) and p == pytest.approx(2.0, abs=1e-15)
    q, p = unperturbed_separatrix(60.0)
    assert q == pytest.approx(2 * np.pi, abs=1e-15) and abs(p) < 1e-25
    s = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    q, p = unperturbed_separatrix(s)
    assert np.max(np.abs(p ** 2 / 2 + np.cos(q) - 1)) <= 1e-14


def test_separatrix_ode_residual():
    # q'' = sin q with q'' from the closed form p' = -2 sech t tanh t
    t = np.linspace(-15, 15, 301)
    q, p = unperturbed_separatrix(t)
    qdd = -2.0 / np.cosh(t) * np.tanh(t)
    assert np.max(np.abs(qdd - np.sin(q))) <= 1e-12


def test_full_equilibrium_mu0():
    p = SystemParams(0.04, 0.5, (1, 0.6), mu=0.0)
    f = TrigPerturbation.cosine_sum(3)
    I0 = np.array([0.1, -0.2, 0.3])
    tr = integrate_full(p, f, FullState(np.zeros(3), I0, 0.0, 0.0), (0, 50), n_samples=101)
    assert np.all(tr.I == I0)
    assert np.all(tr.q == 0) and np.all(tr.p == 0)


def test_full_separatrix_mu0():
    p = SystemParams(0.04, 0.5, (1, 0.6), mu=0.0)
    f = TrigPerturbation.cosine_sum(3)
    err = 0.0
    for t_end in (10.0, -10.0):
        tr = integrate_full(p, f, FullState(np.zeros(3), np.zeros(3), np.pi, 2.0),
                            (0.0, t_end), tol=1e-13, n_samples=201)
        q0, _ = unperturbed_separatrix(tr.times)
        err = max(err, np.max(np.abs(tr.q - q0)))
    assert err <= 1e-8


def test_full_energy_and_oscillator_energies(ref_params, cos3):
    st0 = FullState([0.1, 0.2, 0.3], [0.0, 0.0, 0.0], 0.5, 0.3)
    tr = integrate_full(ref_params.with_mu(1e-3), cos3, st0, (0, 1000.0), n_samples=501)
    assert tr.energy_drift <= 1e-8
    tr0 = integrate_full(ref_params.with_mu(0.0), cos3, st0, (0, 200.0), n_samples=101)
    om = frequency_vector(ref_params).omega
    assert np.max(np.abs(tr0.I * om - (tr0.I[0] * om))) == 0.0


def test_angles_reduced(ref_params, cos3):
    tr = integrate_full(ref_params, cos3, FullState([0, 0, 0], [0, 0, 0], 0.1, 0.0), (0, 30),
                        n_samples=31)
    assert np.all((tr.phi >= 0) & (tr.phi < 2 * np.pi))
    assert FullState([-1.0, 7.0, 0.0], [0, 0, 0], 0, 0).phi.min() >= 0


def test_pendulum_matches_full(cos3):
    p = SystemParams(0.04, 0.5, (1, 0.6), mu=0.05)
    A = np.array([0.4, 1.0, -0.3])
    t_eval = np.linspace(-20, 20, 81)
    err = 0.0
    for lo, hi, sl in ((0.0, 20.0, slice(40, None)), (0.0, -20.0, slice(None, 41))):
        te = t_eval[sl] if hi > 0 else t_eval[sl][::-1]
        t, q, pp = integrate_pendulum(p, cos3, A, np.pi, 2.0, (lo, hi), tol=1e-12, t_eval=te)
        tr = integrate_full(p, cos3, FullState(A, np.zeros(3), np.pi, 2.0), (lo, hi), tol=1e-12,
                            t_eval=te)
        if hi < 0:        # full trajectories are stored in increasing time
            q, pp = q[::-1], pp[::-1]
        err = max(err, np.max(np.abs(q - tr.q)), np.max(np.abs(pp - tr.p)))
    assert err <= 1e-9


def test_pendulum_mu0_separatrix(cos3):
    p = SystemParams(0.04, 0.5, (1, 0.6), mu=0.0)
    t, q, _ = integrate_pendulum(p, cos3, np.zeros(3), np.pi, 2.0, (0, 10), tol=1e-13)
    assert np.max(np.abs(q - unperturbed_separatrix(t)[0])) <= 1e-8


def test_pendulum_time_reversal(cos3):
    # f even and A = 0: q(-t) = 2 pi - q(t) when q(0) = pi
    p = SystemParams(0.04, 0.5, (1, 0.6), mu=0.05)
    t, qf, _ = integrate_pendulum(p, cos3, np.zeros(3), np.pi, 1.7, (0, 8), tol=1e-12,
                                  t_eval=np.linspace(0, 8, 41))
    _, qb, _ = integrate_pendulum(p, cos3, np.zeros(3), np.pi, 1.7, (0, -8), tol=1e-12,
                                  t_eval=-np.linspace(0, 8, 41))
    assert np.max(np.abs(qb - (2 * np.pi - qf))) <= 1e-9


def test_bad_tolerance(cos3, ref_params):
    with pytest.raises(ValueError):
        integrate_pendulum(ref_params, cos3, np.zeros(3), 0, 0, (0, 1), tol=0)


def test_trajectory_csv_roundtrip(tmp_path, ref_params, cos3):
    tr = integrate_full(ref_params, cos3, FullState([0, 0, 0], [0, 0, 0], 0.1, 0.0), (0, 5),
                        n_samples=11)
    path = trajectory_to_csv(tr, tmp_path / "t.csv", "abc")
    assert path.read_text().splitlines()[1] == ("t,phi_1,phi_2,phi_3,I_1,I_2,I_3,q,p,energy")
    back = trajectory_from_csv(path)
    assert np.array_equal(back.q, tr.q) and np.array_equal(back.I, tr.I)
