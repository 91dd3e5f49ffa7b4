"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the verdict lines are
repeated in the terminal summary) or directly with ``python tests/test_acceptance.py``.
Tolerances are the stated ones; criteria that do not hold numerically are
left failing.
"""

import math
import time

import numpy as np
import pytest

from ttsdiffusion import (BvpSettings, ConditionGrids, SystemParams, TrigPerturbation,
                          compute_psi_mu, estimate_gamma, ergodization_time, fourier_fast_angle,
                          frequency_vector, homoclinic_F, homoclinic_G, lemma33_basis,
                          lemma33_parameters, solve_one_bump_pi, verify_condition)
from ttsdiffusion.ergodization import probe_points
from ttsdiffusion.shadowing import (_psi_grid, default_mu, fit_sum_decay, run_pipeline,
                                    sweep_epsilon)
from ttsdiffusion.splitting import (melnikov_cosine_closed_form, melnikov_cosine_quadrature,
                                    sech2_cos_transform)
from ttsdiffusion.system import separatrix_p, separatrix_q

F3 = TrigPerturbation.cosine_sum(3)
GOLD = 0.6180339887498949
RESULTS = {}


def ref_params(eps=0.04, mu=None):
    return SystemParams(eps, 0.5, (1.0, GOLD), mu=default_mu(eps, 0.5) if mu is None else mu)


def verdict(n: int, ok: bool, detail: str):
    line = f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def test_c01_unperturbed_exactness():
    t0 = time.perf_counter()
    sol = solve_one_bump_pi(ref_params(mu=0.0), F3, np.zeros(3))
    S = sol.action()
    dt = time.perf_counter() - t0
    exact = separatrix_q(0.0) == math.pi and separatrix_p(0.0) == 2.0
    ok = abs(S - 8.0) <= 1e-9 and exact and dt < 1.0
    verdict(1, ok, f"|S-8|={abs(S - 8):.2e} q0(0)=pi,p0(0)=2:{exact} t={dt:.2f}s")


def test_c02_melnikov_dual_path():
    t0 = time.perf_counter()
    ws = [0.01, 0.1, 1.0, 5.0, 1 / math.sqrt(0.04)]
    diffs = []
    for w in ws:
        for A in (0.0, 1.0):
            diffs.append(abs(melnikov_cosine_closed_form(w, A) - melnikov_cosine_quadrature(w, A)))
    lim = float(sech2_cos_transform(0.0))
    small = melnikov_cosine_closed_form(1e-8, 0.0)
    dt = time.perf_counter() - t0
    ok = max(diffs) <= 1e-10 and lim == 4.0 and abs(small - 4.0) <= 1e-10 and dt < 10
    verdict(2, ok, f"max|closed-quad|={max(diffs):.2e} limit={lim} t={dt:.2f}s")


def test_c03_invariance_identities():
    t0 = time.perf_counter()
    p = ref_params()
    om = frequency_vector(p).omega
    rng = np.random.default_rng(3)
    e7, e10 = 0.0, 0.0
    for _ in range(20):
        A = rng.uniform(0, 2 * np.pi, 3)
        th, eta = rng.uniform(-2, 2, 2)
        e7 = max(e7, abs(homoclinic_F(p, F3, A, th) - homoclinic_G(p, F3, A + om * th)))
        e10 = max(e10, abs(homoclinic_F(p, F3, A, th + eta) - homoclinic_F(p, F3, A + eta * om, th)))
    dt = time.perf_counter() - t0
    ok = e7 <= 1e-8 and e10 <= 1e-8 and dt < 300
    verdict(3, ok, f"F=G(A+w th): {e7:.2e}  shift: {e10:.2e} t={dt:.1f}s")


def test_c04_psi_conjugacy():
    p = ref_params()
    rng = np.random.default_rng(4)
    res = max(compute_psi_mu(p, F3, rng.uniform(0, 2 * np.pi, 3)).check_residual
              for _ in range(20))
    mus = [1e-5, 1e-4, 1e-3]
    As = rng.uniform(0, 2 * np.pi, (6, 3))
    kmax = [max(abs(compute_psi_mu(p.with_mu(mu), F3, A, check=False).k_mu) for A in As)
            for mu in mus]
    slope = np.polyfit(np.log(mus), np.log(kmax), 1)[0]
    ok = res <= 1e-8 and abs(slope - 1.0) <= 0.1
    verdict(4, ok, f"max residual={res:.2e} slope max|k_mu| vs mu={slope:.3f}")


def test_c05_exponential_smallness():
    t0 = time.perf_counter()
    eps_list = [0.09, 0.0625, 0.04]
    g1, pred = [], []
    for e in eps_list:
        r = fourier_fast_angle(ref_params(e), F3, [0.0, 1.0], M=32)
        g1.append(r.g1_modulus / r.mu)
        pred.append(r.predicted_g1 / r.mu)
    x = 1 / np.sqrt(eps_list)
    slope = np.polyfit(x, np.log(g1), 1)[0]
    corrected = np.polyfit(x, np.log(np.array(g1) / x), 1)[0]
    ratios = np.array(g1) / np.array(pred)
    dt = time.perf_counter() - t0
    ok = abs(slope + math.pi / 2) <= 0.15 * math.pi / 2 and np.all((ratios >= 0.5) & (ratios <= 2))
    verdict(5, ok, f"slope={slope:.4f} (target -pi/2 +-15%: [{-1.15 * math.pi / 2:.4f},"
                   f"{-0.85 * math.pi / 2:.4f}]) prefactor-corrected slope={corrected:.4f} "
                   f"ratio to prediction={np.round(ratios, 4).tolist()} t={dt:.0f}s")


def test_c06_sum_decay():
    p = ref_params()
    A = np.array([0.3, 0.5, 0.7])
    parts, ok = [], True
    for k in (2, 3):
        fit = fit_sum_decay(p, F3, A=A, k=k, gaps=(10, 14, 18, 22))
        r = np.abs(fit.remainders)
        local = -np.diff(np.log(r)) / np.diff(fit.gaps)
        # no saturation: every local rate stays within a factor 2 of the fit
        unsat = bool(np.all(local > 0.5 * fit.rate)) and bool(np.all(r > 1e-13))
        ok &= fit.rate > 0.5 and fit.monotone and unsat
        parts.append(f"k={k}: rate={fit.rate:.3f} local={np.round(local, 3).tolist()}")
    verdict(6, ok, "; ".join(parts))


def test_c07_condition_certification():
    p = ref_params()
    Gt, _ = _psi_grid(p, F3, 8, BvpSettings())
    b, cp = lemma33_basis(p), lemma33_parameters(p)
    g = ConditionGrids(48, 9)
    cert = verify_condition(Gt, b, cp, g)
    cert2 = verify_condition(Gt, b, cp, g.doubled())
    drift = max(abs(cert.margins[k] - cert2.margins[k]) for k in cert.margins)
    flat = verify_condition(lambda A: np.full(len(np.atleast_2d(A)), 8.0), b,
                            lemma33_parameters(p.with_mu(0.0)), g)
    ok = cert.passed and not flat.passed and drift <= 1e-9
    m = {k: round(v / p.mu, 6) for k, v in cert.margins.items()}
    verdict(7, ok, f"eps=0.04 passed={cert.passed} margins/mu={m} failure={cert.failure!r}; "
                   f"mu=0 passed={flat.passed}; doubling drift={drift:.1e}")


def test_c08_ergodization_bound():
    p = ref_params()
    fv = frequency_vector(p)
    tau = 2.0
    dio = estimate_gamma(fv.omega, tau, 60)
    flow = lemma33_basis(p).Omega[:, 0]
    P = probe_points(3, 17)
    C = []
    for s in (0.2, 0.1, 0.05):
        res = ergodization_time(flow, s, P, omega_norm=fv.norm, gamma=dio.gamma, tau=tau)
        C.append(res.bound_ratio)
    spread = max(C) / min(C)
    verdict(8, spread <= 4.0, f"C_bar={np.round(C, 3).tolist()} spread={spread:.2f} "
                              f"gamma={dio.gamma:.4g}")


def test_c09_end_to_end():
    p = ref_params(0.02)
    cp = lemma33_parameters(p)
    dI = 9.5 * cp.delta3 / (8 * cp.rho)
    problem, crit, run = run_pipeline(p, F3, dI)
    rel = np.linalg.norm(run.I_drift - problem.delta_I) / np.linalg.norm(problem.delta_I)
    ok = (problem.k <= 20 and crit.interior and crit.gradient_inf <= 1e-7
          and run.reintegration_error <= 1e-6 and rel <= 1e-4 and run.energy_drift <= 1e-10
          and run.T_d <= run.bound_Td)
    verdict(9, ok, f"k={problem.k} interior={crit.interior} grad={crit.gradient_inf:.1e} "
                   f"reint={run.reintegration_error:.1e} drift rel err={rel:.1e} "
                   f"energy={run.energy_drift:.1e} T_d={run.T_d:.4g} <= {run.bound_Td:.4g}")


def test_c10_polynomial_scaling():
    eps = [0.025, 0.02, 0.0175, 0.015, 0.0125, 0.01]
    tp = ref_params(eps[0])
    cp = lemma33_parameters(tp)
    dI = 4.5 * cp.delta3 / (8 * cp.rho)
    res = sweep_epsilon(tp, F3, eps, dI)
    n_ok = sum(r["status"] == "ok" for r in res.rows)
    ok = n_ok >= 3 and res.r2 >= 0.95 and abs(res.slope - res.predicted_exponent) <= 1.0
    verdict(10, ok, f"admitted={n_ok} slope={res.slope:.3f} R2={res.r2:.4f} "
                    f"predicted exponent={res.predicted_exponent:.3f} (desk-scale surrogate)")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
