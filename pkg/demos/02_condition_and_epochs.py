"""
Splitting condition and transition epochs
=========================================

Verify the splitting condition for the psi-projected homoclinic function at
two values of eps, then pick the epochs at which a transition chain can
jump: times when the Omega_1 flow returns close to the slow subspace.
"""

import numpy as np

from ttsdiffusion import (BvpSettings, ConditionGrids, SystemParams, TrigPerturbation,
                          estimate_gamma, ergodization_time, frequency_vector, lemma33_basis,
                          lemma33_parameters, select_epochs, verify_condition)
from ttsdiffusion.ergodization import probe_points
from ttsdiffusion.shadowing import _psi_grid, default_mu

f = TrigPerturbation.cosine_sum(3)
beta = (1.0, 0.6180339887498949)

for eps in [0.04, 0.02]:
    p = SystemParams(eps, 0.5, beta, mu=default_mu(eps, 0.5))
    Gt, _ = _psi_grid(p, f, 8, BvpSettings())
    cert = verify_condition(Gt, lemma33_basis(p), lemma33_parameters(p), ConditionGrids(48, 9))
    margins = {k: round(v / p.mu, 5) for k, v in cert.margins.items()}
    print(f"eps={eps}: passed={cert.passed}  margins/mu={margins}  {cert.failure or ''}")

# Diophantine constant and ergodization time of the Omega_1 flow at eps = 0.02.
fv = frequency_vector(p)
dio = estimate_gamma(fv.omega, 2.0, 60)
basis, cp = lemma33_basis(p), lemma33_parameters(p)
ergo = ergodization_time(basis.Omega[:, 0], cp.sigma, probe_points(3, 9),
                         omega_norm=fv.norm, gamma=dio.gamma, tau=2.0)
print(f"\ngamma={dio.gamma:.4g} (witness {dio.witness_k.tolist()})  T_e={ergo.T_e:.4g}"
      f"  C_bar={ergo.bound_ratio:.3f}")

sch = select_epochs(basis.Omega[:, 0], cp.sigma, 5, 100.0, basis.Omega[:, 1:])
print("epochs eta_i and slow offsets (y_i, z_i), |offset| < sigma =", f"{cp.sigma:.4g}")
for eta, chi in zip(sch.etas, sch.chis):
    print(f"  {eta:14.3f}  {chi[0]: .3e}  {chi[1]: .3e}")
