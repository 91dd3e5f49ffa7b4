"""
A diffusion orbit along a transition chain
==========================================

Build a k-bump chain that moves the actions along the slow direction
Omega_3, maximise the reduced functional, and re-integrate the glued orbit.
The measured diffusion time is compared with the instantiated bound.
"""

import numpy as np

from ttsdiffusion import SystemParams, TrigPerturbation, lemma33_parameters
from ttsdiffusion.shadowing import default_mu, run_pipeline

f = TrigPerturbation.cosine_sum(3)
eps = 0.02
p = SystemParams(eps, 0.5, (1.0, 0.6180339887498949), mu=default_mu(eps, 0.5))
cp = lemma33_parameters(p)

# |Delta I| is chosen so that the chain needs k = 5 transitions.
dI = 4.5 * cp.delta3 / (8 * cp.rho)
problem, crit, run = run_pipeline(p, f, dI)

print(f"k = {problem.k}, |Delta I| = {dI:.4e}")
print(f"critical point interior: {crit.interior}, |grad|_inf = {crit.gradient_inf:.2e}")
print("target Delta I :", np.array2string(problem.delta_I, precision=6))
print("orbit drift    :", np.array2string(run.I_drift, precision=6))
print(f"re-integration mismatch {run.reintegration_error:.2e}, energy drift {run.energy_drift:.2e}")
print(f"T_d = {run.T_d:.4g}  <=  bound {run.bound_Td:.4g}")
