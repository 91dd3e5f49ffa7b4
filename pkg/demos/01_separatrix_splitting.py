"""
Splitting of separatrices with a fast frequency
================================================

The homoclinic function G_mu is sampled along the fast angle A_1 and its
first Fourier coefficient is compared with the leading-order prediction
mu pi / (sqrt(eps) sinh(pi / (2 sqrt(eps)))).
"""

import numpy as np

from ttsdiffusion import SystemParams, TrigPerturbation, fourier_fast_angle
from ttsdiffusion.shadowing import default_mu
from ttsdiffusion.splitting import melnikov_cosine_closed_form, melnikov_cosine_quadrature

f = TrigPerturbation.cosine_sum(3)

# One harmonic of the Melnikov primitive, closed form against quadrature.
for w in [0.01, 1.0, 5.0]:
    print(f"omega={w:5.2f}  closed={melnikov_cosine_closed_form(w, 0.0):.15f}"
          f"  quad={melnikov_cosine_quadrature(w, 0.0):.15f}")

# The first fast harmonic shrinks like exp(-pi / (2 sqrt(eps))).
print("\n   eps      |g1|/mu        predicted/mu   ratio")
for eps in [0.09, 0.0625, 0.04]:
    p = SystemParams(eps, 0.5, (1.0, 0.6180339887498949), mu=default_mu(eps, 0.5))
    r = fourier_fast_angle(p, f, [0.0, 1.0], M=32)
    print(f"{eps:7.4f}  {r.g1_modulus / p.mu:.6e}  {r.predicted_g1 / p.mu:.6e}"
          f"  {r.g1_modulus / r.predicted_g1:.5f}")
