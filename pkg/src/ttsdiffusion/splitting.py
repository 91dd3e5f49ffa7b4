"""Homoclinic functions, Melnikov primitive and fast-angle Fourier analysis.

``G(A)`` is the action of the pi-crossing pseudo-homoclinic at ``theta = 0``
and ``G_tilde(A)`` the action of the psi-projected one.  Both are
2pi-periodic in every angle.  A :class:`FourierSurrogate` samples them on a
tensor grid and evaluates the resulting trigonometric polynomial (and its
gradient) anywhere; it is checked against direct solves when built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
import warnings
from typing import Callable, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .homoclinic import (BvpSettings, HomoclinicSolution, NewtonError, PI_CROSSING,
                         PSI_PROJECTED, solve_one_bump_pi, solve_one_bump_psi)
from .system import SystemParams, TrigPerturbation, FrequencyVector, frequency_vector

TWO_PI = 2.0 * np.pi


def action_one_bump(params: SystemParams, f: TrigPerturbation, sol: HomoclinicSolution) -> float:
    """Action of a 1-bump solution over the whole line (window plus analytic tails)."""
    if sol.variant not in (PI_CROSSING, PSI_PROJECTED):
        raise ValueError("action_one_bump expects a 1-bump solution")
    return sol.action()


def homoclinic_F(params, f, A, theta, settings=BvpSettings()) -> float:
    return solve_one_bump_pi(params, f, A, theta, settings).action()


def homoclinic_G(params, f, A, settings=BvpSettings()) -> float:
    return solve_one_bump_pi(params, f, A, 0.0, settings).action()


def homoclinic_F_tilde(params, f, A, theta, settings=BvpSettings()) -> float:
    return solve_one_bump_psi(params, f, A, theta, settings).action()


def homoclinic_G_tilde(params, f, A, settings=BvpSettings()) -> float:
    return solve_one_bump_psi(params, f, A, 0.0, settings).action()


@dataclass
class PsiMuSample:
    A: np.ndarray
    k_mu: float
    check_residual: float
    G_tilde: float = float("nan")
    G_shifted: float = float("nan")

    def to_dict(self):
        return dict(A=self.A.tolist(), k_mu=self.k_mu, check_residual=self.check_residual,
                    G_tilde=self.G_tilde, G_shifted=self.G_shifted)


def pi_crossing_time(sol: HomoclinicSolution, bracket: float = 1.0) -> float:
    """Time nearest ``theta`` at which the dense solution crosses ``pi``."""
    th = float(sol.thetas[0])
    g = lambda t: sol.evaluate([t])[0][0] - np.pi
    a, b = th - bracket, th + bracket
    if g(a) * g(b) > 0:
        raise RuntimeError("no pi-crossing near theta")
    if g(th) == 0.0:
        return th
    return brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def compute_psi_mu(params, f, A, settings=BvpSettings(), check: bool = True) -> PsiMuSample:
    """``psi_mu(A) = A + k_mu(A) omega``: ``k_mu`` is the pi-crossing time of ``Q``.

    With ``check`` the identity ``G_tilde(A) = G(A + k_mu omega)`` is evaluated
    both ways and its residual stored.
    """
    A = np.asarray(A, dtype=float)
    Q = solve_one_bump_psi(params, f, A, 0.0, settings)
    k = pi_crossing_time(Q)
    if not check:
        return PsiMuSample(A, k, float("nan"))
    om = frequency_vector(params).omega
    gt = Q.action()
    gs = homoclinic_G(params, f, A + k * om, settings)
    return PsiMuSample(A, k, abs(gt - gs), gt, gs)


# -- Melnikov ------------------------------------------------------------------

def sech2_cos_transform(w):
    """``int 2 sech^2(t) cos(w t) dt = 2 pi w / sinh(pi w / 2)`` (limit 4 at w = 0)."""
    w = np.abs(np.asarray(w, dtype=float))
    x = 0.5 * np.pi * w
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    big = xs > 300
    ratio = np.where(big, 2.0 * xs * np.exp(-np.minimum(xs, 700.0)),
                     xs / np.sinh(np.minimum(xs, 300.0)))
    ratio = np.where(small, 1.0 - x * x / 6.0, ratio)
    return 4.0 * ratio


def melnikov_cosine_closed_form(omega_j: float, A_j: float) -> float:
    """Per-harmonic Melnikov value ``2 pi w / sinh(pi w / 2) cos A``."""
    return float(sech2_cos_transform(omega_j) * math.cos(A_j))


def melnikov_closed_form(f: TrigPerturbation, omega, A) -> float:
    """Harmonic-by-harmonic evaluation of the Melnikov primitive."""
    om = omega.omega if isinstance(omega, FrequencyVector) else np.asarray(omega, float)
    A = np.asarray(A, dtype=float)
    if f.c.size == 0:
        return 0.0
    w = f.K @ om
    return float(np.real(np.sum(f.c * np.exp(1j * (f.K @ A)) * sech2_cos_transform(w))))


def _piecewise_quad(g, t_max: float) -> float:
    # unit subintervals keep oscillatory pieces well resolved; quad may warn
    # that 1e-15 absolute accuracy is at roundoff level, which is expected
    edges = np.arange(-t_max, t_max + 0.5, 1.0)
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            total += quad(g, lo, hi, epsabs=1e-15, epsrel=1e-14, limit=200)[0]
    return total


def melnikov_primitive(f: TrigPerturbation, omega, A, t_max: float = 40.0) -> float:
    """``int (1 - cos q0(t)) f(omega t + A) dt`` by adaptive quadrature on ``|t| <= t_max``.

    ``1 - cos q0 = 2 sech^2 t``; the neglected tail is below ``8 ||f|| exp(-2 t_max)``.
    """
    om = omega.omega if isinstance(omega, FrequencyVector) else np.asarray(omega, float)
    A = np.asarray(A, dtype=float)

    def integrand(t):
        c = 1.0 / math.cosh(t)
        return 2.0 * c * c * float(f.value(om * t + A))

    return _piecewise_quad(integrand, t_max)


def melnikov_cosine_quadrature(omega_j: float, A_j: float, t_max: float = 40.0) -> float:
    """Quadrature path for one harmonic: ``int 2 sech^2(t) cos(w t + A) dt``."""
    def integrand(t):
        c = 1.0 / math.cosh(t)
        return 2.0 * c * c * math.cos(omega_j * t + A_j)

    return _piecewise_quad(integrand, t_max)


def d_eps(eps: float) -> float:
    """``D_eps = 2 pi / (sqrt(eps) sinh(pi / (2 sqrt(eps))))``."""
    return float(2.0 * np.pi / (math.sqrt(eps) * math.sinh(math.pi / (2 * math.sqrt(eps)))))


def d_eps_bounds(eps: float):
    """Lower and upper exponential bounds ``(3 pi, 5 pi) / sqrt(eps) exp(-pi/(2 sqrt eps))``."""
    base = math.exp(-math.pi / (2 * math.sqrt(eps))) / math.sqrt(eps)
    return 3 * math.pi * base, 5 * math.pi * base


def predicted_g1(params: SystemParams) -> float:
    e = params.eps
    return params.mu * math.pi / (math.sqrt(e) * math.sinh(math.pi / (2 * math.sqrt(e))))


# -- handles --------------------------------------------------------------------

class DirectHandle:
    """Evaluate ``G`` (``variant='pi'``) or ``G_tilde`` (``'psi'``) by direct solves."""

    def __init__(self, params, f, variant: str = "pi", settings=BvpSettings()):
        if variant not in ("pi", "psi"):
            raise ValueError("variant must be 'pi' or 'psi'")
        self.params, self.f, self.variant, self.settings = params, f, variant, settings
        self._solve = solve_one_bump_pi if variant == "pi" else solve_one_bump_psi
        self.n = params.n
        self.calls = 0

    def __call__(self, A) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        out = np.empty(len(A))
        for i, a in enumerate(A):
            out[i] = self._solve(self.params, self.f, a, 0.0, self.settings).action()
        self.calls += len(A)
        return out

    def gradient(self, A) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if self.variant != "pi":
            raise NotImplementedError("analytic gradient only for the pi-crossing variant")
        return np.array([self._solve(self.params, self.f, a, 0.0, self.settings).action_gradient_A()
                         for a in A])


class FourierSurrogate:
    """Trigonometric interpolant of a 2pi-periodic function of ``A`` on ``T^n``.

    Built from values on an ``M_1 x ... x M_n`` equispaced grid; coefficients
    below ``drop`` (absolute) are discarded.  ``check_error`` is the largest
    deviation from direct evaluation at ``n_check`` random points.
    """

    def __init__(self, K, c, mean, grid_shape, check_error=float("nan"), meta=None):
        self.K = np.asarray(K, dtype=float)
        self.c = np.asarray(c, dtype=complex)
        self.mean = float(mean)
        self.grid_shape = tuple(grid_shape)
        self.check_error = check_error
        self.meta = meta or {}
        self.n = self.K.shape[1]

    @classmethod
    def from_values(cls, values: np.ndarray, drop: float = 1e-17, meta=None) -> "FourierSurrogate":
        shape = values.shape
        C = np.fft.fftn(values) / values.size
        freqs = np.meshgrid(*[np.fft.fftfreq(m, 1.0 / m) for m in shape], indexing="ij")
        K = np.stack([fr.ravel() for fr in freqs], axis=1)
        c = C.ravel()
        # Nyquist rows are split between +-M/2 to keep the interpolant real
        for d, m in enumerate(shape):
            if m % 2 == 0:
                nyq = K[:, d] == -m // 2
                K2 = K[nyq].copy()
                K2[:, d] = m // 2
                c[nyq] *= 0.5
                K = np.vstack([K, K2])
                c = np.concatenate([c, c[nyq]])
        zero = np.all(K == 0, axis=1)
        mean = float(np.real(c[zero].sum()))
        keep = (~zero) & (np.abs(c) > drop)
        return cls(K[keep], c[keep], mean, shape, meta=meta)

    @classmethod
    def build(cls, handle: Callable, n: int, M=8, drop: float = 1e-17, n_check: int = 8,
              seed: int = 0) -> "FourierSurrogate":
        M = (M,) * n if np.isscalar(M) else tuple(M)
        axes = [TWO_PI * np.arange(m) / m for m in M]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        vals = np.asarray(handle(pts)).reshape(M)
        sur = cls.from_values(vals, drop=drop, meta={"M": list(M)})
        if n_check:
            rng = np.random.default_rng(seed)
            P = rng.uniform(0, TWO_PI, size=(n_check, n))
            sur.check_error = float(np.max(np.abs(sur(P) - handle(P))))
        return sur

    def __call__(self, A) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return self.mean + np.real(np.exp(1j * (A @ self.K.T)) @ self.c)

    def gradient(self, A) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        e = np.exp(1j * (A @ self.K.T))
        return np.real((1j * e * self.c) @ self.K)

    def hessian(self, A) -> np.ndarray:
        """``(m, n, n)`` Hessians at rows of ``A``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        e = np.exp(1j * (A @ self.K.T)) * self.c
        return -np.real(np.einsum("mk,ki,kj->mij", e, self.K, self.K))

    def coefficient(self, k) -> complex:
        k = np.asarray(k, dtype=float)
        hit = np.all(self.K == k, axis=1)
        if np.all(k == 0):
            return complex(self.mean)
        return complex(self.c[hit].sum())


def build_surrogate(params, f, variant="pi", settings=BvpSettings(), M=8, n_check=8, seed=0):
    """Fourier surrogate of ``G`` or ``G_tilde`` from direct solves on a grid."""
    h = DirectHandle(params, f, variant, settings)
    return FourierSurrogate.build(h, params.n, M=M, n_check=n_check, seed=seed)


# -- fast-angle Fourier analysis --------------------------------------------------

@dataclass
class SplittingReport:
    eps: float
    a: float
    mu: float
    A2_grid: np.ndarray
    g0_samples: np.ndarray
    g1_samples: np.ndarray          # complex, one per slow-angle point
    g1_modulus: float
    melnikov_g0: np.ndarray
    melnikov_g1: np.ndarray
    remainder_R_inf: float
    predicted_g1: float
    failure_mask: np.ndarray
    samples: np.ndarray = field(repr=False, default=None)   # (n_A2, M) values of G_tilde

    @property
    def complete(self) -> bool:
        return not bool(np.any(self.failure_mask))

    def to_dict(self) -> dict:
        return dict(schema="ttsdiffusion.splitting/1", eps=self.eps, a=self.a, mu=self.mu,
                    A2_grid=self.A2_grid.tolist(), g0_samples=self.g0_samples.tolist(),
                    g1_re=self.g1_samples.real.tolist(), g1_im=self.g1_samples.imag.tolist(),
                    g1_modulus=self.g1_modulus, melnikov_g0=self.melnikov_g0.tolist(),
                    melnikov_g1_re=self.melnikov_g1.real.tolist(),
                    melnikov_g1_im=self.melnikov_g1.imag.tolist(),
                    remainder_R_inf=self.remainder_R_inf, predicted_g1=self.predicted_g1,
                    failure_mask=self.failure_mask.tolist())

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self, path) -> None:
        M = self.samples.shape[1]
        rows = []
        for i, a2 in enumerate(self.A2_grid):
            for j in range(M):
                rows.append([TWO_PI * j / M, *np.atleast_1d(a2), self.samples[i, j]])
        ncol = len(rows[0]) - 2
        header = "A1," + ",".join(f"A{d + 2}" for d in range(ncol)) + ",G_tilde"
        np.savetxt(path, np.array(rows), delimiter=",", header=header, comments="", fmt="%.17g")


def _melnikov_fast_coeffs(f: TrigPerturbation, om, A_slow):
    """Zeroth and first ``A_1``-Fourier coefficients of the Melnikov primitive."""
    if f.c.size == 0:
        return 0.0, 0j
    w = f.K @ om
    amp = f.c * np.exp(1j * (f.K[:, 1:] @ A_slow)) * sech2_cos_transform(w)
    k1 = f.K[:, 0]
    return float(np.real(amp[k1 == 0].sum())), complex(amp[k1 == 1].sum())


def fourier_fast_angle(params: SystemParams, f: TrigPerturbation, A2_grid, M: int = 32,
                       settings: BvpSettings = BvpSettings(), handle=None) -> SplittingReport:
    """Sample ``G_tilde`` on ``M`` fast angles per slow point; extract ``g0``, ``g1``.

    ``A2_grid`` holds slow-angle vectors ``(A_2..A_n)`` (scalars allowed for n=3
    meaning ``(A_2, 0)``).  The Newton tolerance is tightened to
    ``min(1e-12, predicted_g1/100)``.
    """
    if M < 8:
        raise ValueError("need M >= 8 fast-angle samples")
    n = params.n
    A2 = np.asarray(A2_grid, dtype=float)
    if A2.ndim == 1:
        A2 = np.column_stack([A2, np.zeros((A2.size, n - 2))])
    pg1 = predicted_g1(params)
    if handle is None:
        tol = min(settings.newton_tol, 1e-12, pg1 / 100) if pg1 > 0 else settings.newton_tol
        st = BvpSettings(**{**settings.to_dict(), "newton_tol": tol})
        handle = DirectHandle(params, f, "psi", st)
    om = frequency_vector(params).omega
    A1 = TWO_PI * np.arange(M) / M
    vals = np.full((len(A2), M), np.nan)
    fail = np.zeros((len(A2), M), bool)
    for i, a2 in enumerate(A2):
        for j, a1 in enumerate(A1):
            try:
                vals[i, j] = handle(np.concatenate([[a1], a2]))[0]
            except (NewtonError, RuntimeError):
                fail[i, j] = True
    g0 = np.full(len(A2), np.nan)
    g1 = np.full(len(A2), np.nan, dtype=complex)
    rem = 0.0
    mg0 = np.empty(len(A2))
    mg1 = np.empty(len(A2), dtype=complex)
    for i in range(len(A2)):
        a, b = _melnikov_fast_coeffs(f, om, A2[i])
        mg0[i], mg1[i] = params.mu * a, params.mu * b
        if fail[i].any():
            continue
        C = np.fft.fft(vals[i]) / M
        g0[i] = C[0].real
        g1[i] = C[1]
        fit = g0[i] + 2.0 * np.real(g1[i] * np.exp(1j * A1))
        rem = max(rem, float(np.max(np.abs(vals[i] - fit))))
    ok = ~np.isnan(g0)
    return SplittingReport(
        eps=params.eps, a=params.a, mu=params.mu, A2_grid=A2, g0_samples=g0, g1_samples=g1,
        g1_modulus=float(np.mean(np.abs(g1[ok]))) if ok.any() else float("nan"),
        melnikov_g0=mg0, melnikov_g1=mg1, remainder_R_inf=rem, predicted_g1=pg1,
        failure_mask=fail, samples=vals)
