"""Diophantine constants, ergodization times and transition epochs.

Distances on the torus are coordinate-wise: ``d(x, 2pi Z^n)`` is the max over
coordinates of the distance to the nearest multiple of 2pi.
"""

from __future__ import annotations

from dataclasses import dataclass
import itertools
import json
import math
from typing import Optional, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


class ResonanceError(ValueError):
    def __init__(self, witness):
        super().__init__(f"resonant frequency vector: omega.k = 0 for k = {list(witness)}")
        self.witness = np.asarray(witness)


class CapExceeded(RuntimeError):
    pass


def torus_distance(x) -> np.ndarray:
    """Max-norm distance of each row of ``x`` to ``2 pi Z^n``."""
    x = np.asarray(x, dtype=float)
    r = x - TWO_PI * np.round(x / TWO_PI)
    return np.max(np.abs(r), axis=-1)


# -- diophantine constant --------------------------------------------------------

@dataclass
class DiophantineCert:
    omega: np.ndarray
    tau: float
    gamma: float
    K_max: int
    witness_k: np.ndarray
    norm: str = "l1"
    certified_up_to_K: bool = True     # gamma is a lower bound only for |k|_inf <= K_max

    def to_dict(self):
        return dict(omega=self.omega.tolist(), tau=self.tau, gamma=self.gamma,
                    K_max=self.K_max, witness_k=self.witness_k.tolist(), norm=self.norm)


def estimate_gamma(omega, tau: float, K_max: int, norm: str = "l1",
                   rtol: float = 1e-13) -> DiophantineCert:
    """``min |omega.k| |k|^tau`` over ``0 < |k|_inf <= K_max`` by enumeration.

    ``|k|`` in the weight is the l1 norm (``norm='l1'``) or the max norm
    (``'linf'``).  Exact resonances raise :class:`ResonanceError`.
    """
    omega = np.asarray(omega, dtype=float)
    if K_max < 1:
        raise ValueError("K_max must be >= 1")
    n = omega.size
    if n == 1:
        ks = np.arange(1, K_max + 1)[:, None]
        vals = np.abs(ks[:, 0] * omega[0]) * ks[:, 0] ** tau
        if omega[0] == 0:
            raise ResonanceError([1])
        i = int(np.argmin(vals))
        return DiophantineCert(omega, tau, float(vals[i]), K_max, ks[i], norm)
    rng = np.arange(-K_max, K_max + 1)
    tail = np.stack(np.meshgrid(*([rng] * (n - 1)), indexing="ij"), -1).reshape(-1, n - 1)
    tail_dot = tail @ omega[1:]
    tail_l1 = np.abs(tail).sum(1)
    tail_inf = np.abs(tail).max(1)
    scale = np.abs(omega).max()
    best, wit = np.inf, None
    for k1 in range(0, K_max + 1):
        # k and -k give the same value; for k1 = 0 keep half the tail
        dot = np.abs(k1 * omega[0] + tail_dot)
        if norm == "l1":
            w = (k1 + tail_l1).astype(float)
        else:
            w = np.maximum(k1, tail_inf).astype(float)
        mask = w > 0
        if not np.any(mask):
            continue
        res = dot[mask] <= rtol * scale * w[mask]
        if np.any(res):
            j = np.nonzero(mask)[0][np.argmax(res)]
            raise ResonanceError(np.concatenate([[k1], tail[j]]))
        v = dot[mask] * w[mask] ** tau
        j = int(np.argmin(v))
        if v[j] < best:
            best = float(v[j])
            wit = np.concatenate([[k1], tail[np.nonzero(mask)[0][j]]])
    return DiophantineCert(omega, tau, best, K_max, wit.astype(int), norm)


# -- ergodization time -------------------------------------------------------------

def probe_points(n: int, m: int = 17, mc_points: int = 100_000, seed: int = 0):
    """``m^n`` lattice for ``n <= 3``; a seeded Monte-Carlo set otherwise."""
    if n <= 3:
        g = TWO_PI * np.arange(m) / m
        return np.stack(np.meshgrid(*([g] * n), indexing="ij"), -1).reshape(-1, n)
    rng = np.random.default_rng(seed)
    return rng.uniform(0, TWO_PI, size=(mc_points, n))


def first_hit_times(Omega1, sigma: float, points, t_cap: float = 1e9,
                    chunk: int = 4096) -> np.ndarray:
    """Exact first time ``t >= 0`` with ``d(Omega1 t - p, 2pi Z^n) < sigma`` per point.

    Uses the windows in which the fastest coordinate is within ``sigma`` of
    its target; inside one window every other coordinate moves by at most
    ``2 sigma``, so only the lattice site nearest the window centre can be hit
    (requires ``sigma < pi/2``).
    """
    Om = np.asarray(Omega1, dtype=float)
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if not 0 < sigma < np.pi / 2:
        raise ValueError("need 0 < sigma < pi/2")
    j = int(np.argmax(np.abs(Om)))
    wj = Om[j]
    if wj == 0:
        raise ValueError("Omega1 must be nonzero")
    sgn = np.sign(wj)
    aw = abs(wj)
    others = [i for i in range(Om.size) if i != j]
    out = np.full(len(P), np.inf)
    todo = np.arange(len(P))
    # fastest coordinate: s = |wj| t hits p_j (sign-adjusted) mod 2pi
    pj = np.mod(sgn * P[:, j], TWO_PI)
    m0 = -1
    m_cap = int(math.ceil(t_cap * aw / TWO_PI)) + 2
    while todo.size and m0 < m_cap:
        ms = np.arange(m0, min(m0 + chunk, m_cap + 1))
        c = (pj[todo, None] + TWO_PI * ms[None, :]) / aw        # window centres
        lo = np.maximum(c - sigma / aw, 0.0)
        hi = c + sigma / aw
        ok = hi > lo
        for i in others:
            wi = Om[i]
            pi_ = P[todo, i][:, None]
            if wi == 0:
                inside = np.abs(np.mod(pi_ + np.pi, TWO_PI) - np.pi) < sigma
                ok &= np.broadcast_to(inside, ok.shape)
                continue
            mid = 0.5 * (lo + hi)
            n_near = np.round((wi * mid - pi_) / TWO_PI)
            a = (pi_ + TWO_PI * n_near - sigma) / wi
            b = (pi_ + TWO_PI * n_near + sigma) / wi
            a, b = np.minimum(a, b), np.maximum(a, b)
            lo = np.maximum(lo, a)
            hi = np.minimum(hi, b)
            ok &= hi > lo
        hit = ok.any(axis=1)
        if np.any(hit):
            first = np.argmax(ok, axis=1)
            idx = np.nonzero(hit)[0]
            out[todo[idx]] = lo[idx, first[idx]]
            todo = todo[~hit]
        m0 = ms[-1] + 1
    return out


@dataclass
class ErgodizationResult:
    T_e: float
    sigma: float
    n_probes: int
    bound_ratio: Optional[float] = None      # fitted C_bar = T_e gamma sigma^tau / |omega|


def ergodization_time(Omega1, sigma: float, probe_grid=None, t_cap: float = 1e9,
                      omega_norm: Optional[float] = None, gamma: Optional[float] = None,
                      tau: Optional[float] = None) -> ErgodizationResult:
    """Smallest ``T`` such that ``{Omega1 t : 0 <= t <= T}`` is within ``sigma`` of
    every probe point.  With ``(omega_norm, gamma, tau)`` the ratio to
    ``|omega| / (gamma sigma^tau)`` is reported as the fitted constant."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    Om = np.asarray(Omega1, dtype=float)
    P = probe_points(Om.size) if probe_grid is None else np.atleast_2d(probe_grid)
    t = first_hit_times(Om, sigma, P, t_cap)
    if not np.all(np.isfinite(t)):
        raise CapExceeded(f"ergodization time exceeds cap {t_cap:g}")
    T = float(t.max())
    ratio = None
    if omega_norm is not None and gamma is not None and tau is not None:
        ratio = T * gamma * sigma ** tau / omega_norm
    return ErgodizationResult(T, sigma, len(P), ratio)


# -- epochs ------------------------------------------------------------------------

@dataclass
class EpochSchedule:
    etas: np.ndarray
    chis: np.ndarray                 # (k, n-1) slow-basis offsets (y_i, z_i, ...)
    spacing_lo: float
    spacing_hi: float

    def check(self, Omega: np.ndarray, sigma: float) -> dict:
        """Independent re-check: offsets rebuilt from scratch and compared."""
        Om1 = Omega[:, 0]
        X = np.outer(self.etas, Om1)
        N = np.round(X / TWO_PI)
        c = np.linalg.solve(Omega, (X - TWO_PI * N).T).T
        return dict(max_c1=float(np.max(np.abs(c[:, 0]))) if len(c) else 0.0,
                    max_offset=float(np.max(np.abs(c[:, 1:]))) if len(c) else 0.0,
                    offsets_ok=bool(np.all(np.abs(c[:, 1:]) < sigma)),
                    torus_dist=float(np.max(torus_distance(X))) if len(c) else 0.0,
                    spacing_ok=bool(np.all(np.diff(self.etas) >= self.spacing_lo - 1e-9)))

    def to_dict(self):
        return dict(etas=self.etas.tolist(), chis=self.chis.tolist(),
                    spacing_lo=self.spacing_lo, spacing_hi=self.spacing_hi)

    def table(self) -> np.ndarray:
        return np.column_stack([self.etas, self.chis])


def select_epochs(Omega1, sigma: float, k: int, min_gap: float, slow_basis,
                  eta_start: float = 0.0, spacing_extra: float = float("nan"),
                  scan_cap: float = 1e12, chunk: int = 200_000) -> EpochSchedule:
    """First epochs ``eta_i >= eta_{i-1} + min_gap`` with
    ``eta_i Omega1 = sum_j c_j Omega_j mod 2pi Z^n`` and ``|c_j| < sigma`` (j >= 2).

    Candidates come from a scan with step a quarter of the fastest period;
    each is corrected exactly along ``Omega1`` by the ``c_1`` component, so the
    returned offsets have no ``Omega1`` part.
    """
    Om1 = np.asarray(Omega1, dtype=float)
    S = np.atleast_2d(np.asarray(slow_basis, dtype=float))
    if S.shape[0] != Om1.size:
        S = S.T
    Omega = np.column_stack([Om1, S])
    if abs(np.linalg.det(Omega)) < 1e-14:
        raise ValueError("Omega1 and slow basis must span R^n")
    Oinv = np.linalg.inv(Omega)
    step = TWO_PI / (4 * np.max(np.abs(Om1)))
    etas, chis = [], []
    lower = eta_start
    for _ in range(k):
        found = None
        x0 = lower
        while found is None:
            if x0 - lower > scan_cap:
                raise CapExceeded(f"no epoch within {scan_cap:g} of {lower:g}")
            grid = x0 + step * np.arange(chunk)
            X = np.outer(grid, Om1)
            N = np.round(X / TWO_PI)
            c = (X - TWO_PI * N) @ Oinv.T
            cand = grid - c[:, 0]
            good = (np.max(np.abs(c[:, 1:]), axis=1) < sigma) & (cand >= lower - 1e-12)
            if np.any(good):
                i = int(np.argmax(good))
                eta = float(cand[i])
                # recompute the offset at the corrected epoch
                Xe = eta * Om1
                cc = Oinv @ (Xe - TWO_PI * np.round(Xe / TWO_PI))
                found = (eta, cc[1:])
            x0 = grid[-1] + step
        etas.append(found[0])
        chis.append(found[1])
        lower = found[0] + min_gap
    return EpochSchedule(np.array(etas), np.array(chis), float(min_gap),
                         float(min_gap + spacing_extra))


def transition_count(delta_I_norm: float, rho: float, delta3: float) -> int:
    """``k = floor(8 |Delta I| rho / delta3) + 1``."""
    if not (delta_I_norm > 0 and rho > 0 and delta3 > 0):
        raise ValueError("all arguments must be positive")
    return int(math.floor(8.0 * delta_I_norm * rho / delta3)) + 1
