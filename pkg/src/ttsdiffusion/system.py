"""Three-time-scale isochronous Hamiltonian: parameters, perturbation, flows.

The model is

    H_mu = I_1/sqrt(eps) + eps^a beta.I_2 + p^2/2 + (cos q - 1)(1 + mu f(phi))

with ``n`` rotators (angles ``phi``, actions ``I``) coupled to one pendulum
``(q, p)``.  Along any orbit ``phi(t) = omega_eps t + A``, so the pendulum
obeys the quasi-periodically forced equation ``q'' = sin q (1 + mu f)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

TWO_PI = 2.0 * np.pi


class IntegrationError(RuntimeError):
    """Raised when the ODE integrator cannot reach the requested final time."""

    def __init__(self, message: str, t_last: float):
        super().__init__(f"{message} (last valid time t={t_last:.6g})")
        self.t_last = t_last


@dataclass(frozen=True)
class SystemParams:
    """Parameters ``eps, a, beta, mu`` of the three-time-scale system.

    ``beta`` is normalised to unit length unless ``normalize_beta`` is False.
    ``delta0`` is the constant used by :attr:`admissible`.
    """

    eps: float
    a: float
    beta: tuple
    mu: float = 0.0
    normalize_beta: bool = True
    delta0: float = 0.05

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).ravel()
        if not (self.eps > 0 and self.a > 0 and self.mu >= 0):
            raise ValueError("need eps > 0, a > 0, mu >= 0")
        if beta.size < 2:
            raise ValueError("beta must have length n-1 >= 2 (n >= 3 rotators)")
        nb = np.linalg.norm(beta)
        if nb == 0:
            raise ValueError("beta must be nonzero")
        if self.normalize_beta:
            beta = beta / nb
        object.__setattr__(self, "beta", tuple(float(b) for b in beta))

    @property
    def n(self) -> int:
        return len(self.beta) + 1

    @property
    def beta_vec(self) -> np.ndarray:
        return np.array(self.beta)

    @property
    def mu_threshold(self) -> float:
        return self.delta0 * min(self.eps ** 1.5, self.eps ** (2 * self.a + 1))

    @property
    def admissible(self) -> bool:
        """True in the regime mu <= delta0 * min(eps^{3/2}, eps^{2a+1})."""
        return self.mu <= self.mu_threshold

    def with_mu(self, mu: float) -> "SystemParams":
        return SystemParams(self.eps, self.a, self.beta, mu, False, self.delta0)

    def with_eps(self, eps: float) -> "SystemParams":
        return SystemParams(eps, self.a, self.beta, self.mu, False, self.delta0)

    def to_dict(self) -> dict:
        return {"eps": self.eps, "a": self.a, "beta": list(self.beta), "mu": self.mu,
                "n": self.n, "delta0": self.delta0}


@dataclass(frozen=True)
class FrequencyVector:
    omega: np.ndarray
    norm: float


def frequency_vector(params: SystemParams) -> FrequencyVector:
    """Return ``omega_eps = (1/sqrt(eps), eps^a beta)`` and its Euclidean norm."""
    omega = np.empty(params.n)
    omega[0] = 1.0 / math.sqrt(params.eps)
    omega[1:] = params.eps ** params.a * params.beta_vec
    return FrequencyVector(omega=omega, norm=float(np.linalg.norm(omega)))


class TrigPerturbation:
    """Real trigonometric polynomial ``f(phi) = sum_k c_k exp(i k.phi)``.

    ``coeffs`` maps integer frequency vectors to complex amplitudes.  The table
    must be conjugate symmetric (``c_{-k} = conj(c_k)``) so that ``f`` is real.
    ``widths`` are the analyticity half-widths ``r_2..r_n`` of the strip used
    for :attr:`sup_norm`.
    """

    def __init__(self, coeffs: Mapping[Sequence[int], complex], n: int | None = None,
                 widths: Iterable[float] | None = None):
        keys = [tuple(int(x) for x in k) for k in coeffs]
        if keys:
            n_k = {len(k) for k in keys}
            if len(n_k) != 1:
                raise ValueError("frequency vectors must share one length")
            n = n_k.pop() if n is None else n
        if n is None:
            raise ValueError("n is required for an empty coefficient table")
        table = {}
        for k, c in zip(keys, coeffs.values()):
            if len(k) != n:
                raise ValueError("frequency vector length does not match n")
            table[k] = table.get(k, 0) + complex(c)
        for k, c in table.items():
            kc = tuple(-x for x in k)
            if abs(table.get(kc, 0) - np.conj(c)) > 1e-14 * max(1.0, abs(c)):
                raise ValueError(f"coefficients not conjugate symmetric at k={k}")
        self.n = n
        self.coeffs = table
        self.K = np.array(list(table.keys()), dtype=float).reshape(-1, n)
        self.c = np.array(list(table.values()), dtype=complex)
        w = np.zeros(n - 1) if widths is None else np.asarray(list(widths), dtype=float)
        if w.shape != (n - 1,) or np.any(w < 0):
            raise ValueError("widths must be n-1 nonnegative numbers")
        self.widths = w

    @classmethod
    def cosine_sum(cls, n: int, widths=None) -> "TrigPerturbation":
        """The preset ``f = sum_j cos(phi_j)``."""
        table = {}
        for j in range(n):
            e = [0] * n
            e[j] = 1
            table[tuple(e)] = 0.5
            table[tuple(-x for x in e)] = 0.5
        return cls(table, n=n, widths=widths if widths is not None else np.ones(n - 1))

    @classmethod
    def from_real_terms(cls, terms, n: int, widths=None) -> "TrigPerturbation":
        """Build from ``(k, a_k, b_k)`` triples meaning ``a_k cos(k.phi) + b_k sin(k.phi)``."""
        table: dict = {}
        for k, ak, bk in terms:
            k = tuple(int(x) for x in k)
            km = tuple(-x for x in k)
            if all(x == 0 for x in k):
                table[k] = table.get(k, 0) + ak
                continue
            c = 0.5 * (ak - 1j * bk)
            table[k] = table.get(k, 0) + c
            table[km] = table.get(km, 0) + np.conj(c)
        return cls(table, n=n, widths=widths)

    @property
    def sup_norm(self) -> float:
        """Upper bound of |f| on the complex strip (exact sum of moduli)."""
        if self.c.size == 0:
            return 0.0
        growth = np.exp(np.abs(self.K[:, 1:]) @ self.widths)
        return float(np.sum(np.abs(self.c) * growth))

    def __call__(self, phi) -> np.ndarray:
        return self.value(phi)

    def value(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        if self.c.size == 0:
            return np.zeros(phi.shape[:-1])
        e = np.exp(1j * (phi @ self.K.T))
        return np.real(e @ self.c)

    def gradient(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        if self.c.size == 0:
            return np.zeros(phi.shape)
        e = np.exp(1j * (phi @ self.K.T))
        return np.real((1j * e * self.c) @ self.K)

    def value_and_gradient(self, phi):
        return self.value(phi), self.gradient(phi)

    def to_dict(self) -> dict:
        return {"n": self.n, "widths": self.widths.tolist(),
                "coeffs": [[list(map(int, k)), [c.real, c.imag]] for k, c in self.coeffs.items()]}

    @classmethod
    def from_dict(cls, d) -> "TrigPerturbation":
        table = {tuple(k): complex(c[0], c[1]) for k, c in d["coeffs"]}
        return cls(table, n=d["n"], widths=d.get("widths"))


def eval_perturbation(f: TrigPerturbation, phi):
    """Value and gradient of ``f`` at ``phi`` (empty table gives zeros)."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != f.n:
        raise ValueError(f"phi must have length {f.n}")
    return f.value(phi), f.gradient(phi)


# --- unperturbed separatrix q_theta(t) = 4 arctan exp(t - theta) ------------

def separatrix_q(s):
    return 4.0 * np.arctan(np.exp(s))


def separatrix_p(s):
    return 2.0 / np.cosh(s)


def unperturbed_separatrix(t, theta: float = 0.0):
    """``(q, p)`` on the upper separatrix crossing ``pi`` at ``t = theta``."""
    s = np.asarray(t, dtype=float) - theta
    return separatrix_q(s), separatrix_p(s)


# --- integration -------------------------------------------------------------

@dataclass(frozen=True)
class FullState:
    phi: np.ndarray
    I: np.ndarray
    q: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "phi", np.mod(np.asarray(self.phi, dtype=float), TWO_PI))
        object.__setattr__(self, "I", np.asarray(self.I, dtype=float))


@dataclass
class Trajectory:
    """Sampled orbit.  ``phi`` is stored mod 2pi, ``q`` unreduced."""

    times: np.ndarray
    phi: np.ndarray
    I: np.ndarray
    q: np.ndarray
    p: np.ndarray
    energy: np.ndarray
    energy_drift: float = field(init=False)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        n = len(self.times)
        if not (len(self.phi) == len(self.I) == len(self.q) == len(self.p) == n):
            raise ValueError("states must align with times")
        self.phi = np.mod(self.phi, TWO_PI)
        self.energy_drift = float(np.max(np.abs(self.energy - self.energy[0]))) if n else 0.0
        for name in ("times", "phi", "I", "q", "p", "energy"):
            getattr(self, name).setflags(write=False)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> FullState:
        return FullState(self.phi[i], self.I[i], float(self.q[i]), float(self.p[i]))

    @property
    def states(self):
        return [self.state(i) for i in range(len(self))]


def hamiltonian(params: SystemParams, f: TrigPerturbation, phi, I, q, p):
    """Energy ``H_mu`` (vectorised over leading axes)."""
    om = frequency_vector(params).omega
    fv = f.value(phi)
    return I @ om + 0.5 * p ** 2 + (np.cos(q) - 1.0) * (1.0 + params.mu * fv)


def _check_ivp(sol):
    if sol.status != 0:
        t_last = float(sol.t[-1]) if sol.t.size else float("nan")
        raise IntegrationError(f"integration failed: {sol.message}", t_last)


def integrate_full(params: SystemParams, f: TrigPerturbation, state0: FullState,
                   t_span, tol: float = 1e-11, t_eval=None, n_samples: int = 2001) -> Trajectory:
    """Integrate the full equations of motion with an adaptive 8(5,3) RK pair.

    ``t_span`` may run backwards; samples are then returned in increasing time.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    om = frequency_vector(params).omega
    n, mu = params.n, params.mu

    def rhs(t, y):
        phi, q, p = y[:n], y[2 * n], y[2 * n + 1]
        fv, g = f.value(phi), f.gradient(phi)
        out = np.empty_like(y)
        out[:n] = om
        out[n:2 * n] = -mu * (np.cos(q) - 1.0) * g
        out[2 * n] = p
        out[2 * n + 1] = np.sin(q) * (1.0 + mu * fv)
        return out

    y0 = np.concatenate([state0.phi, state0.I, [state0.q, state0.p]])
    if t_eval is None:
        t_eval = np.linspace(t_span[0], t_span[1], n_samples)
    sol = solve_ivp(rhs, t_span, y0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    t_eval=t_eval)
    _check_ivp(sol)
    Y = sol.y.T
    phi, I, q, p = Y[:, :n], Y[:, n:2 * n], Y[:, 2 * n], Y[:, 2 * n + 1]
    E = hamiltonian(params, f, phi, I, q, p)
    t = sol.t
    if t.size > 1 and t[-1] < t[0]:
        # backward runs are stored in increasing time
        t, phi, I, q, p, E = (x[::-1] for x in (t, phi, I, q, p, E))
    return Trajectory(t, phi, I, q, p, E)


def integrate_pendulum(params: SystemParams, f: TrigPerturbation, A, q0: float, p0: float,
                       t_span, tol: float = 1e-11, t_eval=None, n_samples: int = 2001,
                       dense: bool = False):
    """Integrate ``q'' = sin q (1 + mu f(omega t + A))``.

    Returns ``(t, q, p)`` arrays, or the scipy solution object when ``dense``.
    Integration may run backwards in time (``t_span[1] < t_span[0]``).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    om = frequency_vector(params).omega
    A = np.asarray(A, dtype=float)
    mu = params.mu

    def rhs(t, y):
        fv = f.value(om * t + A)
        return np.array([y[1], np.sin(y[0]) * (1.0 + mu * fv)])

    if t_eval is None and not dense:
        t_eval = np.linspace(t_span[0], t_span[1], n_samples)
    sol = solve_ivp(rhs, t_span, [q0, p0], method="DOP853", rtol=tol, atol=tol * 1e-2,
                    t_eval=t_eval, dense_output=dense)
    _check_ivp(sol)
    if dense:
        return sol
    return sol.t, sol.y[0], sol.y[1]
