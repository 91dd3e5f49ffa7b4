"""Transition chains along the whiskered tori.

The k-bump heteroclinic function ``F^k(A, theta) - (I0' - I0).A`` is reduced
to slow coordinates ``a = (a_2..a_n)`` and time offsets ``s_i`` through

    A = A_bar + a_1 Omega_1 + sum_j a_j Omega_j,
    theta_i = (eta_i + s_i - a_1) |Omega_1| / |omega|,

which removes ``a_1``.  Its maximum over the box ``U`` is an interior
critical point whenever the splitting condition holds with enough margin;
the glued pendulum orbit at that point, with ``I(t)`` recovered by
quadrature, is the diffusion orbit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
import json
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize

from .condition import (ConditionGrids, ConditionParams, SplittingBasis, SplittingConditionCert,
                        lemma33_basis, lemma33_parameters, sup_J_many, transfer_condition,
                        verify_condition)
from .ergodization import (DiophantineCert, EpochSchedule, ErgodizationResult, ergodization_time,
                           estimate_gamma, probe_points, select_epochs, transition_count)
from .homoclinic import (BvpSettings, HomoclinicSolution, _one_minus_cos, solve_k_bump,
                         solve_one_bump_pi, solve_one_bump_psi)
from .splitting import FourierSurrogate, pi_crossing_time
from .system import (SystemParams, TrigPerturbation, Trajectory, frequency_vector, hamiltonian,
                     integrate_pendulum)

TWO_PI = 2.0 * np.pi


class KCapError(RuntimeError):
    def __init__(self, k, cap):
        super().__init__(f"transition count k={k} exceeds cap {cap}")
        self.k, self.cap = k, cap


class NotInteriorError(RuntimeError):
    pass


class ConditionNotVerified(RuntimeError):
    pass


# -- sum decomposition: exact chain value vs sum of one-bump values ----------------

@dataclass
class DecayFit:
    """``|F^k - sum F| ~ prefactor * exp(-rate * L)`` fitted over gaps ``L``."""

    gaps: np.ndarray
    remainders: np.ndarray
    rate: float
    prefactor: float
    monotone: bool

    def bound(self, L) -> float:
        return self.prefactor * np.exp(-self.rate * np.asarray(L, dtype=float))

    def required_gap(self, target: float) -> float:
        """Smallest gap with fitted remainder below ``target``."""
        return max(0.0, math.log(self.prefactor / target) / self.rate)

    def to_dict(self):
        return dict(gaps=self.gaps.tolist(), remainders=self.remainders.tolist(),
                    rate=self.rate, prefactor=self.prefactor, monotone=self.monotone)


def sum_remainder(params, f, A, k: int, L: float, settings=BvpSettings()) -> float:
    """``F^k(A, theta) - sum_i F(A, theta_i)`` with equal gaps ``L``."""
    thetas = L * np.arange(k)
    st = BvpSettings(**{**settings.to_dict(), "split_gap": max(settings.split_gap, 2 * L)})
    chain = solve_k_bump(params, f, A, thetas, st).action()
    singles = sum(solve_one_bump_pi(params, f, A, th, settings).action() for th in thetas)
    return chain - singles


def fit_sum_decay(params, f, A=None, k: int = 2, gaps=(10.0, 14.0, 18.0, 22.0),
                  settings=BvpSettings()) -> DecayFit:
    A = np.zeros(params.n) if A is None else np.asarray(A, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    st = BvpSettings(**{**settings.to_dict(), "min_gap": min(settings.min_gap, gaps.min() - 1e-9)})
    R = np.array([sum_remainder(params, f, A, k, L, st) for L in gaps])
    slope, icpt = np.polyfit(gaps, np.log(np.abs(R)), 1)
    mono = bool(np.all(np.diff(np.abs(R)) < 0))
    return DecayFit(gaps, R, float(-slope), float(math.exp(icpt)), mono)


# -- the chain problem ---------------------------------------------------------------

@dataclass
class ChainProblem:
    params: SystemParams
    f: TrigPerturbation
    I0: np.ndarray
    I0p: np.ndarray
    basis: SplittingBasis
    cp: ConditionParams
    schedule: EpochSchedule
    k: int
    G: Optional[Callable] = None             # surrogate of G with gradient/hessian (fast mode)
    settings: BvpSettings = BvpSettings()
    omega2_allowed: bool = False             # I_1 experiment: Delta I may have an Omega_2 part
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.I0 = np.asarray(self.I0, dtype=float)
        self.I0p = np.asarray(self.I0p, dtype=float)
        n = self.params.n
        if self.I0.shape != (n,) or self.I0p.shape != (n,):
            raise ValueError(f"actions must have length {n}")
        if len(self.schedule.etas) != self.k:
            raise ValueError("schedule length must equal k")
        fv = frequency_vector(self.params)
        dI = self.delta_I
        scale = max(np.linalg.norm(dI), 1e-300) * fv.norm
        if abs(fv.omega @ dI) > 1e-10 * scale:
            raise ValueError("energy consistency omega.I0 = omega.I0' violated")
        c = np.linalg.solve(self.basis.Omega, dI)
        if not self.omega2_allowed and abs(c[1]) > 1e-10 * max(np.linalg.norm(dI), 1e-300):
            raise ValueError("I0' - I0 must lie in span{Omega_3..Omega_n}")
        self._omega = fv.omega
        self._omega_norm = fv.norm
        self._exact_cache = {}

    # geometry
    @property
    def delta_I(self) -> np.ndarray:
        return self.I0p - self.I0

    @property
    def lin(self) -> np.ndarray:
        """``(Delta I . Omega_j)_j``."""
        return self.basis.Omega.T @ self.delta_I

    @property
    def time_scale(self) -> float:
        """``theta = eta * |Omega_1| / |omega|``."""
        return float(np.linalg.norm(self.basis.Omega[:, 0]) / self._omega_norm)

    def angles(self, a_slow, a1: float = 0.0) -> np.ndarray:
        return self.basis.to_angles(np.concatenate([[a1], np.asarray(a_slow, float)]))[0]

    def thetas(self, s, a1: float = 0.0) -> np.ndarray:
        return (self.schedule.etas + np.asarray(s, float) - a1) * self.time_scale

    def slow_points(self, a_slow) -> np.ndarray:
        return np.asarray(a_slow, float)[None, :] + self.schedule.chis

    def linear_term(self, a_slow, a1: float = 0.0) -> float:
        return float(self.delta_I @ self.angles(a_slow, a1))

    def to_dict(self):
        return dict(params=self.params.to_dict(), f=self.f.to_dict(), I0=self.I0.tolist(),
                    I0p=self.I0p.tolist(), basis=self.basis.to_dict(), cp=self.cp.to_dict(),
                    schedule=self.schedule.to_dict(), k=self.k,
                    meta={k: v for k, v in self.meta.items() if _jsonable(v)})


def _jsonable(v):
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def heteroclinic_Fk(problem: ChainProblem, A, thetas) -> float:
    """``F^k(A, theta) - (I0' - I0).A``."""
    A = np.asarray(A, dtype=float)
    sol = solve_k_bump(problem.params, problem.f, A, thetas, problem.settings)
    return sol.action() - float(problem.delta_I @ A)


def _cluster_groups(thetas, split_gap):
    cuts = np.nonzero(np.diff(thetas) > split_gap)[0] + 1
    return np.split(np.arange(len(thetas)), cuts)


def _exact_sum(problem: ChainProblem, A, thetas) -> float:
    """k-bump action as a sum over independently solved clusters (memoised)."""
    cache = problem._exact_cache
    if len(cache) > 20000:
        cache.clear()
    total = 0.0
    for g in _cluster_groups(thetas, problem.settings.split_gap):
        key = (A.tobytes(), thetas[g].tobytes())
        if key not in cache:
            cache[key] = solve_k_bump(problem.params, problem.f, A, thetas[g],
                                      problem.settings).action()
        total += cache[key]
    return total


def reduced_Hk(problem: ChainProblem, a_slow, s, mode: str = "exact", a1: float = 0.0) -> float:
    """Reduced heteroclinic function ``H^k(a, s)``.

    ``exact`` solves the glued k-bump problem at ``theta(s, a_1)``; ``fast``
    sums single-bump values ``G`` (the coupling terms dropped).
    """
    a_slow = np.asarray(a_slow, dtype=float)
    s = np.asarray(s, dtype=float)
    lin = problem.linear_term(a_slow, a1)
    if mode == "exact":
        return _exact_sum(problem, problem.angles(a_slow, a1), problem.thetas(s, a1)) - lin
    if mode == "fast":
        if problem.G is None:
            raise ValueError("fast mode needs a surrogate G")
        X = problem.slow_points(a_slow)
        P = problem.basis.to_angles(np.column_stack([s, X]))
        return float(np.sum(problem.G(P))) - lin
    raise ValueError("mode must be 'exact' or 'fast'")


def coupling_budget(problem: ChainProblem) -> float:
    """Fitted decay bound on ``|exact - fast|`` at the schedule's minimal gap."""
    decay = problem.meta.get("decay")
    if decay is None or problem.k < 2:
        return 0.0
    gap = float(np.min(np.diff(problem.thetas(np.zeros(problem.k))))) - problem.meta.get("Delta_time", 0.0)
    return (problem.k - 1) * float(decay.bound(gap))


# -- maximisation --------------------------------------------------------------------

@dataclass
class OptSettings:
    max_cycles: int = 40
    grid_n: int = 64
    newton_iter: int = 12
    fd_step: float = 1e-3
    grad_tol: float = 1e-7


@dataclass
class ChainCriticalPoint:
    a_slow: np.ndarray
    s: np.ndarray
    value: float
    interior: bool
    gradient_inf: float
    box_distances: dict
    mode: str = "fast"
    violations: list = field(default_factory=list)
    cycles: int = 0
    gradient: Optional[np.ndarray] = None
    local_max_excess: float = float("nan")

    def to_dict(self):
        return dict(a_slow=self.a_slow.tolist(), s=self.s.tolist(), value=self.value,
                    interior=self.interior, gradient_inf=self.gradient_inf,
                    box_distances={k: float(np.min(v)) for k, v in self.box_distances.items()},
                    mode=self.mode, violations=self.violations, cycles=self.cycles,
                    local_max_excess=self.local_max_excess)


def _fast_derivs(problem: ChainProblem, a, s, hessian: bool = False):
    X = problem.slow_points(a)
    P = problem.basis.to_angles(np.column_stack([s, X]))
    Om = problem.basis.Omega
    g = problem.G.gradient(P) @ Om                 # (k, n): d/ds_i, d/dx_i
    grad = np.concatenate([g[:, 1:].sum(0) - problem.lin[1:], g[:, 0]])
    if not hessian:
        return grad, None
    Hs = np.einsum("ia,mij,jb->mab", Om, problem.G.hessian(P), Om)
    m = a.size
    k = s.size
    H = np.zeros((m + k, m + k))
    H[:m, :m] = Hs[:, 1:, 1:].sum(0)
    H[:m, m:] = Hs[:, 1:, 0].T
    H[m:, :m] = Hs[:, 0, 1:]
    H[m:, m:] = np.diag(Hs[:, 0, 0])
    return grad, H


def box_distances(problem: ChainProblem, a_slow, s) -> dict:
    X = problem.slow_points(a_slow)
    rho = problem.cp.rho
    out = dict(s_lower=np.asarray(s) - problem.cp.l1(X), s_upper=problem.cp.l2(X) - np.asarray(s),
               x2=rho - np.abs(X[:, 0]))
    if X.shape[1] > 1:
        out["x_rest"] = rho - np.linalg.norm(X[:, 1:], axis=1)
    return out


def _a_bounds(problem: ChainProblem):
    chis = problem.schedule.chis
    rho = problem.cp.rho
    r_rest = rho / math.sqrt(max(1, chis.shape[1] - 1))
    bounds = []
    for j in range(chis.shape[1]):
        r = rho if j == 0 else r_rest
        bounds.append((-r - chis[:, j].min(), r - chis[:, j].max()))
    return bounds


def central_gradient(fun: Callable, a, s, h: float, s_only_fun: Optional[Callable] = None):
    """Central-difference gradient of ``fun(a, s)`` in ``(a, s)``."""
    a = np.asarray(a, float)
    s = np.asarray(s, float)
    g = np.empty(a.size + s.size)
    for j in range(a.size):
        e = np.zeros(a.size)
        e[j] = h
        g[j] = (fun(a + e, s) - fun(a - e, s)) / (2 * h)
    for i in range(s.size):
        e = np.zeros(s.size)
        e[i] = h
        g[a.size + i] = (fun(a, s + e) - fun(a, s - e)) / (2 * h)
    return g


def maximize_chain(problem: ChainProblem, mode: str = "fast", opt: OptSettings = OptSettings(),
                   require_condition: bool = True) -> ChainCriticalPoint:
    """Maximise ``H^k`` over the box: cyclic ascent, then a joint Newton polish.

    The ``s`` block is maximised globally per bump on ``[l_1, l_2]``, the slow
    block by a bounded quasi-Newton step.  Interiority is decided from the
    box slacks and a central-difference gradient of the chosen mode.
    """
    cert = problem.meta.get("cert")
    if require_condition and cert is not None and not cert.passed:
        raise ConditionNotVerified(f"splitting condition not verified: {cert.failure or cert.margins}")
    if problem.G is None:
        raise ValueError("maximisation uses the surrogate G; none attached")
    G, basis, cp = problem.G, problem.basis, problem.cp
    m = problem.params.n - 1
    k = problem.k
    a = np.zeros(m)
    scale = max(problem.params.mu, float(np.max(np.abs(problem.lin[1:]), initial=0.0)), 1e-300)
    bounds = _a_bounds(problem)

    def s_step(a):
        X = problem.slow_points(a)
        _, arg = sup_J_many(G, basis, X, cp.l1(X), cp.l2(X), opt.grid_n)
        return np.asarray(arg, float)

    def a_step(a, s):
        base = reduced_Hk(problem, a, s, "fast")

        def negf(x):
            return -(reduced_Hk(problem, x, s, "fast") - base) / scale

        def negg(x):
            return -_fast_derivs(problem, x, s)[0][:m] / scale

        res = minimize(negf, a, jac=negg, method="L-BFGS-B", bounds=bounds,
                       options=dict(gtol=1e-14, ftol=1e-16, maxiter=200))
        return res.x

    s = s_step(a)
    cycles = 0
    for cycles in range(1, opt.max_cycles + 1):
        a_new = a_step(a, s)
        s_new = s_step(a_new)
        da = np.max(np.abs(a_new - a))
        ds = np.max(np.abs(s_new - s))
        a, s = a_new, s_new
        if da < 1e-12 and ds < 1e-10:
            break
    # joint Newton polish (only meaningful at an interior nondegenerate max)
    z = np.concatenate([a, s])
    for _ in range(opt.newton_iter):
        g, H = _fast_derivs(problem, z[:m], z[m:], hessian=True)
        if np.max(np.abs(g)) < 1e-15 * scale:
            break
        try:
            if np.max(np.linalg.eigvalsh(0.5 * (H + H.T))) >= 0:
                break
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        znew = z + step
        if reduced_Hk(problem, znew[:m], znew[m:], "fast") < reduced_Hk(problem, z[:m], z[m:], "fast") - 1e-13 * max(1.0, abs(scale)):
            break
        z = znew
    a, s = z[:m], z[m:]
    if mode == "exact":
        a, s = _exact_polish(problem, a, s, opt)

    fun = lambda aa, ss: reduced_Hk(problem, aa, ss, mode)
    dists = box_distances(problem, a, s)
    viol = [f"{name}[{i}]" for name, v in dists.items() for i in np.nonzero(v <= 0)[0]]
    h = opt.fd_step
    near = min(float(np.min(v)) for v in dists.values())
    if near > h:
        grad = central_gradient(fun, a, s, h)
        ginf = float(np.max(np.abs(grad)))
    else:
        grad = None
        ginf = float("inf")
    value = fun(a, s)
    interior = not viol and ginf <= opt.grad_tol
    crit = ChainCriticalPoint(a, s, value, interior, ginf, dists, mode, viol, cycles, grad)
    if interior:
        crit.local_max_excess = local_max_check(problem, crit, mode)
    return crit


def _exact_polish(problem, a, s, opt: OptSettings):
    """Newton steps with exact central-difference gradients and the fast Hessian."""
    m = a.size
    fun = lambda aa, ss: reduced_Hk(problem, aa, ss, "exact")
    z = np.concatenate([a, s])
    for _ in range(3):
        g = central_gradient(fun, z[:m], z[m:], opt.fd_step)
        if np.max(np.abs(g)) <= 0.1 * opt.grad_tol:
            break
        _, H = _fast_derivs(problem, z[:m], z[m:], hessian=True)
        try:
            z = z - np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
    return z[:m], z[m:]


def local_max_check(problem: ChainProblem, crit: ChainCriticalPoint, mode: str = "fast") -> float:
    """Largest increase of ``H^k`` when single ``s_i`` move by ``+-sigma/10``."""
    d = problem.cp.sigma / 10
    worst = -np.inf
    for i in range(problem.k):
        for sg in (-1.0, 1.0):
            s = crit.s.copy()
            s[i] += sg * d
            worst = max(worst, reduced_Hk(problem, crit.a_slow, s, mode) - crit.value)
    return float(worst)


# -- reconstruction ----------------------------------------------------------------------

@dataclass
class DiffusionRun:
    trajectory: Trajectory
    I_drift: np.ndarray
    T_d: float
    eta_neighborhood: float
    bound_Td: float
    thetas: np.ndarray = None
    t_start: float = float("nan")
    t_end: float = float("nan")
    drift_error: float = float("nan")
    reintegration_error: float = float("nan")
    energy_drift: float = float("nan")
    components: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(schema="ttsdiffusion.run/1", I_drift=self.I_drift.tolist(), T_d=self.T_d,
                    eta_neighborhood=self.eta_neighborhood, bound_Td=self.bound_Td,
                    thetas=self.thetas.tolist(), t_start=self.t_start, t_end=self.t_end,
                    drift_error=self.drift_error, reintegration_error=self.reintegration_error,
                    energy_drift=self.energy_drift, components=self.components,
                    n_samples=len(self.trajectory))


def _segment_states(problem: ChainProblem, sol: HomoclinicSolution, I_start):
    om = problem._omega
    mu = problem.params.mu
    rows = []
    I_cur = np.asarray(I_start, float)
    for seg in sol.segments:
        t = seg.mesh.nodes
        q = seg.refv["q"] + seg.v
        dl, dr = seg.mesh.derivative_both(seg.v)
        p = seg.refv["qdot"] + 0.5 * (dl + dr)
        phi = np.outer(t, om) + sol.A
        rate = mu * _one_minus_cos(seg)[:, None] * problem.f.gradient(phi)
        I = I_cur + np.column_stack([seg.mesh.cumulative(rate[:, j]) for j in range(rate.shape[1])])
        rows.append((t, phi, I, q, p))
        I_cur = I[-1]
    cat = [np.concatenate([r[j] for r in rows]) for j in range(5)]
    return cat, I_cur


def _torus_distance_fn(sol: HomoclinicSolution):
    def d(t):
        q, p = sol.evaluate([t])
        qw = np.mod(q[0] + np.pi, TWO_PI) - np.pi
        return math.hypot(qw, p[0])
    return d


def reconstruct_orbit(problem: ChainProblem, crit: ChainCriticalPoint, eta: float = 1e-3,
                      reintegrate: bool = True, window: float = 10.0) -> DiffusionRun:
    """Glue the chain at the critical point and recover the diffusion orbit."""
    if not crit.interior:
        raise NotInteriorError(f"critical point is not interior: {crit.violations or 'gradient'}")
    if not 0 < eta < 1:
        raise ValueError("eta must be in (0, 1)")
    params, f = problem.params, problem.f
    A = problem.angles(crit.a_slow)
    thetas = problem.thetas(crit.s)
    sol = solve_k_bump(params, f, A, thetas, problem.settings)
    (t, phi, I, q, p), I_end = _segment_states(problem, sol, problem.I0)
    E = hamiltonian(params, f, phi, I, q, p)
    traj = Trajectory(t, phi, I, q, p, E)
    # clip to the eta-neighbourhoods of the two tori
    d = _torus_distance_fn(sol)
    lo = thetas[0] - 1.0
    a = lo - 1.0
    while d(a) > eta:
        a -= 5.0
    t_start = brentq(lambda x: d(x) - eta, a, lo, xtol=1e-12)
    hi = thetas[-1] + 1.0
    b = hi + 1.0
    while d(b) > eta:
        b += 5.0
    t_end = brentq(lambda x: d(x) - eta, hi, b, xtol=1e-12)
    T_d = t_end - t_start
    drift = I_end - problem.I0
    drift_err = float(np.max(np.abs(drift - problem.delta_I)))
    # independent re-integration on both sides of each gluing time
    re_err = float("nan")
    if reintegrate:
        errs = []
        gaps = np.diff(thetas)
        for i, th in enumerate(thetas):
            wl = min(window, 0.5 * gaps[i - 1]) if i > 0 else window
            wr = min(window, 0.5 * gaps[i]) if i < len(thetas) - 1 else window
            for (t0, t1) in ((th - wl, th), (th, th + wr)):
                q0, p0 = sol.evaluate([t0])
                te = np.linspace(t0, t1, 41)[:-1] if t1 == th else np.linspace(t0, t1, 41)
                tt, qq, pp = integrate_pendulum(params, f, A, q0[0], p0[0], (t0, t1), tol=1e-13,
                                                t_eval=te)
                qb, pb = sol.evaluate(tt)
                errs.append(max(np.max(np.abs(qq - qb)), np.max(np.abs(pp - pb))))
        re_err = float(max(errs))
    bound, comps = td_bound(problem, eta)
    comps = dict(comps, energy_drift=traj.energy_drift)
    return DiffusionRun(traj, drift, float(T_d), eta, bound, thetas, float(t_start), float(t_end),
                        drift_err, re_err, traj.energy_drift, comps)


def td_bound(problem: ChainProblem, eta: float):
    """Right-hand side of the diffusion-time estimate with fitted constants.

    ``(k - 1)`` transitions of at most ``(spacing_hi + Delta)|Omega_1|/|omega|``
    each, where ``spacing_hi = min_gap + C_2 |omega| / (gamma sigma^tau)``,
    plus the two tail passages ``|ln eta| + ln 16`` to and from the tori.
    """
    sch = problem.schedule
    Delta = problem.meta.get("Delta", 4 * math.pi)
    per = (sch.spacing_hi + Delta) * problem.time_scale
    tail = 2.0 * (abs(math.log(eta)) + math.log(16.0))
    bound = (problem.k - 1) * per + tail
    return float(bound), dict(per_transition=float(per), tail=float(tail), k=problem.k,
                              spacing_hi=float(sch.spacing_hi), spacing_lo=float(sch.spacing_lo),
                              Delta=float(Delta))


def theorem_rhs(params: SystemParams, dI_norm: float, gamma: float, tau: float) -> float:
    """``|Delta I| / (mu eps^{a+1/2}) * max{1/(gamma eps^{(a+1/2) tau}), |ln mu|}``."""
    e, a, mu = params.eps, params.a, params.mu
    r = e ** (a + 0.5)
    return dI_norm / (mu * r) * max(1.0 / (gamma * r ** tau), abs(math.log(mu)))


# -- pipeline --------------------------------------------------------------------------

def _psi_grid(params, f, M, settings):
    """``G_tilde`` and ``k_mu`` sampled on the same tensor grid."""
    n = params.n
    axes = [TWO_PI * np.arange(M) / M] * n
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    gt = np.empty(len(pts))
    km = np.empty(len(pts))
    for i, A in enumerate(pts):
        Q = solve_one_bump_psi(params, f, A, 0.0, settings)
        gt[i] = Q.action()
        km[i] = pi_crossing_time(Q)
    shape = (M,) * n
    return (FourierSurrogate.from_values(gt.reshape(shape), meta={"M": [M] * n}),
            FourierSurrogate.from_values(km.reshape(shape), drop=0.0, meta={"M": [M] * n}))


def _pi_grid(params, f, M, settings):
    n = params.n
    axes = [TWO_PI * np.arange(M) / M] * n
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = np.array([solve_one_bump_pi(params, f, A, 0.0, settings).action() for A in pts])
    return FourierSurrogate.from_values(vals.reshape((M,) * n), meta={"M": [M] * n})


@dataclass
class PipelineSettings:
    tau: float = 2.0
    K_max: int = 60
    M: int = 8
    probe_m: int = 9
    grids: ConditionGrids = field(default_factory=lambda: ConditionGrids(48, 9))
    k_cap: int = 200
    bvp: BvpSettings = BvpSettings()


def build_chain_problem(params: SystemParams, f: TrigPerturbation, dI_norm: float, I0=None,
                        direction: str = "omega3", ps: PipelineSettings = PipelineSettings()
                        ) -> ChainProblem:
    """Condition check, transition count, epochs: everything before maximisation.

    ``direction='omega3'`` moves the actions along ``Omega_3`` (slow
    actions only); ``'I1'`` along the unit vector of ``span{Omega_1,
    Omega_2}`` orthogonal to ``omega``, with ``k`` scaled by ``1/delta_2``.
    """
    n = params.n
    fv = frequency_vector(params)
    basis = lemma33_basis(params)
    cp0 = lemma33_parameters(params)
    Om = basis.Omega
    if direction == "omega3":
        u = Om[:, 2]
        k = transition_count(dI_norm, cp0.rho, cp0.delta3)
    elif direction == "I1":
        w = Om[:, 1] - (Om[:, 1] @ fv.omega) / (fv.omega @ fv.omega) * fv.omega
        u = w / np.linalg.norm(w)
        k = transition_count(dI_norm, cp0.rho, cp0.delta2)
    else:
        raise ValueError("direction must be 'omega3' or 'I1'")
    if k > ps.k_cap:
        raise KCapError(k, ps.k_cap)
    I0 = np.zeros(n) if I0 is None else np.asarray(I0, float)
    I0p = I0 + dI_norm * u
    dio = estimate_gamma(fv.omega, ps.tau, ps.K_max)
    Gt, kmu = _psi_grid(params, f, ps.M, ps.bvp)
    cert_t = verify_condition(Gt, basis, cp0, ps.grids)
    G = _pi_grid(params, f, ps.M, ps.bvp)
    cert = transfer_condition(cert_t, G, kmu, fv.omega, ps.grids)
    cp = cert.params
    Delta = cp.Delta(cert.tables["x_i"]) if "x_i" in cert.tables else 4 * math.pi
    decay = fit_sum_decay(params, f, settings=ps.bvp)
    L_req = max(decay.required_gap(min(cp.delta1, cp.delta2) / 8), ps.bvp.min_gap + 1.0)
    ts = np.linalg.norm(Om[:, 0]) / fv.norm
    min_gap = L_req / ts + Delta
    ergo = ergodization_time(Om[:, 0], cp.sigma, probe_points(n, ps.probe_m),
                             omega_norm=fv.norm, gamma=dio.gamma, tau=ps.tau)
    extra = ergo.bound_ratio * fv.norm / (dio.gamma * cp.sigma ** ps.tau)
    sched = select_epochs(Om[:, 0], cp.sigma, k, min_gap, Om[:, 1:], spacing_extra=extra)
    meta = dict(cert=cert, cert_tilde=cert_t, dio=dio, decay=decay, ergo=ergo, kmu=kmu,
                G_tilde=Gt, Delta=float(Delta), L_req=float(L_req), C2=float(ergo.bound_ratio),
                direction=direction, dI_norm=float(dI_norm), Delta_time=float(Delta * ts))
    return ChainProblem(params, f, I0, I0p, basis, cp, sched, k, G=G, settings=ps.bvp,
                        omega2_allowed=(direction == "I1"), meta=meta)


def problem_summary(problem: ChainProblem) -> dict:
    m = problem.meta
    return dict(eps=problem.params.eps, mu=problem.params.mu, k=problem.k,
                gamma=m["dio"].gamma if "dio" in m else None,
                condition_passed=m["cert"].passed if "cert" in m else None,
                margins=m["cert"].margins if "cert" in m else None,
                decay_rate=m["decay"].rate if "decay" in m else None,
                L_req=m.get("L_req"), C2=m.get("C2"), Delta=m.get("Delta"),
                T_e=m["ergo"].T_e if "ergo" in m else None,
                etas=problem.schedule.etas.tolist())


@dataclass
class SweepResult:
    rows: list
    slope: float
    intercept: float
    r2: float
    predicted_exponent: float

    def table(self) -> list:
        return self.rows

    def to_dict(self):
        return dict(rows=self.rows, slope=self.slope, intercept=self.intercept, r2=self.r2,
                    predicted_exponent=self.predicted_exponent)


def default_mu(eps: float, a: float, c: float = 0.01) -> float:
    return c * min(eps ** 1.5, eps ** (2 * a + 1))


@dataclass(frozen=True)
class MuRule:
    """``mu = c * eps^exponent``, or ``c * min(eps^{3/2}, eps^{2a+1})`` without exponent."""

    c: float = 0.01
    exponent: Optional[float] = None

    def __call__(self, eps: float, a: float) -> float:
        if self.exponent is None:
            return default_mu(eps, a, self.c)
        return self.c * eps ** self.exponent


def run_pipeline(params, f, dI_norm, eta=1e-3, mode="fast", ps=PipelineSettings(),
                 opt=OptSettings(), direction="omega3", require_condition=True,
                 reintegrate=True):
    problem = build_chain_problem(params, f, dI_norm, direction=direction, ps=ps)
    crit = maximize_chain(problem, mode, opt, require_condition=require_condition)
    run = reconstruct_orbit(problem, crit, eta, reintegrate=reintegrate)
    return problem, crit, run


def sweep_row(template: SystemParams, f: TrigPerturbation, eps: float, dI_norm: float,
              mu_rule: MuRule = MuRule(), eta: float = 1e-3, gamma_floor: float = 0.05,
              ps=PipelineSettings(), opt=OptSettings(), reintegrate: bool = False) -> dict:
    """One sweep row; failures are recorded in ``status``."""
    p = SystemParams(eps=eps, a=template.a, beta=template.beta, mu=mu_rule(eps, template.a),
                     normalize_beta=template.normalize_beta, delta0=template.delta0)
    row = dict(eps=eps, mu=p.mu, a=p.a, status="ok")
    try:
        dio = estimate_gamma(frequency_vector(p).omega, ps.tau, ps.K_max)
        row["gamma"] = dio.gamma
        if dio.gamma < gamma_floor * eps ** p.a:
            row["status"] = "not diophantine-admissible"
            return row
        row["rhs"] = theorem_rhs(p, dI_norm, dio.gamma, ps.tau)
        problem = build_chain_problem(p, f, dI_norm, ps=ps)
        row.update(k=problem.k, condition_passed=problem.meta["cert"].passed)
        crit = maximize_chain(problem, "fast", opt)
        row.update(interior=crit.interior, gradient_inf=crit.gradient_inf,
                   a_slow=crit.a_slow.tolist(), s=crit.s.tolist())
        run = reconstruct_orbit(problem, crit, eta, reintegrate=reintegrate)
        row.update(T_d=run.T_d, bound_Td=run.bound_Td, drift_error=run.drift_error,
                   I1_drift=float(run.I_drift[0]), energy_drift=run.energy_drift)
    except Exception as exc:  # recorded, sweep continues
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def fit_sweep(rows: list) -> SweepResult:
    """Log-log fit of ``T_d`` against ``1/eps`` over the successful rows."""
    ok = [r for r in rows if r["status"] == "ok"]
    if len(ok) >= 2:
        x = np.log([1.0 / r["eps"] for r in ok])
        y = np.log([r["T_d"] for r in ok])
        slope, icpt = np.polyfit(x, y, 1)
        resid = y - (slope * x + icpt)
        r2 = 1.0 - resid @ resid / max(np.sum((y - y.mean()) ** 2), 1e-300)
        pred = float(np.polyfit(x, np.log([r["rhs"] for r in ok]), 1)[0])
    else:
        slope = icpt = r2 = pred = float("nan")
    return SweepResult(rows, float(slope), float(icpt), float(r2), pred)


def sweep_epsilon(template: SystemParams, f: TrigPerturbation, eps_list: Sequence[float],
                  dI_norm: float, mu_rule: MuRule = MuRule(), eta: float = 1e-3,
                  gamma_floor: float = 0.05, ps=PipelineSettings(), opt=OptSettings(),
                  reintegrate: bool = False, map_fn: Callable = map) -> SweepResult:
    """Full pipeline per ``eps`` (condition, epochs, maximisation, reconstruction).

    An ``eps`` is admitted when ``gamma_eps >= gamma_floor * eps^a``.  The
    predicted exponent is the log-log slope of :func:`theorem_rhs` over the
    admitted values.  ``map_fn`` may be a pool's ``map``; row order is kept.
    """
    fn = partial(sweep_row, template, f, dI_norm=dI_norm, mu_rule=mu_rule, eta=eta,
                 gamma_floor=gamma_floor, ps=ps, opt=opt, reintegrate=reintegrate)
    rows = list(map_fn(fn, list(eps_list)))
    return fit_sweep(rows)


def mu_ladder(params: SystemParams, f, dI_norm: float, mus: Sequence[float], eta: float = 1e-3,
              ps=PipelineSettings(), opt=OptSettings()) -> list:
    """``(mu, k, T_d)`` rows at fixed ``eps``."""
    out = []
    for mu in mus:
        pr, crit, run = run_pipeline(params.with_mu(mu), f, dI_norm, eta, ps=ps, opt=opt)
        out.append(dict(mu=mu, k=pr.k, T_d=run.T_d))
    return out


def mode_I1_experiment(params: SystemParams, f: TrigPerturbation, dI_norm: float,
                       eta: float = 1e-3, ps=PipelineSettings(), opt=OptSettings()):
    """Drift with an ``I_1`` component: ``k = floor(8|Delta I| rho/delta_2) + 1``.

    Experimental; refuses (:class:`KCapError`) when ``k`` exceeds ``ps.k_cap``.
    The splitting condition is recorded but not required.
    """
    problem = build_chain_problem(params, f, dI_norm, direction="I1", ps=ps)
    crit = maximize_chain(problem, "fast", opt, require_condition=False)
    run = reconstruct_orbit(problem, crit, eta)
    return problem, crit, run
