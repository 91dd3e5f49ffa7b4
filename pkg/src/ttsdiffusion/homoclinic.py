"""Pseudo-homoclinic boundary-value solves for the forced pendulum.

Three problems on a truncated window, all for ``q(t)`` with
``-q'' + sin q (1 + mu f(omega t + A)) = forcing``:

* ``PiCrossing``: true solution on each side of ``theta``, continuous there
  with ``q(theta) = pi``, asymptotic to 0 and 2pi.
* ``PsiProjected``: one smooth solution of the equation forced by
  ``alpha * psi_theta(t)``, with ``int (Q - q_theta) psi_theta dt = 0``.
* ``KBump``: true solution between consecutive gluing times, with
  ``q(theta_i) = pi (2i - 1)``, asymptotic to 0 and ``2 pi k``.

The unknown is the deviation ``v = q - q_ref`` from a sum of unperturbed
separatrix bumps, discretised by Chebyshev spectral elements whose edges
include the gluing times.  Truncation edges carry Robin conditions from the
linearisation ``q'' = q`` near the hyperbolic point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .spectral import ElementMesh
from .system import SystemParams, TrigPerturbation, frequency_vector

TWO_PI = 2.0 * np.pi

PI_CROSSING = "PiCrossing"
PSI_PROJECTED = "PsiProjected"
K_BUMP = "KBump"


class NewtonError(RuntimeError):
    """Newton iteration did not converge.  Carries the last residual norm."""

    def __init__(self, message: str, residual: float, bump_index: Optional[int] = None):
        extra = "" if bump_index is None else f", worst near bump {bump_index}"
        super().__init__(f"{message} (residual {residual:.3e}{extra})")
        self.residual = residual
        self.bump_index = bump_index


class SingularJacobianError(RuntimeError):
    pass


class GapError(ValueError):
    pass


@dataclass(frozen=True)
class BvpSettings:
    """Discretisation and Newton controls.

    ``nodes_per_unit`` is the collocation density per unit time; elements have
    ``degree`` + 1 nodes, so their length is ``degree / nodes_per_unit``.
    Chains whose gaps exceed ``split_gap`` are solved as independent clusters.
    """

    t_radius: float = 16.0
    nodes_per_unit: int = 24
    degree: int = 24
    newton_tol: float = 1e-13
    newton_max_iter: int = 25
    min_gap: float = 10.0
    split_gap: float = 48.0

    def __post_init__(self):
        if self.t_radius < 10:
            raise ValueError("t_radius must be >= 10")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if self.degree < 4 or self.nodes_per_unit < 1:
            raise ValueError("degree >= 4 and nodes_per_unit >= 1 required")
        if self.split_gap < 2 * self.t_radius:
            raise ValueError("split_gap must be at least 2 * t_radius")

    @property
    def h_max(self) -> float:
        return self.degree / self.nodes_per_unit

    def to_dict(self) -> dict:
        return dict(t_radius=self.t_radius, nodes_per_unit=self.nodes_per_unit,
                    degree=self.degree, newton_tol=self.newton_tol,
                    newton_max_iter=self.newton_max_iter, min_gap=self.min_gap,
                    split_gap=self.split_gap)


def _exp_clip(x):
    return np.exp(np.clip(x, -700.0, 700.0))


def sech(s):
    u = _exp_clip(-np.abs(s))
    return 2.0 * u / (1.0 + u * u)


def psi0(t):
    """``cosh^2 t / (1 + cosh t)^3``, written in ``u = exp(-|t|)`` to avoid overflow."""
    u = _exp_clip(-np.abs(np.asarray(t, dtype=float)))
    return 2.0 * u * (1.0 + u * u) ** 2 / (1.0 + u) ** 6


class BumpReference:
    """Sum of separatrix bumps ``2 pi m0 + sum_i q0(t - theta_i)`` with accurate tails."""

    def __init__(self, thetas, m0: int = 0):
        self.thetas = np.asarray(thetas, dtype=float)
        self.k = self.thetas.size
        self.m0 = m0

    def evaluate(self, t):
        """Return a dict of reference quantities at times ``t``.

        ``low = q - 2 pi m0`` and ``high = 2 pi (m0 + k) - q`` are computed
        without cancellation; ``sin``/``cos`` use angle addition of exact
        single-bump values so one bump has zero reference residual.
        """
        t = np.asarray(t, dtype=float)
        S = t[..., None] - self.thetas
        e_pos = _exp_clip(S)
        e_neg = _exp_clip(-S)
        lo_i = 4.0 * np.arctan(e_pos)
        hi_i = 4.0 * np.arctan(e_neg)
        sh = sech(S)
        th = np.tanh(S)
        s_i = -2.0 * sh * th
        c_i = 1.0 - 2.0 * sh * sh
        sinR = np.zeros(t.shape)
        cosR = np.ones(t.shape)
        for j in range(self.k):
            sinR, cosR = sinR * c_i[..., j] + cosR * s_i[..., j], cosR * c_i[..., j] - sinR * s_i[..., j]
        qdot_i = 2.0 * sh
        qdot = qdot_i.sum(-1)
        low = lo_i.sum(-1)
        high = hi_i.sum(-1)
        # q mod 2pi taken from whichever representation is accurate
        q = TWO_PI * self.m0 + low
        return dict(q=q, low=low, high=high, qdot=qdot, qddot=s_i.sum(-1),
                    sin=sinR, cos=cosR,
                    L0_single_sum=(0.5 * qdot_i ** 2 + 2.0 * sh * sh).sum(-1),
                    qdot_sq_single=(qdot_i ** 2).sum(-1),
                    omc_single=(2.0 * sh * sh).sum(-1))

    def glue_targets(self) -> np.ndarray:
        """``pi (2i - 1) - q_ref(theta_i)`` (local bump index), cancellation-free."""
        th = self.thetas
        out = np.zeros(self.k)
        for i in range(self.k):
            d = th[i] - th
            left = d[:i]   # bumps already passed: q0 -> 2pi, deficit 4 arctan e^{-d}
            right = d[i + 1:]
            out[i] = (np.sum(4.0 * np.arctan(_exp_clip(-left)))
                      - np.sum(4.0 * np.arctan(_exp_clip(right))))
        return out


@dataclass
class _Segment:
    """One independently solved cluster of bumps."""

    mesh: ElementMesh
    ref: BumpReference
    refv: dict
    v: np.ndarray
    alpha: float
    glue_local: np.ndarray
    fval: np.ndarray
    residual_inf: float
    iterations: int

    @property
    def t_lo(self):
        return self.mesh.edges[0]

    @property
    def t_hi(self):
        return self.mesh.edges[-1]

    def tail_left(self):
        return self.refv["low"][0] + self.v[0]

    def tail_right(self):
        return self.refv["high"][-1] - self.v[-1]


@dataclass
class HomoclinicSolution:
    """A discretised pseudo-homoclinic orbit.

    ``grid``/``q_values``/``p_values`` concatenate all solved segments; use
    :meth:`evaluate` for values at arbitrary times.
    """

    variant: str
    A: np.ndarray
    thetas: np.ndarray
    grid: np.ndarray
    q_values: np.ndarray
    p_values: np.ndarray
    alpha: float
    winding: int
    residual_inf: float
    tail_decay_rate: float
    params: SystemParams
    f: TrigPerturbation
    settings: BvpSettings
    admissible: bool
    segments: list = field(repr=False, default_factory=list)
    newton_iterations: int = 0

    # -- dense evaluation -------------------------------------------------
    def evaluate(self, t):
        """Return ``(q, p)`` at times ``t``; exponential tails outside windows."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        q = np.empty(t.shape)
        p = np.empty(t.shape)
        segs = self.segments
        done = np.zeros(t.shape, bool)
        for seg in segs:
            sel = (t >= seg.t_lo) & (t <= seg.t_hi) & ~done
            if not np.any(sel):
                continue
            r = seg.ref.evaluate(t[sel])
            dV = seg.mesh.element_derivatives(seg.v)
            q[sel] = r["q"] + seg.mesh.interpolate(seg.v, t[sel])
            p[sel] = r["qdot"] + seg.mesh.interpolate_blocks(dV, t[sel])
            done |= sel
        rest = ~done
        if np.any(rest):
            tr = t[rest]
            qq = np.zeros(tr.shape)
            pp = np.zeros(tr.shape)
            for seg in segs:
                left = tr < seg.t_lo
                right = tr > seg.t_hi
                eL = _exp_clip(tr - seg.t_lo) * seg.tail_left()
                eR = _exp_clip(seg.t_hi - tr) * seg.tail_right()
                qq += np.where(left, eL, 0.0) + np.where(right, TWO_PI * seg.ref.k - eR, 0.0)
                pp += np.where(left, eL, 0.0) + np.where(right, eR, 0.0)
            q[rest] = qq
            p[rest] = pp
        return q, p

    def momentum_jumps(self):
        """One-sided momenta ``(p_minus, p_plus)`` at each gluing time."""
        pm, pp = [], []
        for seg in self.segments:
            dl, dr = seg.mesh.derivative_both(seg.v)
            for nidx in seg.glue_local:
                base = seg.refv["qdot"][nidx]
                pm.append(base + dl[nidx])
                pp.append(base + dr[nidx])
        return np.array(pm), np.array(pp)

    def action(self) -> float:
        """Action ``int L(q, q', t) dt`` over the real line (see :func:`chain_action`)."""
        return chain_action(self)

    def action_gradient_A(self) -> np.ndarray:
        """``dF/dA = mu int (1 - cos q) grad f(omega t + A) dt``."""
        om = frequency_vector(self.params).omega
        g = np.zeros(self.params.n)
        for seg in self.segments:
            omc = _one_minus_cos(seg)
            phi = np.outer(seg.mesh.nodes, om) + self.A
            grad = self.f.gradient(phi)
            g += self.params.mu * (seg.mesh.weights * omc) @ grad
        return g

    def sup_distance_to_reference(self) -> float:
        return float(max(np.max(np.abs(s.v)) for s in self.segments))

    def ode_residual(self, t, h: float = 1e-3) -> np.ndarray:
        """Independent residual check by a 4th-order central difference of the
        dense interpolant: ``-q'' + sin q (1 + mu f) - alpha psi_theta``."""
        t = np.asarray(t, dtype=float)
        q = [self.evaluate(t + j * h)[0] for j in (-2, -1, 0, 1, 2)]
        qdd = (-q[0] + 16 * q[1] - 30 * q[2] + 16 * q[3] - q[4]) / (12 * h * h)
        om = frequency_vector(self.params).omega
        fv = self.f.value(np.outer(t, om) + self.A)
        forcing = self.alpha * psi0(t - self.thetas[0]) if self.variant == PSI_PROJECTED else 0.0
        return -qdd + np.sin(q[2]) * (1 + self.params.mu * fv) - forcing

    def to_dict(self, full_grid: bool = False) -> dict:
        d = dict(schema="ttsdiffusion.homoclinic/1", variant=self.variant, A=self.A.tolist(),
                 thetas=self.thetas.tolist(), alpha=self.alpha, winding=self.winding,
                 residual_inf=self.residual_inf, tail_decay_rate=self.tail_decay_rate,
                 admissible=self.admissible, params=self.params.to_dict(),
                 grid_summary=dict(n_nodes=int(self.grid.size), t_min=float(self.grid[0]),
                                   t_max=float(self.grid[-1]),
                                   n_segments=len(self.segments)))
        if full_grid:
            d["grid"] = self.grid.tolist()
            d["q"] = self.q_values.tolist()
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), indent=2)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.grid, self.q_values, self.p_values]),
                   delimiter=",", header="t,q,p", comments="", fmt="%.17g")


def _one_minus_cos(seg: _Segment) -> np.ndarray:
    r = seg.refv
    v = seg.v
    s2 = np.sin(0.5 * v) ** 2
    return (1.0 - r["cos"]) + 2.0 * r["cos"] * s2 + r["sin"] * np.sin(v)


# -- linear algebra -----------------------------------------------------------

_BAND_CACHE: dict = {}


def _constant_band(mesh: ElementMesh, glue_mask: np.ndarray):
    """Banded storage of the state-independent part of the Jacobian."""
    key = (tuple(np.round(mesh.edges - mesh.edges[0], 12)), mesh.p, glue_mask.tobytes())
    hit = _BAND_CACHE.get(key)
    if hit is not None:
        return hit
    p, N, E = mesh.p, mesh.N, mesh.E
    ab = np.zeros((2 * p + 1, N))

    def put(row, cols, vals):
        ab[p + row - cols, cols] += vals

    D = mesh.D_ref
    D2 = D @ D
    ode_rows = np.zeros(N, bool)
    for e in range(E):
        sc = 2.0 / mesh.h[e]
        cols = np.arange(e * p, (e + 1) * p + 1)
        for j in range(1, p):
            put(e * p + j, cols, -D2[j] * sc * sc)
            ode_rows[e * p + j] = True
        if e >= 1:
            row = e * p
            if glue_mask[e]:
                put(row, np.array([row]), np.array([1.0]))
            else:
                sp = 2.0 / mesh.h[e - 1]
                put(row, np.arange((e - 1) * p, e * p + 1), D[p] * sp)
                put(row, cols, -D[0] * sc)
    put(0, np.arange(0, p + 1), D[0] * 2.0 / mesh.h[0])
    put(0, np.array([0]), np.array([-1.0]))
    put(N - 1, np.arange(N - 1 - p, N), D[p] * 2.0 / mesh.h[-1])
    put(N - 1, np.array([N - 1]), np.array([1.0]))
    if len(_BAND_CACHE) > 64:
        _BAND_CACHE.clear()
    _BAND_CACHE[key] = (ab, ode_rows)
    return ab, ode_rows


def _solve_segment(params: SystemParams, f: TrigPerturbation, A, ref: BumpReference,
                   glue: bool, psi_theta: Optional[float], settings: BvpSettings,
                   t_lo: float, t_hi: float) -> _Segment:
    th = ref.thetas
    breaks = np.concatenate([[t_lo], th, [t_hi]])
    mesh = ElementMesh(breaks, settings.h_max, settings.degree)
    p, N = mesh.p, mesh.N
    glue_nodes = mesh.break_nodes[1:-1]
    glue_mask = np.zeros(mesh.E + 1, bool)
    if glue:
        glue_mask[glue_nodes // p] = True
    ab0, ode_rows = _constant_band(mesh, glue_mask)
    t = mesh.nodes
    r = ref.evaluate(t)
    om = frequency_vector(params).omega
    mu = params.mu
    fval = f.value(np.outer(t, om) + np.asarray(A, dtype=float)) if mu else np.zeros(N)
    one_mu_f = 1.0 + mu * fval
    ref_res = (r["sin"] - r["qddot"])[ode_rows]
    targets = ref.glue_targets() if glue else None
    interfaces = np.arange(p, N - 1, p)
    c1_rows = interfaces[~glue_mask[interfaces // p]]

    psi_col = None
    if psi_theta is not None:
        psi = psi0(t - psi_theta)
        psi_col = np.zeros(N)          # d(residual)/d(alpha)
        psi_col[ode_rows] = -psi[ode_rows]
        psi_col[0] = 0.5 * psi[0]
        psi_col[-1] = -0.5 * psi[-1]
        cvec = mesh.weights * psi

    v = np.zeros(N)
    alpha = 0.0
    D2_blocks = None

    def residual(v, alpha):
        Vd = mesh.element_derivatives(v)
        res = np.zeros(N)
        # second derivative at interior element nodes
        V2 = (Vd @ mesh.D_ref.T) * (2.0 / mesh.h)[:, None]
        vdd = np.zeros(N)
        vdd_blocks = V2[:, 1:-1]
        idx = (np.arange(mesh.E)[:, None] * p + np.arange(1, p)[None, :]).ravel()
        vdd[idx] = vdd_blocks.ravel()
        sv = np.sin(v)
        s2 = np.sin(0.5 * v) ** 2
        dsin = -2.0 * r["sin"] * s2 + r["cos"] * sv
        body = -vdd + dsin * one_mu_f + mu * fval * r["sin"]
        res[ode_rows] = body[ode_rows] + ref_res
        if psi_col is not None:
            res += alpha * psi_col
        left_d = Vd[:, -1]             # derivative at right end of each element
        right_d = Vd[:, 0]
        e_if = c1_rows // p
        res[c1_rows] = left_d[e_if - 1] - right_d[e_if]
        if glue:
            res[glue_nodes] = v[glue_nodes] - targets
        res[0] += right_d[0] - v[0] + (r["qdot"][0] - r["low"][0])
        res[-1] += left_d[-1] + v[-1] + (r["qdot"][-1] - r["high"][-1])
        return res

    it = 0
    res = residual(v, alpha)
    for it in range(1, settings.newton_max_iter + 1):
        ab = ab0.copy()
        cosq = r["cos"] * np.cos(v) - r["sin"] * np.sin(v)
        diag = np.where(ode_rows, cosq * one_mu_f, 0.0)
        ab[p] += diag
        if psi_col is None:
            dv = solve_banded((p, p), ab, -res, overwrite_ab=True, check_finite=False)
            dalpha = 0.0
        else:
            X = solve_banded((p, p), ab, np.column_stack([-res, psi_col]),
                             overwrite_ab=True, check_finite=False)
            x1, x2 = X[:, 0], X[:, 1]
            denom = cvec @ x2
            if abs(denom) <= 1e-12 * np.linalg.norm(cvec) * np.linalg.norm(x2):
                raise SingularJacobianError("bordered Jacobian is singular")
            dalpha = (cvec @ v + cvec @ x1) / denom
            dv = x1 - dalpha * x2
        if not np.all(np.isfinite(dv)):
            raise NewtonError("non-finite Newton step", float(np.max(np.abs(res))))
        v = v + dv
        alpha += dalpha
        step = max(float(np.max(np.abs(dv))), abs(dalpha))
        res = residual(v, alpha)
        if step <= settings.newton_tol:
            break
        if step > 10.0:
            raise NewtonError("Newton iteration diverged", float(np.max(np.abs(res))),
                              _worst_bump(t, res, th))
    else:
        raise NewtonError("Newton iteration did not converge",
                          float(np.max(np.abs(res[ode_rows]))), _worst_bump(t, res, th))
    res_ode = res[ode_rows]
    seg = _Segment(mesh=mesh, ref=ref, refv=r, v=v, alpha=alpha,
                   glue_local=glue_nodes if glue else np.array([], int), fval=fval,
                   residual_inf=float(np.max(np.abs(res_ode))), iterations=it)
    return seg


def _worst_bump(t, res, thetas):
    i = int(np.argmax(np.abs(res)))
    return int(np.argmin(np.abs(thetas - t[i])))


def _tail_rate(segs, settings: BvpSettings) -> float:
    width = 0.5 * settings.t_radius
    rates = []
    first, last = segs[0], segs[-1]
    t = first.mesh.nodes
    sel = t <= first.t_lo + width
    ql = first.refv["low"][sel] + first.v[sel]
    if np.all(ql > 0):
        rates.append(np.polyfit(t[sel], np.log(ql), 1)[0])
    t = last.mesh.nodes
    sel = t >= last.t_hi - width
    gr = last.refv["high"][sel] - last.v[sel]
    if np.all(gr > 0):
        rates.append(-np.polyfit(t[sel], np.log(gr), 1)[0])
    if not rates:
        return float("nan")
    rates = np.array(rates)
    return float(rates[np.argmax(np.abs(rates - 1.0))])


def _assemble(variant, params, f, A, thetas, segs, settings) -> HomoclinicSolution:
    grid = np.concatenate([s.mesh.nodes for s in segs])
    q = np.concatenate([s.refv["q"] + s.v for s in segs])
    pv = np.concatenate([s.refv["qdot"] + s.mesh.derivative(s.v) for s in segs])
    return HomoclinicSolution(
        variant=variant, A=np.asarray(A, dtype=float).copy(), thetas=np.asarray(thetas, float),
        grid=grid, q_values=q, p_values=pv, alpha=float(segs[0].alpha) if variant == PSI_PROJECTED else 0.0,
        winding=int(len(thetas)), residual_inf=max(s.residual_inf for s in segs),
        tail_decay_rate=_tail_rate(segs, settings), params=params, f=f, settings=settings,
        admissible=params.admissible, segments=segs,
        newton_iterations=max(s.iterations for s in segs))


def _check_A(params, A):
    A = np.asarray(A, dtype=float)
    if A.shape != (params.n,):
        raise ValueError(f"A must have length {params.n}")
    return A


def solve_one_bump_pi(params: SystemParams, f: TrigPerturbation, A, theta: float = 0.0,
                      settings: BvpSettings = BvpSettings()) -> HomoclinicSolution:
    """Pi-crossing pseudo-homoclinic: true solution on both sides of ``theta``."""
    A = _check_A(params, A)
    ref = BumpReference([theta])
    seg = _solve_segment(params, f, A, ref, True, None, settings,
                         theta - settings.t_radius, theta + settings.t_radius)
    return _assemble(PI_CROSSING, params, f, A, [theta], [seg], settings)


def solve_one_bump_psi(params: SystemParams, f: TrigPerturbation, A, theta: float = 0.0,
                       settings: BvpSettings = BvpSettings()) -> HomoclinicSolution:
    """Psi-projected solution ``Q`` with multiplier ``alpha`` (bordered Newton)."""
    A = _check_A(params, A)
    ref = BumpReference([theta])
    seg = _solve_segment(params, f, A, ref, False, theta, settings,
                         theta - settings.t_radius, theta + settings.t_radius)
    return _assemble(PSI_PROJECTED, params, f, A, [theta], [seg], settings)


def solve_k_bump(params: SystemParams, f: TrigPerturbation, A, thetas,
                 settings: BvpSettings = BvpSettings()) -> HomoclinicSolution:
    """k-bump chain glued at ``q(theta_i) = pi (2i - 1)``.

    Bumps separated by more than ``settings.split_gap`` are solved as
    independent clusters; between clusters ``q`` rests at a multiple of 2pi
    up to terms of order ``exp(-gap/2)``.
    """
    A = _check_A(params, A)
    thetas = np.asarray(thetas, dtype=float).ravel()
    if thetas.size < 1:
        raise ValueError("need at least one bump")
    gaps = np.diff(thetas)
    if np.any(gaps <= settings.min_gap):
        raise GapError(f"minimal gap {gaps.min():.4g} is not above L={settings.min_gap}")
    cuts = np.nonzero(gaps > settings.split_gap)[0] + 1
    groups = np.split(np.arange(thetas.size), cuts)
    segs = []
    for g in groups:
        ref = BumpReference(thetas[g], m0=int(g[0]))
        try:
            seg = _solve_segment(params, f, A, ref, True, None, settings,
                                 thetas[g[0]] - settings.t_radius,
                                 thetas[g[-1]] + settings.t_radius)
        except NewtonError as exc:
            raise NewtonError("chain Newton failure", exc.residual,
                              int(g[0]) + (exc.bump_index or 0)) from exc
        segs.append(seg)
    return _assemble(K_BUMP, params, f, A, thetas, segs, settings)


# -- action -------------------------------------------------------------------

def _segment_action(seg: _Segment, mu: float) -> float:
    r, v, mesh = seg.refv, seg.v, seg.mesh
    s2 = np.sin(0.5 * v) ** 2
    sv = np.sin(v)
    dcos = 2.0 * r["cos"] * s2 + r["sin"] * sv           # cos q_ref - cos q
    omc_ref = 1.0 - r["cos"]
    smooth = dcos + mu * (omc_ref + dcos) * seg.fval
    # the kinetic part uses one-sided derivatives: v' jumps at gluing nodes
    Vd = mesh.element_derivatives(v)
    Qd = mesh.element_values(r["qdot"])
    total = mesh.integrate(smooth) + mesh.integrate_blocks(Qd * Vd + 0.5 * Vd ** 2)
    k = seg.ref.k
    base = 8.0 * k
    if k > 1:
        inter = (0.5 * (r["qdot"] ** 2 - r["qdot_sq_single"])
                 + (omc_ref - r["omc_single"]))
        base += mesh.integrate(inter)
    qL, qrL = r["low"][0] + v[0], r["low"][0]
    gR, grR = r["high"][-1] - v[-1], r["high"][-1]
    tails = 0.5 * (qL * qL - qrL * qrL) + 0.5 * (gR * gR - grR * grR)
    return base + total + tails


def chain_action(sol: HomoclinicSolution) -> float:
    """Action of a solution, as the sum over solved clusters.

    The reference part is exact (8 per bump plus a quadrature of the bump
    interaction); the deviation part is integrated by Clenshaw-Curtis on the
    window, with the exponential tails added analytically.
    """
    return float(sum(_segment_action(s, sol.params.mu) for s in sol.segments))
