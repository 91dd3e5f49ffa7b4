"""Numerical check of the splitting condition for a homoclinic function.

The homoclinic function is seen through a basis ``Omega`` adapted to the
frequency vector: ``H(a) = G(A_bar + Omega @ a)``.  With ``x = (a_2, y)``
and ``J(x) = sup_{a_1 in [l1(x), l2(x)]} H(a_1, x)`` the three clauses are

(i)   ``J(x) >= max(H(l1(x), x), H(l2(x), x)) + delta1`` on ``[-rho, rho] x B_rho``;
(ii)  ``J(a_2, y) >= J(0, y) - delta2/2`` for ``|a_2| <= sigma`` and
      ``J(a_2, y) <= J(0, y) - delta2`` for ``rho - 2 sigma <= |a_2| <= rho``;
(iii) ``J(a_2, y) >= J(0, 0) - delta3/2`` for ``|a_2| <= sigma, |y| <= sigma`` and
      ``J(a_2, y) <= J(0, 0) - delta3`` for ``|a_2| <= rho, rho - 2 sigma <= |y| <= rho``.

Every clause is reported as a signed margin (worst slack over a grid).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .system import SystemParams, frequency_vector


@dataclass
class SplittingBasis:
    A_bar: np.ndarray
    Omega: np.ndarray                  # columns are Omega_1..Omega_n

    @property
    def n(self) -> int:
        return self.Omega.shape[0]

    def to_angles(self, a) -> np.ndarray:
        """``A_bar + a_1 Omega_1 + ... + a_n Omega_n`` for rows of ``a``."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        return self.A_bar + a @ self.Omega.T

    def check(self, omega=None, tol: float = 1e-12) -> dict:
        """Basis invariants: norms, determinant, orthonormal tail, collinearity."""
        Om = self.Omega
        norms = np.linalg.norm(Om, axis=0)
        det = float(np.linalg.det(Om))
        tail = Om[:, 2:]
        gram = tail.T @ tail
        ortho = float(np.max(np.abs(gram - np.eye(tail.shape[1])))) if tail.size else 0.0
        perp = float(np.max(np.abs(Om[:, :2].T @ tail))) if tail.size else 0.0
        out = dict(norms_ok=bool(np.all((norms >= 0.5 - tol) & (norms <= 2 + tol))),
                   det=det, det_ok=det >= 0.5 - tol,
                   tail_orthonormal_err=ortho, tail_perp_err=perp)
        if omega is not None:
            om = np.asarray(omega, float)
            s = np.linalg.norm(om) / np.linalg.norm(Om[:, 0])
            out["collinear_err"] = float(np.max(np.abs(om - s * Om[:, 0])))
            out["positive"] = bool(om @ Om[:, 0] > 0)
        out["ok"] = (out["norms_ok"] and out["det_ok"] and ortho <= tol and perp <= tol
                     and out.get("collinear_err", 0.0) <= tol * max(1.0, np.linalg.norm(omega if omega is not None else [1])))
        return out

    def to_dict(self):
        return dict(A_bar=self.A_bar.tolist(), Omega=self.Omega.tolist())


def slow_complement(beta) -> np.ndarray:
    """Orthonormal basis of ``beta^perp`` in ``R^{n-1}`` by Gram-Schmidt on the
    standard vectors, oriented so that ``det[beta, complement] > 0``."""
    beta = np.asarray(beta, dtype=float)
    nb = np.linalg.norm(beta)
    if nb == 0:
        raise ValueError("beta must be nonzero")
    b = beta / nb
    vecs = [b]
    for e in np.eye(b.size):
        w = e - sum((e @ u) * u for u in vecs)
        nw = np.linalg.norm(w)
        if nw > 1e-8:
            vecs.append(w / nw)
        if len(vecs) == b.size:
            break
    M = np.column_stack(vecs)
    if np.linalg.det(M) < 0:
        M[:, -1] *= -1
    return M[:, 1:]


def lemma33_basis(params: SystemParams) -> SplittingBasis:
    """``Omega_1 = (1, eps^{a+1/2} beta)``, ``Omega_2 = (0, beta)``, ``Omega_j = (0, beta'_j)``."""
    beta = params.beta_vec
    if np.linalg.norm(beta) == 0:
        raise ValueError("beta must be nonzero")
    beta = beta / np.linalg.norm(beta)
    n = params.n
    Om = np.zeros((n, n))
    Om[0, 0] = 1.0
    Om[1:, 0] = params.eps ** (params.a + 0.5) * beta
    Om[1:, 1] = beta
    Om[1:, 2:] = slow_complement(beta)
    return SplittingBasis(np.zeros(n), Om)


@dataclass
class ConditionParams:
    rho: float
    sigma: float
    delta1: float
    delta2: float
    delta3: float
    l1: Callable = None
    l2: Callable = None
    l_const: tuple = (-2 * math.pi, 2 * math.pi)

    def __post_init__(self):
        if self.l1 is None:
            c = self.l_const[0]
            self.l1 = lambda x, c=c: np.full(np.atleast_2d(x).shape[0], c)
        if self.l2 is None:
            c = self.l_const[1]
            self.l2 = lambda x, c=c: np.full(np.atleast_2d(x).shape[0], c)

    def invariant_violations(self) -> list:
        bad = []
        for name in ("rho", "sigma", "delta1", "delta2", "delta3"):
            if not getattr(self, name) > 0:
                bad.append(f"{name} must be positive")
        if not 3 * self.sigma < self.rho:
            bad.append("3 sigma < rho violated")
        if not self.delta2 < self.delta3:
            bad.append("delta2 < delta3 violated")
        return bad

    def Delta(self, xs) -> float:
        return float(np.max(self.l2(xs)) - np.min(self.l1(xs)))

    def to_dict(self):
        return dict(rho=self.rho, sigma=self.sigma, delta1=self.delta1, delta2=self.delta2,
                    delta3=self.delta3, l_const=list(self.l_const))


def lemma33_parameters(params: SystemParams) -> ConditionParams:
    """``rho = pi eps^{a+1/2}``, ``sigma = rho/6``, ``delta1 = delta3 = mu rho^2/2``,
    ``delta2 = 3 pi mu eps^{-1/2} exp(-pi/(2 sqrt eps))``, ``l = -+2pi``."""
    e, a, mu = params.eps, params.a, params.mu
    rho = math.pi * e ** (a + 0.5)
    d2 = 3 * math.pi * mu / math.sqrt(e) * math.exp(-math.pi / (2 * math.sqrt(e)))
    return ConditionParams(rho=rho, sigma=rho / 6, delta1=mu * rho ** 2 / 2, delta2=d2,
                           delta3=mu * rho ** 2 / 2)


def H_in_basis(G: Callable, basis: SplittingBasis, a) -> np.ndarray:
    """``H(a) = G(A_bar + sum_i a_i Omega_i)`` for rows of ``a``."""
    return np.asarray(G(basis.to_angles(a)))


def _golden_refine(h, lo, hi, tol):
    res = minimize_scalar(lambda s: -h(s), bounds=(lo, hi), method="bounded",
                          options={"xatol": tol, "maxiter": 200})
    return -res.fun, res.x


def sup_J_many(G, basis: SplittingBasis, xs, l1, l2, grid_n: int = 64, n_refine: int = 3,
               xtol: float = 1e-10):
    """Vectorised ``sup_J`` over rows of ``xs``; returns ``(J, argmax)``."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    m = len(xs)
    lo = np.asarray(l1, float) * np.ones(m)
    hi = np.asarray(l2, float) * np.ones(m)
    s = np.linspace(0.0, 1.0, grid_n)
    A1 = lo[:, None] + (hi - lo)[:, None] * s[None, :]
    pts = np.concatenate([A1.reshape(-1, 1), np.repeat(xs, grid_n, axis=0)], axis=1)
    vals = H_in_basis(G, basis, pts).reshape(m, grid_n)
    J = np.empty(m)
    arg = np.empty(m)
    for i in range(m):
        v = vals[i]
        order = np.argsort(v)[::-1]
        best, best_a = v[order[0]], A1[i, order[0]]
        h = lambda a1, x=xs[i]: float(H_in_basis(G, basis, np.concatenate([[a1], x])[None])[0])
        seen = []
        for j in order[:max(1, n_refine)]:
            if any(abs(j - k) <= 1 for k in seen):
                continue
            seen.append(j)
            a_lo = A1[i, max(j - 1, 0)]
            a_hi = A1[i, min(j + 1, grid_n - 1)]
            val, am = _golden_refine(h, a_lo, a_hi, xtol)
            if val > best:
                best, best_a = val, am
        J[i], arg[i] = best, best_a
    return J, arg


def sup_J(G, basis: SplittingBasis, cp: ConditionParams, x, grid_n: int = 64):
    """``J(x) = sup_{a_1 in [l1(x), l2(x)]} H(a_1, x)`` and its maximiser."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    J, arg = sup_J_many(G, basis, x, cp.l1(x), cp.l2(x), grid_n)
    return float(J[0]), float(arg[0])


# -- sampling of the compacta ---------------------------------------------------

def _segment(lo, hi, m):
    return np.linspace(lo, hi, m)


def ball_points(radius: float, dim: int, m: int) -> np.ndarray:
    """Grid points of the closed ball of ``radius`` in ``R^dim`` (``m`` per axis)."""
    if dim == 0:
        return np.zeros((1, 0))
    g = np.linspace(-radius, radius, m)
    if dim == 1:
        return g[:, None]
    P = np.stack(np.meshgrid(*([g] * dim), indexing="ij"), -1).reshape(-1, dim)
    keep = np.linalg.norm(P, axis=1) <= radius * (1 + 1e-12)
    # add boundary points along the axes so the sphere is represented
    extra = np.concatenate([np.eye(dim), -np.eye(dim)]) * radius
    return np.unique(np.vstack([P[keep], extra]), axis=0)


def shell_points(r_in: float, r_out: float, dim: int, m: int) -> np.ndarray:
    """Grid points with ``r_in <= |y| <= r_out``."""
    if dim == 1:
        return np.concatenate([_segment(-r_out, -r_in, m), _segment(r_in, r_out, m)])[:, None]
    P = ball_points(r_out, dim, 2 * m)
    r = np.linalg.norm(P, axis=1)
    return P[r >= r_in * (1 - 1e-12)]


@dataclass
class ConditionGrids:
    a1_n: int = 64
    x_n: int = 17

    def doubled(self) -> "ConditionGrids":
        return ConditionGrids(2 * self.a1_n, 2 * self.x_n - 1)


@dataclass
class SplittingConditionCert:
    params: ConditionParams
    basis: SplittingBasis
    clause_i_margin: float
    clause_ii_margins: tuple
    clause_iii_margins: tuple
    grid_resolution: tuple
    passed: bool
    failure: Optional[str] = None
    tables: dict = field(default_factory=dict, repr=False)

    @property
    def margins(self) -> dict:
        return {"i": self.clause_i_margin, "ii_a": self.clause_ii_margins[0],
                "ii_b": self.clause_ii_margins[1], "iii_a": self.clause_iii_margins[0],
                "iii_b": self.clause_iii_margins[1]}

    def to_dict(self, tables: bool = True) -> dict:
        d = dict(schema="ttsdiffusion.condition/1", params=self.params.to_dict(),
                 basis=self.basis.to_dict(), margins=self.margins,
                 grid_resolution=list(self.grid_resolution), passed=self.passed,
                 failure=self.failure)
        if tables:
            d["tables"] = {k: np.asarray(v).tolist() for k, v in self.tables.items()}
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), indent=2)


class _JCache:
    """Memoised ``J`` evaluations at slow points ``x``."""

    def __init__(self, G, basis, cp, a1_n):
        self.G, self.basis, self.cp, self.a1_n = G, basis, cp, a1_n
        self.store = {}
        self.argmax = {}

    def __call__(self, xs) -> np.ndarray:
        xs = np.atleast_2d(xs)
        keys = [tuple(np.round(x, 15)) for x in xs]
        todo = [i for i, k in enumerate(keys) if k not in self.store]
        if todo:
            X = xs[todo]
            J, arg = sup_J_many(self.G, self.basis, X, self.cp.l1(X), self.cp.l2(X), self.a1_n)
            for i, j, a in zip(todo, J, arg):
                self.store[keys[i]] = j
                self.argmax[keys[i]] = a
        return np.array([self.store[k] for k in keys])


def verify_condition(G, basis: SplittingBasis, cp: ConditionParams,
                     grids: ConditionGrids = ConditionGrids()) -> SplittingConditionCert:
    """Evaluate all clauses on grids; ``passed`` iff every margin is >= 0."""
    n = basis.n
    dy = n - 2
    rho, sg = cp.rho, cp.sigma
    m = grids.x_n
    bad = cp.invariant_violations()
    Jc = _JCache(G, basis, cp, grids.a1_n)

    def product(a2s, ys):
        return np.array([[a, *y] for a in a2s for y in ys])

    try:
        Y_rho = ball_points(rho, dy, m)
        Y_sig = ball_points(sg, dy, m)
        Y_shell = shell_points(rho - 2 * sg, rho, dy, m)
        a2_full = _segment(-rho, rho, m)
        a2_in = _segment(-sg, sg, m)
        a2_out = np.concatenate([_segment(-rho, -rho + 2 * sg, m), _segment(rho - 2 * sg, rho, m)])

        # (i)
        X = product(a2_full, Y_rho)
        J = Jc(X)
        h1 = H_in_basis(G, basis, np.column_stack([cp.l1(X), X]))
        h2 = H_in_basis(G, basis, np.column_stack([cp.l2(X), X]))
        slack_i = J - np.maximum(h1, h2) - cp.delta1
        # (ii)
        J0y = {tuple(y): v for y, v in zip(map(tuple, Y_rho), Jc(product([0.0], Y_rho)))}
        Xa = product(a2_in, Y_rho)
        ref_a = np.array([J0y[tuple(x[1:])] for x in Xa])
        slack_ii_a = Jc(Xa) - ref_a + cp.delta2 / 2
        Xb = product(a2_out, Y_rho)
        ref_b = np.array([J0y[tuple(x[1:])] for x in Xb])
        slack_ii_b = ref_b - cp.delta2 - Jc(Xb)
        # (iii)
        J00 = float(Jc(np.zeros((1, n - 1)))[0])
        X3a = product(a2_in, Y_sig)
        slack_iii_a = Jc(X3a) - J00 + cp.delta3 / 2
        X3b = product(a2_full, Y_shell)
        slack_iii_b = J00 - cp.delta3 - Jc(X3b)
    except Exception as exc:  # evaluation failure: report, never pass
        return SplittingConditionCert(cp, basis, float("nan"), (float("nan"),) * 2,
                                      (float("nan"),) * 2, (grids.a1_n, grids.x_n), False,
                                      failure=f"{type(exc).__name__}: {exc}")
    margins = [slack_i.min(), slack_ii_a.min(), slack_ii_b.min(), slack_iii_a.min(), slack_iii_b.min()]
    tables = dict(x_i=X, slack_i=slack_i, x_ii_a=Xa, slack_ii_a=slack_ii_a, x_ii_b=Xb,
                  slack_ii_b=slack_ii_b, x_iii_a=X3a, slack_iii_a=slack_iii_a, x_iii_b=X3b,
                  slack_iii_b=slack_iii_b, J00=np.array([J00]))
    # parameter invariants (3 sigma < rho, delta2 < delta3) are part of the condition
    return SplittingConditionCert(
        cp, basis, float(margins[0]), (float(margins[1]), float(margins[2])),
        (float(margins[3]), float(margins[4])), (grids.a1_n, grids.x_n),
        bool(all(mg >= 0 for mg in margins)) and not bad,
        failure="; ".join(bad) if bad else None, tables=tables)


def J_profile(G, basis, cp, a2_values, y=None, grid_n: int = 64):
    """``(a_2, J(a_2, y), argmax)`` rows for plotting."""
    n = basis.n
    y = np.zeros(n - 2) if y is None else np.asarray(y, float)
    X = np.array([[a, *y] for a in a2_values])
    J, arg = sup_J_many(G, basis, X, cp.l1(X), cp.l2(X), grid_n)
    return np.column_stack([np.asarray(a2_values, float), J, arg])


def transfer_condition(cert_tilde: SplittingConditionCert, G, k_of_A: Callable,
                       omega, grids: Optional[ConditionGrids] = None) -> SplittingConditionCert:
    """Move the condition from ``G_tilde`` to ``G``.

    ``k_of_A`` maps angle rows to the time shift ``k_mu``; the new interval
    ends are ``l_j(x) = l~_j(x) + k(l~_j(x), x) |omega| / |Omega_1|`` and the
    clauses are re-checked for ``G`` with unchanged constants.
    """
    cpt = cert_tilde.params
    basis = cert_tilde.basis
    scale = np.linalg.norm(omega) / np.linalg.norm(basis.Omega[:, 0])

    def moved(lt):
        def l(x):
            x = np.atleast_2d(x)
            a1 = lt(x)
            A = basis.to_angles(np.column_stack([a1, x]))
            return a1 + np.asarray(k_of_A(A)) * scale
        return l

    cp = ConditionParams(cpt.rho, cpt.sigma, cpt.delta1, cpt.delta2, cpt.delta3,
                         l1=moved(cpt.l1), l2=moved(cpt.l2), l_const=cpt.l_const)
    if grids is None:
        grids = ConditionGrids(*cert_tilde.grid_resolution)
    return verify_condition(G, basis, cp, grids)
