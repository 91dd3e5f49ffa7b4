"""Chebyshev-Lobatto spectral elements on a partition of an interval.

Small self-contained helpers: reference nodes, differentiation matrices,
Clenshaw-Curtis weights and barycentric interpolation, plus a mesh object
that tiles ``[t_0, t_m]`` with elements whose edges include prescribed
breakpoints.
"""

from __future__ import annotations

from functools import lru_cache
import math

import numpy as np


@lru_cache(maxsize=16)
def lobatto_nodes(p: int) -> np.ndarray:
    """Chebyshev-Lobatto points on [-1, 1] in increasing order."""
    x = -np.cos(np.pi * np.arange(p + 1) / p)
    x[p // 2] = 0.0 if p % 2 == 0 else x[p // 2]
    x.setflags(write=False)
    return x


@lru_cache(maxsize=16)
def diff_matrix(p: int) -> np.ndarray:
    """First-derivative matrix on the Lobatto nodes (negative-sum trick)."""
    x = lobatto_nodes(p)
    c = np.ones(p + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(p + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(p + 1))
    D -= np.diag(D.sum(axis=1))
    D.setflags(write=False)
    return D


@lru_cache(maxsize=16)
def cc_weights(p: int) -> np.ndarray:
    """Clenshaw-Curtis quadrature weights on the Lobatto nodes of [-1, 1]."""
    theta = np.pi * np.arange(p + 1) / p
    w = np.zeros(p + 1)
    v = np.ones(p - 1)
    inner = slice(1, p)
    if p % 2 == 0:
        w[0] = w[p] = 1.0 / (p * p - 1)
        for k in range(1, p // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(p * theta[inner]) / (p * p - 1)
    else:
        w[0] = w[p] = 1.0 / (p * p)
        for k in range(1, (p - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / p
    w.setflags(write=False)
    return w


@lru_cache(maxsize=16)
def cumulative_matrix(p: int) -> np.ndarray:
    """``S`` with ``(S v)_j = int_{-1}^{x_j}`` of the interpolant of ``v``."""
    x = lobatto_nodes(p)
    V = np.polynomial.chebyshev.chebvander(x, p)
    Vi = np.empty_like(V)
    for k in range(p + 1):
        e = np.zeros(p + 1)
        e[k] = 1.0
        Vi[:, k] = np.polynomial.chebyshev.chebval(x, np.polynomial.chebyshev.chebint(e, lbnd=-1))
    S = Vi @ np.linalg.inv(V)
    S.setflags(write=False)
    return S


@lru_cache(maxsize=16)
def bary_weights(p: int) -> np.ndarray:
    w = (-1.0) ** np.arange(p + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    w.setflags(write=False)
    return w


def bary_eval(x_nodes, w, values, x):
    """Barycentric interpolation of nodal ``values`` (last axis) at points ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    diff = x[:, None] - x_nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    tmp = w / diff
    out = (tmp @ values) / tmp.sum(axis=1)
    rows, cols = np.nonzero(exact)
    out[rows] = values[cols]
    return out


class ElementMesh:
    """Spectral-element mesh of degree ``p`` on ``[breaks[0], breaks[-1]]``.

    Each piece between consecutive breakpoints is split into equal elements of
    length at most ``h_max``.  Global node ``e*p + j`` is local node ``j`` of
    element ``e``; neighbouring elements share their interface node.
    """

    def __init__(self, breaks, h_max: float, p: int):
        breaks = np.asarray(breaks, dtype=float)
        if breaks.ndim != 1 or breaks.size < 2 or np.any(np.diff(breaks) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        edges = [breaks[:1]]
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            m = max(1, math.ceil((hi - lo) / h_max - 1e-9))
            edges.append(np.linspace(lo, hi, m + 1)[1:])
        self.edges = np.concatenate(edges)
        self.p = p
        self.E = self.edges.size - 1
        self.N = self.E * p + 1
        self.h = np.diff(self.edges)
        x = lobatto_nodes(p)
        t = self.edges[:-1, None] + 0.5 * (x[None, :] + 1.0) * self.h[:, None]
        nodes = np.empty(self.N)
        nodes[:-1] = t[:, :-1].ravel()
        nodes[-1] = self.edges[-1]
        self.nodes = nodes
        # make interface nodes bit-exact with the edges
        self.nodes[::p] = self.edges
        wq = cc_weights(p)
        weights = np.zeros(self.N)
        for e in range(self.E):
            weights[e * p:(e + 1) * p + 1] += 0.5 * self.h[e] * wq
        self.weights = weights
        self.break_nodes = np.searchsorted(self.nodes, breaks)
        if not np.allclose(self.nodes[self.break_nodes], breaks, rtol=0, atol=1e-12):
            raise RuntimeError("breakpoint not found on mesh")
        self.D_ref = diff_matrix(p)

    def element_slice(self, e: int) -> slice:
        return slice(e * self.p, (e + 1) * self.p + 1)

    def derivative(self, v: np.ndarray) -> np.ndarray:
        """Element-wise spectral derivative (interface values from the left element
        except at the first node)."""
        dV = self.element_derivatives(v)
        out = np.empty_like(v)
        out[:-1] = dV[:, :-1].ravel()
        out[-1] = dV[-1, -1]
        return out

    def derivative_both(self, v: np.ndarray):
        """Derivative with both one-sided values at every interface node."""
        dV = self.element_derivatives(v)
        left = np.empty_like(v)
        right = np.empty_like(v)
        right[:-1] = dV[:, :-1].ravel()
        right[-1] = dV[-1, -1]
        left[1:] = dV[:, 1:].ravel()
        left[0] = dV[0, 0]
        return left, right

    def integrate(self, v: np.ndarray) -> float:
        return float(self.weights @ v)

    def integrate_blocks(self, V: np.ndarray) -> float:
        """Integrate element-wise data of shape ``(E, p+1)`` (allows jumps at edges)."""
        return float(np.sum((V @ cc_weights(self.p)) * 0.5 * self.h))

    def cumulative(self, v: np.ndarray) -> np.ndarray:
        """Nodal values of ``int_{t_0}^{t} v``."""
        blocks = (self.element_values(v) @ cumulative_matrix(self.p).T) * (0.5 * self.h)[:, None]
        offs = np.concatenate([[0.0], np.cumsum(blocks[:, -1])])
        out = np.empty_like(v)
        out[:-1] = (blocks[:, :-1] + offs[:-1, None]).ravel()
        out[-1] = offs[-1]
        return out

    def locate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        e = np.searchsorted(self.edges, t, side="right") - 1
        return np.clip(e, 0, self.E - 1)

    def element_values(self, v: np.ndarray) -> np.ndarray:
        """View nodal values as an ``(E, p+1)`` array of element blocks."""
        return np.lib.stride_tricks.sliding_window_view(v, self.p + 1)[::self.p]

    def element_derivatives(self, v: np.ndarray) -> np.ndarray:
        """``(E, p+1)`` array of one-sided derivatives on each element."""
        return (self.element_values(v) @ self.D_ref.T) * (2.0 / self.h)[:, None]

    def interpolate(self, v: np.ndarray, t) -> np.ndarray:
        """Evaluate the piecewise polynomial interpolant of nodal ``v`` at ``t``."""
        return self.interpolate_blocks(self.element_values(v), t)

    def interpolate_blocks(self, V: np.ndarray, t) -> np.ndarray:
        """Interpolate element-wise data ``V`` of shape ``(E, p+1)`` at ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        e_idx = self.locate(t)
        out = np.empty(t.shape)
        x_ref = lobatto_nodes(self.p)
        w = bary_weights(self.p)
        for e in np.unique(e_idx):
            sel = e_idx == e
            x = 2.0 * (t[sel] - self.edges[e]) / self.h[e] - 1.0
            out[sel] = bary_eval(x_ref, w, V[e], x)
        return out
