"""Matrix-exponential and quadrature helpers shared across modules."""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import expm

__all__ = ["expm_multi", "const_forcing_integral", "gauss_cells", "split_edges"]


def expm_multi(C, ts):
    """Stack of ``exp(C * t)`` for every t in ``ts``, shape (len(ts), n, n).

    Uses an eigendecomposition when the eigenvector basis is well conditioned,
    otherwise falls back to scaling-and-squaring per node.
    """
    C = np.atleast_2d(np.asarray(C))
    ts = np.asarray(ts, dtype=float)
    n = C.shape[0]
    if n == 1:
        return np.exp(C[0, 0] * ts).reshape(-1, 1, 1)
    try:
        w, V = np.linalg.eig(C)
        cond = np.linalg.cond(V)
    except np.linalg.LinAlgError:
        cond = np.inf
    if np.isfinite(cond) and cond < 1e8:
        Vinv = np.linalg.inv(V)
        E = np.exp(np.multiply.outer(ts, w))  # (m, n)
        out = np.einsum("ij,mj,jk->mik", V, E, Vinv)
        if not np.iscomplexobj(C):
            out = out.real
        return out
    return np.stack([expm(C * t) for t in ts])


def const_forcing_integral(B, k, ts):
    """``J(t) = int_0^t exp(B (xi - t)) k dxi`` for every t, shape (m, n).

    Computed from the block exponential of ``[[-B, k], [0, 0]]``, which avoids
    inverting a possibly singular B.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    k = np.atleast_1d(np.asarray(k, dtype=float))
    n = B.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = -B
    aug[:n, n] = k
    blocks = expm_multi(aug, ts)
    return blocks[:, :n, n]


def split_edges(a, b, breakpoints=(), h=None, min_cells=1):
    """Cell edges of ``[a, b]`` split at interior breakpoints, cells <= h."""
    if b <= a:
        raise ValueError("empty interval")
    if h is None:
        h = (b - a) / 64
    pts = [a] + sorted(t for t in breakpoints if a < t < b) + [b]
    edges = [a]
    for lo, hi in zip(pts, pts[1:]):
        m = max(min_cells, int(np.ceil((hi - lo) / h)))
        edges.extend(np.linspace(lo, hi, m + 1)[1:])
    return np.asarray(edges)


_LEGGAUSS_CACHE = {}


def _leggauss(npts):
    rule = _LEGGAUSS_CACHE.get(npts)
    if rule is None:
        rule = leggauss(npts)
        _LEGGAUSS_CACHE[npts] = rule
    return rule


def gauss_cells(edges, npts=4):
    """Composite Gauss-Legendre nodes/weights on the given cell edges."""
    x, w = _leggauss(npts)
    edges = np.asarray(edges, dtype=float)
    lo = edges[:-1, None]
    hi = edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights
