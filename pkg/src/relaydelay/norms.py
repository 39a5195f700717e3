"""Lebesgue, Sobolev and Sobolev-Slobodeckij norms, and convergence-order fits.

The fractional seminorm is the double integral

    [f]^p = int int |f(t) - f(xi)|^p / |t - xi|^(1+sp) dxi dt .

It is evaluated in difference coordinates: with u = t - xi,

    [f]^p = 2 int_0^L u^(-1-sp) h(u) du,
    h(u)  = int_a^(b-u) |f(xi+u) - f(xi)|^p dxi,

which aligns the quadrature with the diagonal singularity.  The outer
integral is split at the pairwise gaps of f's breakpoints (where h has
kinks) and the singular panel at u = 0 is regularised by a power
substitution.  Jumps of f are permitted: they contribute h(u) ~ |jump|^p u,
integrable exactly when sp < 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import gauss_cells, split_edges
from .core import GridFunction, SystemParams

__all__ = ["NormSettings", "lp_norm", "w1p_norm", "fractional_seminorm",
           "fractional_norm", "composite_norm", "estimate_order", "OrderFit",
           "appendix_probe"]


@dataclass(frozen=True)
class NormSettings:
    """Quadrature and window settings for the composite B-space norm."""

    p: float
    s: float
    window: tuple        # fractional-norm interval, default (-T - sigma, 0)
    lp_domain: tuple     # L_p interval, default (-2T, 0)
    n_cells: int = 96
    gauss_pts: int = 4
    outer_pts: int = 12

    @classmethod
    def from_params(cls, params: SystemParams, n_cells=96):
        return cls(p=params.p, s=params.s,
                   window=(-params.T - params.sigma, 0.0),
                   lp_domain=(-params.delay, 0.0), n_cells=n_cells)


class LinComb:
    """Lazy linear combination of grid functions.

    Differences of map images are measured through this view so that no
    resampling ever touches the thin seam segments created by nearby hit
    times: each term is evaluated on its own exact representation and the
    union of breakpoints steers the quadrature.
    """

    def __init__(self, terms):
        self.terms = [(c, g) for c, g in terms]
        bps = set()
        for _, g in self.terms:
            bps.update(np.round(np.asarray(g.breakpoints, dtype=float), 14))
        self.breakpoints = tuple(sorted(bps))
        self.N = self.terms[0][1].N

    def __call__(self, t, side="right"):
        acc = None
        for c, g in self.terms:
            v = c * g(t, side=side)
            acc = v if acc is None else acc + v
        return acc


def _as_eval(f, breakpoints):
    """Uniform access to grid functions, lazy combinations and callables."""
    if hasattr(f, "breakpoints") and callable(f):
        def ev(t):
            return np.atleast_2d(f(np.asarray(t), side="right"))
        bps = sorted(set(f.breakpoints) | set(breakpoints))
        return ev, bps

    def ev(t):
        out = np.asarray(f(np.asarray(t)))
        if out.ndim == 1:
            out = out[:, None]
        return out
    return ev, list(breakpoints)


def lp_norm(f, interval, p, breakpoints=(), n_cells=96, gauss_pts=4):
    """The L_p norm of a (vector) function on an interval.

    Vector values are reduced pointwise with the Euclidean norm.  ``f`` may
    be a :class:`GridFunction` (breakpoints are taken from it) or a
    vectorized callable with explicit ``breakpoints``.
    """
    a, b = interval
    ev, bps = _as_eval(f, breakpoints)
    edges = split_edges(a, b, breakpoints=bps, h=(b - a) / n_cells)
    nodes, weights = gauss_cells(edges, gauss_pts)
    vals = ev(nodes)
    mag = np.linalg.norm(vals, axis=1)
    return float(np.sum(weights * mag ** p) ** (1.0 / p))


def w1p_norm(f, interval, p, fprime=None, breakpoints=(), n_cells=96,
             gauss_pts=4):
    """The W^1_p norm: ``||f||_p + ||f'||_p`` on the interval."""
    if isinstance(f, GridFunction):
        dpart = lp_norm(GridDeriv(f), interval, p, breakpoints=f.breakpoints,
                        n_cells=n_cells, gauss_pts=gauss_pts)
    else:
        if fprime is None:
            raise ValueError("callable input needs fprime")
        dpart = lp_norm(fprime, interval, p, breakpoints=breakpoints,
                        n_cells=n_cells, gauss_pts=gauss_pts)
    return lp_norm(f, interval, p, breakpoints=breakpoints, n_cells=n_cells,
                   gauss_pts=gauss_pts) + dpart


class GridDeriv:
    """Derivative view of a GridFunction (for quadrature of |f'|)."""

    def __init__(self, gf: GridFunction):
        self.gf = gf

    def __call__(self, t):
        return self.gf.deriv(np.asarray(t), side="right")


def _pair_gaps(bps, a, b, L, max_edges=14):
    """Outer-integral panel edges: pairwise gaps of the breakpoint set.

    Gaps closer than a relative tolerance are merged and the edge count is
    capped (keeping the smallest and largest); the integrand kinks at the
    dropped values are of negligible measure."""
    pts = sorted({a, b, *bps})
    gaps = sorted({q - r for q in pts for r in pts if q > r})
    out = []
    for g in gaps:
        if g <= 1e-13 or g > L + 1e-13:
            continue
        if out and g - out[-1] < 1e-4 * L:
            continue
        out.append(g)
    if len(out) > max_edges:
        idx = np.unique(np.round(np.linspace(0, len(out) - 1,
                                             max_edges)).astype(int))
        out = [out[i] for i in idx]
    return out


def _geometric_refine(lo, hi, max_ratio=4.0):
    """Subdivide (lo, hi) geometrically so every cell has hi/lo <= max_ratio."""
    if lo <= 0 or hi / lo <= max_ratio:
        return [lo, hi]
    m = int(np.ceil(np.log(hi / lo) / np.log(max_ratio)))
    return list(lo * (hi / lo) ** (np.arange(m + 1) / m))


def fractional_seminorm(f, interval, p, s, breakpoints=(), n_cells=96,
                        gauss_pts=4, outer_pts=12):
    """The Slobodeckij seminorm ``(int int |f(t)-f(xi)|^p/|t-xi|^{1+sp})^{1/p}``."""
    a, b = interval
    L = b - a
    if p * s >= 1.0:
        raise ValueError("need p*s < 1 for an integrable diagonal")
    ev, bps = _as_eval(f, breakpoints)
    bps = [t for t in bps if a < t < b]

    def h_of_u(u):
        """Inner integral over xi in (a, b-u), split at moving breakpoints."""
        cuts = set()
        for t in bps:
            cuts.add(t)
            cuts.add(t - u)
        edges = split_edges(a, b - u, breakpoints=sorted(cuts),
                            h=L / n_cells)
        xi, w = gauss_cells(edges, gauss_pts)
        diff = ev(xi + u) - ev(xi)
        return float(np.sum(w * np.linalg.norm(diff, axis=1) ** p))

    # outer panels split where the inner breakpoint pattern changes
    panel_edges = [0.0] + _pair_gaps(bps, a, b, L)
    if panel_edges[-1] < L - 1e-13:
        panel_edges.append(L)
    total = 0.0
    exponent = min(p - s * p, 1.0 - s * p)
    kappa = max(3, int(np.ceil(4.0 / exponent)))

    # below u_floor the shifted breakpoints are no longer representable in
    # floating point; there h(u) ~ sum |jump|^p * u, integrated analytically
    u_floor = 1e-12 * L
    if bps:
        dj = 1e-9 * L
        jumps = np.linalg.norm(
            ev(np.asarray(bps) + dj) - ev(np.asarray(bps) - dj), axis=1)
        total += float(np.sum(jumps ** p)) * u_floor ** (1.0 - s * p) \
            / (1.0 - s * p)

    for i, (lo, hi) in enumerate(zip(panel_edges, panel_edges[1:])):
        if i == 0:
            # singular panel: substitute u = hi * w^kappa on (u_floor, hi)
            w0 = (u_floor / hi) ** (1.0 / kappa)
            wn, ww = gauss_cells(np.linspace(w0, 1.0, 4), outer_pts)
            us = hi * wn ** kappa
            jac = hi * kappa * wn ** (kappa - 1)
            for u, wgt, j in zip(us, ww, jac):
                total += wgt * j * u ** (-1.0 - s * p) * h_of_u(u)
        else:
            # wide panels refined geometrically: the integrand still follows
            # a power profile on scales between the breakpoint gaps
            un, uw = gauss_cells(_geometric_refine(lo, hi), outer_pts)
            for u, wgt in zip(un, uw):
                total += wgt * u ** (-1.0 - s * p) * h_of_u(u)
    return float((2.0 * total) ** (1.0 / p))


def fractional_norm(f, interval, p, s, breakpoints=(), n_cells=96,
                    gauss_pts=4, outer_pts=12):
    """The W^s_p norm: L_p part plus the Slobodeckij seminorm."""
    return (lp_norm(f, interval, p, breakpoints=breakpoints, n_cells=n_cells,
                    gauss_pts=gauss_pts)
            + fractional_seminorm(f, interval, p, s, breakpoints=breakpoints,
                                  n_cells=n_cells, gauss_pts=gauss_pts,
                                  outer_pts=outer_pts))


def composite_norm(nu, vec, settings: NormSettings):
    """The product-space norm ``||nu||_Lp + ||nu||_{W^s_p(window)} + |vec|``.

    This is the norm in which orbital stability and all convergence orders
    are measured; ``vec`` may be empty (reduced coordinates with N = 1).
    """
    part_lp = lp_norm(nu, settings.lp_domain, settings.p,
                      n_cells=settings.n_cells, gauss_pts=settings.gauss_pts)
    part_ws = fractional_norm(nu, settings.window, settings.p, settings.s,
                              n_cells=settings.n_cells,
                              gauss_pts=settings.gauss_pts,
                              outer_pts=settings.outer_pts)
    vec = np.atleast_1d(np.asarray(vec)) if np.size(vec) else np.zeros(0)
    return part_lp + part_ws + float(np.linalg.norm(vec))


@dataclass(frozen=True)
class OrderFit:
    """Least-squares slope of log(residual) against log(epsilon)."""

    slope: float
    intercept: float
    r_squared: float
    used: int


def estimate_order(epsilons, residuals, min_samples=4) -> OrderFit:
    """Fit the convergence order from (epsilon, residual) samples.

    Nonpositive residuals are filtered out; fewer than two surviving samples
    is an error.
    """
    eps = np.asarray(epsilons, dtype=float)
    res = np.asarray(residuals, dtype=float)
    if len(eps) < min_samples:
        raise ValueError(f"need at least {min_samples} samples")
    keep = res > 0
    eps, res = eps[keep], res[keep]
    if len(eps) < 2:
        raise ValueError("fewer than 2 positive residuals to fit")
    X = np.log(eps)
    Y = np.log(res)
    slope, intercept = np.polyfit(X, Y, 1)
    fit = slope * X + intercept
    ss_res = float(np.sum((Y - fit) ** 2))
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return OrderFit(slope=float(slope), intercept=float(intercept),
                    r_squared=r2, used=len(eps))


def appendix_probe(kind, f, interval, deltas, p, s, fprime=None,
                   breakpoints=(), n_cells=96):
    """Measured order of one of the small-shift inequalities.

    kind 'A1' : ||f(.+d) - f - d f'||_Lp(a,b)        expected >= 1 + 1/p
    kind 'A2' : ||f(.+d) - f||_Lp(a,b)               expected >= s
    kind 'A6' : ||f||_Lp(b-d, b)                     expected >= s

    ``f`` must be defined on the interval extended by ``max(deltas)`` to the
    right (kinds A1/A2).  Returns ``(OrderFit, lhs values)``; zero left-hand
    sides (e.g. constant f) give an OrderFit of slope ``inf``.
    """
    a, b = interval
    deltas = np.asarray(sorted(deltas), dtype=float)
    lhs = []
    for d in deltas:
        if kind == "A1":
            if fprime is None:
                raise ValueError("A1 needs fprime")
            g = lambda t: np.asarray(f(t + d)) - np.asarray(f(t)) \
                - d * np.asarray(fprime(t))
            bps = set(breakpoints) | {t - d for t in breakpoints}
            lhs.append(lp_norm(g, (a, b), p,
                               breakpoints=sorted(bps), n_cells=n_cells))
        elif kind == "A2":
            g = lambda t: np.asarray(f(t + d)) - np.asarray(f(t))
            bps = set(breakpoints) | {t - d for t in breakpoints}
            lhs.append(lp_norm(g, (a, b), p,
                               breakpoints=sorted(bps), n_cells=n_cells))
        elif kind == "A6":
            lhs.append(lp_norm(f, (b - d, b), p, breakpoints=breakpoints,
                               n_cells=n_cells))
        else:
            raise ValueError("kind must be 'A1', 'A2' or 'A6'")
    lhs = np.asarray(lhs)
    if np.all(lhs < 1e-14):
        return OrderFit(slope=np.inf, intercept=-np.inf, r_squared=1.0,
                        used=len(deltas)), lhs
    return estimate_order(deltas, lhs), lhs
