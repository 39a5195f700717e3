"""Cross-sections, projections, hit maps and the Poincare map.

Points on the section ``{M x = alpha}`` are carried by the + branch flow to
the section ``{M x = beta}`` (the hit map ``P_beta``) and back by the -
branch (``P_alpha``); the Poincare map is ``P = P_alpha o P_beta``.  The
reduced coordinates drop the first state component, which is recovered from
the section constraint through the lift operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NODES_PER_T, GridFunction, HistoryFunction, SystemParams
from .integrator import BranchFlow, _first_hit, _rebase, hit_time

__all__ = [
    "CrossSectionPoint", "ReducedPoint", "MapError",
    "project_E", "project_E_full", "lift_R", "lift_DR",
    "hit_map", "poincare", "poincare_iterates", "orbit_distance",
    "pi_beta", "pi_alpha", "pi_map", "pi_composition",
]

SECTION_TOL = 1e-9


class MapError(RuntimeError):
    """A hit map could not be evaluated (no hit, or hit time >= 2T)."""


def _level(section, params):
    if section not in ("alpha", "beta"):
        raise ValueError("section must be 'alpha' or 'beta'")
    return params.alpha if section == "alpha" else params.beta


@dataclass(frozen=True)
class CrossSectionPoint:
    """A point ``(phi, x)`` on one of the threshold cross-sections."""

    hist: HistoryFunction
    section: str  # 'alpha' or 'beta'

    @property
    def phi(self) -> GridFunction:
        return self.hist.phi

    @property
    def x(self) -> np.ndarray:
        return self.hist.x_right

    def check(self, params: SystemParams, tol=SECTION_TOL):
        level = _level(self.section, params)
        resid = abs(float(params.M @ self.x) - level)
        if resid > tol * max(1.0, abs(level)):
            raise ValueError(
                f"point off section {self.section}: |M.x - level| = {resid:.3e}")
        return self


@dataclass(frozen=True)
class ReducedPoint:
    """Section point in reduced coordinates: history plus w in R^(N-1)."""

    phi: GridFunction
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", np.atleast_1d(np.asarray(self.w, dtype=float))
                           if np.size(self.w) else np.zeros(0))


def project_E(x) -> np.ndarray:
    """Drop the first coordinate: (x1, ..., xN) -> (x2, ..., xN)."""
    x = np.atleast_1d(np.asarray(x))
    return x[1:].copy()


def project_E_full(phi, x) -> ReducedPoint:
    """The projection E applied to a section point."""
    return ReducedPoint(phi=phi, w=project_E(x))


def lift_R(w, section, params: SystemParams) -> np.ndarray:
    """Lift w to the section: first coordinate from the constraint M.x = level."""
    level = _level(section, params)
    w = np.atleast_1d(np.asarray(w, dtype=float)) if np.size(w) else np.zeros(0)
    m = params.M
    first = (level - float(m[1:] @ w)) / m[0]
    return np.concatenate([[first], w])


def lift_DR(z, params: SystemParams) -> np.ndarray:
    """Frechet derivative of the lifts: z -> (-(1/m0) sum m_j z_j, z).

    Satisfies ``M . (DR z) = 0`` exactly; complex z is preserved (needed for
    eigenfunction residual checks)."""
    z = np.atleast_1d(np.asarray(z)) if np.size(z) else np.zeros(0)
    m = params.M
    first = -(m[1:] @ z) / m[0] if z.size else 0.0
    return np.concatenate([[first], z])


def hit_map(point: CrossSectionPoint, params: SystemParams,
            n=NODES_PER_T) -> CrossSectionPoint:
    """One hit map: from section alpha to beta (+ branch) or back (- branch).

    Fails with :class:`MapError` if there is no hit before the horizon or the
    hit time is not smaller than one delay step 2T.
    """
    point.check(params)
    if point.section == "alpha":
        flow = BranchFlow(params, +1)
        target, level = "beta", params.beta
    else:
        flow = BranchFlow(params, -1)
        target, level = "alpha", params.alpha
    T2 = params.delay
    sol = flow.solve(point.hist, point.x, T2, n=n)
    t_star = _first_hit(sol, level)
    if t_star is None:
        t_long = hit_time(flow, point.hist, point.x, target, horizon=10 * params.T, n=n)
        if np.isinf(t_long):
            raise MapError(f"no hit of {target} before horizon {10 * params.T:g}")
        raise MapError(
            f"hit time {t_long:g} >= 2T = {T2:g}: outside the map's regime")
    new_hist = _rebase(point.hist, sol, t_star)
    return CrossSectionPoint(hist=new_hist, section=target)


def poincare(point: CrossSectionPoint, params: SystemParams,
             n=NODES_PER_T) -> CrossSectionPoint:
    """The Poincare map P = P_alpha o P_beta on the alpha section."""
    if point.section != "alpha":
        raise ValueError("the Poincare map is defined on the alpha section")
    return hit_map(hit_map(point, params, n=n), params, n=n)


def poincare_iterates(point: CrossSectionPoint, params: SystemParams, count,
                      n=NODES_PER_T):
    """[point, P(point), P^2(point), ...] with ``count`` applications."""
    out = [point]
    for _ in range(count):
        out.append(poincare(out[-1], params, n=n))
    return out


# ---------------------------------------------------------------------------
# reparametrized maps on B x R^(N-1)


def pi_beta(rp: ReducedPoint, params: SystemParams, n=NODES_PER_T) -> ReducedPoint:
    """Reparametrized hit map: lift with R_alpha, hit beta, project."""
    x = lift_R(rp.w, "alpha", params)
    pt = CrossSectionPoint(HistoryFunction(rp.phi, x), "alpha")
    img = hit_map(pt, params, n=n)
    return project_E_full(img.phi, img.x)


def pi_alpha(rp: ReducedPoint, params: SystemParams, n=NODES_PER_T) -> ReducedPoint:
    """Reparametrized hit map: lift with R_beta, hit alpha, project."""
    x = lift_R(rp.w, "beta", params)
    pt = CrossSectionPoint(HistoryFunction(rp.phi, x), "beta")
    img = hit_map(pt, params, n=n)
    return project_E_full(img.phi, img.x)


def pi_map(rp: ReducedPoint, params: SystemParams, n=NODES_PER_T) -> ReducedPoint:
    """Reparametrized Poincare map Pi = Pi_alpha o Pi_beta."""
    return pi_alpha(pi_beta(rp, params, n=n), params, n=n)


def pi_composition(rp: ReducedPoint, params: SystemParams, word="bab",
                   n=NODES_PER_T) -> ReducedPoint:
    """Compose reparametrized hit maps; ``word`` is read left to right in
    application order, e.g. ``"bab"`` applies beta, then alpha, then beta."""
    cur = rp
    for ch in word:
        if ch == "b":
            cur = pi_beta(cur, params, n=n)
        elif ch == "a":
            cur = pi_alpha(cur, params, n=n)
        else:
            raise ValueError("word must consist of 'a'/'b'")
    return cur


def poincare_decay(orbit, params: SystemParams, nu, z=None, eps=1e-4,
                   count=20, settings=None, n=NODES_PER_T):
    """Distances of Poincare iterates from the fixed point.

    Starts from ``(phi_alpha + eps nu, x_alpha + eps DR z)`` (which stays on
    the alpha section) and returns the composite-norm distances to
    ``(phi_alpha, x_alpha)`` after 0, 1, ..., count applications of the map.
    """
    from .norms import LinComb, NormSettings, composite_norm

    if settings is None:
        settings = NormSettings.from_params(params)
    if z is None or not np.size(z):
        y = np.zeros(params.N)
    else:
        y = lift_DR(z, params)
    pt = CrossSectionPoint(
        HistoryFunction(orbit.phi_alpha + (eps * nu), orbit.x_alpha + eps * y),
        "alpha")
    dists = []
    for i in range(count + 1):
        dists.append(composite_norm(
            LinComb([(1.0, pt.phi), (-1.0, orbit.phi_alpha)]),
            pt.x - orbit.x_alpha, settings))
        if i < count:
            pt = poincare(pt, params, n=n)
    return np.asarray(dists)


def orbit_distance(point: CrossSectionPoint, orbit, params: SystemParams,
                   settings=None, samples=64):
    """Distance from a point to the orbit curve in the composite norm,
    minimised over a grid of orbit phases."""
    from scipy.optimize import minimize_scalar

    from .norms import LinComb, NormSettings, composite_norm

    if settings is None:
        settings = NormSettings.from_params(params)

    def dist(t):
        ophi, ox = orbit.point_at(t)
        return composite_norm(LinComb([(1.0, point.phi), (-1.0, ophi)]),
                              point.x - ox, settings)

    grid = np.linspace(0.0, 2 * params.T, samples, endpoint=False)
    vals = [dist(t) for t in grid]
    i = int(np.argmin(vals))
    # local refinement around the best grid phase
    span = 2 * params.T / samples
    res = minimize_scalar(dist, bounds=(grid[i] - span, grid[i] + span),
                          method="bounded", options={"xatol": 1e-9})
    return min(vals[i], float(res.fun))
