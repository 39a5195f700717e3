"""Finite-dimensional reduction of the linearized Poincare-map spectrum.

After the half-period splitting transform ``U[nu](theta) = (nu(theta-T),
nu(theta))`` the reduced linearization decomposes as ``F + V`` where ``V`` is
a Volterra-type block (quasi-nilpotent, spectrum {0}) and ``F`` has a small
finite-dimensional range spanned by

    g0   = (phi'(theta) on (-T,0),  phi'(theta - T),  0)      weight c(x)
    h_j  = (0,  e^{-B(theta+T)} DR e_j,  0)                   weight z_j
    e_i  = (0, 0, e_i)                                        weight w_i(x)

with computable weight functionals.  Nonzero eigenvalues are exactly the
roots of ``det(I - C(lambda))`` where ``C(lambda)`` expands
``F (lambda I - V)^{-1}`` in these generators; the inverse is available in
closed form.  Roots are located by argument-principle winding counts over an
annulus (which excludes the origin, where the resolvent blows up) with
sector subdivision and Newton polish, and cross-checked against a dense
nodal discretization of the linearization itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from ._linalg import expm_multi, gauss_cells, split_edges
from ._volterra import cumulative_convolution
from .core import GridFunction, Segment
from .linearization import LinearizedMaps
from .maps import lift_DR, project_E
from .norms import LinComb, NormSettings, composite_norm

__all__ = ["ProductVector", "u_transform", "u_inverse", "apply_V",
           "volterra_inverse", "resolve_calV", "PencilModel", "build_pencil",
           "pencil_matrix", "pencil_det", "find_eigenvalues", "Eigenpair",
           "dense_matrix", "dense_eigenvalues", "stability_verdict",
           "Verdict", "SpectrumError"]


class SpectrumError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProductVector:
    """Element of the split product space: two functions on (-T, 0) plus
    the reduced Euclidean component."""

    f1: GridFunction
    f2: GridFunction
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.atleast_1d(np.asarray(self.z))
                           if np.size(self.z) else np.zeros(0))


def u_transform(nu: GridFunction, T: float) -> ProductVector:
    """Split a function on (-2T, 0) into the pair on (-T, 0)."""
    f1 = nu.restricted(-2 * T, -T).shifted(T)
    f2 = nu.restricted(-T, 0.0)
    return ProductVector(f1, f2, np.zeros(0))


def u_inverse(f1: GridFunction, f2: GridFunction, T: float) -> GridFunction:
    """Reassemble a function on (-2T, 0) from the split pair."""
    left = f1.shifted(-T)
    return GridFunction(list(left.segments) + list(f2.segments))


def _sided(f, ts):
    vals = np.empty((len(ts), f.N), dtype=f.segments[0].vals.dtype)
    vals[:-1] = f(ts[:-1], side="right")
    vals[-1] = f(ts[-1], side="left")
    return vals


def _materialize(fn, a, b, breakpoints, h, dtype=float):
    """Sample a side-aware callable ``fn(ts, side)`` into a GridFunction."""
    edges = [a] + sorted(t for t in breakpoints if a < t < b) + [b]
    segs = []
    for lo, hi in zip(edges, edges[1:]):
        m = max(4, int(np.ceil((hi - lo) / h)) + 1)
        ts = np.linspace(lo, hi, m)
        vals = np.empty((m, np.size(fn(np.array([0.5 * (lo + hi)]), "right"))),
                        dtype=dtype)
        vals[:-1] = fn(ts[:-1], "right")
        vals[-1] = fn(ts[-1:], "left")
        segs.append(Segment(ts, vals))
    return GridFunction(segs)


def apply_V(f1: GridFunction, params, h=None) -> GridFunction:
    """The Volterra block: ``int_{-T}^theta e^{B(xi-theta)} A f1(xi) dxi``."""
    T = -f1.a
    if h is None:
        h = f1._node_step()
    src = lambda xi: f1(np.asarray(xi), side="right") @ params.A.T
    return cumulative_convolution(params.B, src, -T, 0.0,
                                  breakpoints=f1.breakpoints, h=h)


def volterra_inverse(mu, rho: GridFunction, params, h=None) -> GridFunction:
    """Closed-form ``(mu I - V)^{-1} rho`` for ``mu != 0``.

    Equals ``rho/mu + (1/mu^2) int_{-T}^theta e^{C(xi-theta)} A rho dxi``
    with ``C = B - A/mu`` (the compact form of the resolvent formula).
    """
    if mu == 0:
        raise ValueError("mu must be nonzero")
    T = -rho.a
    if h is None:
        h = rho._node_step()
    C = params.B - params.A / mu
    dtype = complex if (np.iscomplexobj(C)
                        or np.iscomplexobj(rho.segments[0].vals)) else float
    if np.any(params.A):
        src = lambda xi: rho(np.asarray(xi), side="right") @ params.A.T
        I = cumulative_convolution(C.astype(dtype), src, -T, 0.0,
                                   breakpoints=rho.breakpoints, h=h)
        fn = lambda ts, side: rho(ts, side=side) / mu + I(ts, side=side) / mu ** 2
    else:
        fn = lambda ts, side: rho(ts, side=side) / mu
    return _materialize(fn, -T, 0.0, rho.breakpoints, h, dtype=dtype)


def resolve_calV(lam, rho1: GridFunction, rho2: GridFunction, q, params,
                 h=None):
    """``(lam I - calV)^{-1} (rho1, rho2, q)`` via the closed form:
    ``nu1 = (lam^2 I - V)^{-1}[rho2 + lam rho1]``, ``nu2 = lam nu1 - rho1``,
    ``z = q / lam``."""
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    T = -rho1.a
    if h is None:
        h = rho1._node_step()
    dtype = complex
    bps = sorted(set(np.round(rho1.breakpoints, 14))
                 | set(np.round(rho2.breakpoints, 14)))
    comb = _materialize(lambda ts, side: rho2(ts, side=side)
                        + lam * rho1(ts, side=side),
                        -T, 0.0, bps, h, dtype=dtype)
    nu1 = volterra_inverse(lam ** 2, comb, params, h=h)
    nu2 = _materialize(lambda ts, side: lam * nu1(ts, side=side)
                       - rho1(ts, side=side),
                       -T, 0.0, sorted(set(bps) | set(nu1.breakpoints)),
                       h, dtype=dtype)
    q = np.atleast_1d(np.asarray(q)) if np.size(q) else np.zeros(0)
    return nu1, nu2, (q / lam if q.size else q)


@dataclass
class PencilModel:
    """Range(F) generators, weight functionals, and the pencil machinery."""

    lin: LinearizedMaps
    generators: list
    labels: list
    pruned: list = field(default_factory=list)

    @property
    def dim(self):
        return len(self.generators)

    @property
    def params(self):
        return self.lin.params

    @cached_property
    def _exp_BT(self):
        return expm(-self.params.B * self.lin.T)

    @cached_property
    def _vT(self):
        """phi'_alpha(-T-): the transverse direction at the switching."""
        return self.lin._dphi_first(np.array([-self.lin.T]))[0]

    @cached_property
    def _quad(self):
        T = self.lin.T
        edges = split_edges(-T, 0.0, h=self.lin._h)
        xi, w = gauss_cells(edges, 4)
        E = expm_multi(self.params.B, xi)
        # row map: f1 values at nodes -> int e^{B xi} A f1 dxi
        K = np.einsum("g,gij,jk->gik", w, E, self.params.A)
        return xi, K

    def V0(self, f1: GridFunction):
        """``int_{-T}^0 e^{B xi} A f1(xi) dxi`` (the value (V f1)(0))."""
        xi, K = self._quad
        vals = f1(xi, side="right")
        return np.einsum("gik,gk->i", K, vals)

    def weights(self, f1: GridFunction, z):
        """Canonical generator weights (c; z; w) of ``F (f1, *, z)``."""
        params = self.params
        z = np.atleast_1d(np.asarray(z)) if np.size(z) else np.zeros(0)
        V0 = self.V0(f1)
        c1 = -(params.M @ V0) / self.lin.d
        if z.size:
            Ez = self._exp_BT @ lift_DR(z, params)
            c2 = -(params.M @ Ez) / self.lin.d
        else:
            Ez = np.zeros(params.N)
            c2 = 0.0
        c = c1 + c2
        w = project_E(V0 + c * self._vT + Ez)
        return np.concatenate([[c], z, w])

    def apply_F(self, x: ProductVector) -> ProductVector:
        """The finite-rank part, assembled from the canonical weights."""
        wts = self.weights(x.f1, x.z)
        return self.from_weights(wts)

    def from_weights(self, wts) -> ProductVector:
        parts = [(wts[0], self.generators[0])]
        N1 = self.params.N1
        for j in range(N1):
            parts.append((wts[1 + j], self.generators[1 + j]))
        f1 = LinComb([(c, g.f1) for c, g in parts])
        f2 = LinComb([(c, g.f2) for c, g in parts])
        T = self.lin.T
        h = self.lin._h
        dtype = complex if np.iscomplexobj(wts) else float
        f1g = _materialize(lambda ts, side: f1(ts, side=side), -T, 0.0,
                           f1.breakpoints, h, dtype=dtype)
        f2g = _materialize(lambda ts, side: f2(ts, side=side), -T, 0.0,
                           f2.breakpoints, h, dtype=dtype)
        return ProductVector(f1g, f2g, np.asarray(wts[1 + N1:]))

    def apply_calV(self, x: ProductVector) -> ProductVector:
        return ProductVector(x.f2, apply_V(x.f1, self.params, h=self.lin._h),
                             np.zeros_like(x.z))

    def apply_transformed(self, x: ProductVector) -> ProductVector:
        """``U L_Pi U^{-1}`` computed through the time-domain operator
        (used to validate the F + V decomposition)."""
        T = self.lin.T
        nu = u_inverse(x.f1, x.f2, T)
        out, z_out = self.lin.apply_LPi(nu, x.z)
        pv = u_transform(out, T)
        return ProductVector(pv.f1, pv.f2, z_out)


def build_pencil(lin: LinearizedMaps) -> PencilModel:
    """Assemble the generator family of Range(F) for the orbit."""
    T = lin.T
    h = lin._h
    params = lin.params
    g0 = ProductVector(
        GridFunction.from_callable(lambda th: lin._dphi_second(th), -T, 0.0, h=h),
        GridFunction.from_callable(lambda th: lin._dphi_first(np.asarray(th) - T),
                                   -T, 0.0, h=h),
        np.zeros(params.N1))
    zero_f = GridFunction.constant(np.zeros(params.N), -T, 0.0, h=h)
    gens = [g0]
    labels = ["phi-prime pair"]
    for j in range(params.N1):
        ej = np.zeros(params.N1)
        ej[j] = 1.0
        DRj = lift_DR(ej, params)
        f2 = GridFunction.from_callable(
            lambda th, v=DRj: np.einsum(
                "mij,j->mi", expm_multi(-params.B, np.asarray(th) + T), v),
            -T, 0.0, h=h)
        gens.append(ProductVector(zero_f, f2, np.zeros(params.N1)))
        labels.append(f"exp-column {j}")
    for i in range(params.N1):
        ei = np.zeros(params.N1)
        ei[i] = 1.0
        gens.append(ProductVector(zero_f, zero_f, ei))
        labels.append(f"unit z {i}")
    return PencilModel(lin=lin, generators=gens, labels=labels)


def pencil_matrix(model: PencilModel, lam) -> np.ndarray:
    """Matrix of ``I - F (lam I - calV)^{-1}`` in the generator family."""
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    m = model.dim
    C = np.empty((m, m), dtype=complex)
    for k, g in enumerate(model.generators):
        nu1, _, z = resolve_calV(lam, g.f1, g.f2, g.z, model.params,
                                 h=model.lin._h)
        C[:, k] = model.weights(nu1, z)
    return np.eye(m, dtype=complex) - C


def pencil_det(model: PencilModel, lam) -> complex:
    return complex(np.linalg.det(pencil_matrix(model, lam)))


# ---------------------------------------------------------------------------
# root search by the argument principle on an annulus


def _edge_arg_change(det_fn, curve, n0, max_depth=52):
    """Accumulated argument change of det along a parametrized edge.

    Refinement bisects the curve *parameter* (never the chord), so arcs stay
    arcs and the contour is never deformed across nearby roots.  A segment
    is accepted only when its midpoint confirms the phase step (anti-alias:
    a hidden full turn shifts the midpoint decomposition by 2 pi) and the
    magnitude ratio stays moderate.
    """

    def ok(v):
        return v != 0 and np.isfinite(abs(v))

    def seg(u0, v0, u1, v1, depth):
        if not (ok(v0) and ok(v1)):
            raise SpectrumError("det vanishes or overflows on the contour")
        if depth > max_depth or (u1 - u0) < 1e-13:
            raise SpectrumError("phase tracking failed on the contour")
        um = 0.5 * (u0 + u1)
        vm = det_fn(curve(um))
        if not ok(vm):
            raise SpectrumError("det vanishes or overflows on the contour")
        d_all = np.angle(v1 / v0)
        d1 = np.angle(vm / v0)
        d2 = np.angle(v1 / vm)
        ratios_ok = all(1e-2 < r < 1e2 for r in
                        (abs(vm) / abs(v0), abs(v1) / abs(vm)))
        steps_ok = max(abs(d1), abs(d2)) <= 0.35 * np.pi
        smooth_ok = abs(d1 - d2) <= 0.2 * np.pi
        consistent = abs(d1 + d2 - d_all) < 1e-9
        if ratios_ok and steps_ok and smooth_ok and consistent:
            return d1 + d2
        return (seg(u0, v0, um, vm, depth + 1)
                + seg(um, vm, u1, v1, depth + 1))

    us = np.linspace(0.0, 1.0, n0)
    vals = [det_fn(curve(u)) for u in us]
    total = 0.0
    for i in range(len(us) - 1):
        total += seg(us[i], vals[i], us[i + 1], vals[i + 1], 0)
    return total


def _sector_winding(det_fn, r0, r1, p0, p1):
    """Argument-principle count on the sector r in [r0, r1], arg in [p0, p1].

    Positively oriented boundary: radially out at p0, outer arc ccw, radially
    in at p1, inner arc cw back to the start.
    """
    rad_out = lambda u: (r0 + u * (r1 - r0)) * np.exp(1j * p0)
    arc_out = lambda u: r1 * np.exp(1j * (p0 + u * (p1 - p0)))
    rad_in = lambda u: (r1 + u * (r0 - r1)) * np.exp(1j * p1)
    arc_in = lambda u: r0 * np.exp(1j * (p1 + u * (p0 - p1)))
    n_arc = max(6, int(np.ceil((p1 - p0) / 0.3)) + 1)
    n_rad = min(40, max(4, int(np.ceil((r1 - r0) / (0.3 * max(r0, 1e-3)))) + 1))
    total = (_edge_arg_change(det_fn, rad_out, n_rad)
             + _edge_arg_change(det_fn, arc_out, n_arc)
             + _edge_arg_change(det_fn, rad_in, n_rad)
             + _edge_arg_change(det_fn, arc_in, n_arc))
    w = total / (2.0 * np.pi)
    wi = int(round(w))
    if abs(w - wi) > 0.15:
        raise SpectrumError(f"non-integer winding {w:.3f} on sector "
                            f"[{r0:.3g},{r1:.3g}]x[{p0:.3g},{p1:.3g}]")
    return wi


def _newton_polish(det_fn, z0, tol=1e-12, max_iter=60):
    z = z0
    fz = det_fn(z)
    for _ in range(max_iter):
        h = 1e-7 * max(1.0, abs(z))
        d = (det_fn(z + h) - det_fn(z - h)) / (2 * h)
        if d == 0:
            break
        step = fz / d
        z_new = z - step
        f_new = det_fn(z_new)
        if abs(f_new) > 0.8 * abs(fz) and abs(step) > tol:
            z_new = z - 0.5 * step
            f_new = det_fn(z_new)
        z, fz = z_new, f_new
        if abs(step) < tol:
            break
    return z, fz


@dataclass
class Eigenpair:
    lam: complex
    kernel: np.ndarray
    nu: GridFunction
    z: np.ndarray
    det_value: complex
    multiplicity: int = 1
    residual: float = None


def find_eigenvalues(model: PencilModel, lambda_min=0.05, radius=None,
                     min_sector=8e-4, with_eigenfunctions=True):
    """Nonzero eigenvalues of the reduced linearization inside the annulus
    ``lambda_min <= |lambda| <= radius``.

    Sector subdivision with argument-principle counts isolates the roots of
    ``det(I - F(lam I - calV)^{-1})``; each is polished by a damped Newton
    iteration and (optionally) equipped with its kernel vector and the
    reconstructed eigenfunction on (-2T, 0).  Splits that land on a root
    (non-additive winding counts) are retried at shifted fractions.
    """
    if radius is None:
        radius = spectral_radius_bound(model)
    cache = {}

    def det_fn(z):
        key = complex(np.round(z.real, 13) + 1j * np.round(z.imag, 13))
        v = cache.get(key)
        if v is None:
            v = pencil_det(model, z)
            cache[key] = v
        return v

    # the annulus cut must avoid the (common) real-axis roots
    cut = 0.5377
    total = _sector_winding(det_fn, lambda_min, radius, cut, cut + 2 * np.pi)

    def split(r0, r1, p0, p1, count):
        radial = (r1 - r0) > 0.5 * (r0 + r1) * (p1 - p0)
        for frac in (0.5, 0.53, 0.41, 0.62, 0.46):
            if radial:
                rm = (1 - frac) * r0 + frac * r1
                parts = [(r0, rm, p0, p1), (rm, r1, p0, p1)]
            else:
                pm = (1 - frac) * p0 + frac * p1
                parts = [(r0, r1, p0, pm), (r0, r1, pm, p1)]
            try:
                counts = [_sector_winding(det_fn, *prt) for prt in parts]
            except SpectrumError:
                continue
            if sum(counts) == count:
                return parts, counts
        raise SpectrumError("winding counts disagree after subdivision")

    roots = []
    stack = [(lambda_min, radius, cut, cut + 2 * np.pi, total)]
    while stack:
        r0, r1, p0, p1, count = stack.pop()
        if count == 0:
            continue
        size = max(r1 - r0, 0.5 * (r0 + r1) * (p1 - p0))
        if count == 1 and size < 0.02 or size < min_sector:
            z0 = 0.5 * (r0 + r1) * np.exp(0.5j * (p0 + p1))
            z_star, f_star = _newton_polish(det_fn, z0)
            if not (lambda_min * 0.98 <= abs(z_star) <= radius * 1.02):
                z_star, f_star = _newton_polish(det_fn, z0 * (1 + 0.01j))
            roots.append((z_star, f_star, count))
            continue
        parts, counts = split(r0, r1, p0, p1, count)
        for prt, cnt in zip(parts, counts):
            if cnt:
                stack.append((*prt, cnt))

    # deduplicate polished roots
    uniq = []
    for z, fz, cnt in roots:
        for i, (z2, f2, c2) in enumerate(uniq):
            if abs(z - z2) < 1e-7 * max(1.0, abs(z)):
                uniq[i] = (z2, f2, c2 + cnt)
                break
        else:
            uniq.append((z, fz, cnt))

    pairs = []
    for z, fz, cnt in uniq:
        Mmat = pencil_matrix(model, z)
        _, svals, Vh = np.linalg.svd(Mmat)
        kernel = Vh[-1].conj()
        nu = None
        zvec = np.zeros(model.params.N1)
        if with_eigenfunctions:
            nu, zvec = reconstruct_eigenfunction(model, z, kernel)
        pairs.append(Eigenpair(lam=z, kernel=kernel, nu=nu, z=zvec,
                               det_value=fz, multiplicity=cnt))
    pairs.sort(key=lambda e: -abs(e.lam))
    return pairs, total


def reconstruct_eigenfunction(model: PencilModel, lam, kernel):
    """Lift a pencil kernel vector to an eigenfunction of the reduced
    linearization: ``(nu1, nu2, z) = (lam I - calV)^{-1} rho`` and back
    through the inverse splitting transform."""
    rho = model.from_weights(kernel.astype(complex))
    nu1, nu2, z = resolve_calV(lam, rho.f1, rho.f2, rho.z, model.params,
                               h=model.lin._h)
    nu = u_inverse(nu1, nu2, model.lin.T)
    return nu, z


def eigenpair_residual(model: PencilModel, pair: Eigenpair,
                       settings: NormSettings = None):
    """``||L_Pi v - lam v|| / ||v||`` in the composite norm."""
    lin = model.lin
    if settings is None:
        settings = NormSettings.from_params(lin.params)
    out, z_out = lin.apply_LPi(pair.nu, pair.z)
    num = composite_norm(LinComb([(1.0, out), (-pair.lam, pair.nu)]),
                         z_out - pair.lam * pair.z, settings)
    den = composite_norm(pair.nu, pair.z, settings)
    return num / den


def spectral_radius_bound(model: PencilModel, iters=14, seed=0, floor=1.5):
    """Crude search radius: power iteration of the reduced operator
    (F + calV) from a random start, inflated by a safety factor."""
    rng = np.random.default_rng(seed)
    T = model.lin.T
    h = model.lin._h

    def rand_f():
        c = rng.normal(size=(3, model.params.N))
        return GridFunction.from_callable(
            lambda th: (c[0] * np.sin(np.outer(th, np.ones(model.params.N)))
                        + c[1] * np.cos(np.outer(2 * th, np.ones(model.params.N)))
                        + c[2]), -T, 0.0, h=h)

    x = ProductVector(rand_f(), rand_f(), rng.normal(size=model.params.N1))
    est = 0.0

    def nrm(v: ProductVector):
        tt = np.linspace(-T + 1e-9, -1e-9, 129)
        return max(np.max(np.abs(v.f1(tt))), np.max(np.abs(v.f2(tt))),
                   np.max(np.abs(v.z)) if v.z.size else 0.0)

    for _ in range(iters):
        Fx = model.apply_F(x)
        Vx = model.apply_calV(x)
        y = ProductVector(
            _materialize(lambda ts, side: Fx.f1(ts, side=side)
                         + Vx.f1(ts, side=side), -T, 0.0,
                         sorted(set(Fx.f1.breakpoints)
                                | set(Vx.f1.breakpoints)), h, dtype=float),
            _materialize(lambda ts, side: Fx.f2(ts, side=side)
                         + Vx.f2(ts, side=side), -T, 0.0,
                         sorted(set(Fx.f2.breakpoints)
                                | set(Vx.f2.breakpoints)), h, dtype=float),
            Fx.z + Vx.z)
        est = nrm(y) / max(nrm(x), 1e-300)
        sc = 1.0 / max(nrm(y), 1e-300)
        x = ProductVector(y.f1 * sc, y.f2 * sc, y.z * sc)
    return max(floor, 1.4 * est)


# ---------------------------------------------------------------------------
# dense discretization (validation oracle)


def dense_matrix(lin: LinearizedMaps, g=96):
    """Nodal collocation matrix of the reduced linearization.

    The input space is (values at g+1 nodes per half-interval per state
    component) + the reduced Euclidean part; columns are exact applications
    of the operator to the nodal cardinal functions.  This is a validator
    for the pencil, never the primary path.
    """
    params = lin.params
    T = lin.T
    N = params.N
    n1 = np.linspace(-2 * T, -T, g + 1)
    n2 = np.linspace(-T, 0.0, g + 1)
    dim = 2 * (g + 1) * N + params.N1
    D = np.empty((dim, dim))

    def sample(out: GridFunction):
        v1 = np.empty((g + 1, N))
        v1[:-1] = out(n1[:-1], side="right")
        v1[-1] = out(n1[-1], side="left")
        v2 = np.empty((g + 1, N))
        v2[:-1] = out(n2[:-1], side="right")
        v2[-1] = out(n2[-1], side="left")
        return np.concatenate([v1.ravel(), v2.ravel()])

    zeros1 = np.zeros(((g + 1), N))
    col = 0
    for half in (0, 1):
        for i in range(g + 1):
            for comp in range(N):
                v1 = zeros1.copy()
                v2 = zeros1.copy()
                (v1 if half == 0 else v2)[i, comp] = 1.0
                nu = GridFunction([Segment(n1, v1), Segment(n2, v2)])
                out, z_out = lin.apply_LPi(nu, np.zeros(params.N1))
                D[:2 * (g + 1) * N, col] = sample(out)
                D[2 * (g + 1) * N:, col] = z_out
                col += 1
    for j in range(params.N1):
        ej = np.zeros(params.N1)
        ej[j] = 1.0
        nu = GridFunction([Segment(n1, zeros1), Segment(n2, zeros1)])
        out, z_out = lin.apply_LPi(nu, ej)
        D[:2 * (g + 1) * N, col] = sample(out)
        D[2 * (g + 1) * N:, col] = z_out
        col += 1
    return D


def dense_eigenvalues(lin: LinearizedMaps, g=96, lambda_min=0.05):
    """Eigenvalues of the dense discretization with modulus above the cut."""
    D = dense_matrix(lin, g=g)
    ev = np.linalg.eigvals(D)
    return np.array(sorted([z for z in ev if abs(z) >= lambda_min],
                           key=lambda z: -abs(z)))


# ---------------------------------------------------------------------------
# the verdict


@dataclass(frozen=True)
class Verdict:
    kind: str  # 'asymptotically_stable' | 'unstable' | 'marginal'
    spectral_radius: float
    eigenvalues: tuple
    lambda_min: float
    margin: float

    def __str__(self):
        return (f"{self.kind} (r = {self.spectral_radius:.6g}, "
                f"{len(self.eigenvalues)} eigenvalue(s) above "
                f"|lambda| = {self.lambda_min:g})")


def stability_verdict(model: PencilModel, pairs=None, lambda_min=0.05,
                      margin=0.05, radius=None) -> Verdict:
    """Spectral-radius verdict: ``r < 1`` asymptotically stable, ``r > 1``
    unstable, and a reported margin band around 1 is 'marginal'.

    The disk ``|lambda| < lambda_min`` is conservatively assigned to the
    radius lower bound (everything there belongs to the quasi-nilpotent
    part of the spectrum).
    """
    if pairs is None:
        pairs, _ = find_eigenvalues(model, lambda_min=lambda_min,
                                    radius=radius, with_eigenfunctions=False)
    lams = tuple(p.lam for p in pairs)
    r = max([lambda_min] + [abs(l) for l in lams])
    if r < 1.0 - margin:
        kind = "asymptotically_stable"
    elif r > 1.0 + margin:
        kind = "unstable"
    else:
        kind = "marginal"
    return Verdict(kind=kind, spectral_radius=r, eigenvalues=lams,
                   lambda_min=lambda_min, margin=margin)
