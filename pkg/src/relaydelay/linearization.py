"""The formal linearization of the hit maps at the periodic orbit.

Everything pivots on one scalar functional of the perturbation,

    br(nu, y) = M [ int_{-T}^0 e^{B xi} A nu(xi - T) dxi + e^{-BT} y ],

and the transversality denominator ``d = M phi'_alpha(-T-)``.  The hit-time
derivative is ``D t_beta[nu, y] = -br / d`` and the linearized flow-at-hit
operator acts piecewise:

    theta in (-2T, -T):  -(phi'_alpha(theta+T)/d) br + nu(theta + T)
    theta in (-T, 0):    -(phi'_alpha(theta-T)/d) br
                         + int_{-T}^theta e^{B(xi-theta)} A nu(xi - T) dxi
                         + e^{-B(theta+T)} y .

Its reduced version ``L_Pi[nu, z] = (L[nu, DR z], E L[nu, DR z](0))`` is the
formal linearization of the reparametrized hit maps; the cube of ``L_Pi`` is
the true Frechet derivative of the triple hit-map composition, which the
finite-difference study here verifies as a convergence order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from ._linalg import expm_multi, gauss_cells, split_edges
from ._volterra import cumulative_convolution
from .core import NODES_PER_T, GridFunction, HistoryFunction
from .integrator import BranchFlow, hit_time
from .maps import ReducedPoint, lift_DR, pi_composition, project_E
from .norms import LinComb, NormSettings, composite_norm, estimate_order
from .periodic import PeriodicOrbit

__all__ = ["LinearizedMaps", "gamma_exponent", "hit_time_exponent"]


def gamma_exponent(p, s):
    """Order of the triple-composition remainder:
    min(2 - 1/p, 1/p + s, 1 - s + 1/p)."""
    return min(2.0 - 1.0 / p, 1.0 / p + s, 1.0 - s + 1.0 / p)


def hit_time_exponent(p):
    """Order of the hit-time remainder: 2 - 1/p."""
    return 2.0 - 1.0 / p


@dataclass
class LinearizedMaps:
    """Formal linearization machinery anchored at a verified orbit."""

    orbit: PeriodicOrbit
    n: int = NODES_PER_T

    def __post_init__(self):
        self.params = self.orbit.params
        self.T = self.orbit.T
        if abs(self.orbit.transversality) < 1e-12:
            raise ValueError("transversality denominator vanishes")

    @cached_property
    def d(self):
        """M phi'_alpha(-T-), the transversality denominator."""
        return self.orbit.transversality

    @cached_property
    def _exp_BT(self):
        return expm(-self.params.B * self.T)

    @cached_property
    def _h(self):
        return self.T / self.n

    def _dphi_first(self, tt):
        """phi'_alpha on the first half (-2T, -T) (closed-branch values)."""
        orb = self.orbit
        u = orb.u_per(np.asarray(tt) + 2 * self.T)
        return orb.params.k - u @ orb.B1.T

    def _dphi_second(self, tt):
        """phi'_alpha on the second half (-T, 0)."""
        orb = self.orbit
        u = orb.u_per(np.asarray(tt) + 2 * self.T)
        return -orb.params.k - u @ orb.B1.T

    # -- the pivot functional ------------------------------------------------

    def bracket(self, nu, y):
        """``M [ int_{-T}^0 e^{B xi} A nu(xi-T) dxi + e^{-BT} y ]``.

        ``nu`` may be None (zero perturbation); quadrature cells split at
        nu's breakpoints shifted into (-T, 0).
        """
        params = self.params
        T = self.T
        acc = self._exp_BT @ np.atleast_1d(y) if y is not None else \
            np.zeros(params.N)
        if nu is not None and np.any(params.A):
            bps = [b + T for b in nu.breakpoints if b < -T + 1e-13]
            edges = split_edges(-T, 0.0, breakpoints=bps, h=self._h)
            xi, w = gauss_cells(edges, 4)
            E = expm_multi(params.B, xi)
            f = nu(xi - T, side="right") @ params.A.T
            acc = acc + np.einsum("g,gij,gj->i", w, E, f)
        return params.M @ acc

    def d_t_beta(self, nu, y):
        """Frechet derivative of the hit time: ``-br(nu, y) / d``."""
        return -self.bracket(nu, y) / self.d

    # -- the operator L ------------------------------------------------------

    def apply_L(self, nu, y, side="beta"):
        """The linearized flow-at-hit operator as a function on (-2T, 0).

        ``side='beta'`` builds it at (phi_alpha, x_alpha); ``side='alpha'``
        at (phi_beta, x_beta).  By the orbit's anti-symmetry the two agree.
        """
        params = self.params
        T = self.T
        is_c = ((nu is not None and np.iscomplexobj(nu.segments[0].vals))
                or (y is not None and np.iscomplexobj(np.asarray(y))))
        dtype = complex if is_c else float
        y = np.zeros(params.N, dtype=dtype) if y is None else \
            np.atleast_1d(np.asarray(y))
        br = self.bracket(nu, y)
        if side == "beta":
            dsecond, dfirst, den = self._dphi_second, self._dphi_first, self.d
        else:
            # built at (phi_beta, x_beta) from the orbit data directly:
            # phi_beta(theta) = u_per(theta + 3T)
            orb = self.orbit

            def dfirst(tt):  # theta - T in (-2T, -T): u' on the - branch
                u = orb.u_per(np.asarray(tt) + 3 * T)
                return -params.k - u @ orb.B1.T

            def dsecond(tt):  # theta + T in (-T, 0): u' on the + branch
                u = orb.u_per(np.asarray(tt) + 3 * T)
                return params.k - u @ orb.B1.T

            den = float(params.M @ (-params.k - orb.B1 @ orb.x_alpha))

        # piece 1 on (-2T, -T): profile term plus the shifted perturbation
        prof1 = GridFunction.from_callable(
            lambda th: dsecond(th + T) * (-br / den), -2 * T, -T,
            h=self._h, dtype=dtype)
        if nu is not None:
            shifted = nu.restricted(-T, 0.0).shifted(-T)
            piece1 = prof1 + shifted
        else:
            piece1 = prof1

        # piece 2 on (-T, 0): profile + Volterra of nu + matrix-exponential y
        def prof2(th):
            th = np.asarray(th)
            base = dfirst(th - T) * (-br / den)
            Ey = np.einsum("mij,j->mi", expm_multi(-params.B, th + T), y)
            return base + Ey

        piece2 = GridFunction.from_callable(prof2, -T, 0.0, h=self._h,
                                            dtype=dtype)
        if nu is not None and np.any(params.A):
            bps = [b + T for b in nu.breakpoints if b < -T + 1e-13]
            src = lambda xi: nu(np.asarray(xi) - T, side="right") @ params.A.T
            I = cumulative_convolution(params.B, src, -T, 0.0,
                                       breakpoints=bps, h=self._h)
            piece2 = piece2 + I
        return GridFunction(list(piece1.segments) + list(piece2.segments))

    def apply_LPi(self, nu, z):
        """The reduced formal linearization ``(L[nu, DR z], E L[...](0))``."""
        y = lift_DR(z, self.params) if np.size(z) else None
        out = self.apply_L(nu, y)
        val0 = out(0.0, side="left")
        return out, project_E(val0)

    def apply_LPi_power(self, nu, z, power):
        for _ in range(power):
            nu, z = self.apply_LPi(nu, z)
        return nu, z

    def partial_t_psi(self, delta):
        """Partial t-derivative of the flow at the orbit, scaled by delta."""
        T = self.T
        piece1 = GridFunction.from_callable(
            lambda th: self._dphi_second(np.asarray(th) + T) * delta,
            -2 * T, -T, h=self._h)
        piece2 = GridFunction.from_callable(
            lambda th: self._dphi_first(np.asarray(th) - T) * delta,
            -T, 0.0, h=self._h)
        return GridFunction(list(piece1.segments) + list(piece2.segments))

    # -- finite-difference order studies --------------------------------------

    def hit_time_order(self, nu, y, epsilons, horizon_factor=1.9):
        """Order of ``|t_beta(phi+eps nu, x+eps y) - T - eps D t_beta|``.

        Returns (OrderFit, residuals); the exponent should reach
        ``2 - 1/p`` on smooth directions.
        """
        params = self.params
        orbit = self.orbit
        dt = self.d_t_beta(nu, y)
        flow = BranchFlow(params, +1)
        eps_used, resid = [], []
        for eps in sorted(epsilons, reverse=True):
            phi = orbit.phi_alpha + (eps * nu)
            x = orbit.x_alpha + eps * np.atleast_1d(y)
            t_eps = hit_time(flow, HistoryFunction(phi, x), x, "beta",
                             horizon=horizon_factor * self.T, n=self.n)
            if not np.isfinite(t_eps):
                continue
            eps_used.append(eps)
            resid.append(abs(t_eps - self.T - eps * dt))
        fit = estimate_order(eps_used, resid, min_samples=min(4, len(eps_used)))
        return fit, dict(zip(eps_used, resid))

    def check_three_map_derivative(self, nu, z, epsilons, settings=None):
        """Log-log slope of the triple hit-map composition residual.

        Measures ``|| Pi_bab(orbit + eps (nu,z)) - Pi_bab(orbit)
        - (L_Pi)^3 [eps nu, eps z] ||`` in the composite norm across the
        epsilon ladder; epsilons whose switching structure collapses are
        dropped with a note.
        """
        params = self.params
        orbit = self.orbit
        if settings is None:
            settings = NormSettings.from_params(params)
        scale = composite_norm(nu, z, settings)
        if scale == 0:
            raise ValueError("zero direction")
        nu = nu * (1.0 / scale)
        z = np.atleast_1d(z) / scale if np.size(z) else np.zeros(0)

        w_alpha = project_E(orbit.x_alpha)
        base_in = ReducedPoint(orbit.phi_alpha, w_alpha)
        base_out = pi_composition(base_in, params, "bab", n=self.n)
        l3_nu, l3_z = self.apply_LPi_power(nu, z, 3)

        eps_used, resid, notes = [], [], []
        for eps in sorted(epsilons, reverse=True):
            try:
                pert = ReducedPoint(orbit.phi_alpha + (eps * nu),
                                    w_alpha + eps * z)
                out = pi_composition(pert, params, "bab", n=self.n)
            except Exception as exc:  # switching-structure loss at this eps
                notes.append(f"eps={eps:g} dropped: {exc}")
                continue
            dphi = LinComb([(1.0, out.phi), (-1.0, base_out.phi),
                            (-eps, l3_nu)])
            dw = out.w - base_out.w - eps * l3_z
            eps_used.append(eps)
            resid.append(composite_norm(dphi, dw, settings))
        if len(eps_used) < 2 and notes:
            raise RuntimeError(
                "switching structure collapsed at every epsilon: "
                + "; ".join(notes))
        fit = estimate_order(eps_used, resid, min_samples=min(4, len(eps_used)))
        return fit, dict(zip(eps_used, resid)), notes
