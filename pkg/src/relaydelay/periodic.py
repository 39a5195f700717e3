"""Construction and verification of symmetric 2T-periodic orbits.

On a periodic orbit whose period equals the delay, the delayed term collapses
(``u(t - 2T) = u(t)``), so the orbit solves the reduced relay ODE

    u' = (+-) k - B1 u,      B1 := B - A,

on the two half-periods.  The orbit is found by Newton shooting on the
reduced system for the unknowns ``(x_alpha, T1, T2)`` and then certified
against the full delayed dynamics: section membership, exactly two
switchings per period at T and 2T, anti-symmetry of the derivative around
the mid-point, and transversality of both switchings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from ._linalg import const_forcing_integral, expm_multi
from .core import (
    NODES_PER_T,
    GridFunction,
    HistoryFunction,
    Segment,
    SystemParams,
)
from .integrator import integrate
from .maps import CrossSectionPoint, lift_R, poincare

__all__ = ["PeriodicOrbit", "OrbitError", "find_periodic_orbit",
           "verify_orbit", "OrbitReport"]


class OrbitError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class PeriodicOrbit:
    """A verified symmetric 2T-periodic orbit.

    ``params`` carries the half-period actually found (T is overwritten so
    that period = delay holds exactly).  ``dphi_jump`` is the jump of the
    orbit derivative across the switching at the period end,
    ``u'(0+) - u'(0-)``; ``transversality`` is ``M u'(T-)``.
    """

    params: SystemParams
    x_alpha: np.ndarray
    x_beta: np.ndarray
    T: float
    phi_alpha: GridFunction
    phi_beta: GridFunction
    dphi_jump: np.ndarray
    transversality: float
    report: "OrbitReport" = None

    @property
    def B1(self):
        return self.params.B - self.params.A

    @property
    def hist_alpha(self) -> HistoryFunction:
        return HistoryFunction(self.phi_alpha, self.x_alpha)

    @property
    def hist_beta(self) -> HistoryFunction:
        return HistoryFunction(self.phi_beta, self.x_beta)

    def section_point(self, section="alpha") -> CrossSectionPoint:
        hist = self.hist_alpha if section == "alpha" else self.hist_beta
        return CrossSectionPoint(hist, section)

    def u_per(self, t):
        """The periodic solution at arbitrary times (vectorized)."""
        t = np.asarray(t, dtype=float)
        tau = np.mod(t, 2.0 * self.T)
        scalar = tau.ndim == 0
        tau = np.atleast_1d(tau)
        out = np.empty((len(tau), self.params.N))
        plus = tau <= self.T
        if np.any(plus):
            out[plus] = _branch_state(self.B1, self.params.k, +1,
                                      self.x_alpha, tau[plus])
        if np.any(~plus):
            out[~plus] = _branch_state(self.B1, self.params.k, -1,
                                       self.x_beta, tau[~plus] - self.T)
        return out[0] if scalar else out

    def du_per(self, t, side="left"):
        """One-sided derivative of the periodic solution."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tau = np.atleast_1d(np.mod(t, 2.0 * self.T))
        vals = np.atleast_2d(self.u_per(tau))
        eps = 1e-12 * max(1.0, self.T)
        if side == "left":
            on_plus = (tau > eps) & (tau <= self.T + eps)
        else:
            on_plus = tau < self.T - eps
            tau_is_end = np.abs(tau - 2 * self.T) < eps
            on_plus = on_plus | tau_is_end | (np.abs(tau) < eps)
        branch = np.where(on_plus, 1.0, -1.0)
        out = branch[:, None] * self.params.k - vals @ self.B1.T
        return out[0] if scalar else out

    def point_at(self, t):
        """Orbit point at phase ``t``: the history ``u(t + .)`` and trace u(t)."""
        T2 = 2.0 * self.T
        tau = float(np.mod(t, T2))
        eps = 1e-12 * T2
        kinks = sorted(v for v in (np.mod(k - tau, T2) - T2
                                   for k in (0.0, self.T))
                       if -T2 + eps < v < -eps)
        phi = GridFunction.from_callable(
            lambda th: self.u_per(th + tau), -T2, 0.0,
            breakpoints=kinks, h=self.T / NODES_PER_T)
        return phi, self.u_per(tau)


def _branch_state(B1, k, branch, x0, ts):
    """Reduced-flow states ``u(t) = e^{-B1 t} x0 + branch * J_t(k)`` (m, N)."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    E = expm_multi(-B1, ts)
    J = const_forcing_integral(B1, k, ts)
    return np.einsum("mij,j->mi", E, np.atleast_1d(x0)) + branch * J


def _branch_rhs(B1, k, branch, x):
    return branch * k - B1 @ x


def _initial_guess(params, n=NODES_PER_T):
    """Forward-simulate the reduced no-delay relay system until the switching
    pattern settles; returns (x_alpha, T1, T2)."""
    B1 = params.B - params.A
    red = SystemParams(N=params.N, A=np.zeros_like(params.A), B=B1,
                       k=params.k, M=params.M, alpha=params.alpha,
                       beta=params.beta, T=params.T, p=params.p, s=params.s,
                       sigma=params.sigma)
    x0 = lift_R(np.zeros(params.N1), "alpha", params)
    hist = HistoryFunction.constant(x0, red.delay)
    horizon = 80.0 * params.T
    traj = integrate(red, hist, horizon=horizon, n=max(64, n // 4))
    sw = np.asarray(traj.switching_times)
    if len(sw) < 5:
        raise OrbitError("reduced system does not settle into an oscillation; "
                         "supply an initial guess (x_alpha, T)")
    gaps = np.diff(sw)
    # start of a + branch: the relay flips to +1 at alpha-hits (odd switches)
    i = len(sw) - 3 if (len(sw) - 3) % 2 == 1 else len(sw) - 4
    t_anchor = sw[i]
    ts, vals, _ = traj.sample()
    x_a = vals[np.argmin(np.abs(ts - t_anchor))]
    return x_a, gaps[i], gaps[i + 1]


def _shoot(params, x0, T1, T2, tol=1e-13, max_iter=60):
    """Newton iteration for the reduced two-point problem."""
    B1 = params.B - params.A
    k, M = params.k, params.M
    N = params.N
    xi = np.concatenate([x0, [T1, T2]])
    for it in range(max_iter):
        x_a, t1, t2 = xi[:N], xi[N], xi[N + 1]
        if t1 <= 0 or t2 <= 0:
            raise OrbitError("shooting left the admissible region (T <= 0)")
        x_b = _branch_state(B1, k, +1, x_a, [t1])[0]
        x_r = _branch_state(B1, k, -1, x_b, [t2])[0]
        R = np.concatenate([x_r - x_a,
                            [M @ x_a - params.alpha, M @ x_b - params.beta]])
        if np.max(np.abs(R)) < tol:
            return x_a, t1, t2, np.max(np.abs(R)), it
        E1 = expm(-B1 * t1)
        E2 = expm(-B1 * t2)
        f_b = _branch_rhs(B1, k, +1, x_b)
        f_r = _branch_rhs(B1, k, -1, x_r)
        J = np.zeros((N + 2, N + 2))
        J[:N, :N] = E2 @ E1 - np.eye(N)
        J[:N, N] = E2 @ f_b
        J[:N, N + 1] = f_r
        J[N, :N] = M
        J[N + 1, :N] = M @ E1
        J[N + 1, N] = M @ f_b
        step = np.linalg.solve(J, -R)
        # mild damping keeps the periods positive early on
        lam = 1.0
        while (xi[N] + lam * step[N] <= 0 or xi[N + 1] + lam * step[N + 1] <= 0):
            lam *= 0.5
            if lam < 1e-6:
                raise OrbitError("shooting step collapsed the half-periods")
        xi = xi + lam * step
    raise OrbitError(f"no convergence in {max_iter} Newton iterations "
                     f"(last residual {np.max(np.abs(R)):.2e})")


def find_periodic_orbit(params: SystemParams, guess=None, tol_orbit=1e-10,
                        max_iter=60, n=NODES_PER_T, verify=True,
                        tol_transversal=1e-6) -> PeriodicOrbit:
    """Locate the symmetric 2T-periodic orbit of the delayed relay system.

    Solves the reduced shooting problem (the delay drops out on the orbit),
    enforces the symmetry requirements, overwrites ``params.T`` with the
    found half-period, and runs the full verification unless ``verify`` is
    disabled.  Raises :class:`OrbitError` when no orbit is found or when a
    converged orbit violates one of the structural requirements.
    """
    if guess is not None:
        x0 = np.atleast_1d(np.asarray(guess[0], dtype=float))
        T1 = T2 = float(guess[1])
    else:
        x0, T1, T2 = _initial_guess(params, n=n)
    x_a, t1, t2, resid, iters = _shoot(params, x0, T1, T2,
                                       tol=min(1e-13, tol_orbit / 10),
                                       max_iter=max_iter)
    if abs(t1 - t2) > 1e-8 * max(1.0, t1):
        raise OrbitError(
            f"converged orbit is not symmetric: half-periods {t1:g} != {t2:g} "
            "(anti-symmetry of the derivative fails)")
    T = 0.5 * (t1 + t2)
    new_params = params.with_T(T)
    B1 = new_params.B - new_params.A
    k = new_params.k
    x_b = _branch_state(B1, k, +1, x_a, [T])[0]

    h = T / n
    T2d = 2.0 * T

    def u_first(th):   # theta in (-2T, -T): u_+(theta + 2T; x_alpha)
        return _branch_state(B1, k, +1, x_a, np.asarray(th) + T2d)

    def u_second(th):  # theta in (-T, 0): u_-(theta + T; x_beta)
        return _branch_state(B1, k, -1, x_b, np.asarray(th) + T)

    phi_alpha = GridFunction(
        list(GridFunction.from_callable(u_first, -T2d, -T, h=h).segments)
        + list(GridFunction.from_callable(u_second, -T, 0.0, h=h).segments))

    def ub_first(th):  # phi_beta on (-2T, -T): u_-(theta + 2T - T; x_beta)? no:
        # phi_beta(theta) = u_per(theta + 3T); theta + 3T in (T, 2T) here
        return _branch_state(B1, k, -1, x_b, np.asarray(th) + T2d)

    def ub_second(th):  # theta + 3T in (2T, 3T): + branch from x_alpha
        return _branch_state(B1, k, +1, x_a, np.asarray(th) + T)

    phi_beta = GridFunction(
        list(GridFunction.from_callable(ub_first, -T2d, -T, h=h).segments)
        + list(GridFunction.from_callable(ub_second, -T, 0.0, h=h).segments))

    dphi_jump = _branch_rhs(B1, k, +1, x_a) - _branch_rhs(B1, k, -1, x_a)
    transversality = float(new_params.M @ _branch_rhs(B1, k, +1, x_b))

    orbit = PeriodicOrbit(params=new_params, x_alpha=x_a, x_beta=x_b, T=T,
                          phi_alpha=phi_alpha, phi_beta=phi_beta,
                          dphi_jump=dphi_jump, transversality=transversality)
    if verify:
        report = verify_orbit(orbit, tol_orbit=tol_orbit,
                              tol_transversal=tol_transversal, n=n)
        if not report.ok:
            raise OrbitError("orbit violates Assumption items: "
                             + ", ".join(report.failures), report)
        object.__setattr__(orbit, "report", report)
    return orbit


@dataclass
class OrbitReport:
    """Numerical check of the structural requirements on the orbit."""

    section_residual: float
    switching_times: tuple
    switch_count_ok: bool
    switch_placement_residual: float
    antisymmetry_residual: float
    transversality: float
    transversality_ok: bool
    symmetry_relation_residual: float
    periodmap_residual: float = None
    smooth_third_deriv_bound: float = None
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


def verify_orbit(orbit: PeriodicOrbit, tol_orbit=1e-10, tol_hit=None,
                 tol_transversal=1e-6, tol_antisym=1e-8, n=NODES_PER_T,
                 check_period_map=True) -> OrbitReport:
    """Check the four structural items plus the period-map residual.

    Report-only: collects the failed item names instead of raising.
    """
    params = orbit.params
    T = orbit.T
    if tol_hit is None:
        tol_hit = 1e-9 * max(1.0, params.beta - params.alpha)
    failures = []

    sec = abs(float(params.M @ orbit.x_alpha) - params.alpha)
    if sec > 1e-9:
        failures.append("item1: M x_alpha != alpha")

    traj = integrate(params, orbit.hist_alpha, horizon=2.0 * T + 0.25 * T, n=n)
    sw = np.asarray(traj.switching_times)
    in_period = sw[sw <= 2.0 * T + 10 * tol_hit]
    count_ok = len(in_period) == 2
    placement = np.inf
    if count_ok:
        placement = float(np.max(np.abs(in_period - np.array([T, 2.0 * T]))))
        if placement > 1e-6 * max(1.0, T):
            failures.append("item2: switchings not at T and 2T")
    else:
        failures.append("item2: not exactly two switchings per period")

    # stored history must reproduce the orbit: phi_alpha(theta) = u_per(theta + 2T)
    thetas = np.linspace(-2.0 * T + 1e-9, -1e-9, 257)
    hist_resid = float(np.max(np.abs(orbit.phi_alpha(thetas)
                                     - orbit.u_per(thetas + 2 * T))))
    if hist_resid > 1e-8:
        failures.append("history: phi_alpha does not reproduce the orbit")

    # item 3: derivative anti-symmetric around the mid-point.  On the orbit
    # the derivative equals +-k - B1 phi, so the residual is measured through
    # the stored history values (exact, no interpolation derivative noise).
    th1 = np.linspace(-2.0 * T + 1e-9, -T - 1e-9, 257)
    B1 = orbit.B1
    k = params.k
    d1 = k - orbit.phi_alpha(th1, side="left") @ B1.T
    d2 = -k - orbit.phi_alpha(th1 + T, side="left") @ B1.T
    antisym = float(np.max(np.abs(d1 + d2)))
    if antisym > tol_antisym:
        failures.append("item3: derivative not anti-symmetric")

    trans = orbit.transversality
    trans_ok = abs(trans) > tol_transversal
    if not trans_ok:
        failures.append("item4: switching not transverse")
    rel = abs(float(params.M @ orbit.du_per(T, side="left"))
              + float(params.M @ orbit.du_per(2 * T, side="left")))

    report = OrbitReport(section_residual=sec,
                         switching_times=tuple(sw),
                         switch_count_ok=count_ok,
                         switch_placement_residual=placement,
                         antisymmetry_residual=antisym,
                         transversality=trans,
                         transversality_ok=trans_ok,
                         symmetry_relation_residual=rel,
                         failures=failures)

    if check_period_map and count_ok:
        from .norms import LinComb, NormSettings, composite_norm
        settings = NormSettings.from_params(params)
        img = poincare(orbit.section_point("alpha"), params, n=n)
        report.periodmap_residual = composite_norm(
            LinComb([(1.0, img.phi), (-1.0, orbit.phi_alpha)]),
            img.x - orbit.x_alpha, settings)
        if report.periodmap_residual > 10 * tol_orbit:
            failures.append("period-map residual above tolerance")

    # smoothness: third derivative bounded on each closed half-interval
    fine = np.linspace(-2 * T + 1e-6, -1e-6, 513)
    d3 = []
    hfd = 1e-4 * T
    for th in (-1.5 * T, -0.5 * T):
        vals = orbit.phi_alpha.deriv(np.array([th - hfd, th, th + hfd]))
        d3.append(np.max(np.abs(vals[0] - 2 * vals[1] + vals[2])) / hfd ** 2)
    report.smooth_third_deriv_bound = float(np.max(d3))
    if not np.isfinite(report.smooth_third_deriv_bound):
        failures.append("interior smoothness check failed")
    _ = fine
    return report
