"""Brute-force reference solver: fixed-step RK4 with cubic-Hermite dense
history and bisection event location.

Deliberately independent of the package's exact-step machinery: the delay
term is read from stored (t, u, u') knots via Hermite interpolation, the
relay value is a plain two-threshold switch, and events are located by
bisection of RK4 sub-steps.  The step grid divides the delay exactly, and
the forcing's value jump at t = 2T (from the initial-condition mismatch
u(0+) != phi(0-)) is handled one-sidedly: the stage closing a step reads
the left limit, the stage opening a step reads the right limit, and the
knot at the jump is stored twice with its one-sided slopes.
"""

import bisect

import numpy as np


def _hermite(t, t0, t1, y0, y1, m0, m1):
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1


class _Dense:
    def __init__(self):
        self.ts = []
        self.us = []
        self.fs = []

    def push(self, t, u, f):
        self.ts.append(t)
        self.us.append(u)
        self.fs.append(f)

    def __call__(self, t):
        i = bisect.bisect_right(self.ts, t) - 1
        i = min(max(i, 0), len(self.ts) - 2)
        if self.ts[i + 1] - self.ts[i] < 1e-14:
            return self.us[i + 1]
        return _hermite(t, self.ts[i], self.ts[i + 1], self.us[i],
                        self.us[i + 1], self.fs[i], self.fs[i + 1])


def rk4_relay_oracle(params, hist_fn, x0, horizon, steps_per_delay=2048,
                     tol_event=1e-12):
    """Reference trajectory; returns (dense evaluator, switching times)."""
    A, B, k, M = params.A, params.B, params.k, params.M
    alpha, beta = params.alpha, params.beta
    T2 = params.delay
    h = T2 / steps_per_delay
    jump_tol = 1e-12 * T2
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    dense = _Dense()

    def delayed(arg, side):
        if arg < -jump_tol:
            return hist_fn(arg)
        if abs(arg) <= jump_tol:
            return hist_fn(0.0) if side == "left" else dense(0.0)
        return dense(arg)

    def rhs(t, u, z, side="right"):
        return z * k - B @ u + A @ delayed(t - T2, side)

    z = 1 if float(M @ x0) < beta else -1

    def rk4_step(t, u, dt, z):
        k1 = rhs(t, u, z, "right")
        k2 = rhs(t + 0.5 * dt, u + 0.5 * dt * k1, z)
        k3 = rhs(t + 0.5 * dt, u + 0.5 * dt * k2, z)
        k4 = rhs(t + dt, u + dt * k3, z, "left")
        return u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    t, u = 0.0, x0.copy()
    dense.push(t, u.copy(), rhs(t, u, z, "right"))
    switches = []
    grid_idx = 1
    while t < horizon - 1e-13:
        t_next = min(grid_idx * h, horizon)
        dt = t_next - t
        u_next = rk4_step(t, u, dt, z)
        level = beta if z == 1 else alpha
        glo = float(M @ u) - level
        g1 = float(M @ u_next) - level
        if glo * g1 < 0.0 or g1 == 0.0:
            lo, hi = 0.0, dt
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                gm = float(M @ rk4_step(t, u, mid, z)) - level
                if glo * gm <= 0.0:
                    hi = mid
                else:
                    lo, glo = mid, gm
                if hi - lo < tol_event:
                    break
            tau = t + 0.5 * (lo + hi)
            u_tau = rk4_step(t, u, tau - t, z)
            dense.push(tau, u_tau.copy(), rhs(tau, u_tau, z, "left"))
            switches.append(tau)
            z = -z
            dense.push(tau, u_tau.copy(), rhs(tau, u_tau, z, "right"))
            t, u = tau, u_tau
            continue
        t, u = t_next, u_next
        dense.push(t, u.copy(), rhs(t, u, z, "left"))
        if abs(t - T2) <= jump_tol:  # forcing value jump: store both slopes
            dense.push(t, u.copy(), rhs(t, u, z, "right"))
        if t >= grid_idx * h - 1e-13:
            grid_idx += 1
    return dense, switches


def random_system(rng, validate_params):
    """One random admissible system with spectral norms of A, B below 2."""
    N = int(rng.integers(1, 4))

    def scaled(norm_cap):
        Mx = rng.normal(size=(N, N))
        cur = np.linalg.norm(Mx, 2)
        return Mx * (rng.uniform(0.2, norm_cap) / cur)

    A = scaled(1.2)
    B = scaled(1.2)
    k = rng.normal(scale=1.5, size=N)
    M = rng.normal(size=N)
    while abs(M[0]) < 0.3:
        M[0] = rng.normal()
    T = rng.uniform(0.5, 1.0)
    return validate_params(N=N, A=A, B=B, k=k, M=M, alpha=-1.0, beta=1.0,
                           T=T, p=1.5, s=0.5, sigma=T / 3.0)
