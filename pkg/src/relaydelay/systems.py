"""Ready-made test systems.

``s1`` is the scalar anchor system with a closed-form relay oscillation:
with A = 0, B = 1, k = 2 and thresholds -1/1 the + branch solution from
x = -1 is ``u(t) = 2 - 3 e^{-t}``, so the half-period is ``T = ln 3``.

The delayed variants add a delayed-feedback term that vanishes identically
on the orbit: replacing ``(A, B) = (0, B1)`` by ``(a, B1 + a)`` leaves the
periodic solution untouched (its period equals the delay), while changing
the stability.  The same construction produces genuinely two-dimensional
systems from a planar relay ODE with a symmetric oscillation.
"""

from __future__ import annotations

import numpy as np

from .core import SystemParams, validate_params

__all__ = ["s1_params", "delayed_s1_params", "planar_params", "acceptance_systems"]

S1_T = float(np.log(3.0))


def s1_params(p=1.5, s=0.5, T=S1_T) -> SystemParams:
    """The scalar anchor system (A=0, B=1, k=2, thresholds -1/1, T=ln 3)."""
    return validate_params(N=1, A=[[0.0]], B=[[1.0]], k=[2.0], M=[1.0],
                           alpha=-1.0, beta=1.0, T=T, p=p, s=s, sigma=T / 3.0)


def delayed_s1_params(a, p=1.5, s=0.5) -> SystemParams:
    """Scalar delayed variant: A = a, B = 1 + a; same orbit as ``s1``."""
    return validate_params(N=1, A=[[a]], B=[[1.0 + a]], k=[2.0], M=[1.0],
                           alpha=-1.0, beta=1.0, T=S1_T, p=p, s=s,
                           sigma=S1_T / 3.0)


PLANAR_B1 = np.array([[1.0, 0.4], [-0.3, 0.8]])
PLANAR_K = np.array([2.0, 0.6])
PLANAR_M = np.array([1.0, 0.25])


def planar_params(a=0.0, A_dir=None, p=1.5, s=0.5, T_guess=1.1) -> SystemParams:
    """Two-dimensional delayed system built around a planar relay oscillation.

    ``a`` scales the delayed coupling ``A = a * A_dir`` (default direction:
    identity); ``B = B1 + A`` keeps the reduced dynamics, and hence the
    orbit, independent of ``a``.
    """
    A_dir = np.eye(2) if A_dir is None else np.asarray(A_dir, dtype=float)
    A = a * A_dir
    return validate_params(N=2, A=A, B=PLANAR_B1 + A, k=PLANAR_K, M=PLANAR_M,
                           alpha=-1.0, beta=1.0, T=T_guess, p=p, s=s,
                           sigma=T_guess / 3.0)


# shooting guesses (Newton re-converges them to ~1e-13 on every run)
S1_GUESS = (np.array([-1.0]), S1_T)
PLANAR_GUESS = (np.array([-0.91804044, -0.32783826]), 1.00492636)


def orbit_guess(params: SystemParams):
    """Shooting guess for the factory systems (None for unknown systems)."""
    if params.N == 1:
        return S1_GUESS
    if params.N == 2 and np.allclose(params.B - params.A, PLANAR_B1):
        return PLANAR_GUESS
    return None


NILPOTENT_DIR = np.array([[0.0, 1.0], [0.0, 0.0]])


def acceptance_systems():
    """The frozen test set: five delayed scalar systems and two planar ones.

    Returns a list of (name, params) pairs; every system possesses a
    verified symmetric orbit (the scalar ones share the closed-form s1
    orbit, the planar ones share the planar reduced oscillation).  The
    couplings are kept moderate so the eigenvalue census above the
    |lambda| = 0.05 cut stays small, and each value is tuned so the cut
    falls into a genuine spectral gap (clearance >= 1.5e-3; the eigenvalue
    sequence accumulates at 0 like sqrt(|a| T / k)).  The last system is
    the unstable representative (leading multiplier real, about -1.16).
    """
    out = []
    for a in (-0.020, 0.025, 0.030, 0.045, -0.048):
        out.append((f"scalar_a={a:+.3f}", delayed_s1_params(a)))
    out.append(("planar_stable", planar_params(-1.1, A_dir=NILPOTENT_DIR)))
    out.append(("planar_unstable", planar_params(-1.6, A_dir=NILPOTENT_DIR)))
    return out
