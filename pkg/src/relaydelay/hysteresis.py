"""The nonideal relay as an online state machine over a scalar signal.

The relay outputs +1 or -1.  It starts at +1 unless the initial signal is
already at or above the upper threshold ``beta``; it flips to -1 exactly when
the signal attains ``beta`` while at +1, and back to +1 when the signal
attains ``alpha`` while at -1.  Touching the other threshold re-records a
crossing but does not flip the value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

__all__ = ["RelayState", "relay_init", "relay_advance"]

HIT_TOL_SCALE = 1e-12


@dataclass(frozen=True)
class RelayState:
    value: int  # +1 or -1
    last_crossing: Optional[tuple] = None  # (time, threshold value)
    grazing: bool = False


def relay_init(g0: float, alpha: float, beta: float) -> RelayState:
    """Initial relay state for signal value ``g0``: +1 iff g0 < beta."""
    if not alpha < beta:
        raise ValueError("need alpha < beta")
    return RelayState(value=1 if g0 < beta else -1)


def _refine(ts, gs, i, level, g_eval, tol):
    """Root of g - level inside sample interval i (bracketed)."""
    a, b = ts[i], ts[i + 1]
    if g_eval is None:
        fa, fb = gs[i] - level, gs[i + 1] - level
        # secant on the samples; good enough without a dense evaluator
        return a - fa * (b - a) / (fb - fa)
    f = lambda t: g_eval(t) - level
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:  # crossing seen on samples but not at cell ends: bisect in
        tm = 0.5 * (a + b)
        fm = f(tm)
        if fa * fm <= 0:
            b, fb = tm, fm
        else:
            a, fa = tm, fm
        if fa * fb > 0:
            return tm
    return brentq(f, a, b, xtol=tol, rtol=1e-15)


def relay_advance(state: RelayState, ts, gs, alpha: float, beta: float,
                  g_eval: Optional[Callable[[float], float]] = None,
                  tol: Optional[float] = None):
    """Advance the relay along a sampled continuous signal.

    Parameters
    ----------
    state : RelayState
        State consistent with the signal at ``ts[0]``.
    ts, gs : arrays
        Strictly increasing sample times and signal values.
    g_eval : callable, optional
        Dense evaluator of the signal, used to refine flip times by
        bracketed root finding; otherwise a secant on the samples is used.
    tol : float, optional
        Absolute tolerance of the refined flip times
        (default ``1e-12 * max(1, beta - alpha)``).

    Returns
    -------
    (RelayState, list of flip times)
    """
    ts = np.asarray(ts, dtype=float)
    gs = np.asarray(gs, dtype=float)
    if ts.ndim != 1 or np.any(np.diff(ts) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if tol is None:
        tol = HIT_TOL_SCALE * max(1.0, beta - alpha)

    value = state.value
    last_crossing = state.last_crossing
    grazing = state.grazing
    flips = []
    i = 0
    while i < len(ts) - 1:
        armed = beta if value == 1 else alpha
        other = alpha if value == 1 else beta
        d0 = gs[i] - armed
        d1 = gs[i + 1] - armed
        if d0 == 0.0 and i == 0 and not flips:
            # exactly on the armed threshold at the start: Definition of the
            # relay assigns the flipped value from t0 on; treat as immediate
            t_flip = ts[0]
            flips.append(t_flip)
            value = -value
            last_crossing = (t_flip, armed)
            continue
        if d1 == 0.0:
            # node sits exactly on the armed threshold: a genuine crossing
            # continues with the opposite sign; a tangential touch does not
            d_next = gs[i + 2] - armed if i + 2 < len(gs) else 0.0
            if d0 * d_next >= 0.0:
                grazing = True
                i += 1
                continue
        if d0 * d1 < 0 or d1 == 0.0:
            t_flip = _refine(ts, gs, i, armed, g_eval, tol)
            flips.append(t_flip)
            value = -value
            last_crossing = (t_flip, armed)
            # re-scan the remainder of this sample interval with the new arm
            if g_eval is not None and t_flip < ts[i + 1] - tol:
                sub = np.array([t_flip, ts[i + 1]])
                gsub = np.array([g_eval(t_flip), gs[i + 1]])
                st = RelayState(value, last_crossing, grazing)
                st2, fl2 = relay_advance(st, sub, gsub, alpha, beta, g_eval, tol)
                flips.extend(fl2)
                value, last_crossing = st2.value, st2.last_crossing
                grazing = grazing or st2.grazing
            i += 1
            continue
        # opposite-memory threshold: record but do not flip
        e0 = gs[i] - other
        e1 = gs[i + 1] - other
        if e0 * e1 < 0:
            t_cross = _refine(ts, gs, i, other, g_eval, tol)
            last_crossing = (t_cross, other)
        # grazing diagnostic: sample touches a threshold without sign change
        near = min(abs(d0), abs(d1))
        if near < tol and d0 * d1 > 0:
            grazing = True
        i += 1
    return RelayState(value, last_crossing, grazing), flips
