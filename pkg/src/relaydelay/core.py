"""Domain types: system parameters, piecewise-smooth grid functions, histories.

Histories live on the delay interval ``[-2T, 0]`` and are represented as a
list of smooth segments separated by tracked breakpoints; each segment holds
its own sample grid and is interpolated with a cubic spline.  The trace at 0
is stored separately (``x_right``) because it is not determined by the
history itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

NODES_PER_T = 256  # default sample density: nodes per window of length T

__all__ = [
    "SystemParams",
    "ParamError",
    "validate_params",
    "Segment",
    "GridFunction",
    "HistoryFunction",
    "eval_history",
    "TrajectoryPiece",
    "Trajectory",
]


class ParamError(ValueError):
    """Raised by :func:`validate_params`; carries every violated invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid parameters: " + "; ".join(self.violations))


@dataclass(frozen=True)
class SystemParams:
    """Parameters of ``u' = k H(Mu) - B u + A u(. - 2T)`` and its spaces.

    Attributes
    ----------
    N : int
        State dimension.
    A, B : (N, N) arrays
        Delayed and instantaneous coupling matrices.
    k : (N,) array
        Relay gain vector.
    M : (N,) array
        Output functional (m0, ..., m_{N-1}) with m0 != 0.
    alpha, beta : float
        Relay thresholds, alpha < beta.
    T : float
        Half the delay; the delay is 2T and the symmetric orbit has period 2T.
    p, s : float
        Exponents of the fractional space: 0 < s < 1 and
        1 < p < min(1/s, 1/(1-s)).
    sigma : float
        Regularity-window width, 0 < sigma <= T/3.
    """

    N: int
    A: np.ndarray
    B: np.ndarray
    k: np.ndarray
    M: np.ndarray
    alpha: float
    beta: float
    T: float
    p: float
    s: float
    sigma: float

    @property
    def N1(self) -> int:
        """Reduced dimension N - 1."""
        return self.N - 1

    @property
    def delay(self) -> float:
        return 2.0 * self.T

    def with_T(self, T: float) -> "SystemParams":
        """Copy with a new half-period T (sigma rescaled if it would exceed T/3)."""
        sigma = min(self.sigma, T / 3.0)
        return replace(self, T=float(T), sigma=float(sigma))


def validate_params(N, A, B, k, M, alpha, beta, T, p, s, sigma) -> SystemParams:
    """Validate a raw parameter bundle and return a :class:`SystemParams`.

    Collects *all* violated invariants into a single :class:`ParamError`
    instead of failing on the first one.
    """
    violations = []
    N = int(N)
    if N < 1:
        violations.append("N must be a positive integer")
        raise ParamError(violations)

    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    k = np.atleast_1d(np.asarray(k, dtype=float))
    M = np.atleast_1d(np.asarray(M, dtype=float))
    for name, arr, shape in (("A", A, (N, N)), ("B", B, (N, N)),
                             ("k", k, (N,)), ("M", M, (N,))):
        if arr.shape != shape:
            violations.append(f"{name} must have shape {shape}, got {arr.shape}")
    if M.shape == (N,) and M[0] == 0.0:
        violations.append("m0 = 0 (output functional must have m0 != 0)")
    if not alpha < beta:
        violations.append(f"thresholds must satisfy alpha < beta, got {alpha} >= {beta}")
    if not T > 0:
        violations.append(f"T must be positive, got {T}")
    if not (0.0 < s < 1.0):
        violations.append(f"need 0 < s < 1, got s = {s}")
    else:
        p_sup = min(1.0 / s, 1.0 / (1.0 - s))
        if not (1.0 < p < p_sup):
            violations.append(
                f"need 1 < p < min(1/s, 1/(1-s)) = {p_sup:g}, got p = {p}")
    if T > 0 and not (0.0 < sigma <= T / 3.0 + 1e-15):
        violations.append(f"need 0 < sigma <= T/3 = {T / 3.0:g}, got sigma = {sigma}")
    if violations:
        raise ParamError(violations)
    return SystemParams(N=N, A=A, B=B, k=k, M=M, alpha=float(alpha),
                        beta=float(beta), T=float(T), p=float(p), s=float(s),
                        sigma=float(sigma))


# ---------------------------------------------------------------------------
# piecewise-smooth grid functions


def _fit(ts, vals):
    """Interpolant of one smooth segment (cubic where possible)."""
    m = len(ts)
    if m >= 4:
        return CubicSpline(ts, vals, axis=0)  # not-a-knot: reproduces cubics
    if m >= 2:
        # too few nodes for a cubic: exact low-degree polynomial fit
        coeff = np.polynomial.polynomial.polyfit(ts, vals, m - 1)

        class _Poly:
            def __call__(self, t):
                return np.polynomial.polynomial.polyval(
                    np.asarray(t), coeff, tensor=True).T

            def derivative(self):
                dcoeff = np.polynomial.polynomial.polyder(coeff)

                class _D:
                    def __call__(self, t):
                        return np.polynomial.polynomial.polyval(
                            np.asarray(t), dcoeff, tensor=True).T
                return _D()

        return _Poly()
    raise ValueError("segment needs at least 2 nodes")


@dataclass(frozen=True)
class Segment:
    """One smooth piece: nodes ``ts`` in [t0, t1] and values ``vals`` (m, N)."""

    ts: np.ndarray
    vals: np.ndarray

    @property
    def t0(self):
        return self.ts[0]

    @property
    def t1(self):
        return self.ts[-1]

    @cached_property
    def _spline(self):
        return _fit(self.ts, self.vals)

    @cached_property
    def _dspline(self):
        return self._spline.derivative()

    def __call__(self, t):
        return self._spline(np.clip(t, self.t0, self.t1))

    def deriv(self, t):
        return self._dspline(np.clip(t, self.t0, self.t1))


def _segment_nodes(a, b, h):
    """Node count proportional to length, at least 4 (cubic interpolation)."""
    m = max(4, int(np.ceil((b - a) / h)) + 1)
    return np.linspace(a, b, m)


class GridFunction:
    """Piecewise-smooth vector function on ``[a, b]`` with tracked breakpoints.

    The function may jump at interior breakpoints; both one-sided values are
    kept (each segment stores its own endpoint samples).
    """

    def __init__(self, segments):
        segments = tuple(segments)
        if not segments:
            raise ValueError("need at least one segment")
        for s0, s1 in zip(segments, segments[1:]):
            if not np.isclose(s0.t1, s1.t0, rtol=0, atol=1e-12 * max(1.0, abs(s0.t1))):
                raise ValueError("segments must be contiguous")
        self.segments = segments
        self.a = segments[0].t0
        self.b = segments[-1].t1
        self._starts = np.array([s.t0 for s in segments])
        self.N = segments[0].vals.shape[1]

    @property
    def breakpoints(self):
        """Interior seam points, sorted."""
        return tuple(s.t0 for s in self.segments[1:])

    @classmethod
    def from_callable(cls, f, a, b, breakpoints=(), h=None, dtype=float):
        """Sample a callable (vectorized, returning (m, N)) into segments."""
        if h is None:
            h = (b - a) / NODES_PER_T
        edges = [a] + sorted(t for t in breakpoints if a < t < b) + [b]
        segs = []
        for lo, hi in zip(edges, edges[1:]):
            ts = _segment_nodes(lo, hi, h)
            vals = np.atleast_2d(np.asarray(f(ts), dtype=dtype))
            if vals.shape[0] != len(ts):
                vals = vals.T
            segs.append(Segment(ts, vals))
        return cls(segs)

    @classmethod
    def constant(cls, value, a, b, h=None):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls.from_callable(lambda t: np.tile(value, (len(t), 1)), a, b, h=h)

    def _locate(self, t, side):
        t = np.asarray(t, dtype=float)
        which = "left" if side == "left" else "right"
        idx = np.searchsorted(self._starts, t, side=which) - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def __call__(self, t, side=None):
        """Evaluate at ``t`` (scalar or array); ``side`` picks the one-sided
        limit at breakpoints ('left'/'right'); default is right-continuous."""
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = self._locate(t, side)
        out = np.empty((len(t), self.N), dtype=self.segments[0].vals.dtype)
        for i in np.unique(idx):
            sel = idx == i
            out[sel] = self.segments[i](t[sel])
        return out[0] if scalar else out

    def deriv(self, t, side=None):
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = self._locate(t, side)
        out = np.empty((len(t), self.N), dtype=self.segments[0].vals.dtype)
        for i in np.unique(idx):
            sel = idx == i
            out[sel] = self.segments[i].deriv(t[sel])
        return out[0] if scalar else out

    # -- structural operations -------------------------------------------------

    def shifted(self, dt):
        """The function ``t -> f(t - dt)`` on ``[a + dt, b + dt]``."""
        return GridFunction(tuple(Segment(s.ts + dt, s.vals) for s in self.segments))

    def restricted(self, a, b):
        """Restriction to ``[a, b] subset [self.a, self.b]`` (exact at nodes)."""
        eps = 1e-12 * max(1.0, abs(self.b - self.a))
        if a < self.a - eps or b > self.b + eps:
            raise ValueError("restriction outside domain")
        segs = []
        for s in self.segments:
            lo, hi = max(s.t0, a), min(s.t1, b)
            if hi - lo <= eps:
                continue
            keep = (s.ts >= lo - eps) & (s.ts <= hi + eps)
            ts = s.ts[keep]
            # make sure the cut endpoints are present
            if len(ts) == 0 or abs(ts[0] - lo) > eps:
                ts = np.concatenate([[lo], ts])
            if abs(ts[-1] - hi) > eps:
                ts = np.concatenate([ts, [hi]])
            if len(ts) < 4:
                ts = np.linspace(lo, hi, 4)
            segs.append(Segment(ts, s(ts)))
        return GridFunction(segs)

    def _node_step(self):
        """Representative node spacing (median over all gaps, so thin
        seam segments cannot force a global refinement)."""
        return float(np.median(np.concatenate(
            [np.diff(s.ts) for s in self.segments])))

    def resampled(self, h=None, extra_breakpoints=()):
        """Same function re-sampled on fresh per-segment uniform grids."""
        bps = sorted(set(self.breakpoints) | {t for t in extra_breakpoints
                                              if self.a < t < self.b})
        if h is None:
            h = self._node_step()
        edges = [self.a] + bps + [self.b]
        segs = []
        for lo, hi in zip(edges, edges[1:]):
            ts = _segment_nodes(lo, hi, h)
            vals = np.empty((len(ts), self.N), dtype=self.segments[0].vals.dtype)
            vals[:-1] = self(ts[:-1], side="right")
            vals[-1] = self(ts[-1], side="left")
            segs.append(Segment(ts, vals))
        return GridFunction(segs)

    def map_values(self, fn):
        """Apply a vectorized map to the sample values (e.g. scaling)."""
        return GridFunction(tuple(Segment(s.ts, fn(s.vals)) for s in self.segments))

    def __mul__(self, c):
        return self.map_values(lambda v: v * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def combine(self, other, fn, h=None):
        """Pointwise combination on the union breakpoint partition."""
        if not (np.isclose(self.a, other.a) and np.isclose(self.b, other.b)):
            raise ValueError("domains differ")
        bps = sorted(set(np.round(self.breakpoints, 14))
                     | set(np.round(other.breakpoints, 14)))
        if h is None:
            h = min(self._node_step(), other._node_step())
        edges = [self.a] + bps + [self.b]
        segs = []
        dtype = np.result_type(self.segments[0].vals.dtype,
                               other.segments[0].vals.dtype)
        for lo, hi in zip(edges, edges[1:]):
            ts = _segment_nodes(lo, hi, h)
            vals = np.empty((len(ts), self.N), dtype=dtype)
            vals[:-1] = fn(self(ts[:-1], side="right"), other(ts[:-1], side="right"))
            vals[-1] = fn(self(ts[-1], side="left"), other(ts[-1], side="left"))
            segs.append(Segment(ts, vals))
        return GridFunction(segs)

    def __add__(self, other):
        return self.combine(other, lambda u, v: u + v)

    def __sub__(self, other):
        return self.combine(other, lambda u, v: u - v)


# ---------------------------------------------------------------------------
# histories and trajectories


@dataclass(frozen=True)
class HistoryFunction:
    """Initial data: ``phi`` on ``(-2T, 0)`` plus the right trace ``x_right``.

    The trace at 0 is supplied separately because functions in the fractional
    space have no well-defined pointwise trace; ``phi(0-)`` and ``x_right``
    may genuinely differ.
    """

    phi: GridFunction
    x_right: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_right",
                           np.atleast_1d(np.asarray(self.x_right)))

    @property
    def T2(self) -> float:
        """Length of the history window (the delay 2T)."""
        return -self.phi.a

    @property
    def N(self) -> int:
        return self.phi.N

    @classmethod
    def constant(cls, value, T2, h=None):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(GridFunction.constant(value, -T2, 0.0, h=h), value)


def eval_history(hist: HistoryFunction, t, side="right"):
    """Value of the history at ``t in [-2T, 0)``; one-sided at breakpoints."""
    T2 = hist.T2
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt < -T2 - 1e-12) or np.any(tt >= 0.0):
        raise ValueError(f"history time must lie in [-{T2:g}, 0)")
    return hist.phi(t, side=side)


@dataclass(frozen=True)
class TrajectoryPiece:
    """Solution samples on one relay branch, in absolute time."""

    relay: int
    ts: np.ndarray
    vals: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Piecewise solution of the full hysteresis-delay problem."""

    pieces: tuple
    switching_times: tuple
    history: HistoryFunction
    params: SystemParams
    grazing: bool = False
    accumulation_suspected: bool = False

    @property
    def t_end(self) -> float:
        return self.pieces[-1].ts[-1]

    def relay_at(self, t: float) -> int:
        for piece in reversed(self.pieces):
            if t >= piece.ts[0] - 1e-14:
                return piece.relay
        return self.pieces[0].relay

    def sample(self):
        """All samples concatenated: (ts, vals, relay per sample)."""
        ts = np.concatenate([p.ts for p in self.pieces])
        vals = np.concatenate([p.vals for p in self.pieces])
        relay = np.concatenate([np.full(len(p.ts), p.relay) for p in self.pieces])
        return ts, vals, relay

    def output(self):
        """Samples of the relay input M.u(t)."""
        ts, vals, _ = self.sample()
        return ts, vals @ self.params.M
