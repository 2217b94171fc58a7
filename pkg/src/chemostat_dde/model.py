"""Problem definition: the delayed chemostat and its initial histories."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import AssumptionViolation, NegativeHistory, PeriodMismatch
from .signals import Constant, EnvironmentSignal, is_period_of, make_signal, signal_average
from .uptake import UptakeFunction, make_uptake


@dataclass(frozen=True)
class ChemostatModel:
    """``s' = D (s0 - s) - p(s) x``,  ``x' = x(t-tau) p(s(t-tau)) exp(-int_{t-tau}^t D) - D x``.

    Build through :func:`make_model`, which validates the standing hypotheses.
    """

    tau: float
    p: UptakeFunction
    D: EnvironmentSignal
    s0: EnvironmentSignal
    period: float | None = None
    flags: tuple = field(default=(), compare=False)

    @property
    def s_upper(self) -> float:
        return self.s0.upper

    @property
    def s_lower(self) -> float:
        return self.s0.lower

    @property
    def D_upper(self) -> float:
        return self.D.upper

    @property
    def is_autonomous(self) -> bool:
        return isinstance(self.D, Constant) and isinstance(self.s0, Constant)

    @property
    def is_periodic(self) -> bool:
        return self.period is not None or self.is_autonomous

    @property
    def omega(self) -> float | None:
        """Period used by periodic analyses; constant environments get ``max(tau, 1)``."""
        if self.period is not None:
            return self.period
        if self.is_autonomous:
            return max(self.tau, 1.0)
        return None

    @property
    def is_continuous(self) -> bool:
        return self.D.is_continuous and self.s0.is_continuous

    def replace(self, **changes) -> "ChemostatModel":
        return make_model(**{**_fields(self), **changes})


def _fields(model):
    return {f.name: getattr(model, f.name) for f in dataclasses.fields(model) if f.name != "flags"}


def make_model(tau, p, D, s0, period=None) -> ChemostatModel:
    """Assemble and validate a model.

    ``p``, ``D`` and ``s0`` may be ready objects or spec dicts with a
    ``kind`` entry (e.g. ``{"kind": "monod", "m": 1, "K": 1}``).
    """
    if isinstance(p, dict):
        p = make_uptake(**p)
    if isinstance(D, dict):
        D = make_signal(**D)
    if isinstance(s0, dict):
        s0 = make_signal(**s0)
    tau = float(tau)
    if not (math.isfinite(tau) and tau >= 0):
        raise ValueError(f"delay must be finite and non-negative, got {tau}")

    if not s0.lower > 0:
        raise AssumptionViolation("A2", f"s0 lower bound {s0.lower!r} is not positive")
    if not D.lower >= 0:
        raise AssumptionViolation("A2", f"D lower bound {D.lower!r} is negative")
    if not D.upper > 0:
        raise AssumptionViolation("A2", "D upper bound must be positive")

    if period is not None:
        period = float(period)
        if not period > 0:
            raise PeriodMismatch(f"period must be positive, got {period}")
        for name, sig in (("D", D), ("s0", s0)):
            if not is_period_of(sig, period):
                raise PeriodMismatch(f"{name} is not {period}-periodic")
    omega = period
    if omega is None and isinstance(D, Constant) and isinstance(s0, Constant):
        omega = 1.0
    if omega is not None:
        if not signal_average(D, omega) > 0:
            raise AssumptionViolation("A2", "<D> = 0: the integral of D does not diverge")
    elif D.kind == "sampled" and not D.values[-1] > 0:
        raise AssumptionViolation("A2", "sampled D ends at 0: the integral of D does not diverge")

    p.check(2.0 * s0.upper)
    flags = ()
    if not D.is_continuous:
        flags += ("discontinuous_D",)
    if not s0.is_continuous:
        flags += ("discontinuous_s0",)
    return ChemostatModel(tau, p, D, s0, period, flags)


@dataclass(frozen=True, eq=False)
class HistorySegment:
    """State of the delay system: ``(s, x)`` on ``[anchor - tau, anchor]``.

    Samples sit on a uniform grid. ``ds``/``dx`` are node derivatives of a
    piecewise-cubic Hermite interpolant (right limits); ``ds_left``/``dx_left``
    are the left limits and default to the same values, which gives a C1
    interpolant. Windows cut from trajectories with jumping inputs carry both.
    When derivatives are omitted they come from a PCHIP fit, which also keeps
    the interpolant non-negative. For ``tau = 0`` the segment is one point.
    """

    anchor_time: float
    tau: float
    s: np.ndarray
    x: np.ndarray
    ds: np.ndarray | None = None
    dx: np.ndarray | None = None
    ds_left: np.ndarray | None = None
    dx_left: np.ndarray | None = None

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if s.shape != x.shape:
            raise ValueError("s and x samples must have the same length")
        if self.tau == 0 and len(s) != 1:
            raise ValueError("a tau = 0 segment holds exactly one point")
        if self.tau > 0 and len(s) < 2:
            raise ValueError("a delayed segment needs at least two samples")
        if np.any(s < 0) or np.any(x < 0):
            raise NegativeHistory("initial data must be non-negative")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "x", x)
        if self.tau > 0:
            t = self.times
            for name, vals in (("ds", s), ("dx", x)):
                if getattr(self, name) is None:
                    object.__setattr__(self, name, PchipInterpolator(t, vals).derivative()(t))
                else:
                    object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        else:
            object.__setattr__(self, "ds", np.zeros(1))
            object.__setattr__(self, "dx", np.zeros(1))
        for name, default in (("ds_left", self.ds), ("dx_left", self.dx)):
            val = getattr(self, name)
            object.__setattr__(self, name, default if val is None else np.asarray(val, dtype=float))

    @property
    def n_intervals(self) -> int:
        return len(self.s) - 1

    @property
    def times(self) -> np.ndarray:
        if self.tau == 0:
            return np.array([self.anchor_time])
        return np.linspace(self.anchor_time - self.tau, self.anchor_time, len(self.s))

    @classmethod
    def constant(cls, s, x, tau, anchor_time=0.0, n=16):
        k = 1 if tau == 0 else n + 1
        return cls(anchor_time, float(tau), np.full(k, float(s)), np.full(k, float(x)),
                   np.zeros(k), np.zeros(k))

    @classmethod
    def from_functions(cls, s_fun, x_fun, tau, anchor_time=0.0, n=64):
        """Sample callables of absolute time on ``[anchor - tau, anchor]``."""
        if tau == 0:
            t = np.array([anchor_time])
        else:
            t = np.linspace(anchor_time - tau, anchor_time, n + 1)
        s = np.broadcast_to(np.asarray(s_fun(t), dtype=float), t.shape).copy()
        x = np.broadcast_to(np.asarray(x_fun(t), dtype=float), t.shape).copy()
        return cls(anchor_time, float(tau), s, x)

    def _interp(self, vals, ders, ders_left, t, left=False):
        """Cubic Hermite evaluation of one channel at absolute times ``t``.

        At a node the derivative is the right limit, or the left limit when
        ``left`` is set.
        """
        grid = self.times
        hstep = grid[1] - grid[0]
        pos = np.clip((np.asarray(t, dtype=float) - grid[0]) / hstep, 0.0, len(grid) - 1.0)
        if left:
            i = np.maximum(np.ceil(pos).astype(int) - 1, 0)
        else:
            i = np.minimum(np.floor(pos).astype(int), len(grid) - 2)
        th = pos - i
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th * th * (3 - 2 * th)
        h11 = th * th * (th - 1)
        val = (h00 * vals[i] + h10 * hstep * ders[i] + h01 * vals[i + 1]
               + h11 * hstep * ders_left[i + 1])
        d00 = 6 * th * th - 6 * th
        d10 = 3 * th * th - 4 * th + 1
        d11 = 3 * th * th - 2 * th
        der = d00 * (vals[i] - vals[i + 1]) / hstep + d10 * ders[i] + d11 * ders_left[i + 1]
        return val, der

    def __call__(self, t):
        """Interpolated ``(s, x)`` at absolute times inside the window."""
        if self.tau == 0:
            return self.s[0] + 0 * np.asarray(t, float), self.x[0] + 0 * np.asarray(t, float)
        return (self._interp(self.s, self.ds, self.ds_left, t)[0],
                self._interp(self.x, self.dx, self.dx_left, t)[0])

    def sample(self, n: int):
        """Resample on ``n + 1`` uniform nodes.

        Returns ``(t, s, x, ds, dx, ds_left, dx_left)``.
        """
        arrays = (self.s, self.x, self.ds, self.dx, self.ds_left, self.dx_left)
        if self.tau == 0 or n == self.n_intervals:
            return (self.times,) + tuple(a.copy() for a in arrays)
        t = np.linspace(self.anchor_time - self.tau, self.anchor_time, n + 1)
        s, ds = self._interp(self.s, self.ds, self.ds_left, t)
        x, dx = self._interp(self.x, self.dx, self.dx_left, t)
        ds_left = self._interp(self.s, self.ds, self.ds_left, t, left=True)[1]
        dx_left = self._interp(self.x, self.dx, self.dx_left, t, left=True)[1]
        return t, np.maximum(s, 0.0), np.maximum(x, 0.0), ds, dx, ds_left, dx_left

    def resample(self, n: int) -> "HistorySegment":
        if self.tau == 0 or n == self.n_intervals:
            return self
        return HistorySegment(self.anchor_time, self.tau, *self.sample(n)[1:])

    def moved_to(self, anchor_time: float) -> "HistorySegment":
        return dataclasses.replace(self, anchor_time=float(anchor_time))

    def scaled_biomass(self, factor: float) -> "HistorySegment":
        return dataclasses.replace(self, x=self.x * factor, dx=self.dx * factor,
                                   dx_left=self.dx_left * factor)

    def is_not_null(self) -> bool:
        """``x(anchor) > 0`` or some sample has both ``s > 0`` and ``x > 0``."""
        return bool(self.x[-1] > 0 or np.any((self.s > 0) & (self.x > 0)))

    def norm(self) -> float:
        return float(np.max(np.hypot(self.s, self.x)))

    def distance(self, other: "HistorySegment") -> float:
        """Discrete sup norm of the pointwise Euclidean distance."""
        if other.n_intervals != self.n_intervals:
            other = other.resample(self.n_intervals)
        return float(np.max(np.hypot(self.s - other.s, self.x - other.x)))
