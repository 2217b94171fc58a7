"""Time-varying environment signals: dilution rate ``D(t)`` and feed ``s0(t)``.

Signals are evaluated with an explicit one-sided limit (``side="right"`` or
``"left"``) so that fixed-step integrators can land exactly on the jumps of
piecewise-constant inputs without smearing them.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import NotPeriodic

# Jump locations closer than this (relative to the period) count as hit exactly.
_SNAP = 1e-9


class EnvironmentSignal:
    kind = "abstract"
    period: float | None = None
    is_continuous = True

    def evaluate(self, t, side="right"):
        raise NotImplementedError

    def __call__(self, t):
        return self.evaluate(t, "right")

    @property
    def lower(self) -> float:
        """Certified lower bound."""
        raise NotImplementedError

    @property
    def upper(self) -> float:
        """Certified upper bound."""
        raise NotImplementedError

    def breakpoints(self, t0, t1):
        """Jump locations of the signal inside ``[t0, t1]`` (empty for continuous kinds)."""
        return np.empty(0)

    def scaled(self, factor: float) -> "EnvironmentSignal":
        raise NotImplementedError

    def shifted(self, offset: float) -> "EnvironmentSignal":
        """The signal ``t -> f(t - offset)``."""
        return Shifted(self, offset)


class Constant(EnvironmentSignal):
    kind = "constant"

    def __init__(self, value: float):
        self.value = float(value)

    def evaluate(self, t, side="right"):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self.value
        return np.full(t.shape, self.value)

    @property
    def lower(self):
        return self.value

    @property
    def upper(self):
        return self.value

    def scaled(self, factor):
        return Constant(self.value * factor)

    def shifted(self, offset):
        return self

    def __repr__(self):
        return f"Constant({self.value!r})"


class PiecewiseConstant(EnvironmentSignal):
    """Periodic step function: ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``."""

    kind = "piecewise"
    is_continuous = False

    def __init__(self, breakpoints, values, period: float):
        b = np.asarray(breakpoints, dtype=float)
        v = np.asarray(values, dtype=float)
        if b.ndim != 1 or b.shape != v.shape or len(b) == 0:
            raise ValueError("breakpoints and values must be equally long 1-d lists")
        if not period > 0:
            raise ValueError("period must be positive")
        if b[0] != 0.0 or np.any(np.diff(b) <= 0) or b[-1] >= period:
            raise ValueError("breakpoints must start at 0, increase strictly and stay below the period")
        self.breaks = b
        self.values = v
        self.period = float(period)

    def evaluate(self, t, side="right"):
        t = np.asarray(t, dtype=float)
        phase = np.mod(t, self.period)
        eps = _SNAP * self.period
        if side == "right":
            idx = np.searchsorted(self.breaks, phase + eps, side="right") - 1
            idx = np.where(phase + eps >= self.period, 0, idx)
        else:
            idx = np.searchsorted(self.breaks, phase - eps, side="right") - 1
        out = self.values[idx]
        return float(out) if out.ndim == 0 else out

    @property
    def lower(self):
        return float(self.values.min())

    @property
    def upper(self):
        return float(self.values.max())

    def breakpoints(self, t0, t1):
        k0 = math.floor(t0 / self.period) - 1
        k1 = math.ceil(t1 / self.period) + 1
        pts = (np.arange(k0, k1 + 1)[:, None] * self.period + self.breaks[None, :]).ravel()
        return pts[(pts >= t0) & (pts <= t1)]

    def mean(self):
        widths = np.diff(np.append(self.breaks, self.period))
        return float(np.dot(widths, self.values) / self.period)

    def scaled(self, factor):
        return PiecewiseConstant(self.breaks, self.values * factor, self.period)

    def __repr__(self):
        return (f"PiecewiseConstant(breakpoints={self.breaks.tolist()!r}, "
                f"values={self.values.tolist()!r}, period={self.period!r})")


class Fourier(EnvironmentSignal):
    """``mean + sum_k a_k cos(k nu t) + b_k sin(k nu t)`` with ``nu = 2 pi / period``."""

    kind = "fourier"

    def __init__(self, mean: float, cos=(), sin=(), period: float = 1.0):
        if not period > 0:
            raise ValueError("period must be positive")
        self.mean_value = float(mean)
        self.a = np.asarray(cos, dtype=float).ravel()
        self.b = np.asarray(sin, dtype=float).ravel()
        self.period = float(period)

    def evaluate(self, t, side="right"):
        t = np.asarray(t, dtype=float)
        nu = 2.0 * np.pi / self.period
        # reduce the phase first so that f(t + period) == f(t) to rounding
        theta = nu * np.mod(t, self.period)
        out = np.full(t.shape, self.mean_value)
        for k, ak in enumerate(self.a, start=1):
            out = out + ak * np.cos(k * theta)
        for k, bk in enumerate(self.b, start=1):
            out = out + bk * np.sin(k * theta)
        return float(out) if out.ndim == 0 else out

    @property
    def lower(self):
        return self.mean_value - float(np.abs(self.a).sum() + np.abs(self.b).sum())

    @property
    def upper(self):
        return self.mean_value + float(np.abs(self.a).sum() + np.abs(self.b).sum())

    def mean(self):
        return self.mean_value

    def scaled(self, factor):
        return Fourier(self.mean_value * factor, self.a * factor, self.b * factor, self.period)

    def __repr__(self):
        return (f"Fourier(mean={self.mean_value!r}, cos={self.a.tolist()!r}, "
                f"sin={self.b.tolist()!r}, period={self.period!r})")


class Sampled(EnvironmentSignal):
    """Signal given on a time grid; held constant outside the grid.

    ``interpolation`` is ``"linear"`` or ``"pchip"``; both stay inside the
    sample range, so the grid min/max are certified bounds.
    """

    kind = "sampled"

    def __init__(self, t, values, interpolation: str = "linear"):
        t = np.asarray(t, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
            raise ValueError("sampled signal needs equally long 1-d t and values (>= 2)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must increase strictly")
        if interpolation not in ("linear", "pchip"):
            raise ValueError(f"unknown interpolation {interpolation!r}")
        self.t = t
        self.values = v
        self.interpolation = interpolation
        self._pchip = PchipInterpolator(t, v, extrapolate=False) if interpolation == "pchip" else None

    def evaluate(self, t, side="right"):
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, self.t[0], self.t[-1])
        if self._pchip is None:
            out = np.interp(tc, self.t, self.values)
        else:
            out = self._pchip(tc)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def lower(self):
        return float(self.values.min())

    @property
    def upper(self):
        return float(self.values.max())

    def scaled(self, factor):
        return Sampled(self.t, self.values * factor, self.interpolation)

    def __repr__(self):
        return f"Sampled(t=<{len(self.t)} points>, interpolation={self.interpolation!r})"


class Shifted(EnvironmentSignal):
    def __init__(self, base: EnvironmentSignal, offset: float):
        self.base = base
        self.offset = float(offset)
        self.period = base.period
        self.is_continuous = base.is_continuous
        self.kind = base.kind

    def evaluate(self, t, side="right"):
        return self.base.evaluate(np.asarray(t, dtype=float) - self.offset, side)

    @property
    def lower(self):
        return self.base.lower

    @property
    def upper(self):
        return self.base.upper

    def breakpoints(self, t0, t1):
        return self.base.breakpoints(t0 - self.offset, t1 - self.offset) + self.offset

    def scaled(self, factor):
        return Shifted(self.base.scaled(factor), self.offset)


def is_period_of(f: EnvironmentSignal, omega: float, n: int = 64, rtol: float = 1e-12) -> bool:
    """Check ``|f(t + omega) - f(t)| < rtol`` (relative) on ``n`` sample points."""
    if isinstance(f, Constant):
        return True
    rng = np.random.default_rng(12345)
    span = omega if f.period is None else max(omega, f.period)
    t = rng.uniform(0.0, 3.0 * span, n)
    a = np.asarray(f.evaluate(t))
    b = np.asarray(f.evaluate(t + omega))
    scale = max(1.0, float(np.max(np.abs(a))))
    return bool(np.all(np.abs(a - b) < rtol * scale))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def signal_average(f, omega: float, shift: float = 0.0, panels: int = 64) -> float:
    """Average ``(1/omega) * integral_0^omega f(t - shift) dt`` over one period.

    Composite 8-point Gauss-Legendre on panels aligned with the jumps of the
    signal, so piecewise-constant inputs are integrated exactly and smooth
    ones to rounding level.
    """
    if not omega > 0:
        raise NotPeriodic(f"period must be positive, got {omega}")
    if isinstance(f, EnvironmentSignal):
        if not is_period_of(f, omega):
            raise NotPeriodic(f"{f!r} is not {omega}-periodic")
        evaluate = f.evaluate
        jumps = f.breakpoints(-shift, omega - shift) + shift
    else:
        evaluate = lambda t, side="right": f(t)  # noqa: E731
        jumps = np.empty(0)
    edges = np.unique(np.concatenate(([0.0, omega], jumps[(jumps > 0) & (jumps < omega)])))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = max(1, int(math.ceil(panels * (hi - lo) / omega)))
        cuts = np.linspace(lo, hi, k + 1)
        half = 0.5 * np.diff(cuts)
        mid = 0.5 * (cuts[:-1] + cuts[1:])
        pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = np.asarray(evaluate(pts - shift, "right"), dtype=float)
        total += float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * vals))
    return total / omega


# kind -> (required, optional) parameter names
_SIGNAL_PARAMS = {
    "constant": ({"value"}, set()),
    "piecewise": ({"breakpoints", "values", "period"}, set()),
    "fourier": ({"period"}, {"mean", "cos", "sin"}),
    "sampled": ({"t", "values"}, {"interpolation"}),
}


def check_params(what, kind, params, table):
    """Reject missing or inapplicable parameters for ``kind``."""
    if kind not in table:
        raise ValueError(f"unknown {what} kind {kind!r}")
    required, optional = table[kind]
    missing = sorted(required - set(params))
    if missing:
        raise ValueError(f"{what} kind {kind!r} needs {', '.join(missing)}")
    extra = sorted(set(params) - required - optional)
    if extra:
        raise ValueError(f"{what} kind {kind!r} does not take {', '.join(extra)}")


def make_signal(kind: str, **params) -> EnvironmentSignal:
    kind = kind.lower()
    if kind == "piecewise-constant":
        kind = "piecewise"
    check_params("signal", kind, params, _SIGNAL_PARAMS)
    if kind == "constant":
        return Constant(params["value"])
    if kind == "piecewise":
        return PiecewiseConstant(params["breakpoints"], params["values"], params["period"])
    if kind == "fourier":
        return Fourier(params.get("mean", 0.0), params.get("cos", ()), params.get("sin", ()),
                       params["period"])
    if kind == "sampled":
        return Sampled(params["t"], params["values"], params.get("interpolation", "linear"))
    raise ValueError(f"unknown signal kind {kind!r}")
