"""Biomass-free dynamics: the washout solution ``z*`` and the ratio function ``phi``.

``z*`` is the bounded solution of ``z' = D (s0 - z)``. The linear delay
equation obtained by linearising the biomass equation at ``(z*, 0)`` is

    c'(t) = -D(t) c(t) + c(t - tau) p(z*(t - tau)) exp(-int_{t-tau}^t D),

and ``phi(t) = c(t) / c(t + tau) * exp(-int_t^{t+tau} D)``. In the periodic
case there is exactly one periodic ``phi``; it is reached by integrating
``c`` period after period (renormalising ``c`` each time, since ``phi`` only
sees ratios) until ``phi`` stops changing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BoundViolated, DegenerateDilution, GridTooLarge, HorizonTooShort,
                     NoConvergence, NotPeriodic, OutOfRange)
from .hermite import PiecewiseHermite, simpson_cumulative
from .integrator import MAX_NODES, X, aligned_steps, compute_psi, integrate
from .model import ChemostatModel, HistorySegment
from .signals import signal_average

BURN_IN_DECAY = 1e-10
PHI_GRID = 256


def _stage_grid(model, t0, t1, h_target):
    """Nodes on ``[t0, t1]`` that contain every jump of ``D`` and ``s0``, spacing <= ``h_target``."""
    jumps = np.concatenate((model.D.breakpoints(t0, t1), model.s0.breakpoints(t0, t1)))
    edges = np.unique(np.concatenate(([t0, t1], jumps[(jumps > t0) & (jumps < t1)])))
    # drop edges closer than a rounding error to their neighbour
    keep = np.concatenate(([True], np.diff(edges) > 1e-12 * max(1.0, abs(t1))))
    edges = edges[keep]
    edges[-1] = t1
    pieces = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = max(1, int(math.ceil((hi - lo) / h_target - 1e-9)))
        pieces.append(np.linspace(lo, hi, k + 1)[:-1])
    return np.concatenate(pieces + [np.array([t1])])


def _affine_steps(model, t):
    """RK4 for ``z' = -D z + D s0`` over each grid interval, written as ``z -> A z + B``."""
    h = np.diff(t)
    D, s0 = model.D, model.s0
    a1 = -np.asarray(D.evaluate(t[:-1], "right"), float)
    b1 = -a1 * np.asarray(s0.evaluate(t[:-1], "right"), float)
    tm = t[:-1] + 0.5 * h
    a2 = -np.asarray(D.evaluate(tm), float)
    b2 = -a2 * np.asarray(s0.evaluate(tm), float)
    a4 = -np.asarray(D.evaluate(t[1:], "left"), float)
    b4 = -a4 * np.asarray(s0.evaluate(t[1:], "left"), float)
    al2 = a2 * (1 + 0.5 * h * a1)
    be2 = a2 * 0.5 * h * b1 + b2
    al3 = a2 * (1 + 0.5 * h * al2)
    be3 = a2 * 0.5 * h * be2 + b2
    al4 = a4 * (1 + h * al3)
    be4 = a4 * h * be3 + b4
    A = 1 + h / 6 * (a1 + 2 * al2 + 2 * al3 + al4)
    B = h / 6 * (b1 + 2 * be2 + 2 * be3 + be4)
    return A, B


def _propagate(A, B, z0):
    z = [float(z0)]
    for a, b in zip(A.tolist(), B.tolist()):
        z.append(a * z[-1] + b)
    return np.array(z)


@dataclass(eq=False)
class WashoutSolution:
    """``z*`` on a node grid with Hermite dense output.

    Periodic solutions cover one period and wrap around; general ones are
    valid on ``[t[0], t[-1]]`` only (the burn-in is cut off).
    """

    t: np.ndarray
    z: np.ndarray
    dz_right: np.ndarray
    dz_left: np.ndarray
    period: float | None
    periodicity_residual: float
    equation_residual: float
    burn_in: float = 0.0
    _dense: PiecewiseHermite | None = field(default=None, repr=False)

    @property
    def dense(self):
        if self._dense is None:
            self._dense = PiecewiseHermite(self.t, self.z, self.dz_right, self.dz_left, self.period)
        return self._dense

    def __call__(self, t):
        if self.period is None:
            tq = np.asarray(t, dtype=float)
            tol = 1e-9 * max(1.0, abs(self.t[-1]))
            if np.any(tq < self.t[0] - tol) or np.any(tq > self.t[-1] + tol):
                raise OutOfRange(f"z* known on [{self.t[0]}, {self.t[-1]}] only")
        out = self.dense(t)
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, t):
        return self.dense(t, derivative=True)

    @property
    def lower(self):
        return float(np.min(self.dense(self._fine())))

    @property
    def upper(self):
        return float(np.max(self.dense(self._fine())))

    def _fine(self):
        return np.linspace(self.t[0], self.t[-1], 4 * len(self.t))

    def history(self, x, tau, anchor_time=0.0, n=16) -> HistorySegment:
        """History segment with ``s = z*`` and ``x`` given (constant or callable) on the window."""
        if tau == 0:
            xs = x(np.array([anchor_time])) if callable(x) else np.array([float(x)])
            return HistorySegment(anchor_time, 0.0, np.array([self(anchor_time)]), xs)
        t = np.linspace(anchor_time - tau, anchor_time, n + 1)
        s = np.asarray(self(t), dtype=float)
        ds = np.asarray(self.dense(t, derivative=True), dtype=float)
        if callable(x):
            xs = np.broadcast_to(np.asarray(x(t), dtype=float), t.shape).copy()
            return HistorySegment(anchor_time, tau, s, xs, ds)
        return HistorySegment(anchor_time, tau, s, np.full(n + 1, float(x)), ds, np.zeros(n + 1))


def _solution(model, t, z, period, periodicity_residual, burn_in=0.0):
    D, s0 = model.D, model.s0
    d_right = np.asarray(D.evaluate(t, "right")) * (np.asarray(s0.evaluate(t, "right")) - z)
    d_left = np.asarray(D.evaluate(t, "left")) * (np.asarray(s0.evaluate(t, "left")) - z)
    # per-step defect of z(t_{k+1}) - z(t_k) = int D (s0 - z), midpoint from the Hermite cubic
    h = np.diff(t)
    zm = 0.5 * (z[:-1] + z[1:]) + h * (d_right[:-1] - d_left[1:]) / 8.0
    tm = t[:-1] + 0.5 * h
    fm = np.asarray(D.evaluate(tm)) * (np.asarray(s0.evaluate(tm)) - zm)
    incr = h / 6.0 * (d_right[:-1] + 4 * fm + d_left[1:])
    eq_res = float(np.max(np.abs(np.diff(z) - incr) / h))
    return WashoutSolution(t, z, d_right, d_left, period, periodicity_residual, eq_res, burn_in)


def compute_washout_periodic(model: ChemostatModel, n=None) -> WashoutSolution:
    """Periodic washout solution over one period ``[0, omega]``.

    ``n`` is the number of RK4 steps per period; by default 256 per period
    or per delay, whichever is finer. The initial value solves the one-period
    fixed-point equation of the discrete map, so the grid solution is exactly
    periodic up to rounding.
    """
    omega = model.omega
    if omega is None:
        raise NotPeriodic("model has no period; use compute_washout_general")
    mean_d = signal_average(model.D, omega)
    if not mean_d > 0:
        raise DegenerateDilution(f"<D> = {mean_d!r} must be positive")
    if n is None:
        ratio = omega / model.tau if model.tau > 0 else 1.0
        n = int(min(PHI_GRID * max(1.0, ratio), 1 << 16))
    t = _stage_grid(model, 0.0, omega, omega / n)
    A, B = _affine_steps(model, t)
    # z(omega) = prod(A) z(0) + b; choose z(0) = b / (1 - prod(A))
    a_tot = float(np.prod(A))
    b_tot = float(_propagate(A, B, 0.0)[-1])
    if not a_tot < 1.0:
        raise DegenerateDilution("one-period contraction factor is not below 1")
    z = _propagate(A, B, b_tot / (1.0 - a_tot))
    resid = abs(z[-1] - z[0])
    z[-1] = z[0]
    return _solution(model, t, z, omega, resid)


def compute_washout_general(model: ChemostatModel, t_max: float, h=None,
                            decay=BURN_IN_DECAY) -> WashoutSolution:
    """Approximate ``z*`` on ``[t_burn, t_max]`` by forgetting the initial value.

    Starts from ``z(0) = upper(s0)`` and discards ``[0, t_burn]``, where
    ``t_burn`` is the first grid time with ``exp(-int_0^t D) < decay``.
    """
    if h is None:
        scale = model.omega or 1.0
        if model.tau > 0:
            scale = min(scale, model.tau)
        h = scale / PHI_GRID
    t = _stage_grid(model, 0.0, float(t_max), h)
    A, B = _affine_steps(model, t)
    z = _propagate(A, B, model.s0.upper)
    hh = np.diff(t)
    D = model.D
    e = np.concatenate(([0.0], np.cumsum(hh / 6 * (np.asarray(D.evaluate(t[:-1], "right"))
                                                    + 4 * np.asarray(D.evaluate(t[:-1] + hh / 2))
                                                    + np.asarray(D.evaluate(t[1:], "left"))))))
    idx = np.nonzero(e >= -math.log(decay))[0]
    if len(idx) == 0 or len(t) - idx[0] < 3:
        raise HorizonTooShort(f"int_0^{t_max} D = {e[-1]:.6g} < {-math.log(decay):.6g}; "
                              "extend the horizon")
    k = idx[0]
    return _solution(model, t[k:], z[k:], None, math.nan, float(t[k]))


@dataclass(eq=False)
class PhiFunction:
    """Periodic ``phi`` over one period, plus convergence diagnostics.

    ``t`` covers one period with nodes ``t[0] .. t[0] + omega``; ``mids``
    holds the values at interval midpoints. ``lambda_`` is
    ``<p(z*) phi> - <D>``.
    """

    t: np.ndarray
    values: np.ndarray
    mids: np.ndarray
    d_right: np.ndarray
    d_left: np.ndarray
    period: float
    c_normalized: np.ndarray
    z_star: np.ndarray
    c_growth_exponent: float
    periodicity_residual: float
    identity_residual: float
    lambda_: float
    mean_growth: float
    mean_dilution: float
    iterations: int = 0
    contraction_ratios: tuple = ()
    h: float = 0.0
    _dense: PiecewiseHermite | None = field(default=None, repr=False)

    @property
    def dense(self):
        if self._dense is None:
            self._dense = PiecewiseHermite(self.t, self.values, self.d_right, self.d_left,
                                           self.period)
        return self._dense

    def __call__(self, t):
        out = self.dense(t)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def min(self):
        return float(min(self.values.min(), self.mids.min()))

    @property
    def max(self):
        return float(max(self.values.max(), self.mids.max()))


def _phi_steps(model):
    """Steps per delay for the c-integration and whether the grid also divides the period."""
    tau, omega = model.tau, model.omega
    m0 = max(PHI_GRID, int(math.ceil(PHI_GRID * tau / omega - 1e-9)))
    m, _ = aligned_steps(model, m0)
    k = omega * m / tau
    return m, bool(abs(k - round(k)) < 1e-9 * k)


def constant_phi(p_v: float, tau: float, tol: float = 1e-15) -> float:
    """Root of ``u = exp(-tau u p_v)`` in ``(0, 1]`` by bisection."""
    if tau == 0 or p_v == 0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid - math.exp(-tau * mid * p_v) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _phi_from_traj(traj, j0, count):
    """phi at nodes ``j0 .. j0 + count`` with one-sided derivatives, and midpoint values."""
    m = traj.m
    v, dr, dl = traj.values, traj.d_right, traj.d_left
    a = slice(j0, j0 + count + 1)
    b = slice(j0 + m, j0 + m + count + 1)
    c_a, c_b = v[a, X], v[b, X]
    e_a, e_b = v[a, 2], v[b, 2]
    phi = c_a / c_b * np.exp(e_a - e_b)
    # log-derivative: c'/c (t) - c'/c (t + tau) + D(t) - D(t + tau)
    g_r = dr[a, X] / c_a - dr[b, X] / c_b + dr[a, 2] - dr[b, 2]
    g_l = dl[a, X] / c_a - dl[b, X] / c_b + dl[a, 2] - dl[b, 2]
    h8 = traj.h / 8.0
    mid = lambda col, s: 0.5 * (v[s, col][:-1] + v[s, col][1:]) + h8 * (dr[s, col][:-1] - dl[s, col][1:])  # noqa: E731
    phi_m = mid(X, a) / mid(X, b) * np.exp(mid(2, a) - mid(2, b))
    return phi, phi * g_r, phi * g_l, phi_m


def compute_phi_periodic(model: ChemostatModel, washout: WashoutSolution | None = None, *,
                         c_history=1.0, tol=1e-9, max_periods=5000, n=None) -> PhiFunction:
    """The unique periodic ``phi`` and the threshold quantity ``<p(z*) phi> - <D>``.

    ``c_history`` is a positive constant or a callable giving ``c`` on
    ``[-tau, 0]``. ``n`` overrides the number of steps per delay.
    """
    if washout is None:
        washout = compute_washout_periodic(model)
    omega = model.omega
    if omega is None:
        raise NotPeriodic("compute_phi_periodic needs a periodic model")
    mean_d = signal_average(model.D, omega)
    tau = model.tau
    p = model.p

    if tau == 0:
        t = washout.t
        z = washout.z
        fz = p(z)
        hh = np.diff(t)
        zm = washout.dense(t[:-1] + 0.5 * hh)
        mean_g = float(simpson_cumulative(hh, fz, p(zm))[-1] / omega)
        ones = np.ones_like(t)
        return PhiFunction(t, ones, np.ones(len(t) - 1), np.zeros_like(t), np.zeros_like(t),
                           omega, ones, z, omega * (mean_g - mean_d), 0.0, 0.0,
                           mean_g - mean_d, mean_g, mean_d, 0, (), 0.0)

    if n is None:
        m, commensurate = _phi_steps(model)
    else:
        m = int(n)
        k = omega * m / tau
        commensurate = abs(k - round(k)) < 1e-9 * k
    h = tau / m
    if not omega / h < MAX_NODES:
        raise GridTooLarge(f"delay {tau:g} is too short for period {omega:g}: "
                           f"{omega / h:.3g} nodes per period needed")
    lin = model
    hist = washout.history(c_history, tau, 0.0, m)
    if hist.x.max() <= 0:
        raise ValueError("c history must be positive somewhere")
    n_phase = int(round(omega / h)) if commensurate else PHI_GRID * max(1, int(math.ceil(omega / tau)))
    phase = np.arange(n_phase) * (omega / n_phase)

    def phase_samples(traj, a):
        # phi on [a - tau, a - tau + omega), reordered to phase 0 .. omega
        t = a - tau + np.mod(phase - (a - tau), omega)
        c_t = traj(t, "x")
        c_tt = traj(t + tau, "x")
        return c_t / c_tt * np.exp(traj(t, "E") - traj(t + tau, "E"))

    prev = None
    diffs = []
    growth = math.nan
    a = 0.0
    converged = False
    for it in range(1, max_periods + 1):
        traj = integrate(lin, hist, a + omega, h=h, linearized=True)
        sample = phase_samples(traj, a)
        win = traj.window(a + omega)
        scale = float(win.x.max())
        if not (scale > 0 and math.isfinite(scale)):
            raise NoConvergence("c collapsed or overflowed", it, math.nan)
        growth = math.log(scale / float(hist.x.max()))
        if prev is not None:
            diffs.append(float(np.max(np.abs(sample - prev))))
            if diffs[-1] < tol:
                converged = True
                break
        prev = sample
        hist = win.scaled_biomass(1.0 / scale)
        a += omega
    if not converged:
        ratio = diffs[-1] / diffs[-2] if len(diffs) > 1 and diffs[-2] > 0 else math.nan
        raise NoConvergence(f"phi did not settle within {max_periods} periods", max_periods, ratio)

    # final pass covering [a - tau, a + omega + tau]; phi on one period, identity on [a, a + omega]
    final = integrate(lin, hist, a + omega + tau, h=h, linearized=True)
    ratios = tuple(d1 / d0 for d0, d1 in zip(diffs[:-1], diffs[1:]) if d0 > 0)
    if commensurate:
        count = int(round(omega / h))
        phi, d_r, d_l, phi_m = _phi_from_traj(final, m, count)
        t_nodes = final.t[m:m + count + 1]
        c_nodes = final.values[m:m + count + 1, X]
        tm = t_nodes[:-1] + 0.5 * h
    else:
        count = n_phase
        t_nodes = a + np.arange(count + 1) * (omega / count)
        tm = t_nodes[:-1] + 0.5 * (omega / count)
        c_nodes = final(t_nodes, "x")
        c_next = final(t_nodes + tau, "x")
        phi = c_nodes / c_next * np.exp(final(t_nodes, "E") - final(t_nodes + tau, "E"))
        d_r = d_l = phi * (final(t_nodes, "x", derivative=True) / c_nodes
                           - final(t_nodes + tau, "x", derivative=True) / c_next
                           + final(t_nodes, "E", derivative=True)
                           - final(t_nodes + tau, "E", derivative=True))
        phi_m = (final(tm, "x") / final(tm + tau, "x")
                 * np.exp(final(tm, "E") - final(tm + tau, "E")))
    z_nodes = np.asarray(washout(t_nodes))
    z_mid = np.asarray(washout(tm))
    mean_g = float(simpson_cumulative(np.diff(t_nodes), p(z_nodes) * phi, p(z_mid) * phi_m)[-1]
                   / omega)
    # phi(u) = exp(-int_{u-tau}^u p(z*) phi) checked for u in [a, a + omega]
    identity = compute_psi(final, start=a - tau, check_from=a).identity_residual
    return PhiFunction(t_nodes - a, phi, phi_m, d_r, d_l, omega, c_nodes / c_nodes.max(), z_nodes,
                       growth, float(diffs[-1]), identity, mean_g - mean_d, mean_g, mean_d, it,
                       ratios, h)


@dataclass
class ContractionReport:
    t: np.ndarray
    difference: np.ndarray
    bound: np.ndarray
    M: float
    inf_f: float
    t0: float
    worst_ratio: float
    passed: bool


def lemma_contraction_check(model: ChemostatModel, washout: WashoutSolution, history1, history2,
                            horizon=None, n=None, raise_on_violation=True) -> ContractionReport:
    """Compare two ratio functions built from different ``c`` histories with the explicit bound.

    Each history is a positive constant or a callable of ``t`` on
    ``[-tau, 0]``. The functions are ``c(t) / c(t + tau) exp(-int_t^{t+tau} D)``
    for the two solutions; both satisfy the fixed-point identity from
    ``t0 = tau`` on, and their distance must stay below
    ``3 M sqrt((t - t0) / inf f) (1 - exp(-M tau))^((t - t0) / (2 tau) - 1/2)``
    at every grid point ``t > t0``.
    """
    from .bounds import contraction_bound, proof_constants

    tau = model.tau
    if tau <= 0:
        raise ValueError("the contraction check needs a positive delay")
    omega = model.omega or 1.0
    if horizon is None:
        horizon = 20 * omega
    m = int(n) if n is not None else _phi_steps(model)[0] if model.omega else PHI_GRID
    h = tau / m
    runs = []
    for c in (history1, history2):
        hist = washout.history(c, tau, 0.0, m)
        traj = integrate(model, hist, horizon + tau, h=h, linearized=True)
        runs.append(compute_psi(traj, start=0.0))
    t = runs[0].t_nodes
    k = min(len(t), len(runs[1].t_nodes))
    t = t[:k]
    diff = np.abs(runs[0].nodes[:k] - runs[1].nodes[:k])
    consts = proof_constants(model)
    M = consts["M"]
    inf_f = float(model.p.value(washout.lower))  # p is increasing
    t0 = tau
    sel = t > t0 + 1e-12 * max(1.0, t0)
    bound = contraction_bound(t[sel], t0, M, tau, inf_f)
    ratio = diff[sel] / bound
    worst = float(ratio.max()) if len(ratio) else 0.0
    passed = bool(np.all(diff[sel] <= bound))
    if not passed and raise_on_violation:
        i = int(np.argmax(ratio))
        raise BoundViolated(float(t[sel][i]), float(diff[sel][i]), float(bound[i]))
    return ContractionReport(t[sel], diff[sel], bound, M, inf_f, t0, worst, passed)
