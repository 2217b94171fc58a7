"""Persistence versus extinction of the biomass.

In the periodic case the sign of ``lambda = <p(z*) phi> - <D>`` decides the
fate. For general environments the criterion is a window inequality on
``int p(z*(t - tau)) phi(t - tau) dt`` versus ``int (D + eta) dt``, which
:func:`window_condition_general` checks on a lattice of windows. The
ensemble probe measures the common floor that persistent runs settle above.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import proof_constants  # noqa: F401  (part of the public surface)
from .errors import HorizonTooShort, NotPersistent, ProbeFailed
from .hermite import simpson_cumulative
from .integrator import X, compute_psi, integrate
from .model import ChemostatModel, HistorySegment
from .washout import (WashoutSolution, compute_phi_periodic, compute_washout_general,
                      compute_washout_periodic)

DEFAULT_BAND = 1e-7

PERSISTENT = "persistent"
EXTINCT = "extinct"
INDETERMINATE = "indeterminate"


def classify(lam: float, band: float) -> str:
    if lam > band:
        return PERSISTENT
    if lam < -band:
        return EXTINCT
    return INDETERMINATE


@dataclass
class PersistenceReport:
    lambda_: float
    classification: str
    tolerance_band: float
    diagnostics: dict = field(default_factory=dict)
    empirical_delta: float | None = None
    window_check: "WindowReport | None" = None
    flags: tuple = ()

    def as_dict(self):
        out = {"lambda": self.lambda_, "classification": self.classification,
               "tolerance_band": self.tolerance_band}
        out.update(self.diagnostics)
        if self.empirical_delta is not None:
            out["empirical_delta"] = self.empirical_delta
        if self.flags:
            out["flags"] = ",".join(self.flags)
        return out


def threshold_periodic(model: ChemostatModel, tolerance_band=None, *, n=None, tol_phi=1e-9,
                       max_periods=5000, washout: WashoutSolution | None = None,
                       phi=None) -> PersistenceReport:
    """Classify a periodic model by the sign of ``<p(z*) phi> - <D>``.

    Without an explicit ``tolerance_band`` the indeterminate band is
    ``1e-7`` plus the sum of the measured residuals of ``z*`` and ``phi``.
    """
    if washout is None:
        washout = compute_washout_periodic(model)
    if phi is None:
        phi = compute_phi_periodic(model, washout, tol=tol_phi, max_periods=max_periods, n=n)
    residuals = {
        "washout_periodicity_residual": washout.periodicity_residual,
        "washout_equation_residual": washout.equation_residual,
        "phi_periodicity_residual": phi.periodicity_residual,
        "phi_identity_residual": phi.identity_residual,
    }
    if tolerance_band is None:
        tolerance_band = DEFAULT_BAND + sum(residuals.values())
    lam = phi.lambda_
    diagnostics = {
        "mean_growth": phi.mean_growth,
        "mean_dilution": phi.mean_dilution,
        "c_growth_exponent": phi.c_growth_exponent,
        "phi_min": phi.min,
        "phi_max": phi.max,
        "phi_iterations": phi.iterations,
        "phi_step": phi.h,
        "washout_nodes": len(washout.t),
        "z_star_min": washout.lower,
        "z_star_max": washout.upper,
        **residuals,
    }
    return PersistenceReport(lam, classify(lam, tolerance_band), float(tolerance_band),
                             diagnostics, flags=model.flags)


@dataclass
class WindowReport:
    passed: bool
    worst_margin: float
    worst_window: tuple
    eta: float
    T: float
    n_windows: int
    t_start: float
    lengths: tuple


def _chunked_phi(model, washout, a, t_end, h):
    """Nodes ``u``, cumulative ``int p(s) phi`` and ``E`` from a long linear run.

    ``phi`` is assembled over ``[a - tau, t_end - tau]`` from chunks whose
    ``c`` is renormalised, so long horizons neither overflow nor underflow.
    """
    tau = model.tau
    rate = model.p.value(model.s_upper) + model.D_upper
    chunk = max(2 * tau, min(50.0, 300.0 / max(rate, 1e-12)))
    chunk = h * max(1, round(chunk / h))
    m = int(round(tau / h))
    hist = washout.history(1.0, tau, a, m)
    t_parts, f_parts, e_parts = [], [], []
    f_off = e_off = 0.0
    start = a
    while start < t_end - tau - 1e-9 * max(1.0, t_end):
        stop = min(start + chunk, t_end)
        stop = start + h * max(m + 1, round((stop - start) / h))
        traj = integrate(model, hist, stop, h=h, linearized=True)
        psi = compute_psi(traj, start=start - tau)
        s_nodes = traj.values[:len(psi.nodes), 0]
        s_mid = 0.5 * (s_nodes[:-1] + s_nodes[1:]) + h * (traj.d_right[:len(psi.nodes) - 1, 0]
                                                          - traj.d_left[1:len(psi.nodes), 0]) / 8
        p = model.p
        F = simpson_cumulative(h, p(s_nodes) * psi.nodes, p(s_mid) * psi.mids) + f_off
        # E at u + tau, aligned with the psi nodes
        E = traj.values[m:m + len(psi.nodes), 2] - traj.values[m, 2] + e_off
        keep = slice(0, None) if not t_parts else slice(1, None)
        t_parts.append(psi.t_nodes[keep])
        f_parts.append(F[keep])
        e_parts.append(E[keep])
        f_off, e_off = F[-1], E[-1]
        win = traj.window(traj.t[-1])
        hist = win.scaled_biomass(1.0 / float(win.x.max()))
        start = float(win.anchor_time)
    return np.concatenate(t_parts), np.concatenate(f_parts), np.concatenate(e_parts)


def window_condition_general(model: ChemostatModel, eta: float, T: float, horizon: float, *,
                             h=None, washout: WashoutSolution | None = None,
                             max_windows=20000) -> WindowReport:
    """Check ``int_{t1}^{t2} p(z*(t-tau)) phi(t-tau) dt > int_{t1}^{t2} (D + eta) dt`` on a lattice.

    ``t1`` runs over ``T0 + k T / 4`` and ``t2 - t1`` over ``T, 2T, 4T, ...``
    as long as ``t2 <= horizon``. ``T0`` is the larger of ``T`` and the end of
    the washout burn-in plus one delay. ``phi`` comes from a linear run
    started at ``c = 1``. The worst margin is reported.
    """
    if not (eta >= 0 and T > 0):
        raise ValueError("need eta >= 0 and T > 0")
    tau = model.tau
    if washout is None:
        washout = compute_washout_general(model, horizon)
    a = washout.burn_in + tau
    t0 = max(T, a + tau)
    if t0 + T > horizon:
        raise HorizonTooShort(f"horizon {horizon} leaves no window of length {T} after t={t0}")
    if h is None:
        scale = min(tau, model.omega or 1.0) if tau > 0 else (model.omega or 1.0)
        h = scale / 64
    if tau > 0:
        m = max(1, int(math.ceil(tau / h - 1e-9)))
        h = tau / m
        # t + tau for u on the grid; F(u) pairs with E(u + tau)
        u, F, E = _chunked_phi(model, washout, a, horizon, h)
        t_grid = u + tau
    else:
        traj = integrate(model, washout.history(1.0, 0.0, a), horizon, h=h, linearized=True)
        t_grid = traj.t
        p = model.p
        s_nodes = traj.values[:, 0]
        s_mid = 0.5 * (s_nodes[:-1] + s_nodes[1:]) + h * (traj.d_right[:-1, 0]
                                                          - traj.d_left[1:, 0]) / 8
        F = simpson_cumulative(h, p(s_nodes), p(s_mid))
        E = traj.values[:, 2]

    def index(t):
        return int(round((t - t_grid[0]) / h))

    lengths = []
    L = T
    while t0 + L <= t_grid[-1] + 1e-9:
        lengths.append(L)
        L *= 2
    worst = (math.inf, None)
    count = 0
    k = 0
    while True:
        t1 = t0 + k * T / 4
        if t1 + T > t_grid[-1] + 1e-9 or count >= max_windows:
            break
        i1 = index(t1)
        for L in lengths:
            i2 = index(t1 + L)
            if i2 >= len(t_grid):
                break
            span = t_grid[i2] - t_grid[i1]
            margin = (F[i2] - F[i1]) - (E[i2] - E[i1]) - eta * span
            count += 1
            if margin < worst[0]:
                worst = (float(margin), (float(t_grid[i1]), float(t_grid[i2])))
        k += 1
    return WindowReport(worst[0] > 0, worst[0], worst[1], float(eta), float(T), count, float(t0),
                        tuple(lengths))


@dataclass
class ProbeReport:
    empirical_delta: float
    empirical_delta_doubled: float
    member_floors: np.ndarray
    member_floors_doubled: np.ndarray
    spread: float
    drift: float
    horizon: float

    @property
    def stable(self):
        return self.drift < 0.05


def default_ensemble(model: ChemostatModel, size=16, seed=0, x_span=(1e-6, 1.0), n=16):
    """Not-null histories with initial biomass log-spaced over ``x_span``."""
    rng = np.random.default_rng(seed)
    tau = model.tau
    levels = np.geomspace(x_span[0], x_span[1], size)
    out = []
    for x0 in levels:
        s_level = rng.uniform(0.1, 1.5) * model.s_upper
        if tau == 0:
            out.append(HistorySegment(0.0, 0.0, np.array([s_level]), np.array([x0])))
            continue
        t = np.linspace(-tau, 0.0, n + 1)
        k, ph = rng.integers(1, 4), rng.uniform(0, 2 * np.pi)
        wave = 1 + 0.5 * np.sin(2 * np.pi * k * t / tau + ph)
        out.append(HistorySegment(0.0, tau, s_level * wave, x0 * wave[::-1]))
    return out


def _member_floor(args):
    model, hist, horizon, h, n = args
    traj = integrate(model, hist, 2 * horizon, h=h, n=n)
    x = traj.values[:, X]
    t = traj.t
    f1 = float(x[(t >= 0.75 * horizon) & (t <= horizon)].min())
    f2 = float(x[t >= 1.5 * horizon].min())
    return f1, f2, traj.extinct_numerically


def worker_count(workers=None):
    if workers is None:
        workers = int(os.environ.get("CHEMOSTAT_DDE_WORKERS", "1") or 1)
    return max(1, int(workers))


def uniform_persistence_probe(model: ChemostatModel, histories=None, horizon=None, *, h=None,
                              n=None, workers=None, require_persistent=True,
                              report: PersistenceReport | None = None,
                              max_doublings=3) -> ProbeReport:
    """Integrate every ensemble member and report the common biomass floor.

    The floor of a member is the minimum of ``x`` over the last quarter of
    the horizon; ``empirical_delta`` is the smallest floor. Each member is
    run to twice the horizon so the same statistic at ``2 * horizon`` shows
    whether it has settled; while it has not (drift or spread above 5%),
    the horizon is doubled, at most ``max_doublings`` times.
    """
    if require_persistent:
        if report is None and model.is_periodic:
            report = threshold_periodic(model)
        if report is not None and report.classification != PERSISTENT:
            raise NotPersistent(f"model classified {report.classification} "
                                f"(lambda={report.lambda_:.6g}); the probe needs persistence")
    if histories is None:
        histories = default_ensemble(model)
    for i, hist in enumerate(histories):
        if not hist.is_not_null():
            raise ValueError(f"history {i} is null")
    if horizon is None:
        horizon = 200.0 * (model.omega or 1.0)
    workers = worker_count(workers)
    for attempt in range(max_doublings + 1):
        jobs = [(model, hist, float(horizon), h, n) for hist in histories]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_member_floor, jobs))
        else:
            results = [_member_floor(j) for j in jobs]
        floors = np.array([r[0] for r in results])
        floors2 = np.array([r[1] for r in results])
        settled = (floors.min() > 0 and abs(floors2.min() - floors.min()) < 0.05 * floors2.min()
                   and floors2.max() - floors2.min() < 0.05 * floors2.max())
        if settled or attempt == max_doublings:
            break
        horizon *= 2
    for i, (f1, f2, extinct) in enumerate(results):
        if not (f1 > 0 and f2 > 0) or extinct:
            traj = integrate(model, histories[i], 2 * horizon, h=h, n=n)
            raise ProbeFailed(i, f"biomass floor {min(f1, f2)!r} is not positive", traj)
    delta, delta2 = float(floors.min()), float(floors2.min())
    spread = float((floors.max() - floors.min()) / floors.max())
    drift = abs(delta2 - delta) / delta2
    return ProbeReport(delta, delta2, floors, floors2, spread, float(drift), float(horizon))


@dataclass
class Fate:
    final_x: float
    log_slope: float | None
    x_floor: float
    extinct_numerically: bool


def simulated_fate(model: ChemostatModel, history: HistorySegment, horizon: float, *, h=None,
                   n=None, tail_periods=10) -> Fate:
    """Long-run outcome of one solution.

    ``log_slope`` is the average growth rate of ``log x`` over the last
    ``tail_periods`` whole periods (None once ``x`` has underflowed there).
    """
    traj = integrate(model, history, horizon, h=h, n=n)
    t, x = traj.t, traj.values[:, X]
    omega = model.omega or 1.0
    t_end = float(horizon)
    span = min(tail_periods * omega, 0.5 * (t_end - history.anchor_time))
    span = omega * max(1, math.floor(span / omega)) if span >= omega else span
    x1 = float(traj(t_end, "x"))
    x0 = float(traj(t_end - span, "x"))
    slope = math.log(x1 / x0) / span if x0 > 0 and x1 > 0 else None
    tail = x[t >= 0.75 * t_end]
    return Fate(x1, slope, float(tail.min()), traj.extinct_numerically)
