"""The positive periodic solution and its basin behaviour.

The period map sends the state on ``[a - tau, a]`` to the state on
``[a + omega - tau, a + omega]``. For a persistent periodic model it has a
unique positive fixed point that attracts every not-null solution at an
exponential rate, so plain iteration finds it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FitFailed, IdentityViolated, NoConvergence, NotPersistent
from .hermite import simpson_cumulative
from .integrator import E, S, X, Y, Trajectory, compute_psi, integrate, recommended_steps
from .model import ChemostatModel, HistorySegment
from .persistence import PERSISTENT, PersistenceReport, threshold_periodic
from .signals import signal_average

DEFAULT_TOL = 1e-8


def orbit_steps(model: ChemostatModel):
    """Default steps per delay for orbit work: at least 32 per period, dividing the period."""
    return recommended_steps(model)


def _steps_for(model, segment, n):
    if n is not None:
        return n
    if model.tau > 0 and segment.n_intervals >= 8:
        return segment.n_intervals
    return orbit_steps(model)


def poincare_map(model: ChemostatModel, segment: HistorySegment, *, n=None, h=None,
                 trajectory=False):
    """Integrate one period from ``segment`` and return the trailing window.

    The step defaults to the sample spacing of ``segment`` (``tau / n``
    with ``n`` its number of intervals). With ``trajectory=True`` the
    integrated :class:`Trajectory` is returned as well.
    """
    omega = model.omega
    if omega is None:
        raise ValueError("the period map needs a periodic model")
    n = _steps_for(model, segment, n) if h is None else None
    a = segment.anchor_time
    traj = integrate(model, segment, a + omega, h=h, n=n)
    out = traj.window(a + omega)
    return (out, traj) if trajectory else out


def _mpe(iterates):
    """Minimal polynomial extrapolation of a fixed-point sequence (rows are iterates)."""
    U = np.diff(iterates, axis=0).T
    k = U.shape[1] - 1
    c, *_ = np.linalg.lstsq(U[:, :k], -U[:, k], rcond=None)
    c = np.append(c, 1.0)
    total = c.sum()
    if abs(total) < 1e-12:
        return None
    gamma = c / total
    return gamma @ iterates[:-1]


@dataclass(eq=False)
class PeriodicOrbit:
    segment: HistorySegment
    residual: float
    orbit_identity_residual: float
    min_x: float
    attraction_rate: float | None
    iterations: int
    distances: np.ndarray
    trajectory: Trajectory = field(repr=False)
    n: int = 16

    @property
    def period(self):
        return self.trajectory.model.omega

    def one_period(self):
        """Node times and ``(s, x, y, psi)`` over ``[a, a + omega]``."""
        traj = self.trajectory
        a = self.segment.anchor_time
        psi = compute_psi(traj, start=a)
        sel = (traj.t >= a - 1e-9) & (traj.t <= a + self.period + 1e-9 * max(1.0, a))
        t = traj.t[sel]
        psi_vals = np.interp(t, psi.t_nodes, psi.nodes)
        return t, traj.values[sel, S], traj.values[sel, X], traj.values[sel, Y], psi_vals


def _fit_log_rate(d, floor):
    """Least-squares slope of ``log d_k`` over the geometric tail and its R^2."""
    d = np.asarray(d, dtype=float)
    k = np.arange(len(d))
    good = d > floor
    if good.sum() < 5:
        return None, None, 0
    idx = k[good]
    # contiguous run of usable points from the start, minus the initial transient
    end = idx[-1] if np.all(np.diff(idx) == 1) else idx[np.argmax(np.diff(idx) > 1)]
    idx = k[: end + 1][good[: end + 1]]
    idx = idx[len(idx) // 4:]
    if len(idx) < 5:
        return None, None, len(idx)
    y = np.log(d[idx])
    A = np.vstack([idx, np.ones_like(idx)]).T.astype(float)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2, len(idx)


def default_segment(model: ChemostatModel, n=None):
    n = orbit_steps(model) if n is None else n
    s = 0.5 * model.s_upper
    return HistorySegment.constant(s, s, model.tau, 0.0, n)


def find_periodic_orbit(model: ChemostatModel, initial: HistorySegment | None = None,
                        tol=DEFAULT_TOL, max_periods=None, *, n=None, accelerate=False,
                        report: PersistenceReport | None = None, check=True) -> PeriodicOrbit:
    """Iterate the period map until consecutive segments agree to ``tol``.

    Iteration continues past ``tol`` until the geometric tail estimate
    ``d_k rho / (1 - rho)`` of the remaining distance to the fixed point is
    below ``tol / 10`` as well. ``max_periods`` defaults to a budget that
    grows like ``1 / lambda``. ``accelerate`` switches on minimal
    polynomial extrapolation every 10 periods.
    """
    if report is None:
        report = threshold_periodic(model)
    if report.classification != PERSISTENT:
        raise NotPersistent(f"model classified {report.classification} "
                            f"(lambda={report.lambda_:.6g}); no positive periodic orbit")
    omega = model.omega
    if initial is None:
        initial = default_segment(model, n)
    if not initial.is_not_null():
        raise ValueError("initial segment is null")
    n = orbit_steps(model) if n is None else int(n)
    seg = initial.resample(n) if model.tau > 0 else initial
    seg = seg.moved_to(0.0)
    if max_periods is None:
        max_periods = int(min(100_000, max(2000, math.ceil(50.0 / (report.lambda_ * omega)))))
    dists = []
    history = [] if accelerate else None
    converged = False
    for it in range(1, max_periods + 1):
        nxt = poincare_map(model, seg, n=n).moved_to(0.0)
        d = seg.distance(nxt)
        dists.append(d)
        seg = nxt
        if d < tol:
            rho = min(d / dists[-2], 0.999) if len(dists) > 1 and dists[-2] > 0 else 0.5
            if d * rho / (1 - rho) < 0.1 * tol or d < 1e-14 * max(1.0, seg.norm()):
                converged = True
                break
        if accelerate:
            history.append(np.concatenate([seg.s, seg.x]))
            if len(history) == 10:
                guess = _mpe(np.array(history))
                history.clear()
                if guess is not None and np.all(guess >= 0):
                    k = len(seg.s)
                    cand = HistorySegment(0.0, model.tau, guess[:k], guess[k:])
                    if cand.is_not_null():
                        seg = cand
    if not converged:
        ratio = dists[-1] / dists[-2] if len(dists) > 1 and dists[-2] > 0 else math.nan
        raise NoConvergence(f"period map not settled after {max_periods} periods "
                            f"(last distance {dists[-1]:.3g}); raise max_periods", max_periods, ratio)
    # one more application re-verifies the fixed point and gives the orbit trajectory
    traj = integrate(model, seg, omega + model.tau, n=n)
    residual = seg.distance(traj.window(omega).moved_to(0.0))
    rate, r2, _ = _fit_log_rate(dists, 1e-13 * max(1.0, seg.norm()))
    orbit = PeriodicOrbit(seg, residual, math.nan, math.nan, rate, it, np.array(dists), traj, n)
    sel = (traj.t >= -1e-12) & (traj.t <= omega + 1e-9)
    orbit.min_x = float(traj.values[sel, X].min())
    if check:
        orbit.orbit_identity_residual = verify_orbit(model, orbit, raise_on_violation=False)[
            "orbit_identity_residual"]
    return orbit


def verify_orbit(model: ChemostatModel, orbit: PeriodicOrbit, *, tol_identity=1e-6,
                 tol_mean=1e-7, raise_on_violation=True) -> dict:
    """Recompute the orbit identities.

    * ``x(t) = (x + y)(t - tau) exp(E(t - tau) - E(t))`` over one period
      after the first delay,
    * ``<p(s) psi> - <D>`` over one period, which vanishes on a periodic
      positive solution,
    * for constant environments, ``y = x (exp(d tau) - 1)``.
    """
    tau, omega = model.tau, model.omega
    a = orbit.segment.anchor_time
    traj = integrate(model, orbit.segment, a + omega + tau, n=orbit.n) if tau > 0 else \
        integrate(model, orbit.segment, a + omega, n=orbit.n)
    out = {}
    if tau == 0:
        out["orbit_identity_residual"] = 0.0
        s = traj.values[:, S]
        p = model.p
        h = traj.h
        mid = 0.5 * (s[:-1] + s[1:]) + h * (traj.d_right[:-1, S] - traj.d_left[1:, S]) / 8
        k = int(round(omega / h))
        mean_g = float(simpson_cumulative(h, p(s[:k + 1]), p(mid[:k]))[-1] / omega)
    else:
        m = traj.m
        j = np.arange(2 * m, len(traj.t))
        j = j[traj.t[j] <= a + tau + omega + 1e-9]
        x, y, e = traj.values[:, X], traj.values[:, Y], traj.values[:, E]
        pred = (x[j - m] + y[j - m]) * np.exp(e[j - m] - e[j])
        out["orbit_identity_residual"] = float(np.max(np.abs(x[j] - pred)))
        psi = compute_psi(traj, start=a)
        k = int(round(omega / traj.h))
        s_n = traj.values[m:m + k + 1, S]
        s_m = 0.5 * (s_n[:-1] + s_n[1:]) + traj.h * (traj.d_right[m:m + k, S]
                                                      - traj.d_left[m + 1:m + k + 1, S]) / 8
        p = model.p
        mean_g = float(simpson_cumulative(traj.h, p(s_n) * psi.nodes[:k + 1],
                                          p(s_m) * psi.mids[:k])[-1] / omega)
        out["psi_identity_residual"] = psi.identity_residual
    out["mean_exponent"] = mean_g - signal_average(model.D, omega)
    if model.is_autonomous and tau > 0:
        d = model.D.value
        xs, ys = orbit.segment.x[-1], float(traj(a, "y"))
        out["equilibrium_y_residual"] = abs(ys - xs * (math.exp(d * tau) - 1))
    breaches = {}
    if out["orbit_identity_residual"] >= tol_identity:
        breaches["orbit_identity"] = out["orbit_identity_residual"]
    if abs(out["mean_exponent"]) >= tol_mean:
        breaches["mean_exponent"] = out["mean_exponent"]
    out["passed"] = not breaches
    if breaches and raise_on_violation:
        raise IdentityViolated(", ".join(f"{k}={v:.3g}" for k, v in breaches.items()))
    return out


def constant_equilibrium(model: ChemostatModel):
    """``(s*, x*, y*)`` of a constant environment, or None when washout is the only equilibrium.

    ``p(s*) = d exp(d tau)``, ``x* = (v - s*) exp(-d tau)``,
    ``y* = x* (exp(d tau) - 1)``.
    """
    if not model.is_autonomous:
        raise ValueError("closed-form equilibrium needs constant D and s0")
    d, v, tau = model.D.value, model.s0.value, model.tau
    target = d * math.exp(d * tau)
    p = model.p
    if not target < p.value(v):
        return None
    if hasattr(p, "inverse"):
        s = p.inverse(target)
    else:
        from scipy.optimize import brentq
        s = brentq(lambda u: p.value(u) - target, 0.0, v, xtol=1e-15)
    x = (v - s) * math.exp(-d * tau)
    return s, x, x * (math.exp(d * tau) - 1)


def equilibrium_decay_root(model: ChemostatModel) -> float:
    """Dominant real decay rate of the linearisation at the constant equilibrium.

    Perturbations of ``s + x + y`` decay like ``exp(-d t)``; the remaining
    mode has rate ``mu`` with ``mu + d + a = d exp(-mu tau)``, ``a = p'(s*) x*``.
    The slower of the two governs the approach.
    """
    from scipy.optimize import brentq

    eq = constant_equilibrium(model)
    if eq is None:
        raise NotPersistent("no positive equilibrium")
    s, x, _ = eq
    d, tau = model.D.value, model.tau
    a = model.p.slope(s) * x
    g = lambda mu: mu + d + a - d * math.exp(-mu * tau)  # noqa: E731
    # g is increasing with g(0) = a > 0 and g(-d - a) < 0
    mu = brentq(g, -d - a, 0.0, xtol=1e-15)
    return max(-d, mu)


@dataclass
class RateReport:
    amplitudes: tuple
    slopes: tuple
    r2: tuple
    ratio_rates: tuple
    distances: tuple
    degenerate: bool = False
    j_epsilon: float | None = None
    measured_m: float | None = None

    @property
    def agreement(self):
        s = [v for v in self.slopes if v is not None]
        if len(s) < 2:
            return 0.0
        return float(max(s) - min(s)) / float(max(abs(v) for v in s))


def _perturb(segment: HistorySegment, amplitude: float, seed=1):
    rng = np.random.default_rng(seed)
    k = len(segment.s)
    t = np.linspace(0.0, 1.0, k)
    ph = rng.uniform(0, 2 * np.pi, 2)
    ds = amplitude * np.cos(2 * np.pi * t + ph[0])
    dx = amplitude * np.sin(2 * np.pi * t + ph[1])
    s = np.maximum(segment.s + ds * max(segment.s.max(), 1e-3), 0.0)
    x = np.maximum(segment.x + dx * max(segment.x.max(), 1e-3), 0.0)
    return HistorySegment(segment.anchor_time, segment.tau, s, x)


def _largest_epsilon(m_measured, ratio_max, tau, mean_d):
    """Largest ``eps <= <D>/2`` with ``-m + ratio_max (exp(tau eps) - 1) + 3 eps / 2 <= 0``."""
    J = lambda e: -m_measured + ratio_max * math.expm1(tau * e) + 1.5 * e  # noqa: E731
    hi = 0.5 * mean_d
    if J(hi) <= 0:
        return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if J(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return lo


def attraction_rate(model: ChemostatModel, orbit: PeriodicOrbit, perturbations=(1e-3, 1e-5), *,
                    periods=None, r2_min=0.99, seed=1) -> RateReport:
    """Per-period decay exponent of ``sup |perturbed - unperturbed|`` over periods.

    For each amplitude the perturbed segment and the orbit segment are
    integrated side by side on the same grid; ``d_k`` is the window distance
    after ``k`` periods. The slope of ``log d_k`` is fitted over the
    geometric tail (above the rounding floor, after the first quarter).
    ``ratio_rates`` is the independent estimate ``median log(d_{k+1}/d_k)``.
    """
    omega, n = model.omega, orbit.n
    seg = orbit.segment
    if periods is None:
        rate = orbit.attraction_rate if orbit.attraction_rate and orbit.attraction_rate < 0 else -0.1
        periods = int(min(4000, max(40, math.ceil(math.log(1e-3 / 1e-12) / -rate) + 10)))
    slopes, r2s, ratios, all_d = [], [], [], []
    degenerate = True
    # the reference run is shared by every amplitude
    ref = integrate(model, seg, seg.anchor_time + periods * omega, n=n)
    floor = 1e-12 * max(1.0, seg.norm())
    for amp in perturbations:
        if amp == 0:
            slopes.append(None)
            r2s.append(None)
            ratios.append(None)
            all_d.append(np.zeros(periods))
            continue
        pert = _perturb(seg, amp, seed)
        run = integrate(model, pert, seg.anchor_time + periods * omega, n=n)
        d = np.array([ref.window(seg.anchor_time + k * omega).distance(
            run.window(seg.anchor_time + k * omega)) for k in range(1, periods + 1)])
        all_d.append(d)
        if d.max() <= floor:
            slopes.append(None)
            r2s.append(None)
            ratios.append(None)
            continue
        degenerate = False
        slope, r2, count = _fit_log_rate(d, 1e3 * floor)
        if slope is None or r2 < r2_min or slope >= 0:
            raise FitFailed(f"amplitude {amp:g}: decay not geometric (slope={slope}, R2={r2}, "
                            f"points={count}); extend the horizon")
        slopes.append(slope)
        r2s.append(r2)
        usable = d[d > 1e3 * floor]
        q = np.log(usable[1:] / usable[:-1])
        ratios.append(float(np.median(q[len(q) // 4:])) if len(q) else None)
    x_o = orbit.trajectory.values[:, X]
    s_o = orbit.trajectory.values[:, S]
    y_o = orbit.trajectory.values[:, Y]
    j = orbit.trajectory.t >= seg.anchor_time
    m_measured = float(np.min(x_o[j] * model.p.derivative(s_o[j])))
    ratio_max = float(np.max(x_o[j] * model.p(s_o[j]) / (x_o[j] + y_o[j])))
    eps = _largest_epsilon(m_measured, ratio_max, model.tau, signal_average(model.D, omega))
    return RateReport(tuple(perturbations), tuple(slopes), tuple(r2s), tuple(ratios),
                      tuple(all_d), degenerate, eps, m_measured)
