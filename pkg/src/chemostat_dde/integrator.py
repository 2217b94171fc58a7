"""Method-of-steps RK4 solver for the delayed chemostat.

The step ``h`` divides the delay, so every delayed stage value ``u(t - tau)``
falls on a node or an interval midpoint of an already finished step. Nodes
are read directly, midpoints from the cubic Hermite dense output built on
one-sided node derivatives. Besides ``(s, x)`` the state carries

* ``E(t) = int_{anchor}^t D`` -- cumulative dilution (``E(anchor) = 0``),
* ``y(t)`` -- substrate absorbed during ``[t - tau, t]`` and still in the vessel,
* ``z(t)`` -- the washout equation ``z' = D (s0 - z)``, optional.

With ``linearized=True`` the consumption term is dropped from the ``s``
equation; ``s`` then solves the washout equation and ``x`` the linear delay
equation obtained at the biomass-free state. That variant drives the
washout analysis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUp, GridTooLarge, OutOfRange, StepNotDividingDelay, ZeroBiomass
from .hermite import PiecewiseHermite, simpson_cumulative
from .model import ChemostatModel, HistorySegment

DEFAULT_STEPS_PER_DELAY = 16
DEFAULT_STEPS_PER_PERIOD = 256
UNDERFLOW = 1e-300
BLOWUP = 1e12
NEGATIVE_FLOOR = -1e-12
MAX_NODES = 1 << 23

S, X, E, Y, Z = range(5)
CHANNELS = ("s", "x", "E", "y", "z")


def _grid_targets(model: ChemostatModel):
    """Times in ``(0, omega]`` that an aligned step grid must hit: jumps of ``D``, ``s0`` and the period."""
    omega = model.omega
    if omega is None:
        return np.empty(0)
    jumps = np.concatenate((model.D.breakpoints(0.0, omega), model.s0.breakpoints(0.0, omega)))
    return np.unique(np.append(jumps[jumps > 0], omega))


def _hits(h, targets):
    k = targets / h
    return bool(np.all(np.abs(k - np.round(k)) < 1e-9 * np.maximum(k, 1.0)))


def aligned_steps(model: ChemostatModel, base: int, span: int = 4):
    """Smallest ``n`` in ``[base, span * base]`` whose step lands on every jump and on the period.

    ``n`` counts steps per delay (per period when ``tau = 0``). Returns
    ``(n, aligned)``. When no such ``n`` exists, steps that at least divide
    the period are preferred; otherwise ``(base, False)``. Jumps between
    grid nodes cost the scheme its order (the error becomes O(h)), which
    is why every default step goes through here.
    """
    targets = _grid_targets(model)
    if targets.size == 0:
        return base, True
    width = model.tau if model.tau > 0 else model.omega
    period_only = None
    for n in range(base, span * base + 1):
        h = width / n
        if _hits(h, targets):
            return n, True
        if period_only is None and _hits(h, targets[-1:]):
            period_only = n
    return (period_only if period_only is not None else base), False


def resolve_step(model: ChemostatModel, h=None, n=None):
    """Return ``(h, m)`` where ``m = tau / h`` is the number of steps per delay.

    For ``tau > 0`` either ``n`` (steps per delay) or an ``h`` dividing the
    delay is accepted. Without delay, ``n`` counts steps per period. The
    default is the smallest count at or above 16 per delay (256 per period
    without delay) that puts every jump of ``D`` and ``s0`` on the grid.
    """
    tau = model.tau
    if tau > 0:
        if h is None:
            n = aligned_steps(model, DEFAULT_STEPS_PER_DELAY)[0] if n is None else int(n)
            if n < 1:
                raise StepNotDividingDelay(f"steps per delay must be >= 1, got {n}")
            return tau / n, n
        m = int(round(tau / h))
        if m < 1 or abs(m * h - tau) > 1e-9 * tau:
            raise StepNotDividingDelay(f"h={h!r} does not divide tau={tau!r}")
        return tau / m, m
    if h is None:
        omega = model.omega if model.omega is not None else 1.0
        n = aligned_steps(model, DEFAULT_STEPS_PER_PERIOD)[0] if n is None else int(n)
        h = omega / n
    if not h > 0:
        raise ValueError("step must be positive")
    return float(h), 0


def recommended_steps(model: ChemostatModel, per_period=32, minimum=DEFAULT_STEPS_PER_DELAY,
                      max_hD=0.05):
    """Steps per delay giving at least ``per_period`` steps per period, aligned with the period.

    Starts from ``max(minimum, per_period tau / omega)``, raised further so
    that ``h * max D <= max_hD``, and defers to :func:`aligned_steps`, so
    jumps of the inputs also land on nodes when possible. Without delay
    ``n`` counts steps per period and starts from at least 256.
    """
    tau, omega = model.tau, model.omega
    if tau == 0:
        base = max(DEFAULT_STEPS_PER_PERIOD, int(math.ceil(omega * model.D_upper / max_hD - 1e-9)))
        return aligned_steps(model, base)[0]
    base = max(minimum, int(math.ceil(tau * model.D_upper / max_hD - 1e-9)))
    if omega is None:
        return base
    base = max(base, int(math.ceil(per_period * tau / omega - 1e-9)))
    return aligned_steps(model, base)[0]


@dataclass(eq=False)
class Trajectory:
    """Dense solution on ``[anchor - tau, t_end]``.

    ``values[:, k]`` holds channel ``CHANNELS[k]`` at the nodes ``t``; the
    first ``m`` nodes are the initial history (where ``y`` is undefined and
    stored as NaN). ``t`` may overshoot ``t_end`` by less than one step.
    """

    model: ChemostatModel
    h: float
    m: int
    anchor: float
    t_end: float
    t: np.ndarray
    values: np.ndarray
    d_right: np.ndarray
    d_left: np.ndarray
    clamp_count: int = 0
    extinct_numerically: bool = False
    linearized: bool = False
    has_z: bool = False
    _dense: PiecewiseHermite | None = field(default=None, repr=False)

    @property
    def tau(self):
        return self.model.tau

    @property
    def dense(self) -> PiecewiseHermite:
        if self._dense is None:
            self._dense = PiecewiseHermite(self.t, self.values, self.d_right, self.d_left)
        return self._dense

    def channel(self, name):
        return self.values[:, CHANNELS.index(name)]

    s = property(lambda self: self.values[:, S])
    x = property(lambda self: self.values[:, X])
    E = property(lambda self: self.values[:, E])
    y = property(lambda self: self.values[:, Y])
    z = property(lambda self: self.values[:, Z] if self.has_z else None)

    @property
    def solution_slice(self):
        """Index slice of the nodes at or after the anchor."""
        return slice(self.m, None)

    def __call__(self, t, name=None, derivative=False):
        """Dense evaluation; all channels, or the one called ``name``."""
        t = np.asarray(t, dtype=float)
        lo = self.t[0] - 1e-9 * max(1.0, abs(self.t[0]))
        hi = self.t[-1] + 1e-9 * max(1.0, abs(self.t[-1]))
        if np.any(t < lo) or np.any(t > hi):
            raise OutOfRange(f"evaluation outside [{self.t[0]}, {self.t[-1]}]")
        out = self.dense(t, derivative=derivative)
        return out if name is None else out[..., CHANNELS.index(name)]

    def node_index(self, t):
        """Index of the node at time ``t``, or None when ``t`` is off-grid."""
        k = (t - self.t[0]) / self.h
        j = int(round(k))
        if abs(k - j) < 1e-7 and 0 <= j < len(self.t):
            return j
        return None

    def window(self, t_anchor) -> HistorySegment:
        """The state ``(s, x)`` on ``[t_anchor - tau, t_anchor]`` as a history segment."""
        if self.tau == 0:
            s, x = self(t_anchor, "s"), self(t_anchor, "x")
            return HistorySegment(float(t_anchor), 0.0, np.array([max(s, 0.0)]),
                                  np.array([max(x, 0.0)]))
        j = self.node_index(t_anchor)
        if j is not None and j >= self.m:
            sl = slice(j - self.m, j + 1)
            return HistorySegment(
                float(self.t[j]), self.tau, self.values[sl, S].copy(), self.values[sl, X].copy(),
                self.d_right[sl, S].copy(), self.d_right[sl, X].copy(),
                self.d_left[sl, S].copy(), self.d_left[sl, X].copy())
        tw = np.linspace(t_anchor - self.tau, t_anchor, self.m + 1)
        vals = self(tw)
        ders = self(tw, derivative=True)
        return HistorySegment(float(t_anchor), self.tau, np.maximum(vals[:, S], 0.0),
                              np.maximum(vals[:, X], 0.0), ders[:, S], ders[:, X])

    def final_state(self):
        return {k: float(v) for k, v in zip(CHANNELS, self(self.t_end))}


def _history_dilution(model, a, h, m):
    """Cumulative dilution on the history nodes (zero at the anchor) and one-sided D there."""
    th = a - model.tau + h * np.arange(m + 1)
    if m == 0:
        d = float(model.D.evaluate(a, "right"))
        return np.zeros(1), np.array([d]), np.array([d])
    left = th[:-1]
    inc = h / 6.0 * (np.asarray(model.D.evaluate(left, "right"))
                     + 4.0 * np.asarray(model.D.evaluate(left + 0.5 * h))
                     + np.asarray(model.D.evaluate(left + h, "left")))
    e = np.concatenate(([0.0], np.cumsum(inc)))
    e -= e[-1]
    return e, np.asarray(model.D.evaluate(th, "right")), np.asarray(model.D.evaluate(th, "left"))


def integrate(model: ChemostatModel, history: HistorySegment, t_end: float, h=None, n=None,
              *, linearized=False, washout=None) -> Trajectory:
    """Solve the delayed chemostat from ``history`` up to ``t_end``.

    Classic four-stage Runge-Kutta on ``(s, x, E, y[, z])`` by the method of
    steps. ``h`` must divide the delay (or pass ``n`` steps per delay). When
    ``washout`` (a :class:`WashoutSolution`) is given, a ``z`` channel
    started at ``z*(anchor)`` is carried along; it is what the conservation
    check compares against.
    """
    tau = model.tau
    h, m = resolve_step(model, h, n)
    a = float(history.anchor_time)
    if not t_end > a:
        raise ValueError(f"t_end={t_end} must exceed the anchor time {a}")
    if tau > 0 and abs(history.tau - tau) > 1e-12 * tau:
        raise ValueError("history window length differs from the model delay")
    span = (t_end - a) / h
    if not span + m < MAX_NODES:
        raise GridTooLarge(f"{span + m:.3g} nodes needed (h={h:.3g} over [{a - tau:g}, {t_end:g}]); "
                           f"the limit is {MAX_NODES}")
    nsteps = max(1, int(math.ceil(span - 1e-9)))

    _, hs, hx, hds, hdx, hdsl, hdxl = history.sample(m)
    he, hdr, hdl = _history_dilution(model, a, h, m)
    z0 = float(washout(a)) if washout is not None else 0.0

    ts = a + h * np.arange(nsteps)
    D, s0 = model.D, model.s0
    DR = np.asarray(D.evaluate(ts, "right"), float).tolist()
    DM = np.asarray(D.evaluate(ts + 0.5 * h), float).tolist()
    DL = np.asarray(D.evaluate(ts + h, "left"), float).tolist()
    FR = np.asarray(s0.evaluate(ts, "right"), float).tolist()
    FM = np.asarray(s0.evaluate(ts + 0.5 * h), float).tolist()
    FL = np.asarray(s0.evaluate(ts + h, "left"), float).tolist()
    continuous = model.is_continuous
    p = model.p.value
    exp = math.exp
    lin = bool(linearized)

    # per-node storage: values and one-sided derivatives of (s, x, E, y, z)
    Sv, Xv, Ev = hs.tolist(), hx.tolist(), he.tolist()
    Yv = [math.nan] * m
    Zv = [math.nan] * m
    dRs, dRx, dRe = hds.tolist(), hdx.tolist(), hdr.tolist()
    dLs, dLx, dLe = hdsl.tolist(), hdxl.tolist(), hdl.tolist()
    dRy, dLy = [math.nan] * m, [math.nan] * (m + 1)
    dRz, dLz = [math.nan] * m, [math.nan] * (m + 1)
    dRs, dRx, dRe = dRs[:m], dRx[:m], dRe[:m]  # right limits at the anchor come from the first stage

    if m > 0:
        # y(anchor) = int_{a-tau}^{a} x p(s) e^{E(r) - E(a)} dr from the history
        g_nodes = hx * np.array([p(v) for v in hs]) * np.exp(he)
        h8 = h / 8.0
        s_mid = 0.5 * (hs[:-1] + hs[1:]) + h8 * (hds[:-1] - hdsl[1:])
        x_mid = 0.5 * (hx[:-1] + hx[1:]) + h8 * (hdx[:-1] - hdxl[1:])
        e_mid = 0.5 * (he[:-1] + he[1:]) + h8 * (hdr[:-1] - hdl[1:])
        g_mid = x_mid * np.array([p(v) for v in s_mid]) * np.exp(e_mid)
        y0 = float(simpson_cumulative(h, g_nodes, g_mid)[-1])
    else:
        y0 = 0.0
    Yv.append(y0)
    Zv.append(z0)

    def rhs(Dt, Ft, s, x, e, y, z, gd, ed):
        ps = p(s)
        g = gd * exp(ed - e) if m else x * ps
        return (Dt * (Ft - s) - (0.0 if lin else ps * x), g - Dt * x, Dt,
                x * ps - g - Dt * y, Dt * (Ft - z))

    clamps = 0
    extinct = False
    hh = 0.5 * h
    h6 = h / 6.0
    h8 = h / 8.0
    k1 = None
    for k in range(nsteps):
        j = m + k
        s, x, e, y, z = Sv[j], Xv[j], Ev[j], Yv[j], Zv[j]
        if m:
            jd = k
            sd0, xd0, ed0 = Sv[jd], Xv[jd], Ev[jd]
            sd1, xd1, ed1 = Sv[jd + 1], Xv[jd + 1], Ev[jd + 1]
            sdm = 0.5 * (sd0 + sd1) + h8 * (dRs[jd] - dLs[jd + 1])
            xdm = 0.5 * (xd0 + xd1) + h8 * (dRx[jd] - dLx[jd + 1])
            edm = 0.5 * (ed0 + ed1) + h8 * (dRe[jd] - dLe[jd + 1])
            gd0, gdm, gd1 = xd0 * p(sd0), xdm * p(sdm), xd1 * p(sd1)
        else:
            gd0 = gdm = gd1 = ed0 = edm = ed1 = 0.0
        if k1 is None or not continuous:
            k1 = rhs(DR[k], FR[k], s, x, e, y, z, gd0, ed0)
        k2 = rhs(DM[k], FM[k], s + hh * k1[0], x + hh * k1[1], e + hh * k1[2], y + hh * k1[3],
                 z + hh * k1[4], gdm, edm)
        k3 = rhs(DM[k], FM[k], s + hh * k2[0], x + hh * k2[1], e + hh * k2[2], y + hh * k2[3],
                 z + hh * k2[4], gdm, edm)
        k4 = rhs(DL[k], FL[k], s + h * k3[0], x + h * k3[1], e + h * k3[2], y + h * k3[3],
                 z + h * k3[4], gd1, ed1)
        sn = s + h6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        xn = x + h6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        en = e + h6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        yn = y + h6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        zn = z + h6 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
        if sn < 0.0:
            clamps += 1
            sn = 0.0
        if xn < UNDERFLOW:
            if xn < 0.0:
                clamps += 1
            elif xn > 0.0:
                extinct = True
            xn = 0.0
        if yn < 0.0:
            yn = 0.0
        if not (abs(sn) < BLOWUP and abs(xn) < BLOWUP and abs(yn) < BLOWUP):
            raise BlowUp(f"state left the bounded region at t={a + (k + 1) * h!r}")
        dRs.append(k1[0]); dRx.append(k1[1]); dRe.append(k1[2]); dRy.append(k1[3]); dRz.append(k1[4])  # noqa: E702
        Sv.append(sn); Xv.append(xn); Ev.append(en); Yv.append(yn); Zv.append(zn)  # noqa: E702
        # left-limit derivative at the new node; equals the next right limit when inputs are continuous
        k1 = rhs(DL[k], FL[k], sn, xn, en, yn, zn, gd1, ed1)
        dLs.append(k1[0]); dLx.append(k1[1]); dLe.append(k1[2]); dLy.append(k1[3]); dLz.append(k1[4])  # noqa: E702

    for dR, dL in ((dRs, dLs), (dRx, dLx), (dRe, dLe), (dRy, dLy), (dRz, dLz)):
        dR.append(dL[-1])
        if m == 0:
            dL[0] = dR[0]
    has_z = washout is not None
    values = np.column_stack([Sv, Xv, Ev, Yv, Zv if has_z else [math.nan] * len(Sv)])
    d_right = np.column_stack([dRs, dRx, dRe, dRy, dRz if has_z else [math.nan] * len(Sv)])
    d_left = np.column_stack([dLs, dLx, dLe, dLy, dLz if has_z else [math.nan] * len(Sv)])
    t = a + h * (np.arange(len(Sv)) - m)
    return Trajectory(model, h, m, a, float(t_end), t, values, d_right, d_left, clamps, extinct,
                      lin, has_z)


def evaluate_y(traj: Trajectory, t: float, panels_per_step: int = 2) -> float:
    """Absorbed-substrate integral at ``t`` by composite Simpson on the dense output.

    ``y(t) = int_{t-tau}^t x(r) p(s(r)) exp(-(E(t) - E(r))) dr``; zero without delay.
    """
    if t < traj.anchor - 1e-12 or t > traj.t[-1] + 1e-12:
        raise OutOfRange(f"t={t} outside [{traj.anchor}, {traj.t[-1]}]")
    tau = traj.tau
    if tau == 0:
        return 0.0
    k = max(2, 2 * traj.m * panels_per_step)
    r = np.linspace(t - tau, t, k + 1)
    vals = traj(r)
    f = vals[:, X] * traj.model.p(np.maximum(vals[:, S], 0.0)) * np.exp(vals[:, E] - vals[-1, E])
    w = np.ones(k + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(tau / k / 3.0 * np.dot(w, f))


@dataclass(eq=False)
class PsiFunction:
    """``psi(t) = x(t) / x(t + tau) * exp(E(t) - E(t + tau))`` on a half-step grid.

    ``identity_residual`` is the largest deviation from
    ``psi(t) = exp(-int_{t-tau}^t p(s) psi)`` for ``t >= anchor + 2 tau``.
    """

    t: np.ndarray
    values: np.ndarray
    identity_residual: float
    t_nodes: np.ndarray
    nodes: np.ndarray
    mids: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.t, self.values)


def _node_mid(traj, col, j0, j1):
    """Node values on ``[j0, j1]`` and the midpoints of the intervals in between."""
    v = traj.values[j0:j1 + 1, col]
    dr = traj.d_right[j0:j1 + 1, col]
    dl = traj.d_left[j0:j1 + 1, col]
    mid = 0.5 * (v[:-1] + v[1:]) + traj.h * (dr[:-1] - dl[1:]) / 8.0
    return v, mid


def compute_psi(traj: Trajectory, start=None, check_from=None) -> PsiFunction:
    """psi from the first node at or after ``start`` (default: the anchor).

    The identity residual is taken over nodes ``t >= check_from`` (default
    ``anchor + 2 tau``); it needs ``psi`` on ``[t - tau, t]``.
    """
    tau, h, m = traj.tau, traj.h, traj.m
    last = len(traj.t) - 1
    j0 = m if start is None else max(0, int(math.ceil((start - traj.t[0]) / h - 1e-7)))
    if tau == 0:
        t = traj.t[j0:]
        ones = np.ones_like(t)
        return PsiFunction(t, ones, 0.0, t, ones, np.ones(len(t) - 1))
    j1 = last - m
    if j1 <= j0:
        raise OutOfRange("trajectory shorter than one delay past the anchor")
    x_a, x_am = _node_mid(traj, X, j0, j1)
    x_b, x_bm = _node_mid(traj, X, j0 + m, j1 + m)
    e_a, e_am = _node_mid(traj, E, j0, j1)
    e_b, e_bm = _node_mid(traj, E, j0 + m, j1 + m)
    if min(x_b.min(), x_bm.min(), x_a.min()) < UNDERFLOW:
        raise ZeroBiomass("biomass vanishes where psi is needed")
    psi = x_a / x_b * np.exp(e_a - e_b)
    psi_m = x_am / x_bm * np.exp(e_am - e_bm)
    s_n, s_m = _node_mid(traj, S, j0, j1)
    p = traj.model.p
    F = simpson_cumulative(h, p(np.maximum(s_n, 0.0)) * psi, p(np.maximum(s_m, 0.0)) * psi_m)
    t_check = traj.anchor + 2 * tau if check_from is None else check_from
    i0 = max(m, int(math.ceil((t_check - traj.t[j0]) / h - 1e-7)))
    i = np.arange(i0, len(psi))
    resid = np.abs(psi[i] - np.exp(-(F[i] - F[i - m])))
    t_nodes = traj.t[j0:j1 + 1]
    t_half = np.empty(2 * len(t_nodes) - 1)
    t_half[0::2] = t_nodes
    t_half[1::2] = t_nodes[:-1] + 0.5 * h
    v_half = np.empty_like(t_half)
    v_half[0::2] = psi
    v_half[1::2] = psi_m
    return PsiFunction(t_half, v_half, float(resid.max()) if len(resid) else 0.0, t_nodes, psi,
                       psi_m)


def conservation_residual(traj: Trajectory, washout=None) -> float:
    """Largest deviation of ``Q = z* - s - x - y`` from ``Q(anchor) exp(-E)``.

    Uses the trajectory's own ``z`` channel when present (it is ``z*``
    propagated on the same grid); otherwise ``washout`` is evaluated at the
    nodes.
    """
    sl = traj.solution_slice
    t = traj.t[sl]
    if traj.has_z:
        z = traj.values[sl, Z]
    elif washout is not None:
        z = np.asarray(washout(t))
    else:
        raise ValueError("need a washout solution or a trajectory with a z channel")
    q = z - traj.values[sl, S] - traj.values[sl, X] - traj.values[sl, Y]
    e = traj.values[sl, E] - traj.values[traj.m, E]
    return float(np.max(np.abs(q - q[0] * np.exp(-e))))


def exponential_form_residual(traj: Trajectory, psi: PsiFunction | None = None, t0=None) -> float:
    """Relative error of ``x(t+tau) = x(t0) exp(int_{t0}^{t+tau} [p(s(r-tau)) psi(r-tau) - D(r)] dr)``."""
    tau, h, m = traj.tau, traj.h, traj.m
    if psi is None:
        psi = compute_psi(traj)
    j_start = m if tau == 0 else 2 * m
    if t0 is not None:
        j_start = max(j_start, int(round((t0 - traj.t[0]) / h)))
    nodes_psi = psi.nodes
    mids_psi = psi.mids
    # growth rate G(r) = p(s(r - tau)) psi(r - tau) - D(r) on nodes r = t_j, j >= 2m (or m when tau = 0)
    off = m  # psi index 0 sits at node m
    jp0 = j_start - m  # node index of r - tau
    jp1 = len(nodes_psi) - 1
    if jp1 - jp0 < 2:
        raise OutOfRange("trajectory too short for the exponential-form check")
    s_n, s_m = _node_mid(traj, S, jp0, jp1)
    p = traj.model.p
    g_n = p(np.maximum(s_n, 0.0)) * nodes_psi[jp0 - off:jp1 - off + 1] if tau > 0 else p(s_n)
    g_m = p(np.maximum(s_m, 0.0)) * mids_psi[jp0 - off:jp1 - off] if tau > 0 else p(s_m)
    r = traj.t[jp0 + m:jp1 + m + 1]
    D = traj.model.D
    d_n_right = np.asarray(D.evaluate(r[:-1], "right"))
    d_n_left = np.asarray(D.evaluate(r[1:], "left"))
    d_m = np.asarray(D.evaluate(r[:-1] + 0.5 * h))
    pieces = h / 6.0 * ((g_n[:-1] - d_n_right) + 4.0 * (g_m - d_m) + (g_n[1:] - d_n_left))
    F = np.concatenate(([0.0], np.cumsum(pieces)))
    x = traj.values[jp0 + m:jp1 + m + 1, X]
    pred = x[0] * np.exp(F)
    return float(np.max(np.abs(x - pred) / np.abs(pred)))


def _fmt(v):
    return "" if v is None or not np.isfinite(v) else format(float(v), ".17g")


def write_trajectory_csv(traj: Trajectory, path, psi: PsiFunction | None = None):
    """CSV with header ``t,s,x,y,E,psi``; ``psi`` left empty where undefined."""
    sl = traj.solution_slice
    t = traj.t[sl]
    psi_vals = [None] * len(t)
    if psi is not None:
        lookup = dict(zip(np.round(psi.t_nodes / traj.h).astype(np.int64).tolist(), psi.nodes))
        keys = np.round(t / traj.h).astype(np.int64).tolist()
        psi_vals = [lookup.get(k) for k in keys]
    vals = traj.values[sl]
    with open(path, "w", newline="") as fh:
        fh.write("t,s,x,y,E,psi\n")
        for ti, row, ps in zip(t, vals, psi_vals):
            fh.write(",".join([_fmt(ti), _fmt(row[S]), _fmt(row[X]), _fmt(row[Y]), _fmt(row[E]),
                               _fmt(ps)]) + "\n")
