"""Invariant harness: every identity the theory guarantees, measured on one scenario.

Each check returns a :class:`Check` with the measured value and the
threshold it must stay under; :func:`verify_lemmas` collects them and can
raise :class:`ToleranceBreach` naming the failures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import proof_constants
from .errors import ToleranceBreach, ZeroBiomass
from .hermite import simpson_cumulative
from .integrator import E, S, X, Y, compute_psi, conservation_residual, evaluate_y, \
    exponential_form_residual, integrate, recommended_steps
from .model import ChemostatModel, HistorySegment
from .washout import (compute_phi_periodic, compute_washout_general, compute_washout_periodic,
                      lemma_contraction_check)


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""


THRESHOLDS = {
    "conservation": 1e-6,
    "y_quadrature": 1e-6,
    "phi_identity": 1e-6,
    "phi_range": 0.0,
    "psi_identity": 1e-6,
    "exponential_form": 1e-6,
    "delayed_biomass_identity": 1e-6,
    "contraction_bound": 1.0,
    "comparison_window": 0.0,
}


def delayed_biomass_residual(traj):
    """Largest ``|x(t) - (x + y)(t - tau) exp(E(t - tau) - E(t)) - C exp(-(E(t) - E(anchor)))|``.

    ``C = x(anchor + tau) exp(E(anchor + tau) - E(anchor)) - (x + y)(anchor)``
    (zero when ``y`` starts from its defining integral). Returns
    ``(residual, C)``.
    """
    m = traj.m
    if m == 0:
        return 0.0, 0.0
    x, y, e = traj.values[:, X], traj.values[:, Y], traj.values[:, E]
    j = np.arange(2 * m, len(traj.t))
    C = x[2 * m] * math.exp(e[2 * m] - e[m]) - (x[m] + y[m])
    pred = (x[j - m] + y[j - m]) * np.exp(e[j - m] - e[j]) + C * np.exp(-(e[j] - e[m]))
    return float(np.max(np.abs(x[j] - pred))), float(C)


def comparison_window_margin(model, traj, phi, lattice=8):
    """Worst ``int f phi(h - tau) + tau M - int g psi(h - tau)`` over windows.

    ``f = p(z*)`` with the periodic ``phi``; ``g = p(s)`` with ``psi`` from
    the trajectory. Meaningful when ``s <= z*`` after the anchor, which is
    checked and reported through the return value ``(margin, applicable)``.
    """
    tau, h, m = traj.tau, traj.h, traj.m
    psi = compute_psi(traj, start=traj.anchor)
    t_nodes = psi.t_nodes
    z = np.asarray(phi_z(phi, t_nodes))
    s_nodes = traj.values[m:m + len(t_nodes), S]
    applicable = bool(np.all(s_nodes <= z + 1e-9))
    p = model.p
    s_mid = traj.dense(t_nodes[:-1] + 0.5 * h)[:, S]
    G = simpson_cumulative(h, p(s_nodes) * psi.nodes, p(s_mid) * psi.mids)
    tm = t_nodes[:-1] + 0.5 * h
    F = simpson_cumulative(h, p(z) * phi(t_nodes), p(np.asarray(phi_z(phi, tm))) * phi(tm))
    M = proof_constants(model)["M"]
    # windows [t1, t2] in shifted time start one delay after the anchor (psi settled)
    k0 = m
    idx = np.linspace(k0, len(t_nodes) - 1, lattice + 1).astype(int)
    worst = math.inf
    for i1 in idx:
        for i2 in idx[idx >= i1]:
            worst = min(worst, (F[i2] - F[i1]) + tau * M - (G[i2] - G[i1]))
    return float(worst), applicable


def phi_z(phi, t):
    """``z*`` on the phase grid of ``phi``, wrapped periodically."""
    tt = np.mod(np.asarray(t, float) - phi.t[0], phi.period) + phi.t[0]
    return np.interp(tt, phi.t, phi.z_star)


def verify_lemmas(model: ChemostatModel, history: HistorySegment | None = None, *, n=None,
                  horizon=None, thresholds=None, raise_on_breach=False) -> dict:
    """Run every invariant on ``model`` and return ``{name: Check}``.

    ``history`` defaults to a constant segment at half the feed bound.
    Periodic-only checks (``phi``, contraction, comparison window) are
    skipped for aperiodic models.
    """
    thr = dict(THRESHOLDS)
    if thresholds:
        thr.update(thresholds)
    tau = model.tau
    omega = model.omega or 1.0
    if horizon is None:
        horizon = max(10.0 * omega, 4.0 * tau + omega)
    periodic = model.is_periodic
    if periodic:
        washout = compute_washout_periodic(model)
    else:
        washout = compute_washout_general(model, horizon + 200.0 * (1.0 + tau))
    if n is None:
        n = recommended_steps(model)
    if history is None:
        s = 0.5 * model.s_upper
        history = HistorySegment.constant(s, s, tau, 0.0, n)
    if not periodic:
        history = history.moved_to(washout.burn_in + tau)
    a = history.anchor_time
    checks = {}

    def add(name, value, passed=None, note=""):
        limit = thr[name]
        ok = (value < limit) if passed is None else passed
        checks[name] = Check(name, float(value), limit, bool(ok), note)

    traj = integrate(model, history, a + horizon, n=n, washout=washout)
    add("conservation", conservation_residual(traj))

    # y channel against direct quadrature at a few interior times
    if tau > 0:
        times = np.linspace(a + tau, traj.t_end, 5)
        rel = max(abs(evaluate_y(traj, t) - float(traj(t, "y")))
                  / max(abs(float(traj(t, "y"))), 1e-300) for t in times)
        add("y_quadrature", rel)
    else:
        add("y_quadrature", float(np.max(np.abs(traj.values[traj.m:, Y]))))

    resid, C = delayed_biomass_residual(traj)
    add("delayed_biomass_identity", resid, note=f"C={C:.3g}")

    try:
        psi = compute_psi(traj)
        add("psi_identity", psi.identity_residual)
        add("exponential_form", exponential_form_residual(traj, psi))
    except ZeroBiomass as exc:
        psi = None
        add("psi_identity", math.nan, True, f"skipped: {exc}")
        add("exponential_form", math.nan, True, f"skipped: {exc}")

    if periodic:
        phi = compute_phi_periodic(model, washout)
        add("phi_identity", phi.identity_residual)
        inside = phi.min > 0 and phi.max <= 1 + 1e-12
        add("phi_range", 0.0 if inside else 1.0, inside, f"[{phi.min:.6g}, {phi.max:.6g}]")
        if tau > 0:
            rep = lemma_contraction_check(model, washout, 1.0, lambda t: 1.0 + t + tau,
                                          horizon=20 * omega, raise_on_violation=False)
            add("contraction_bound", rep.worst_ratio, rep.passed)
            if psi is not None:
                margin, applicable = comparison_window_margin(model, traj, phi)
                add("comparison_window", margin, margin >= 0 or not applicable,
                    "" if applicable else "skipped: s exceeds z*")
    breaches = {k: c.value for k, c in checks.items() if not c.passed}
    if breaches and raise_on_breach:
        raise ToleranceBreach(breaches)
    return checks
