"""Acceptance gate: the nine end-to-end criteria, each with its tolerance and time budget.

Every test appends one ``PASS``/``FAIL`` line to the acceptance summary
printed at the end of the session.
"""
import math
import time

import numpy as np
import pytest

from chemostat_dde import (HistorySegment, compute_phi_periodic, compute_psi,
                           compute_washout_periodic, conservation_residual, constant_equilibrium,
                           find_periodic_orbit, integrate, lemma_contraction_check, make_model,
                           recommended_steps, threshold_periodic, uniform_persistence_probe,
                           verify_orbit)
from chemostat_dde.orbit import attraction_rate
from chemostat_dde.persistence import default_ensemble
from chemostat_dde.scenarios import expected_fate, standard_suite

from conftest import ACCEPTANCE_LINES
from oracles import constant_phi_bisection, method_of_steps_dop853, monod

pytestmark = pytest.mark.acceptance


class Criterion:
    """Times a criterion and records its summary line, pass or fail."""

    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.detail = ""

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        ok = exc_type is None and elapsed < self.budget
        if exc_type is None and not ok:
            self.detail += f" (over budget {self.budget:g}s)"
        elif exc_type is not None:
            self.detail += f" [{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}]"
        line = (f"{'PASS' if ok else 'FAIL'}  {self.number}. {self.title}: "
                f"{self.detail.strip()}  ({elapsed:.1f}s / {self.budget:g}s)")
        ACCEPTANCE_LINES.append(line)
        print(line)
        if exc_type is None:
            assert elapsed < self.budget, line
        return False


def _effective_period(model):
    # a constant environment is periodic with any period; one time unit is used
    return model.period if model.period is not None else 1.0


def _start(model, n):
    s = 0.5 * model.s_upper
    if model.tau == 0:
        return HistorySegment(0.0, 0.0, np.array([s]), np.array([s]))
    return HistorySegment.constant(s, s, model.tau, 0.0, n)


@pytest.fixture(scope="module")
def models():
    return {name: sc.model() for name, sc in standard_suite().items()}


@pytest.fixture(scope="module")
def washouts(models):
    return {name: compute_washout_periodic(m) for name, m in models.items()}


def test_conservation(models, washouts):
    with Criterion(1, "conservation identity on the standard suite", 10.0) as c:
        assert len(models) >= 6
        assert {m.tau for m in models.values()} >= {0.0, 0.5, 2.0}
        worst, ratios = 0.0, []
        for name, model in models.items():
            horizon = 10.0 * _effective_period(model) + 2 * model.tau
            res = []
            for refine in (1, 2):
                n = (16 if model.tau > 0 else 256) * refine
                traj = integrate(model, _start(model, n), horizon, n=n, washout=washouts[name])
                res.append(conservation_residual(traj))
            worst = max(worst, res[0])
            assert res[0] < 1e-6, (name, res[0])
            if res[0] > 1e-10:
                # rounding dominates below 1e-10; above it the ratio shows the order
                ratios.append(res[0] / res[1])
        c.detail = (f"max residual {worst:.2e} < 1e-6; halving ratios "
                    f"{min(ratios):.1f}..{max(ratios):.1f}")
        assert ratios and all(8.0 <= r <= 32.0 for r in ratios), ratios


def test_phi_and_psi_identities(models, washouts):
    with Criterion(2, "phi fixed-point and psi identities", 5.0) as c:
        worst_phi = worst_psi = 0.0
        for name, model in models.items():
            phi = compute_phi_periodic(model, washouts[name])
            worst_phi = max(worst_phi, phi.identity_residual)
            omega = _effective_period(model)
            n = recommended_steps(model)
            traj = integrate(model, _start(model, n), 3 * model.tau + omega, n=n)
            psi = compute_psi(traj)
            worst_psi = max(worst_psi, psi.identity_residual)
            assert phi.identity_residual < 1e-6, name
            assert psi.identity_residual < 1e-6, name
        c.detail = f"phi residual {worst_phi:.2e}, psi residual {worst_psi:.2e} (< 1e-6)"


def test_threshold_predicts_fate(models):
    with Criterion(3, "sign of lambda matches the simulated fate", 60.0) as c:
        signs = set()
        worst_gap = -math.inf
        for name, model in models.items():
            rep = threshold_periodic(model)
            lam = rep.lambda_
            signs.add(np.sign(lam))
            assert rep.classification == expected_fate(name), (name, lam)
            omega = _effective_period(model)
            H = 50.0 * omega
            traj = integrate(model, _start(model, 16), 2 * H)
            t, x = traj.t, traj.x
            if rep.classification == "extinct":
                hit = t[x < 1e-10]
                assert len(hit) and hit[0] <= H, (name, "x stays above 1e-10")
                # log-slope over the last 10 periods before the 1e-10 crossing
                t1 = omega * math.floor(hit[0] / omega)
                t0 = t1 - 10 * omega
                slope = math.log(float(traj(t1, "x")) / float(traj(t0, "x"))) / (t1 - t0)
                worst_gap = max(worst_gap, slope - lam)
                assert slope <= lam + 1e-3, (name, slope, lam)
            else:
                f1 = x[(t >= 0.75 * H) & (t <= H)].min()
                f2 = x[t >= 1.75 * H].min()
                assert f1 > 0 and abs(f2 - f1) < 0.05 * f2, (name, f1, f2)
        assert len(models) >= 10 and signs == {-1.0, 1.0}
        c.detail = (f"{len(models)} scenarios agree; extinct log-slope - lambda <= "
                    f"{worst_gap:.1e}")


def test_autonomous_equivalence():
    with Criterion(4, "constant-environment threshold equivalence", 5.0) as c:
        p_v = monod(2.0, 1.0)(1.0)
        worst = 0.0
        cells = 0
        for d in (0.2, 0.45, 0.7, 0.95, 1.2):
            for tau in (0.0, 0.3, 0.8, 1.5, 2.5):
                model = make_model(tau, {"kind": "monod", "m": 2.0, "K": 1.0},
                                   {"kind": "constant", "value": d},
                                   {"kind": "constant", "value": 1.0})
                phi = compute_phi_periodic(model)
                phi_bar = float(np.mean(phi.values))
                oracle = constant_phi_bisection(p_v, tau)
                worst = max(worst, abs(phi_bar - oracle), float(np.ptp(phi.values)))
                assert abs(phi_bar - oracle) < 1e-10, (d, tau, phi_bar, oracle)
                assert np.sign(p_v * phi_bar - d) == np.sign(p_v * math.exp(-d * tau) - d)
                cells += 1
        c.detail = f"{cells} cells agree; |phi - bisection| <= {worst:.1e}"


PERSISTENT_PERIODIC = ["piecewise_persistent", "piecewise_persistent_short", "fourier_persistent",
                       "fourier_persistent_nodelay"]


def _initializations(model, n):
    tau, s_up = model.tau, model.s_upper
    if tau == 0:
        return [HistorySegment(0.0, 0.0, np.array([s])[:1], np.array([x])[:1])
                for s, x in ((0.5 * s_up, 0.5 * s_up), (0.05, 1e-3), (1.5 * s_up, 2.0))]
    t = np.linspace(-tau, 0.0, n + 1)
    return [
        HistorySegment.constant(0.5 * s_up, 0.5 * s_up, tau, 0.0, n),
        HistorySegment.constant(0.05, 1e-3, tau, 0.0, n),
        HistorySegment(0.0, tau, 1.5 * s_up * (1 + 0.3 * np.sin(3 * t)),
                       2.0 + np.cos(2 * t)),
    ]


def test_periodic_orbit(models):
    with Criterion(5, "periodic orbit: convergence, uniqueness, identities", 120.0) as c:
        worst_res = worst_spread = worst_id = 0.0
        for name in PERSISTENT_PERIODIC + ["constant_persistent", "constant_persistent_nodelay"]:
            model = models[name]
            report = threshold_periodic(model)
            orbits = [find_periodic_orbit(model, init, report=report)
                      for init in _initializations(model, 16)]
            for o in orbits:
                assert o.residual < 1e-8, (name, o.residual)
                assert o.min_x > 0
                worst_res = max(worst_res, o.residual)
            base = orbits[0].segment
            spread = max(base.distance(o.segment) for o in orbits[1:])
            worst_spread = max(worst_spread, spread)
            assert spread < 1e-7, (name, spread)
            checks = verify_orbit(model, orbits[0])
            worst_id = max(worst_id, checks["orbit_identity_residual"])
            assert checks["orbit_identity_residual"] < 1e-6
            if model.is_autonomous:
                eq = constant_equilibrium(model)
                seg = orbits[0].segment
                err = max(np.max(np.abs(seg.s - eq[0])), np.max(np.abs(seg.x - eq[1])),
                          abs(float(orbits[0].trajectory(0.0, "y")) - eq[2]))
                assert err < 1e-7, (name, err)
        c.detail = (f"residual {worst_res:.1e}, initialization spread {worst_spread:.1e}, "
                    f"orbit identity {worst_id:.1e}")


def test_exponential_attraction(models):
    with Criterion(6, "exponential attraction rate", 60.0) as c:
        summary = []
        for name in ("piecewise_persistent_short", "fourier_persistent", "constant_persistent"):
            model = models[name]
            orbit = find_periodic_orbit(model)
            rr = attraction_rate(model, orbit, (1e-3, 1e-5))
            assert all(s is not None and s < 0 for s in rr.slopes), (name, rr.slopes)
            assert all(r > 0.99 for r in rr.r2), (name, rr.r2)
            assert rr.agreement < 0.10, (name, rr.slopes)
            summary.append(f"{rr.slopes[0]:.3f}/{rr.slopes[1]:.3f}")
        c.detail = "slopes (1e-3 / 1e-5 perturbations) " + ", ".join(summary) + "; R2 > 0.99"


def test_contraction_bound(models, washouts):
    with Criterion(7, "contraction bound dominates |phi - psi|", 20.0) as c:
        worst = 0.0
        for name in ("piecewise_persistent", "fourier_persistent", "constant_extinct"):
            model = models[name]
            tau = model.tau
            rep = lemma_contraction_check(model, washouts[name], 1.0, lambda t: 1.0 + t + tau,
                                          horizon=20 * _effective_period(model))
            assert rep.passed
            worst = max(worst, rep.worst_ratio)
        c.detail = f"worst |phi - psi| / bound = {worst:.3f} over 20 periods on 3 scenarios"


def test_uniform_persistence_probe(models):
    with Criterion(8, "uniform persistence floor", 60.0) as c:
        out = []
        for name in ("piecewise_persistent_short", "fourier_persistent", "constant_persistent"):
            model = models[name]
            ens = default_ensemble(model, size=16, x_span=(1e-6, 1.0))
            x0 = [float(h.x[-1]) for h in ens]
            assert max(x0) / min(x0) >= 0.9e6
            pr = uniform_persistence_probe(model, ens)
            assert pr.empirical_delta > 0
            assert pr.spread < 0.05 and pr.drift < 0.05, (name, pr.spread, pr.drift)
            out.append(f"{name} {pr.empirical_delta:.4g}")
        c.detail = "floors " + ", ".join(out) + " (spread and drift < 5%)"


def test_integrator_order():
    with Criterion(9, "fourth-order convergence against the fine-step oracle", 30.0) as c:
        tau, period = 1.0, 1.5
        model = make_model(tau, {"kind": "monod", "m": 3.0, "K": 1.0},
                           {"kind": "fourier", "mean": 1.0, "cos": [0.3], "period": period},
                           {"kind": "fourier", "mean": 1.0, "sin": [0.2], "period": period},
                           period=period)
        D = lambda t: 1 + 0.3 * math.cos(2 * math.pi * t / period)  # noqa: E731
        s0 = lambda t: 1 + 0.2 * math.sin(2 * math.pi * t / period)  # noqa: E731
        s_hist = lambda t: 0.6 + 0.1 * t  # noqa: E731
        x_hist = lambda t: 0.2 - 0.05 * t  # noqa: E731
        s_ref, x_ref = method_of_steps_dop853(monod(3.0, 1.0), D, s0, tau, s_hist, x_hist, 4)
        hs, errs = [], []
        for n in (8, 16, 32, 64, 128):
            hist = HistorySegment.from_functions(s_hist, x_hist, tau, 0.0, n)
            traj = integrate(model, hist, 4 * tau, n=n)
            errs.append(max(abs(float(traj(4 * tau, "s")) - s_ref),
                            abs(float(traj(4 * tau, "x")) - x_ref)))
            hs.append(tau / n)
        slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        c.detail = f"log-log slope {slope:.2f} >= 3.7 (errors {errs[0]:.1e} .. {errs[-1]:.1e})"
        assert slope >= 3.7
