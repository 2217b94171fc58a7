"""Command-line front end: ``chemostat-dde <command> --scenario file [--set key=value ...]``.

Each command writes its artifacts (CSV tables and a ``report.txt`` of
``key = value`` lines) into the output directory. Exit status is 0 on
success, 2 when a classification is indeterminate and 1 on errors.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io
from .config import Scenario
from .errors import ChemostatError, ToleranceBreach
from .integrator import compute_psi, conservation_residual, integrate
from .lemmas import verify_lemmas
from .model import HistorySegment
from .orbit import attraction_rate, constant_equilibrium, find_periodic_orbit, verify_orbit
from .persistence import (INDETERMINATE, PERSISTENT, threshold_periodic, uniform_persistence_probe,
                          default_ensemble, window_condition_general, worker_count)
from .washout import compute_phi_periodic, compute_washout_general, compute_washout_periodic

COMMANDS = ("simulate", "washout", "phi", "threshold", "probe", "window-check", "orbit",
            "verify-lemmas", "sweep")

# flag -> dotted key
FLAG_KEYS = {
    "out": "run.out",
    "workers": "run.workers",
    "param": "sweep.param",
    "from_": "sweep.from",
    "to": "sweep.to",
    "steps": "sweep.steps",
}

DEFAULT_OUT = "out"


class _Run:
    """Scenario plus the derived model and step settings of one command."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.model = scenario.model()
        self.n = scenario.get("run.n")
        self.h = scenario.get("run.h")
        self.out = scenario.get("run.out", DEFAULT_OUT)
        os.makedirs(self.out, exist_ok=True)

    def get(self, key, default=None):
        return self.scenario.get(key, default)

    @property
    def omega(self):
        return self.model.omega or 1.0

    def history(self):
        hist = self.scenario.history(self.model, self.n)
        if hist is None:
            s = 0.5 * self.model.s_upper
            if self.model.tau == 0:
                return HistorySegment(0.0, 0.0, np.array([s]), np.array([s]))
            return HistorySegment.constant(s, s, self.model.tau, 0.0, self.n or 16)
        return hist

    def path(self, name):
        return os.path.join(self.out, name)

    def report(self, entries, name="report.txt"):
        io.write_report(self.path(name), entries)


def _simulate(run: _Run):
    model = run.model
    horizon = run.get("run.horizon", 200.0 * run.omega)
    washout = compute_washout_periodic(model) if model.is_periodic else None
    traj = integrate(model, run.history(), horizon, h=run.h, n=run.n, washout=washout)
    psi = None
    if model.tau > 0 and traj.t_end >= traj.anchor + 2 * model.tau:
        try:
            psi = compute_psi(traj)
        except ChemostatError:
            psi = None
    io.write_csv(run.path("trajectory.csv"), ["t", "s", "x", "y", "E", "psi"],
                 _trajectory_columns(traj, psi))
    s, x, e, y = traj.values[-1, :4]
    entries = {"simulate.t_end": traj.t_end, "simulate.h": traj.h, "simulate.s": s,
               "simulate.x": x, "simulate.y": y, "simulate.E": e,
               "simulate.clamp_count": traj.clamp_count,
               "simulate.extinct_numerically": traj.extinct_numerically}
    if washout is not None:
        entries["simulate.conservation_residual"] = conservation_residual(traj)
    if psi is not None:
        entries["simulate.psi_identity_residual"] = psi.identity_residual
    eq = constant_equilibrium(model) if model.is_autonomous else None
    if eq is not None:
        entries["simulate.equilibrium_s"], entries["simulate.equilibrium_x"], \
            entries["simulate.equilibrium_y"] = eq
    if model.flags:
        entries["simulate.flags"] = ",".join(model.flags)
    run.report(entries)
    return 0


def _trajectory_columns(traj, psi):
    sl = traj.solution_slice
    t = traj.t[sl]
    vals = traj.values[sl]
    psi_col = [None] * len(t)
    if psi is not None:
        lookup = dict(zip(np.round(psi.t_nodes / traj.h).astype(np.int64).tolist(),
                          psi.nodes.tolist()))
        psi_col = [lookup.get(k) for k in np.round(t / traj.h).astype(np.int64).tolist()]
    return [t, vals[:, 0], vals[:, 1], vals[:, 3], vals[:, 2], psi_col]


def _washout(run: _Run):
    model = run.model
    if model.is_periodic:
        w = compute_washout_periodic(model, n=run.n)
        entries = {"washout.periodic": True, "washout.period": w.period,
                   "washout.periodicity_residual": w.periodicity_residual}
    else:
        w = compute_washout_general(model, run.get("run.horizon", 200.0 * run.omega), h=run.h)
        entries = {"washout.periodic": False, "washout.burn_in": w.burn_in}
    io.write_csv(run.path("washout.csv"), ["t", "z_star"], [w.t, w.z])
    entries.update({"washout.equation_residual": w.equation_residual,
                    "washout.min": w.lower, "washout.max": w.upper, "washout.nodes": len(w.t)})
    run.report(entries)
    return 0


def _need_periodic(run, command):
    if not run.model.is_periodic:
        raise ChemostatError(f"{command} needs a periodic (or constant) environment")


def _phi(run: _Run):
    _need_periodic(run, "phi")
    model = run.model
    w = compute_washout_periodic(model)
    phi = compute_phi_periodic(model, w, tol=run.get("run.tol_phi", 1e-9),
                               max_periods=run.get("run.max_periods", 5000), n=run.n)
    io.write_csv(run.path("phi.csv"), ["t", "z_star", "c_normalized", "phi"],
                 [phi.t, phi.z_star, phi.c_normalized, phi.values])
    run.report({"phi.lambda": phi.lambda_, "phi.mean_growth": phi.mean_growth,
                "phi.mean_dilution": phi.mean_dilution,
                "phi.c_growth_exponent": phi.c_growth_exponent,
                "phi.min": phi.min, "phi.max": phi.max,
                "phi.periodicity_residual": phi.periodicity_residual,
                "phi.identity_residual": phi.identity_residual,
                "phi.iterations": phi.iterations, "phi.h": phi.h})
    return 0


def _threshold_report(run: _Run):
    return threshold_periodic(run.model, run.get("run.tolerance_band"), n=run.n,
                              tol_phi=run.get("run.tol_phi", 1e-9),
                              max_periods=run.get("run.max_periods", 5000))


def _threshold(run: _Run):
    _need_periodic(run, "threshold")
    rep = _threshold_report(run)
    run.report({f"threshold.{k}": v for k, v in rep.as_dict().items()})
    return 2 if rep.classification == INDETERMINATE else 0


def _ensemble(run: _Run, size=None):
    size = size or run.get("run.ensemble", 16)
    return default_ensemble(run.model, size=size, seed=run.get("run.seed", 0),
                            x_span=(run.get("run.x_min", 1e-6), run.get("run.x_max", 1.0)),
                            n=run.n or 16)


def _probe(run: _Run):
    model = run.model
    rep = _threshold_report(run) if model.is_periodic else None
    entries = {}
    if rep is not None:
        entries.update({"probe.lambda": rep.lambda_, "probe.classification": rep.classification})
        if rep.classification == INDETERMINATE:
            run.report(entries)
            return 2
    pr = uniform_persistence_probe(model, _ensemble(run), run.get("run.horizon"), h=run.h,
                                   n=run.n, workers=run.get("run.workers"), report=rep)
    entries.update({"probe.empirical_delta": pr.empirical_delta,
                    "probe.empirical_delta_doubled": pr.empirical_delta_doubled,
                    "probe.spread": pr.spread, "probe.drift": pr.drift,
                    "probe.stable": pr.stable, "probe.horizon": pr.horizon,
                    "probe.member_floors": pr.member_floors})
    run.report(entries)
    return 0


def _window_check(run: _Run):
    model = run.model
    eta = run.get("run.eta")
    if eta is None:
        raise ChemostatError("window-check needs run.eta")
    T = run.get("run.T", 2.0 * run.omega)
    horizon = run.get("run.horizon", 200.0 * run.omega)
    rep = window_condition_general(model, eta, T, horizon, h=run.h)
    run.report({"window.passed": rep.passed, "window.worst_margin": rep.worst_margin,
                "window.worst_window": list(rep.worst_window or ()), "window.eta": rep.eta,
                "window.T": rep.T, "window.t_start": rep.t_start,
                "window.n_windows": rep.n_windows, "window.lengths": list(rep.lengths)})
    return 0


def _orbit(run: _Run):
    _need_periodic(run, "orbit")
    model = run.model
    rep = _threshold_report(run)
    if rep.classification == INDETERMINATE:
        run.report({"orbit.lambda": rep.lambda_, "orbit.classification": rep.classification})
        return 2
    initial = run.scenario.history(model, run.n)
    orbit = find_periodic_orbit(model, initial, tol=run.get("run.tol_orbit", 1e-8),
                                max_periods=run.get("run.max_periods"), n=run.n,
                                accelerate=bool(run.get("run.accelerate", 0)), report=rep)
    t, s, x, y, psi = orbit.one_period()
    io.write_csv(run.path("orbit.csv"), ["t", "s", "x", "y", "psi"], [t, s, x, y, psi])
    checks = verify_orbit(model, orbit, raise_on_violation=False)
    entries = {"orbit.lambda": rep.lambda_, "orbit.residual": orbit.residual,
               "orbit.iterations": orbit.iterations, "orbit.min_x": orbit.min_x,
               "orbit.attraction_rate": orbit.attraction_rate}
    entries.update({f"orbit.{k}": v for k, v in checks.items()})
    perturbations = run.get("run.perturbations")
    if perturbations is not None:
        rr = attraction_rate(model, orbit, tuple(np.atleast_1d(perturbations)),
                             seed=run.get("run.seed", 1))
        entries["orbit.perturbations"] = list(rr.amplitudes)
        entries["orbit.decay_slopes"] = [math.nan if v is None else v for v in rr.slopes]
        entries["orbit.decay_r2"] = [math.nan if v is None else v for v in rr.r2]
        entries["orbit.slope_agreement"] = rr.agreement
        entries["orbit.j_epsilon"] = rr.j_epsilon
    run.report(entries)
    return 0


def _verify(run: _Run):
    model = run.model
    checks = verify_lemmas(model, run.scenario.history(model, run.n), n=run.n,
                           horizon=run.get("run.horizon"))
    entries = {}
    for name, c in checks.items():
        entries[f"lemmas.{name}.value"] = c.value
        entries[f"lemmas.{name}.threshold"] = c.threshold
        entries[f"lemmas.{name}.passed"] = c.passed
        if c.note:
            entries[f"lemmas.{name}.note"] = c.note
    run.report(entries)
    breaches = {k: c.value for k, c in checks.items() if not c.passed}
    if breaches:
        raise ToleranceBreach(breaches)
    return 0


def _sweep_point(args):
    values, param, value = args
    sc = Scenario(dict(values))
    sc.set(param, value)
    model = sc.model()
    rep = threshold_periodic(model, sc.get("run.tolerance_band"), n=sc.get("run.n"),
                             tol_phi=sc.get("run.tol_phi", 1e-9),
                             max_periods=sc.get("run.max_periods", 5000))
    delta = None
    if rep.classification == PERSISTENT:
        size = sc.get("run.ensemble", 4)
        ens = default_ensemble(model, size=size, seed=sc.get("run.seed", 0),
                               x_span=(sc.get("run.x_min", 1e-6), sc.get("run.x_max", 1.0)),
                               n=sc.get("run.n") or 16)
        try:
            delta = uniform_persistence_probe(model, ens, sc.get("run.horizon"), h=sc.get("run.h"),
                                              n=sc.get("run.n"), workers=1,
                                              report=rep).empirical_delta
        except ChemostatError:
            delta = None
    return value, rep.lambda_, rep.classification, delta


def _sweep(run: _Run):
    _need_periodic(run, "sweep")
    param = run.get("sweep.param")
    if param is None:
        raise ChemostatError("sweep needs sweep.param (--param)")
    lo, hi = run.get("sweep.from"), run.get("sweep.to")
    if lo is None or hi is None:
        raise ChemostatError("sweep needs sweep.from and sweep.to")
    steps = run.get("sweep.steps", 11)
    grid = np.linspace(float(lo), float(hi), int(steps)).tolist()
    base = {k: v for k, v in run.scenario.values.items() if not k.startswith("sweep.")}
    jobs = [(base, param, v) for v in grid]
    workers = worker_count(run.get("run.workers"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    io.write_csv(run.path("sweep.csv"), ["param", "lambda", "classification", "empirical_delta"],
                 [[r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
                  [r[3] for r in rows]])
    classes = [r[2] for r in rows]
    run.report({"sweep.param": param, "sweep.points": len(rows),
                "sweep.persistent": classes.count("persistent"),
                "sweep.extinct": classes.count("extinct"),
                "sweep.indeterminate": classes.count(INDETERMINATE)})
    return 2 if INDETERMINATE in classes else 0


HANDLERS = {
    "simulate": _simulate,
    "washout": _washout,
    "phi": _phi,
    "threshold": _threshold,
    "probe": _probe,
    "window-check": _window_check,
    "orbit": _orbit,
    "verify-lemmas": _verify,
    "sweep": _sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="chemostat-dde", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--scenario", required=True, help="scenario file (key = value lines)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one scenario key (repeatable)")
    parser.add_argument("--out", help="output directory (run.out)")
    parser.add_argument("--workers", type=int, help="worker processes (run.workers)")
    parser.add_argument("--param", help="swept key (sweep.param)")
    parser.add_argument("--from", dest="from_", type=float, help="sweep start (sweep.from)")
    parser.add_argument("--to", type=float, help="sweep end (sweep.to)")
    parser.add_argument("--steps", type=int, help="sweep points (sweep.steps)")
    return parser


def load_scenario(args) -> Scenario:
    sc = Scenario.load(args.scenario)
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag)
        if value is not None:
            sc.set(key, value)
    for assignment in args.set:
        sc.override(assignment)
    return sc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = _Run(load_scenario(args))
        return HANDLERS[args.command](run)
    except ToleranceBreach as exc:
        print(f"chemostat-dde: {exc}", file=sys.stderr)
        return 1
    except (ChemostatError, ValueError, OSError) as exc:
        print(f"chemostat-dde: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
