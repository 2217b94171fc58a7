"""The standard scenario suite (period 1 unless the environment is constant).

Constant, piecewise-constant and Fourier environments, each with a
persistent and an extinct case, at delays 0, 0.5 and 2. Extinct cases have
``lambda < -0.5`` so that the biomass drops below ``1e-10`` within 50
periods; the delay-2 cases keep the dilution below 1 so that ``tau / 16``
steps resolve them.
"""
from __future__ import annotations

from .config import Scenario


def _monod(m, K):
    return {"p.kind": "monod", "p.m": m, "p.K": K}


def _const(name, v):
    return {f"{name}.kind": "constant", f"{name}.value": v}


def _piecewise(name, breakpoints, values):
    return {f"{name}.kind": "piecewise", f"{name}.breakpoints": list(map(float, breakpoints)),
            f"{name}.values": list(map(float, values)), f"{name}.period": 1.0}


def _fourier(name, mean, cos=(), sin=()):
    out = {f"{name}.kind": "fourier", f"{name}.mean": mean, f"{name}.period": 1.0}
    if cos:
        out[f"{name}.cos"] = list(map(float, cos))
    if sin:
        out[f"{name}.sin"] = list(map(float, sin))
    return out


def _scenario(tau, *parts, period=None, expected=None):
    values = {"model.tau": float(tau)}
    if period is not None:
        values["model.period"] = float(period)
    for part in parts:
        values.update(part)
    return Scenario(values), expected


_SUITE = {
    "constant_persistent": _scenario(0.5, _monod(4.0, 1.0), _const("D", 1.0), _const("s0", 1.0),
                                     expected="persistent"),
    "constant_extinct": _scenario(0.5, _monod(1.0, 1.0), _const("D", 1.0), _const("s0", 1.0),
                                  expected="extinct"),
    "constant_persistent_nodelay": _scenario(0.0, _monod(4.0, 1.0), _const("D", 1.0),
                                             _const("s0", 1.0), expected="persistent"),
    "constant_extinct_nodelay": _scenario(0.0, _monod(0.8, 1.0), _const("D", 1.0),
                                          _const("s0", 1.0), expected="extinct"),
    "piecewise_persistent": _scenario(2.0, _monod(4.0, 1.0), _piecewise("D", [0, 0.5], [0.3, 0.7]),
                                      _piecewise("s0", [0, 0.25], [2.0, 1.5]), period=1.0,
                                      expected="persistent"),
    "piecewise_extinct": _scenario(2.0, _monod(0.5, 1.0), _piecewise("D", [0, 0.5], [0.6, 1.0]),
                                   _piecewise("s0", [0, 0.5], [1.0, 1.5]), period=1.0,
                                   expected="extinct"),
    "piecewise_persistent_short": _scenario(0.5, _monod(3.0, 1.0),
                                            _piecewise("D", [0, 0.5], [0.5, 1.5]),
                                            _piecewise("s0", [0, 0.5], [1.0, 2.0]), period=1.0,
                                            expected="persistent"),
    "fourier_persistent": _scenario(0.5, _monod(4.0, 1.0), _const("D", 0.7),
                                    _fourier("s0", 1.0, cos=[0.3]), period=1.0,
                                    expected="persistent"),
    "fourier_extinct": _scenario(0.5, _monod(1.0, 2.0), _fourier("D", 1.0, cos=[0.3]),
                                 _fourier("s0", 1.0, sin=[0.2]), period=1.0, expected="extinct"),
    "fourier_persistent_nodelay": _scenario(0.0, _monod(2.0, 1.0), _fourier("D", 1.0, cos=[0.5]),
                                            _fourier("s0", 1.5, sin=[0.5]), period=1.0,
                                            expected="persistent"),
}


def standard_suite() -> dict:
    """Fresh copies of the standard scenarios, keyed by name."""
    return {name: sc.copy() for name, (sc, _) in _SUITE.items()}


def expected_fate(name: str) -> str:
    return _SUITE[name][1]


def scenario(name: str) -> Scenario:
    return _SUITE[name][0].copy()
