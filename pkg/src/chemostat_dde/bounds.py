"""Explicit constants used by the persistence and orbit arguments."""
from __future__ import annotations

import numpy as np

from .model import ChemostatModel


def proof_constants(model: ChemostatModel, n: int = 10_000) -> dict:
    """``M = max(p(2 s_up), 1 / (4 tau + 1))`` and ``L = max p'`` on ``[0, 2 s_up]``.

    ``L`` is a grid maximum over ``n`` points.
    """
    s2 = 2.0 * model.s_upper
    M = max(model.p.value(s2), 1.0 / (4.0 * model.tau + 1.0))
    L = float(np.max(model.p.derivative(np.linspace(0.0, s2, n))))
    return {"M": float(M), "L": L}


def containment_radius(model: ChemostatModel, z0: float) -> float:
    """Radius ``R0 = z*(0) + 7 s_up + 3 s_up p(3 s_up) tau`` bounding Poincare iterates."""
    s = model.s_upper
    return float(z0 + 6 * s + 3 * s * model.p.value(3 * s) * model.tau + s)


def contraction_bound(t, t0, M, tau, inf_f):
    """``3 M sqrt((t - t0) / inf f) (1 - exp(-M tau))^((t - t0) / (2 tau) - 1/2)``."""
    dt = np.asarray(t, dtype=float) - t0
    return 3 * M * np.sqrt(dt / inf_f) * (1 - np.exp(-M * tau)) ** (dt / (2 * tau) - 0.5)
