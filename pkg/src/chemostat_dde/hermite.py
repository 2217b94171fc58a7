"""Piecewise cubic Hermite curves with one-sided node derivatives."""
from __future__ import annotations

import numpy as np


class PiecewiseHermite:
    """Cubic Hermite interpolant through ``(t_i, v_i)``.

    Interval ``[t_i, t_{i+1}]`` uses the right-limit derivative ``d_right[i]``
    and the left-limit derivative ``d_left[i+1]``, so derivative jumps at
    nodes are represented exactly. ``values`` may carry several channels in
    its trailing axis. With ``period`` set, evaluation wraps ``t`` into
    ``[t_0, t_0 + period)``.
    """

    def __init__(self, t, values, d_right, d_left=None, period=None):
        self.t = np.asarray(t, dtype=float)
        self.v = np.asarray(values, dtype=float)
        self.dr = np.asarray(d_right, dtype=float)
        self.dl = self.dr if d_left is None else np.asarray(d_left, dtype=float)
        if len(self.t) < 2:
            raise ValueError("need at least two nodes")
        self.period = period

    @property
    def domain(self):
        return float(self.t[0]), float(self.t[-1])

    def _locate(self, tq):
        tq = np.asarray(tq, dtype=float)
        if self.period is not None:
            tq = self.t[0] + np.mod(tq - self.t[0], self.period)
        i = np.searchsorted(self.t, tq, side="right") - 1
        i = np.clip(i, 0, len(self.t) - 2)
        h = self.t[i + 1] - self.t[i]
        th = (tq - self.t[i]) / h
        return i, h, th

    def __call__(self, tq, derivative=False):
        i, h, th = self._locate(tq)
        if self.v.ndim > 1:
            h = h[..., None]
            th = th[..., None]
        y0, y1 = self.v[i], self.v[i + 1]
        d0, d1 = self.dr[i], self.dl[i + 1]
        if derivative:
            return ((6 * th * th - 6 * th) * (y0 - y1) / h + (3 * th * th - 4 * th + 1) * d0
                    + (3 * th * th - 2 * th) * d1)
        return ((1 + 2 * th) * (1 - th) ** 2 * y0 + th * (1 - th) ** 2 * h * d0
                + th * th * (3 - 2 * th) * y1 + th * th * (th - 1) * h * d1)

    def midpoints(self):
        """Values at every interval midpoint (closed form of the cubic at 1/2)."""
        h = np.diff(self.t)
        if self.v.ndim > 1:
            h = h[:, None]
        return 0.5 * (self.v[:-1] + self.v[1:]) + h * (self.dr[:-1] - self.dl[1:]) / 8.0


def simpson_cumulative(h, f_nodes, f_mid):
    """Running integral over nodes from node values and interval-midpoint values."""
    h = np.broadcast_to(np.asarray(h, dtype=float), np.shape(f_mid))
    pieces = h / 6.0 * (f_nodes[:-1] + 4.0 * f_mid + f_nodes[1:])
    return np.concatenate(([0.0], np.cumsum(pieces)))
