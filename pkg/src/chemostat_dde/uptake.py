"""Substrate uptake laws ``p(s)``.

Every law exposes a fast scalar path (``value``/``slope``, used inside the
integrator loop) and a vectorised ``__call__``/``derivative`` pair.
"""
from __future__ import annotations

import bisect

import numpy as np

from .errors import AssumptionViolation
from .signals import check_params


class UptakeFunction:
    kind = "abstract"

    def value(self, s: float) -> float:
        raise NotImplementedError

    def slope(self, s: float) -> float:
        raise NotImplementedError

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if s.ndim == 0:
            return self.value(float(s))
        return np.array([self.value(v) for v in s.ravel()]).reshape(s.shape)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        if s.ndim == 0:
            return self.slope(float(s))
        return np.array([self.slope(v) for v in s.ravel()]).reshape(s.shape)

    def scaled(self, factor: float) -> "UptakeFunction":
        raise NotImplementedError

    def check(self, s_max: float, n: int = 1000) -> None:
        """Raise :class:`AssumptionViolation` unless p(0)=0 and p' > 0 on [0, s_max]."""
        if self.value(0.0) != 0.0:
            raise AssumptionViolation("A1", f"p(0) = {self.value(0.0)!r}, expected 0")
        grid = np.linspace(0.0, s_max, n)
        slopes = self.derivative(grid)
        if not np.all(slopes > 0):
            bad = grid[np.argmin(slopes)]
            raise AssumptionViolation("A1", f"p' is not positive at s={bad:.6g}")


class Monod(UptakeFunction):
    """``p(s) = m s / (K + s)``."""

    kind = "monod"

    def __init__(self, m: float, K: float):
        if not (m > 0 and K > 0):
            raise AssumptionViolation("A1", f"Monod needs m > 0 and K > 0, got m={m}, K={K}")
        self.m = float(m)
        self.K = float(K)

    def value(self, s):
        return self.m * s / (self.K + s)

    def slope(self, s):
        d = self.K + s
        return self.m * self.K / (d * d)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.m * s / (self.K + s)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        return self.m * self.K / (self.K + s) ** 2

    def inverse(self, u):
        """Substrate level at which the uptake rate equals ``u`` (needs u < m)."""
        if not 0 <= u < self.m:
            raise ValueError(f"rate {u} outside the range [0, {self.m}) of the Monod law")
        return self.K * u / (self.m - u)

    def scaled(self, factor):
        return Monod(self.m * factor, self.K)

    def __repr__(self):
        return f"Monod(m={self.m!r}, K={self.K!r})"


class Linear(UptakeFunction):
    """``p(s) = k s``."""

    kind = "linear"

    def __init__(self, k: float):
        if not k > 0:
            raise AssumptionViolation("A1", f"linear uptake needs k > 0, got {k}")
        self.k = float(k)

    def value(self, s):
        return self.k * s

    def slope(self, s):
        return self.k

    def __call__(self, s):
        return self.k * np.asarray(s, dtype=float)

    def derivative(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.k)

    def inverse(self, u):
        return u / self.k

    def scaled(self, factor):
        return Linear(self.k * factor)

    def __repr__(self):
        return f"Linear(k={self.k!r})"


def monotone_slopes(x, y):
    """Node derivatives for a shape-preserving cubic through increasing data.

    Interior slopes are harmonic means of the neighbouring secants
    (Fritsch-Butland), so they stay within (0, 2*min secant]. End slopes use
    the one-sided three-point formula clipped into the same range, which keeps
    every node derivative strictly positive.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hx = np.diff(x)
    delta = np.diff(y) / hx
    d = np.empty_like(y)
    if len(x) == 2:
        d[:] = delta[0]
        return d
    d[1:-1] = 2.0 * delta[:-1] * delta[1:] / (delta[:-1] + delta[1:])

    def end(h0, h1, d0, d1):
        v = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        return min(max(v, 0.5 * d0), 2.0 * d0)

    d[0] = end(hx[0], hx[1], delta[0], delta[1])
    d[-1] = end(hx[-1], hx[-2], delta[-1], delta[-2])
    return d


class Tabulated(UptakeFunction):
    """Monotone cubic Hermite through a strictly increasing table.

    The table must start at ``(0, 0)``. Beyond the last sample the law is
    continued linearly with the end slope, which keeps ``p' > 0`` on the
    whole half-line.
    """

    kind = "tabulated"

    def __init__(self, s, values):
        s = np.asarray(s, dtype=float)
        v = np.asarray(values, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or len(s) < 2:
            raise AssumptionViolation("A1", "table needs two equally long 1-d arrays (>= 2 rows)")
        if s[0] != 0.0 or v[0] != 0.0:
            raise AssumptionViolation("A1", "table must start at (0, 0) so that p(0) = 0")
        if np.any(np.diff(s) <= 0):
            raise AssumptionViolation("A1", "table abscissae must be strictly increasing")
        if np.any(np.diff(v) <= 0):
            i = int(np.argmax(np.diff(v) <= 0))
            raise AssumptionViolation(
                "A1", f"table values not increasing between s={s[i]:g} and s={s[i + 1]:g}"
            )
        self.s = s
        self.values = v
        self.slopes = monotone_slopes(s, v)
        self._s = s.tolist()
        self._v = v.tolist()
        self._d = self.slopes.tolist()

    def _locate(self, x):
        i = bisect.bisect_right(self._s, x) - 1
        return min(max(i, 0), len(self._s) - 2)

    def value(self, x):
        if x >= self._s[-1]:
            return self._v[-1] + self._d[-1] * (x - self._s[-1])
        if x <= 0.0:
            return self._d[0] * x
        i = self._locate(x)
        h = self._s[i + 1] - self._s[i]
        t = (x - self._s[i]) / h
        t2 = t * t
        t3 = t2 * t
        return ((2 * t3 - 3 * t2 + 1) * self._v[i] + (t3 - 2 * t2 + t) * h * self._d[i]
                + (-2 * t3 + 3 * t2) * self._v[i + 1] + (t3 - t2) * h * self._d[i + 1])

    def slope(self, x):
        if x >= self._s[-1]:
            return self._d[-1]
        if x <= 0.0:
            return self._d[0]
        i = self._locate(x)
        h = self._s[i + 1] - self._s[i]
        t = (x - self._s[i]) / h
        t2 = t * t
        return ((6 * t2 - 6 * t) * self._v[i] / h + (3 * t2 - 4 * t + 1) * self._d[i]
                + (-6 * t2 + 6 * t) * self._v[i + 1] / h + (3 * t2 - 2 * t) * self._d[i + 1])

    def scaled(self, factor):
        return Tabulated(self.s, self.values * factor)

    def __repr__(self):
        return f"Tabulated(s={self._s!r}, values={self._v!r})"


_UPTAKE_PARAMS = {
    "monod": ({"m", "K"}, set()),
    "linear": ({"k"}, set()),
    "tabulated": ({"s", "values"}, set()),
}


def make_uptake(kind: str, **params) -> UptakeFunction:
    kind = kind.lower()
    check_params("uptake", kind, params, _UPTAKE_PARAMS)
    if kind == "monod":
        return Monod(params["m"], params["K"])
    if kind == "linear":
        return Linear(params["k"])
    if kind == "tabulated":
        return Tabulated(params["s"], params["values"])
    raise ValueError(f"unknown uptake kind {kind!r}")
