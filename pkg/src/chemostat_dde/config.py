"""Scenario files: ``key = value`` lines with dotted keys.

Grammar (one entry per line, ``#`` starts a comment)::

    line   := key "=" value
    key    := [A-Za-z0-9_.]+            one of the keys in KEYS
    value  := number | string | list
    number := int or float literal (``1``, ``0.5``, ``2e-3``)
    string := "..." or '...'           (backslash escapes the quote)
    list   := number "," number ...    (a trailing comma makes a one-item list)

Unknown keys are errors. :meth:`Scenario.dumps` writes a canonical form
that parses back to an identical scenario.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, UnknownKey
from .model import ChemostatModel, HistorySegment, make_model

_SIGNAL_KEYS = ("kind", "value", "breakpoints", "values", "period", "mean", "cos", "sin", "t",
                "interpolation")

# key -> expected type: "num", "int", "str", "list" (list also accepts a single number)
KEYS = {
    "model.tau": "num",
    "model.period": "num",
    "p.kind": "str",
    "p.m": "num",
    "p.K": "num",
    "p.k": "num",
    "p.s": "list",
    "p.values": "list",
    **{f"{sig}.{k}": ("str" if k in ("kind", "interpolation") else
                      "list" if k in ("breakpoints", "values", "cos", "sin", "t") else "num")
       for sig in ("D", "s0") for k in _SIGNAL_KEYS},
    "history.s": "list",
    "history.x": "list",
    "run.n": "int",
    "run.h": "num",
    "run.horizon": "num",
    "run.tol_orbit": "num",
    "run.max_periods": "int",
    "run.tol_phi": "num",
    "run.tolerance_band": "num",
    "run.eta": "num",
    "run.T": "num",
    "run.ensemble": "int",
    "run.seed": "int",
    "run.x_min": "num",
    "run.x_max": "num",
    "run.perturbations": "list",
    "run.accelerate": "int",
    "run.workers": "int",
    "run.out": "str",
    "sweep.param": "str",
    "sweep.from": "num",
    "sweep.to": "num",
    "sweep.steps": "int",
}

_KEY = re.compile(r"[A-Za-z0-9_.]+")
_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_INT = re.compile(r"[+-]?\d+")


def _parse_number(text):
    if _INT.fullmatch(text):
        return int(text)
    if _NUMBER.fullmatch(text):
        return float(text)
    return None


def _split_comment(line):
    """Strip a trailing ``#`` comment that is not inside quotes."""
    quote = None
    escaped = False
    for i, ch in enumerate(line):
        if escaped:
            escaped = False
        elif ch == "\\" and quote:
            escaped = True
        elif quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def parse_value(text, line=None, column=None):
    """Parse one value; raises :class:`ParseError` on malformed input."""
    raw = text.strip()
    if not raw:
        raise ParseError("missing value", line, column)
    if raw[0] in "\"'":
        q = raw[0]
        out, i = [], 1
        while i < len(raw):
            ch = raw[i]
            if ch == "\\" and i + 1 < len(raw):
                out.append(raw[i + 1])
                i += 2
                continue
            if ch == q:
                if raw[i + 1:].strip():
                    raise ParseError("unexpected text after string", line, column)
                return "".join(out)
            out.append(ch)
            i += 1
        raise ParseError("unterminated string", line, column)
    if "," in raw:
        parts = raw.split(",")
        if parts[-1].strip() == "":
            parts = parts[:-1]
        items = []
        offset = 0
        for part in parts:
            num = _parse_number(part.strip())
            if num is None:
                lead = len(text) - len(text.lstrip())
                col = None if column is None else column + text.find(part.strip(), offset) - lead
                raise ParseError(f"list item {part.strip()!r} is not a number", line, col)
            items.append(float(num))
            offset += len(part) + 1
        if not items:
            raise ParseError("empty list", line, column)
        return items
    num = _parse_number(raw)
    if num is None:
        raise ParseError(f"cannot parse value {raw!r} (strings must be quoted)", line, column)
    return num


def _check_type(key, value, line=None, column=None):
    kind = KEYS[key]
    if kind == "str" and not isinstance(value, str):
        raise ParseError(f"{key} expects a quoted string", line, column)
    if kind in ("num", "int") and not isinstance(value, (int, float)):
        raise ParseError(f"{key} expects a number", line, column)
    if kind == "int" and not (isinstance(value, int) or float(value).is_integer()):
        raise ParseError(f"{key} expects an integer", line, column)
    if kind == "list" and isinstance(value, str):
        raise ParseError(f"{key} expects a number or a comma-separated list", line, column)
    if kind == "int":
        return int(value)
    return value


def _format(value):
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, list):
        body = ", ".join(repr(float(v)) for v in value)
        return body + ("," if len(value) == 1 else "")
    if isinstance(value, int):
        return repr(value)
    return repr(float(value))


@dataclass
class Scenario:
    """Validated key/value configuration of one run."""

    values: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = _split_comment(line)
            if not body.strip():
                continue
            if "=" not in body:
                raise ParseError("expected 'key = value'", lineno, len(body) - len(body.lstrip()) + 1)
            left, right = body.split("=", 1)
            key = left.strip()
            key_col = len(left) - len(left.lstrip()) + 1
            if not _KEY.fullmatch(key):
                raise ParseError(f"malformed key {key!r}", lineno, key_col)
            if key not in KEYS:
                raise UnknownKey(key, lineno)
            val_col = len(left) + 2 + (len(right) - len(right.lstrip()))
            value = parse_value(right, lineno, val_col)
            values[key] = _check_type(key, value, lineno, val_col)
        return cls(values)

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())

    def dumps(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.values.items())

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    def copy(self) -> "Scenario":
        return Scenario({k: (list(v) if isinstance(v, list) else v) for k, v in self.values.items()})

    def set(self, key, value):
        if key not in KEYS:
            raise UnknownKey(key)
        self.values[key] = _check_type(key, value)
        return self

    def override(self, assignment: str) -> "Scenario":
        """Apply ``key=value``; unquoted words are taken as strings for string keys."""
        if "=" not in assignment:
            raise ParseError(f"override {assignment!r} is not key=value")
        key, raw = (s.strip() for s in assignment.split("=", 1))
        if key not in KEYS:
            raise UnknownKey(key)
        if KEYS[key] == "str" and raw and raw[0] not in "\"'":
            value = raw
        else:
            value = parse_value(raw)
        self.values[key] = _check_type(key, value)
        return self

    def get(self, key, default=None):
        return self.values.get(key, default)

    def __contains__(self, key):
        return key in self.values

    def _group(self, prefix):
        n = len(prefix) + 1
        return {k[n:]: v for k, v in self.values.items() if k.startswith(prefix + ".")}

    def model(self) -> ChemostatModel:
        tau = self.get("model.tau", 0.0)
        parts = {}
        for name in ("p", "D", "s0"):
            spec = self._group(name)
            if "kind" not in spec:
                raise ParseError(f"missing {name}.kind")
            for k in ("breakpoints", "values", "cos", "sin", "t", "s"):
                if k in spec:
                    spec[k] = np.atleast_1d(np.asarray(spec[k], dtype=float)).tolist()
            parts[name] = spec
        return make_model(tau, parts["p"], parts["D"], parts["s0"], self.get("model.period"))

    def history(self, model: ChemostatModel, n=None) -> HistorySegment | None:
        """Initial segment from ``history.s``/``history.x`` (constants or uniform samples)."""
        if "history.s" not in self and "history.x" not in self:
            return None
        s = np.atleast_1d(np.asarray(self.get("history.s", 0.5 * model.s_upper), dtype=float))
        x = np.atleast_1d(np.asarray(self.get("history.x", 0.5 * model.s_upper), dtype=float))
        if model.tau == 0:
            return HistorySegment(0.0, 0.0, s[-1:], x[-1:])
        k = max(len(s), len(x))
        if k == 1:
            return HistorySegment.constant(float(s[0]), float(x[0]), model.tau, 0.0, n or 16)
        grid = np.linspace(0.0, 1.0, k)

        def expand(v):
            return np.full(k, v[0]) if len(v) == 1 else np.interp(grid, np.linspace(0, 1, len(v)), v)
        return HistorySegment(0.0, model.tau, expand(s), expand(x))
