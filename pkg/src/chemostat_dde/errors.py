"""Exception hierarchy for the chemostat package."""


class ChemostatError(Exception):
    """Base class for every error raised by this package."""


class AssumptionViolation(ChemostatError, ValueError):
    """A model ingredient breaks one of the standing hypotheses.

    ``assumption`` is ``"A1"`` for the uptake law and ``"A2"`` for the
    environment signals.
    """

    def __init__(self, assumption, message):
        self.assumption = assumption
        super().__init__(f"[{assumption}] {message}")


class PeriodMismatch(ChemostatError, ValueError):
    pass


class NotPeriodic(ChemostatError, ValueError):
    pass


class DegenerateDilution(ChemostatError, ValueError):
    pass


class StepNotDividingDelay(ChemostatError, ValueError):
    pass


class NegativeHistory(ChemostatError, ValueError):
    pass


class BlowUp(ChemostatError, ArithmeticError):
    pass


class OutOfRange(ChemostatError, ValueError):
    pass


class ZeroBiomass(ChemostatError, ArithmeticError):
    pass


class HorizonTooShort(ChemostatError, ValueError):
    pass


class GridTooLarge(ChemostatError, ValueError):
    """The requested run would need more nodes than the solver allows."""


class NoConvergence(ChemostatError, RuntimeError):
    def __init__(self, message, iterations=None, last_ratio=None):
        self.iterations = iterations
        self.last_ratio = last_ratio
        super().__init__(message)


class BoundViolated(ChemostatError, AssertionError):
    def __init__(self, t, lhs, rhs):
        self.t, self.lhs, self.rhs = t, lhs, rhs
        super().__init__(f"bound violated at t={t!r}: |phi-psi|={lhs!r} >= {rhs!r}")


class NotPersistent(ChemostatError, ValueError):
    pass


class ProbeFailed(ChemostatError, RuntimeError):
    def __init__(self, member, message, trajectory=None):
        self.member = member
        self.trajectory = trajectory
        super().__init__(f"member {member}: {message}")


class FitFailed(ChemostatError, RuntimeError):
    pass


class IdentityViolated(ChemostatError, AssertionError):
    pass


class ParseError(ChemostatError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line, self.column = line, column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class UnknownKey(ChemostatError, KeyError):
    def __init__(self, key, line=None):
        self.key, self.line = key, line
        super().__init__(f"unknown key {key!r}" + (f" (line {line})" if line else ""))

    def __str__(self):
        return self.args[0]


class ToleranceBreach(ChemostatError, AssertionError):
    def __init__(self, breaches):
        self.breaches = dict(breaches)
        names = ", ".join(sorted(self.breaches))
        super().__init__(f"residual above threshold for: {names}")
