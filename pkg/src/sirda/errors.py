"""Exception hierarchy shared by every module in the package."""


class SirdaError(Exception):
    """Base class for all package errors."""


class ConfigError(SirdaError, ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericalError(SirdaError):
    """Base for failures raised while integrating or filtering.

    ``step`` and ``member`` are filled in by callers that know them.
    """

    def __init__(self, message, step=None, member=None):
        self.step = step
        self.member = member
        super().__init__(message)

    def __str__(self):
        base = super().__str__()
        ctx = []
        if self.step is not None:
            ctx.append(f"step={self.step}")
        if self.member is not None:
            ctx.append(f"member={self.member}")
        return f"{base} ({', '.join(ctx)})" if ctx else base


class StepSizeUnderflow(NumericalError):
    pass


class NonConvergence(NumericalError):
    def __init__(self, message, last_change=None, **kwargs):
        self.last_change = last_change
        super().__init__(message, **kwargs)


class SingularInnovation(NumericalError):
    pass


class DegenerateInnovation(NumericalError):
    pass


class DomainError(SirdaError, ValueError):
    pass


class AccumulatorUnset(SirdaError, RuntimeError):
    pass


class LengthMismatch(SirdaError, ValueError):
    pass


class MissingSeries(SirdaError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing series"
