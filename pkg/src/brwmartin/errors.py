"""Exception types shared across the package."""


class BRWError(Exception):
    """Base class for all errors raised by brwmartin."""


class EncodingError(BRWError, ValueError):
    """A state or boundary point does not belong to the chain."""


class DomainError(BRWError, ValueError):
    """Arguments outside the domain of an operation."""


class ConfigError(BRWError, ValueError):
    """Invalid configuration (suite, observer or config-file level)."""

    def __init__(self, message, key=None, line=None):
        self.message = message
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ClosedFormUnavailable(BRWError, LookupError):
    """No closed form is shipped for this quantity; use the Monte-Carlo estimator."""


class ConvergenceError(BRWError, RuntimeError):
    def __init__(self, message, last=None, gap=None):
        self.last = last
        self.gap = gap
        super().__init__(f"{message} (last iterate {last!r}, gap {gap!r})")


class PopulationOverflow(BRWError, OverflowError):
    def __init__(self, generation, total, cap):
        self.generation = generation
        self.total = total
        self.cap = cap
        super().__init__(
            f"population of {total} particles at generation {generation} exceeds cap {cap}"
        )
