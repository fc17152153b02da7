"""Exception types shared across the package."""


class LoraKeyError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(LoraKeyError, ValueError):
    """A model or experiment parameter violates its invariant."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}")


class ParameterError(LoraKeyError, ValueError):
    pass


class DomainError(LoraKeyError, ValueError):
    pass


class AlignmentError(LoraKeyError, ValueError):
    """Sequences that must be index-aligned have different lengths."""


class UndefinedCorrelationError(LoraKeyError, ValueError):
    """Pearson correlation requested for a zero-variance sequence."""


class AttackUndefinedError(LoraKeyError, ValueError):
    pass


class DegenerateEntropyError(LoraKeyError, ValueError):
    pass


class TraceParseError(LoraKeyError, ValueError):
    def __init__(self, line: int, message: str) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}")


class TraceSchemaError(LoraKeyError, ValueError):
    pass


class SequenceLengthError(LoraKeyError, ValueError):
    """Bit sequence too short for a randomness test."""

    def __init__(self, test: str, n: int, minimum: int) -> None:
        self.test = test
        super().__init__(f"{test}: needs at least {minimum} bits, got {n}")
