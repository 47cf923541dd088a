"""Exception hierarchy shared by all simulator components."""


class AbisimError(Exception):
    """Base class for every error raised by this package."""


class RangeError(AbisimError):
    """A value falls outside the legal range of its field."""


class ConfigError(AbisimError):
    """Inconsistent or unknown engine configuration."""


class AddressError(AbisimError):
    """Bank or word index out of range."""


class ResolutionError(AbisimError):
    """Operand magnitude does not fit in the configured bit width."""


class DivideByZeroError(AbisimError):
    """Scaler enabled with a zero divisor."""


class EmptyValueError(AbisimError):
    """No set bit to find, or an empty input vector."""


class AccumulatorOverflowError(AbisimError):
    """A 32-bit accumulator would overflow; wraparound is never silent."""


class SchemaError(AbisimError):
    """A JSON document does not match its strict schema."""


class ComparisonError(AbisimError):
    """Reports being compared do not come from the same workload/seed."""


class AssemblyError(AbisimError):
    """Base for assembler diagnostics; carries a 1-based source line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownOpcode(AssemblyError):
    pass


class BadOperand(AssemblyError):
    pass


class UnterminatedProgram(AssemblyError):
    """Program does not end with HALT."""


class ExecutionError(AbisimError):
    """Runtime failure; carries the instruction index and an engine snapshot."""

    def __init__(self, message: str, index: int, snapshot: dict | None = None):
        self.index = index
        self.snapshot = snapshot or {}
        super().__init__(f"instruction {index}: {message}")
