"""Exception types shared across the package."""


class FlexIDError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(FlexIDError):
    """Tensor shapes are incompatible for the requested operation."""


class ValidationError(FlexIDError):
    """An argument or value violates a documented precondition."""


class ConfigError(ValidationError):
    """A configuration is internally inconsistent or infeasible."""


class ContractError(FlexIDError):
    """An API was used in a way its contract forbids."""


class DictionaryParseError(ValidationError):
    """The edit dictionary file is malformed.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class IdentityLookupError(FlexIDError, LookupError):
    """A reference names an identity index the world does not contain."""


class TrainingDivergedError(FlexIDError):
    """Training produced a non-finite loss.  Carries the step index."""

    def __init__(self, step: int):
        super().__init__(f"non-finite loss at training step {step}")
        self.step = step
