"""Exception types shared across the package."""


class JointSEError(Exception):
    """Base class for all errors raised by jointse."""


class ParameterError(JointSEError, ValueError):
    """A parameter is outside its valid range or inconsistent with others."""


class EmptySignalError(ParameterError):
    pass


class StateError(JointSEError):
    """An object is in the wrong state for the requested operation."""


class DimensionError(JointSEError, ValueError):
    pass


class DomainError(JointSEError, ValueError):
    """A process time lies outside the allowed interval."""


class NumericError(JointSEError, ArithmeticError):
    """Non-finite values appeared during a computation."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class EnergyError(JointSEError, ValueError):
    """A signal that must carry energy is silent."""


class LengthError(JointSEError, ValueError):
    pass


class BudgetError(JointSEError, ValueError):
    def __init__(self, message: str, kind: str | None = None):
        super().__init__(message)
        self.kind = kind


class TrainingError(JointSEError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class EnhancementError(JointSEError):
    def __init__(self, message: str, utterance_id: str | None = None, stage: int | None = None):
        super().__init__(message)
        self.utterance_id = utterance_id
        self.stage = stage


class CheckpointError(JointSEError):
    pass


class MetricError(JointSEError, ValueError):
    pass
