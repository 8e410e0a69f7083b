"""Exception hierarchy shared across the package."""


class SynGenError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SynGenError):
    """Operand shapes are incompatible for the requested operation."""


class RankError(SynGenError):
    """A scalar was required (e.g. backward from a non-scalar tensor)."""


class DegenerateMaskError(SynGenError):
    """A softmax slice had every entry masked out."""


class DeterminismError(SynGenError):
    """Two identical forward evaluations disagreed."""


class IncompleteBackwardError(SynGenError):
    """A trainable tensor reached the optimizer without a gradient."""


class ParseError(SynGenError):
    """A dataset line could not be parsed."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ValidationError(SynGenError):
    """A parsed record violates a structural invariant."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class IncompleteGoldError(SynGenError):
    """Gold annotations lack a field required by the chosen subtask."""


class ConfigurationError(SynGenError):
    """Mutually inconsistent or missing configuration."""


class IncompatibilityError(SynGenError):
    """Checkpoint and data (or two checkpoints) do not fit together."""


class DivergedTrainingError(SynGenError):
    """Loss became non-finite during training."""

    def __init__(self, epoch, step, message="loss is not finite"):
        super().__init__(f"epoch {epoch}, step {step}: {message}")
        self.epoch = epoch
        self.step = step
