"""Exception types shared across the package."""


class SizeError(ValueError):
    """Dimension or qubit-count mismatch."""


class ValidityError(ValueError):
    """Input that is structurally wrong (non-unitary gate, non-symplectic tableau, ...)."""


class DomainError(ValueError):
    """Arguments outside the region where a formula applies."""


class UnsupportedError(ValueError):
    """Operation not defined for this kind of object."""


class CompatibilityError(ValueError):
    """Datasets or models generated under different settings were mixed."""


class ParseError(ValueError):
    """Malformed dataset or model file."""


class TrainingDivergedError(ArithmeticError):
    def __init__(self, epoch: int, message: str = "loss became non-finite"):
        super().__init__(f"{message} at epoch {epoch}")
        self.epoch = epoch
