"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class DegeneracyError(ValueError):
    """A matrix row is numerically dependent on earlier rows."""


class EvaluationError(RuntimeError):
    """A numeric probe produced a non-finite value."""


class SchemaError(ValueError):
    """A file does not conform to its declared schema."""


class GeometryError(ValueError):
    """Model and data geometry (joints, window lengths) disagree."""


class TrainingError(RuntimeError):
    """Training cannot proceed (empty dataset, non-finite gradients)."""
