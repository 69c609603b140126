"""Exception types shared across the package."""


class LatticeCNNError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(LatticeCNNError):
    """Invalid configuration.

    ``problems`` carries every validation failure found, so a caller can
    report them all at once instead of one per run.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DataError(LatticeCNNError):
    """Malformed input data (files, segmentations, lattices)."""


class ShapeError(LatticeCNNError, ValueError):
    """Operands of a tensor op have incompatible shapes."""


class CheckpointError(LatticeCNNError):
    """A checkpoint is unreadable or does not match the model configuration."""


class TrainingError(LatticeCNNError):
    """Training diverged (non-finite loss) or cannot proceed."""
