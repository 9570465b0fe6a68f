"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed input file; message carries the offending line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class IntegrityError(ValueError):
    """Input data violates a cross-file or uniqueness constraint."""


class SamplingError(RuntimeError):
    """Negative sampling could not satisfy its constraints."""


class TrainingError(RuntimeError):
    """Optimization produced non-finite values."""


class EvaluationError(ValueError):
    """Evaluation inputs are incomplete or inconsistent."""


class PipelineError(RuntimeError):
    """A pipeline stage failed; message names the stage and the cause."""
