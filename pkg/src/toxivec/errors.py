"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes: usage problems exit 1,
data/format problems exit 2, resource problems (network, disk) exit 3.
"""


class ToxivecError(Exception):
    """Base class for all toolkit errors."""


class UsageError(ToxivecError):
    """Bad command line or configuration input."""


class DataFormatError(ToxivecError):
    """Malformed input data: corpus dumps, model files, lexicon files."""

    def __init__(self, message: str, *, offset: int | None = None, line: int | None = None):
        super().__init__(message)
        self.offset = offset
        self.line = line


class ResourceError(ToxivecError):
    """Network or filesystem failure outside our control."""


class OOVError(ToxivecError):
    """Query word not in the model vocabulary."""

    def __init__(self, word: str, suggestions: list[str]):
        hint = f" (did you mean: {', '.join(suggestions)}?)" if suggestions else ""
        super().__init__(f"{word!r} is not in the vocabulary{hint}")
        self.word = word
        self.suggestions = suggestions


class TrainingDivergedError(ToxivecError):
    """A parameter matrix picked up a NaN/Inf during training."""
