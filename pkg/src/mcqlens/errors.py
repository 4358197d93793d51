"""Exception types shared across the toolkit."""


class McqLensError(Exception):
    """Base class for every error raised by this package."""


class ParseError(McqLensError):
    """A line of an input file is malformed or fails a schema check."""

    def __init__(self, path, line: int, reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")


class IntegrityError(McqLensError):
    """Cross-record inconsistency: duplicate ids, conflicting arities."""


class CoverageError(McqLensError):
    """A score log or dynamics file does not fully cover its dataset."""


class ConfigError(McqLensError):
    """Invalid or missing configuration (templates, presets, thresholds)."""


class SynthesisError(McqLensError):
    """Distractor sampling could not satisfy its constraints."""


class ArityError(McqLensError):
    """The operation needs more options per pair than the data provides."""
