"""Exception hierarchy shared across the package."""


class RubricError(Exception):
    """Base class for every error raised by rubriclearn."""


class InputError(RubricError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(RubricError, ArithmeticError):
    """A factorization failed even after regularization."""


class ConfigError(RubricError):
    """Invalid configuration or rejected credentials (never retried)."""


class TransportError(RubricError):
    """Backend unreachable, or retries exhausted."""


class ScriptExhaustedError(TransportError):
    """A scripted mock backend ran out of responses."""


class ProtocolError(RubricError):
    """The backend answered with a body we cannot interpret."""


class GenerationError(RubricError):
    """No usable ``<rubrics>`` block after the allowed re-ask."""


class JudgmentError(RubricError):
    """No parseable ``<preference>`` verdict after the allowed re-ask."""


class StructuringError(RubricError):
    """Theme-Tips output violated its structure after the corrective re-ask."""


class CheckpointError(RubricError):
    """Checkpoint file is corrupt or was written by an incompatible version."""
