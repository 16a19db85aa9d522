"""Exception types shared across the toolkit."""


class SiseError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(SiseError, ValueError):
    """Input violates an operation's preconditions (shape, range, rate)."""


class InvalidGeometry(SiseError, ValueError):
    """Spectrogram geometry is unusable (e.g. NOLA violated)."""


class DegenerateInput(SiseError, ValueError):
    """Input is degenerate for the requested computation (e.g. zero energy)."""


class InsufficientPool(SiseError, ValueError):
    """A noise or babble source pool is too small for the request."""


class ContaminatedEvaluation(SiseError, RuntimeError):
    """Test-set noise pool overlaps the training pool."""


class IncompatibleCheckpoint(SiseError, RuntimeError):
    """Checkpoint does not match the requested model configuration."""


class InvalidState(SiseError, RuntimeError):
    """Operation requires state that is missing (e.g. a prior-stage checkpoint)."""


class CorruptEntry(SiseError, RuntimeError):
    """A manifest entry's audio and track are inconsistent."""


class ScorerError(SiseError, RuntimeError):
    """An external metric scorer failed; diagnostics attached to the message."""
