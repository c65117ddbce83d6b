"""Exception types shared across the engine."""


class StreamPaintError(Exception):
    """Base class for all engine errors."""


class ParameterError(StreamPaintError):
    """Invalid scalar argument or configuration value."""


class ShapeError(StreamPaintError):
    """Array arguments with incompatible or invalid shapes."""


class EmptyMaskError(StreamPaintError):
    """Mask operation that requires at least one covered pixel."""


class ConditioningError(StreamPaintError):
    """Unknown conditioning id or mismatched embedding size."""


class BackendError(StreamPaintError):
    """Denoiser backend failure (timeout, protocol violation, dead socket)."""


class AggregationError(StreamPaintError):
    """A canvas pixel ended a step with zero total blend weight."""


class NumericError(StreamPaintError):
    """Non-finite values detected in the latent canvas."""


class CommandError(StreamPaintError):
    """Malformed stream command; the pipeline keeps running."""


class SceneError(StreamPaintError):
    """Scene file cannot be parsed, validated, or migrated."""
