"""Exception hierarchy for the patk package.

Every failure mode callers are expected to handle gets its own class so
that tests and services can discriminate without string matching.
"""


class PatkError(Exception):
    """Base class for all patk errors."""


# --- container IO -----------------------------------------------------------

class ContainerError(PatkError):
    """Base class for container read/write failures."""


class BadMagicError(ContainerError):
    """File does not start with the expected container magic."""


class TruncatedPayloadError(ContainerError):
    """File ends before the declared header or payload is complete."""


class PayloadSizeMismatchError(ContainerError):
    """Payload byte count disagrees with the dimensions in the header."""


class HeaderError(ContainerError):
    """Header is not parseable or is missing required keys."""


class NonFiniteValueError(ContainerError):
    """Payload contains NaN or infinite values."""


class MaskLabelError(ContainerError):
    """Mask labels violate the binary / dense-multilabel contract."""


# --- geometry / data shape --------------------------------------------------

class GridMismatchError(PatkError):
    """Two rasters that must share a grid do not."""


class ChannelCountMismatchError(PatkError):
    """Channel data and array geometry disagree on element count."""


class ChannelIndexError(PatkError):
    """Channel subset indices are out of range or not strictly increasing."""


# --- simulation -------------------------------------------------------------

class RecordTooShortError(PatkError):
    """Sample record cannot hold the farthest source's full pulse."""


class SourceOutsideGridError(PatkError):
    """A phantom source lies outside the stated grid extent."""


# --- segmentation / fitting -------------------------------------------------

class DegenerateImageError(PatkError):
    """Image has no usable contrast; no threshold can be computed."""


class DegenerateMaskError(PatkError):
    """Mask foreground is too small or collinear; no ellipse fit exists."""


class PromptError(PatkError):
    """Prompt list violates the request contract."""


# --- remote segmentation protocol --------------------------------------------

class ProtocolError(PatkError):
    """Base class for segmentation wire-protocol failures."""


class TransportError(ProtocolError):
    """The backend could not be reached or the connection failed."""


class MalformedResponseError(ProtocolError):
    """Backend response does not match the protocol schema."""


class MaskDimensionMismatchError(ProtocolError):
    """Backend mask dimensions differ from the request image."""


class BackendError(ProtocolError):
    """Structured error reported by the backend, surfaced verbatim."""

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code
        self.message = message


# --- pipeline / service -----------------------------------------------------

class ConfigError(PatkError):
    """Pipeline configuration document is invalid."""


class PipelineStageError(PatkError):
    """A pipeline stage failed; carries the stage name and cause."""

    def __init__(self, stage: str, cause: Exception | str):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class JobCancelledError(PatkError):
    """A long-running job observed its cancellation flag."""
