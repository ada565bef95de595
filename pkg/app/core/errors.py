# app/core/errors.py
"""
Exception hierarchy shared by every pipeline stage.

Stage boundaries (corpus scan, per page, per region, per document) catch
PipelineError subclasses, log them and record an Issue; only ConfigError is
allowed to stop a run.
"""


class PipelineError(Exception):
    """Base class for all errors raised by the pipeline."""


class ConfigError(PipelineError):
    """Invalid or missing configuration (CLI exit code 1)."""


class PreconditionError(PipelineError, ValueError):
    """An operation was called outside its documented input domain."""


class DomainError(PipelineError, ValueError):
    """Geochemical input outside the domain of a formula."""


class UndefinedModelAgeError(DomainError):
    """Model age logarithm argument is not positive, or its denominator vanishes."""


class AdapterError(PipelineError):
    """An external adapter (renderer, OCR, detector) failed or timed out."""


class ProtocolError(AdapterError):
    """An external adapter answered with a malformed message."""


class RenderError(PipelineError):
    """A page could not be rasterised."""


class EmptyInventoryError(PipelineError):
    """No text spans were available to compute text metrics."""


class EmptyTableError(PipelineError):
    """A table region contains no ink rows."""


class DegenerateRegionError(PipelineError, ValueError):
    """A raster region is too small to binarise."""


class DegradeToBorderless(PipelineError):
    """Bordered recognition could not find a grid; use the borderless procedure."""


class InsufficientDataError(PipelineError, ValueError):
    """A report was requested over too few (or degenerate) values."""
