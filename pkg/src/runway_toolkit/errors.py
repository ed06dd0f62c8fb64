"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class GeometryError(ToolkitError):
    """Raised when a geometric operation receives degenerate input."""


class FormatError(ToolkitError):
    """Raised when an annotation / mask file is malformed or inconsistent."""
