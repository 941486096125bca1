"""Error types for the export tool."""


class ExportConfigError(ValueError):
    """A job or model identifier is malformed."""


class ExportDataError(ValueError):
    """Input rows, the provider, or the filesystem broke mid-export."""
