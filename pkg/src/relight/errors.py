"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3, any
other RelightError (or unexpected exception) -> 4.
"""


class RelightError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(RelightError):
    """Invalid configuration value, flag combination, or config file."""


class DataError(RelightError):
    """Dataset, manifest, or file I/O problem. Message carries path context."""


class SchemaVersionError(DataError):
    """Manifest or checkpoint schema_version does not match this build."""


class LightVariantError(ConfigError):
    """Light input does not match the model's configured light variant."""


class RenderError(RelightError):
    """Degenerate scene or failed sampling inside the renderer."""
