"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or inconsistent inputs.

    ``path`` names the offending field (dotted, e.g. ``agents.0.talkativeness``)
    when one is known.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class UsageError(ValueError):
    """A metric or helper was called with arguments outside its domain."""


class TraceFormatError(ValueError):
    """A trace file could not be parsed."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")
