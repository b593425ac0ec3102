class AssemblyError(ValueError):
    """Raised for malformed assembly source or invalid macro use."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class LinkError(ValueError):
    """Raised when objects cannot be combined into a system image."""


class ImageError(ValueError):
    """Raised for malformed image files or failed lookups in a linked image."""
