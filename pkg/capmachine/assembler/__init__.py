from .emit import emit
from .macros import ExpandedUnit, ExpandOptions, expand
from .parser import AsmUnit, parse


def assemble(
    text: str, options: ExpandOptions | None = None, name: str = "main"
) -> ExpandedUnit:
    """Parses and expands assembly source in one go."""
    return expand(parse(text, name), options)


__all__ = [
    "AsmUnit",
    "ExpandOptions",
    "ExpandedUnit",
    "assemble",
    "emit",
    "expand",
    "parse",
]
