from ..isa import Instr, Word, encode_instr
from .macros import ExpandedUnit


def emit(unit: ExpandedUnit, base: int) -> tuple[list[Word], dict[str, int]]:
    """
    Lays out an expanded unit starting at ``base``.

    Parameters
    ----------
    unit : ExpandedUnit
        Unit with macros and label references resolved
    base : int
        Address of the unit's first word

    Returns
    -------
    tuple[list[Word], dict[str, int]]
        Encoded words (word ``k`` belongs at ``base + k``) and the absolute
        address of every label
    """
    if base < 0:
        raise ValueError(f"Base address must be non-negative, got {base}")
    words = [encode_instr(item) if isinstance(item, Instr) else item for item in unit.items]
    symbols = {name: base + offset for name, offset in unit.labels.items()}
    return words, symbols
