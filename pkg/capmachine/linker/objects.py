"""Relocatable components and their text format."""

from collections.abc import Sequence
from dataclasses import dataclass, field, replace
import logging

from ..assembler import AsmUnit, ExpandedUnit, ExpandOptions, emit, expand
from ..errors import LinkError
from ..isa import OFFSET_LINK_FLAG, Perm, Word, format_word, parse_word

logger = logging.getLogger(__name__)


@dataclass
class ObjectImage:
    """
    An assembled component ready for linking

    Attributes
    ----------
    name : str
        Component name
    code : list[Word]
        Code words relative to the component base; offsets 0 and 1 are the
        header cells filled by the linker
    imports : list[str]
        Imported symbols in linking-table order
    exports : dict[str, int]
        Exported symbol name to code offset
    labels : dict[str, int]
        Every label of the unit with its code offset
    flags : list[str]
        Flag names in flag-table order
    flag_perm : Perm
        Permission of the flag-table header capability
    flag_init : dict[str, Word]
        Initial flag words other than ``0``
    """

    name: str
    code: list[Word]
    imports: list[str] = field(default_factory=list)
    exports: dict[str, int] = field(default_factory=dict)
    labels: dict[str, int] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    flag_perm: Perm = Perm.rw
    flag_init: dict[str, Word] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, offset in self.exports.items():
            if offset < OFFSET_LINK_FLAG:
                raise LinkError(
                    f"Export '{name}' of {self.name} collides with the header at offset {offset}"
                )


def build_component(
    unit: AsmUnit | ExpandedUnit,
    flags: Sequence[str] | None = None,
    options: ExpandOptions | None = None,
) -> ObjectImage:
    """
    Assembles a unit into a component whose code starts after the two header cells.

    Parameters
    ----------
    unit : AsmUnit | ExpandedUnit
        Parsed or already expanded unit
    flags : Sequence[str], optional
        Flag names overriding those declared in the unit
    options : ExpandOptions, optional
        Expansion options used when ``unit`` still contains macros

    Returns
    -------
    ObjectImage
        The relocatable component
    """
    if flags is not None:
        if isinstance(unit, ExpandedUnit):
            if list(flags) != list(unit.flags):
                raise LinkError(f"Cannot change the flags of expanded unit {unit.name}")
        else:
            unit = replace(unit, flags=list(flags))

    expanded = expand(unit, options)
    if len(set(expanded.exports)) != len(expanded.exports):
        raise LinkError(f"Duplicate export in unit {expanded.name}")
    words, symbols = emit(expanded, OFFSET_LINK_FLAG)
    obj = ObjectImage(
        name=expanded.name,
        code=[0] * OFFSET_LINK_FLAG + words,
        imports=list(expanded.imports),
        exports={name: symbols[name] for name in expanded.exports},
        labels=symbols,
        flags=list(expanded.flags),
        flag_perm=expanded.flag_perm,
        flag_init=dict(expanded.flag_init),
    )
    logger.debug("Built component %s with %d words", obj.name, len(obj.code))
    return obj


def format_object(obj: ObjectImage) -> str:
    lines = [f"{obj.name}:"]
    lines += [f"import {symbol}" for symbol in obj.imports]
    lines += [f"export {name} {offset}" for name, offset in obj.exports.items()]
    lines += [f"label {name} {offset}" for name, offset in obj.labels.items()]
    lines += [f"flag {name}" for name in obj.flags]
    lines.append(f"flagperm {obj.flag_perm.name}")
    lines += [f"init {name} {format_word(word)}" for name, word in obj.flag_init.items()]
    lines += [f"word {offset} {format_word(word)}" for offset, word in enumerate(obj.code)]
    return "\n".join(lines) + "\n"


def parse_object(text: str) -> ObjectImage:
    """Reads an object file written by :func:`format_object`."""
    lines = [line.strip() for line in text.splitlines()]
    lines = [line for line in lines if line and not line.startswith("#")]
    if not lines or not lines[0].endswith(":"):
        raise LinkError("Object file must start with '<name>:'")

    obj = ObjectImage(name=lines[0][:-1], code=[])
    words: dict[int, Word] = {}
    for line in lines[1:]:
        keyword, _, rest = line.partition(" ")
        values = rest.split()
        try:
            if keyword == "import" and len(values) == 1:
                obj.imports.append(values[0])
            elif keyword == "export" and len(values) == 2:
                if values[0] in obj.exports:
                    raise LinkError(f"Duplicate export '{values[0]}'")
                obj.exports[values[0]] = int(values[1])
            elif keyword == "label" and len(values) == 2:
                obj.labels[values[0]] = int(values[1])
            elif keyword == "flag" and len(values) == 1:
                obj.flags.append(values[0])
            elif keyword == "flagperm" and len(values) == 1:
                obj.flag_perm = Perm[values[0]]
            elif keyword == "init" and len(values) > 1:
                obj.flag_init[values[0]] = parse_word(rest.partition(" ")[2])
            elif keyword == "word" and len(values) > 1:
                words[int(values[0])] = parse_word(rest.partition(" ")[2])
            else:
                raise LinkError(f"Malformed object line '{line}'")
        except LinkError:
            raise
        except (KeyError, ValueError) as e:
            raise LinkError(f"Malformed object line '{line}': {e}") from e

    size = max(words, default=OFFSET_LINK_FLAG - 1) + 1
    obj.code = [words.get(offset, 0) for offset in range(size)]
    # re-run the header check on the completed object
    obj.__post_init__()
    return obj
