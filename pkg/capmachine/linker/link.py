"""Whole-system linking, memory images and their text format."""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import logging

from dacite import from_dict
import yaml

from ..config import convert_lists_to_tuples
from ..errors import ImageError, LinkError
from ..isa import (
    PC,
    Capability,
    Locality,
    Perm,
    Reg,
    Word,
    format_word,
    parse_register,
    parse_word,
    update_pc_perm,
)
from ..machine import ExecConf, Memory, reg_0
from .objects import ObjectImage

logger = logging.getLogger(__name__)

Range = tuple[int, int]


@dataclass
class ComponentLayout:
    """
    Placement of one component

    Attributes
    ----------
    code : int
        Base address of the code (header cells included)
    link : int
        Base address of the linking table
    flags : int
        Base address of the flag table
    """

    code: int
    link: int
    flags: int


@dataclass
class Layout:
    """
    Placement of every component plus reserved regions and initial registers

    Attributes
    ----------
    components : dict[str, ComponentLayout]
        Component name to placement
    regions : dict[str, tuple[int, int]], optional
        Named inclusive ranges (heap, stack) that must not overlap any component
    registers : dict[str, str], optional
        Initial register words in the textual word syntax
    entry : str, optional
        Export whose entry capability becomes the initial pc when no pc is given
    """

    components: dict[str, ComponentLayout]
    regions: dict[str, tuple[int, int]] = field(default_factory=dict)
    registers: dict[str, str] = field(default_factory=dict)
    entry: str | None = None


def load_layout(path: str) -> Layout:
    with open(path, "r") as fp:
        data = yaml.safe_load(fp) or {}
    convert_lists_to_tuples(Layout, data)
    return from_dict(data_class=Layout, data=data)


def layout_to_dict(layout: Layout) -> dict:
    data: dict = {
        "components": {
            name: {"code": c.code, "link": c.link, "flags": c.flags}
            for name, c in layout.components.items()
        },
        "regions": {name: list(r) for name, r in layout.regions.items()},
        "registers": dict(layout.registers),
    }
    if layout.entry is not None:
        data["entry"] = layout.entry
    return data


@dataclass(frozen=True)
class ComponentRanges:
    """Inclusive address ranges of a linked component; empty tables have ``hi < lo``."""

    code: Range
    link: Range
    flags: Range
    flag_names: tuple[str, ...] = ()


@dataclass
class SystemImage:
    """
    A linked system

    Attributes
    ----------
    memory : Memory
        Initial memory
    components : dict[str, ComponentRanges]
        Address ranges per component
    entries : dict[str, Capability]
        Entry capability of every exported symbol
    regions : dict[str, tuple[int, int]]
        Reserved regions from the layout
    registers : dict[Reg, Word]
        Initial register words other than ``0``
    """

    memory: Memory
    components: dict[str, ComponentRanges]
    entries: dict[str, Capability]
    regions: dict[str, Range] = field(default_factory=dict)
    registers: dict[Reg, Word] = field(default_factory=dict)

    def flag_address(self, component: str, flag: str) -> int:
        if component not in self.components:
            raise ImageError(f"Unknown component '{component}'")
        ranges = self.components[component]
        if flag not in ranges.flag_names:
            raise ImageError(f"Component '{component}' has no flag '{flag}'")
        return ranges.flags[0] + ranges.flag_names.index(flag)

    def resolve_flag(self, text: str) -> tuple[str, str]:
        """Resolves ``COMPONENT.FLAG`` or a flag name declared by exactly one component."""
        component, sep, flag = text.partition(".")
        if sep:
            self.flag_address(component, flag)
            return component, flag
        owners = [name for name, r in self.components.items() if text in r.flag_names]
        if len(owners) != 1:
            raise ImageError(
                f"Flag '{text}' must be declared by exactly one component, found {len(owners)}"
            )
        return owners[0], text

    def initial_conf(self, entry: str | None = None) -> ExecConf:
        """Initial configuration; ``entry`` overrides pc with that export's promoted entry."""
        reg = list(reg_0())
        for name, word in self.registers.items():
            reg[name.index] = word
        if entry is not None:
            if entry not in self.entries:
                raise ImageError(f"Unknown entry '{entry}'")
            reg[PC.index] = update_pc_perm(self.entries[entry])
        return ExecConf(tuple(reg), self.memory)


def _table(base: int, size: int) -> Range:
    return (base, base + size - 1)


def _check_disjoint(ranges: dict[str, Range]) -> None:
    spans = sorted(
        (lo, hi, name) for name, (lo, hi) in ranges.items() if hi >= lo
    )
    for (lo1, hi1, name1), (lo2, _, name2) in zip(spans, spans[1:]):
        if lo2 <= hi1:
            raise LinkError(f"Overlapping ranges: {name1} [{lo1}, {hi1}] and {name2} at {lo2}")


def link(objects: Sequence[ObjectImage], layout: Layout) -> SystemImage:
    """
    Places components, fills their linking and flag tables and writes their headers.

    Parameters
    ----------
    objects : Sequence[ObjectImage]
        Components to link
    layout : Layout
        Base addresses of every component plus reserved regions

    Returns
    -------
    SystemImage
        Initial memory with ranges and entry capabilities
    """
    components: dict[str, ComponentRanges] = {}
    spans: dict[str, Range] = {}
    for obj in objects:
        if obj.name in components:
            raise LinkError(f"Duplicate component '{obj.name}'")
        if obj.name not in layout.components:
            raise LinkError(f"No layout for component '{obj.name}'")
        place = layout.components[obj.name]
        ranges = ComponentRanges(
            code=_table(place.code, len(obj.code)),
            link=_table(place.link, len(obj.imports)),
            flags=_table(place.flags, len(obj.flags)),
            flag_names=tuple(obj.flags),
        )
        components[obj.name] = ranges
        spans[f"{obj.name}.code"] = ranges.code
        spans[f"{obj.name}.link"] = ranges.link
        spans[f"{obj.name}.flags"] = ranges.flags
    for name, (lo, hi) in layout.regions.items():
        spans[name] = (lo, hi)
    _check_disjoint(spans)

    entries: dict[str, Capability] = {}
    for obj in objects:
        lo, hi = components[obj.name].code
        for name, offset in obj.exports.items():
            if name in entries:
                raise LinkError(f"Duplicate export '{name}'")
            entries[name] = Capability(Perm.e, Locality.global_, lo, hi, lo + offset)

    cells: dict[int, Word] = {}
    for obj in objects:
        ranges = components[obj.name]
        code_lo = ranges.code[0]
        for offset, word in enumerate(obj.code):
            cells[code_lo + offset] = word
        link_lo, link_hi = ranges.link
        flag_lo, flag_hi = ranges.flags
        cells[code_lo] = Capability(Perm.ro, Locality.global_, link_lo, link_hi, link_lo)
        cells[code_lo + 1] = Capability(
            obj.flag_perm, Locality.global_, flag_lo, flag_hi, flag_lo
        )
        for slot, symbol in enumerate(obj.imports):
            cells[link_lo + slot] = _resolve_import(obj.name, symbol, entries, objects)
        for slot, flag in enumerate(obj.flags):
            cells[flag_lo + slot] = obj.flag_init.get(flag, 0)

    registers: dict[Reg, Word] = {}
    for name, text in layout.registers.items():
        reg = parse_register(name)
        if reg is None:
            raise LinkError(f"Unknown register '{name}' in layout")
        try:
            registers[reg] = parse_word(text)
        except ValueError as e:
            raise LinkError(f"Register {name}: {e}") from e
    if layout.entry is not None and PC not in registers:
        if layout.entry not in entries:
            raise LinkError(f"Unknown entry '{layout.entry}'")
        registers[PC] = update_pc_perm(entries[layout.entry])

    logger.info(
        "Linked %d components into %d memory cells", len(objects), len(cells)
    )
    return SystemImage(
        memory=Memory(cells),
        components=components,
        entries=entries,
        regions=dict(layout.regions),
        registers=registers,
    )


def _resolve_import(
    component: str,
    symbol: str,
    entries: Mapping[str, Capability],
    objects: Sequence[ObjectImage],
) -> Capability:
    if symbol in entries:
        return entries[symbol]
    if any(symbol in obj.labels for obj in objects):
        raise LinkError(f"Import '{symbol}' of {component} is not an entry")
    raise LinkError(f"Unresolved import '{symbol}' in {component}")


def read_flag(mem: Mapping[int, Word], image: SystemImage, component: str, flag: str) -> int:
    """Reads a flag of ``component`` from ``mem``; a capability there means a corrupted run."""
    word = mem[image.flag_address(component, flag)]
    if not isinstance(word, int):
        raise ImageError(f"Flag {component}.{flag} holds a capability: {format_word(word)}")
    return word


def _format_range(r: Range) -> str:
    return f"{r[0]} {r[1]}"


def format_image(image: SystemImage) -> str:
    lines = []
    for name, r in image.components.items():
        flag_names = "".join(f" {flag}" for flag in r.flag_names)
        lines.append(
            f"component {name} code {_format_range(r.code)} link {_format_range(r.link)}"
            f" flags {_format_range(r.flags)}{flag_names}"
        )
    lines += [f"entry {name} {format_word(cap)}" for name, cap in image.entries.items()]
    lines += [f"region {name} {_format_range(r)}" for name, r in image.regions.items()]
    lines += [
        f"reg {reg} {format_word(word)}"
        for reg, word in sorted(image.registers.items(), key=lambda item: item[0].index)
    ]
    lines += [f"{addr}: {format_word(image.memory[addr])}" for addr in image.memory]
    return "\n".join(lines) + "\n"


def parse_image(text: str) -> SystemImage:
    """Reads an image file written by :func:`format_image`."""
    image = SystemImage(memory=Memory(), components={}, entries={})
    cells: dict[int, Word] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        keyword, _, rest = line.partition(" ")
        values = rest.split()
        try:
            if keyword == "component" and len(values) >= 10:
                name = values[0]
                if values[1::3][:3] != ["code", "link", "flags"]:
                    raise ImageError(f"Line {number}: malformed component line")
                nums = [int(v) for v in (*values[2:4], *values[5:7], *values[8:10])]
                image.components[name] = ComponentRanges(
                    code=(nums[0], nums[1]),
                    link=(nums[2], nums[3]),
                    flags=(nums[4], nums[5]),
                    flag_names=tuple(values[10:]),
                )
            elif keyword == "entry" and len(values) > 1:
                word = parse_word(rest.partition(" ")[2])
                if not isinstance(word, Capability):
                    raise ImageError(f"Line {number}: entry must be a capability")
                image.entries[values[0]] = word
            elif keyword == "region" and len(values) == 3:
                image.regions[values[0]] = (int(values[1]), int(values[2]))
            elif keyword == "reg" and len(values) > 1:
                reg = parse_register(values[0])
                if reg is None:
                    raise ImageError(f"Line {number}: unknown register '{values[0]}'")
                image.registers[reg] = parse_word(rest.partition(" ")[2])
            elif keyword.endswith(":"):
                cells[int(keyword[:-1])] = parse_word(rest)
            else:
                raise ImageError(f"Line {number}: unexpected '{line}'")
        except ImageError:
            raise
        except ValueError as e:
            raise ImageError(f"Line {number}: {e}") from e
    image.memory = Memory(cells)
    return image
