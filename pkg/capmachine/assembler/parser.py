"""Parser for the line-oriented assembly dialect."""

from dataclasses import dataclass, field
import logging
import re

from ..errors import AssemblyError
from ..isa import (
    SIGNATURES,
    TEMP_REGISTERS,
    Perm,
    Reg,
    Word,
    parse_register,
    parse_word,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelRef:
    """Reference to a label, import, flag or environment variable by name."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class RegSet:
    """A register list; ``complement`` marks ``all - [...]``."""

    regs: tuple[Reg, ...]
    complement: bool = False


@dataclass(frozen=True)
class Binding:
    """An environment variable bound by ``crtcls`` to the contents of a register."""

    name: str
    reg: Reg


@dataclass(frozen=True)
class CallSpec:
    """Operand of ``call`` and ``scall``: ``r([args], [privs])``."""

    target: Reg
    args: tuple[Reg, ...]
    privs: tuple[Reg, ...]


Arg = Reg | int | LabelRef | RegSet | tuple[Binding, ...] | CallSpec
CoreArg = Reg | int | LabelRef


@dataclass(frozen=True)
class LabelDef:
    name: str
    line: int = 0


@dataclass(frozen=True)
class CoreInstr:
    op: str
    args: tuple[CoreArg, ...]
    line: int = 0


@dataclass(frozen=True)
class MacroCall:
    name: str
    args: tuple[Arg, ...]
    line: int = 0


@dataclass(frozen=True)
class DataWord:
    word: Word
    line: int = 0


AsmItem = LabelDef | CoreInstr | MacroCall | DataWord


@dataclass
class AsmUnit:
    """
    A parsed assembly unit

    Attributes
    ----------
    name : str
        Unit (component) name
    items : list[AsmItem]
        Items in source order
    imports : list[str]
        Imported symbols; the order is the linking-table order
    exports : list[str]
        Exported label names
    flags : list[str]
        Flag names; the order is the flag-table order
    flag_perm : Perm
        Permission of the flag-table capability in the component header
    flag_init : dict[str, Word]
        Initial flag words other than ``0``
    """

    name: str
    items: list[AsmItem] = field(default_factory=list)
    imports: list[str] = field(default_factory=list)
    exports: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    flag_perm: Perm = Perm.rw
    flag_init: dict[str, Word] = field(default_factory=dict)

    def labels(self) -> list[str]:
        return [item.name for item in self.items if isinstance(item, LabelDef)]


# Operand shapes accepted by each macro. R register, I immediate, V register or
# immediate, L name, S register list, B binding list, C call operand.
MACRO_SHAPES: dict[str, tuple[str, ...]] = {
    "fetch": ("RL",),
    "malloc": ("RV",),
    "call": ("C",),
    "scall": ("C",),
    "assert": ("VV", "VVL"),
    "mclear": ("R",),
    "rclear": ("S",),
    "push": ("V",),
    "pop": ("R",),
    "crtcls": ("BR",),
    "reqglob": ("R",),
    "reqperm": ("RI",),
    "prepstack": ("R",),
    "load": ("RL",),
    "store": ("LV", "RI"),
    "lea": ("RRV",),
    "restrict": ("RRV",),
    "subseg": ("RRVV",),
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>-?\d+)(?![A-Za-z_])|(?P<name>[A-Za-z0-9_]+)|(?P<punct>[\[\](),-]))"
)
_LABEL_RE = re.compile(r"^([A-Za-z0-9_]+):\s*")


def _tokenize(text: str, line: int) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            raise AssemblyError(f"unexpected character '{text[pos:].strip()[0]}'", line)
        tokens.append(match.group(match.lastgroup or "punct"))
        pos = match.end()
    return tokens


class _OperandParser:
    def __init__(self, tokens: list[str], line: int) -> None:
        self._tokens = tokens
        self._pos = 0
        self._line = line

    def _peek(self) -> str | None:
        return self._tokens[self._pos] if self._pos < len(self._tokens) else None

    def _take(self, expected: str | None = None) -> str:
        token = self._peek()
        if token is None:
            raise AssemblyError("unexpected end of line", self._line)
        if expected is not None and token != expected:
            raise AssemblyError(f"expected '{expected}' but got '{token}'", self._line)
        self._pos += 1
        return token

    def _register(self) -> Reg:
        token = self._take()
        reg = parse_register(token)
        if reg is None:
            raise AssemblyError(f"expected a register but got '{token}'", self._line)
        return reg

    def _reg_list(self) -> tuple[Reg, ...]:
        self._take("[")
        regs: list[Reg] = []
        while self._peek() != "]":
            regs.append(self._register())
            if self._peek() == ",":
                self._take(",")
        self._take("]")
        return tuple(regs)

    def _bracketed(self) -> RegSet | tuple[Binding, ...]:
        if self._tokens[self._pos + 1 : self._pos + 2] != ["("]:
            return RegSet(self._reg_list())
        self._take("[")
        bindings: list[Binding] = []
        while self._peek() != "]":
            self._take("(")
            name = self._take()
            self._take(",")
            bindings.append(Binding(name, self._register()))
            self._take(")")
            if self._peek() == ",":
                self._take(",")
        self._take("]")
        return tuple(bindings)

    def _operand(self) -> Arg:
        token = self._peek()
        if token == "[":
            return self._bracketed()
        token = self._take()
        if token in ("(", ")", ",", "]", "-"):
            raise AssemblyError(f"unexpected '{token}'", self._line)
        if token == "all":
            if self._peek() == "-":
                self._take("-")
                return RegSet(self._reg_list(), complement=True)
            return RegSet((), complement=True)
        if re.fullmatch(r"-?\d+", token):
            return int(token)
        reg = parse_register(token)
        if reg is None:
            return LabelRef(token)
        if self._peek() == "(":
            self._take("(")
            args = self._reg_list()
            self._take(",")
            privs = self._reg_list()
            self._take(")")
            return CallSpec(reg, args, privs)
        return reg

    def parse(self) -> tuple[Arg, ...]:
        operands = []
        while self._peek() is not None:
            operands.append(self._operand())
        return tuple(operands)


def _matches(kind: str, arg: Arg) -> bool:
    if kind == "R":
        return isinstance(arg, Reg)
    if kind == "I":
        return isinstance(arg, int)
    if kind == "V":
        return isinstance(arg, (Reg, int))
    if kind == "L":
        return isinstance(arg, LabelRef)
    if kind == "S":
        return isinstance(arg, RegSet)
    if kind == "B":
        return isinstance(arg, tuple) or (
            isinstance(arg, RegSet) and not arg.regs and not arg.complement
        )
    if kind == "C":
        return isinstance(arg, CallSpec)
    raise ValueError(f"Unknown operand kind '{kind}'")


def _fits_core(op: str, args: tuple[Arg, ...]) -> bool:
    signature = SIGNATURES[op]
    if len(signature) != len(args):
        return False
    for kind, arg in zip(signature, args):
        if isinstance(arg, Reg):
            continue
        if kind == "v" and isinstance(arg, int):
            continue
        if kind == "v" and op == "lea" and isinstance(arg, LabelRef):
            continue
        return False
    return True


def _registers_in(arg: Arg) -> list[Reg]:
    if isinstance(arg, Reg):
        return [arg]
    if isinstance(arg, RegSet):
        return list(arg.regs)
    if isinstance(arg, CallSpec):
        return [arg.target, *arg.args, *arg.privs]
    if isinstance(arg, tuple):
        return [binding.reg for binding in arg]
    return []


def _instruction(op: str, args: tuple[Arg, ...], line: int) -> CoreInstr | MacroCall:
    if op in SIGNATURES and _fits_core(op, args):
        return CoreInstr(op, args, line)  # type: ignore[arg-type]
    shapes = MACRO_SHAPES.get(op)
    if shapes is None:
        if op in SIGNATURES:
            raise AssemblyError(f"invalid operands for '{op}'", line)
        raise AssemblyError(f"unknown mnemonic '{op}'", line)
    for shape in shapes:
        if len(shape) == len(args) and all(map(_matches, shape, args)):
            break
    else:
        raise AssemblyError(f"arity mismatch for '{op}'", line)
    for arg in args:
        for reg in _registers_in(arg):
            if reg in TEMP_REGISTERS:
                raise AssemblyError(
                    f"temporary register {reg} cannot be a macro operand", line
                )
    return MacroCall(op, args, line)


def _directive(unit: AsmUnit, text: str, line: int) -> None:
    name, _, rest = text.partition(" ")
    rest = rest.strip()
    values = rest.split()
    if name == ".unit" and len(values) == 1:
        unit.name = values[0]
    elif name == ".import" and values:
        unit.imports.extend(values)
    elif name == ".export" and values:
        unit.exports.extend(values)
    elif name == ".flag" and values:
        unit.flags.extend(values)
    elif name == ".flagperm" and len(values) == 1:
        try:
            unit.flag_perm = Perm[values[0]]
        except KeyError:
            raise AssemblyError(f"unknown permission '{values[0]}'", line) from None
    elif name == ".init" and len(values) > 1:
        unit.flag_init[values[0]] = _word(rest.partition(" ")[2], line)
    elif name == ".word" and values:
        unit.items.append(DataWord(_word(rest, line), line))
    else:
        raise AssemblyError(f"malformed directive '{text}'", line)


def _word(text: str, line: int) -> Word:
    try:
        return parse_word(text)
    except ValueError as e:
        raise AssemblyError(str(e), line) from e


def parse(text: str, name: str = "main") -> AsmUnit:
    """
    Parses assembly source into an :class:`AsmUnit`.

    Parameters
    ----------
    text : str
        Assembly source, one item per line
    name : str, optional
        Unit name used when the source has no ``.unit`` directive

    Returns
    -------
    AsmUnit
        The parsed unit
    """
    unit = AsmUnit(name=name)
    declared: dict[tuple[str, str], int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        while (match := _LABEL_RE.match(line)) is not None:
            unit.items.append(LabelDef(match.group(1), number))
            line = line[match.end() :]
        if not line:
            continue
        if line.startswith("."):
            _directive(unit, line, number)
            directive, _, rest = line.partition(" ")
            for value in rest.split()[:1] if directive == ".init" else rest.split():
                declared.setdefault((directive, value), number)
            continue
        tokens = _tokenize(line, number)
        op, operands = tokens[0], _OperandParser(tokens[1:], number).parse()
        unit.items.append(_instruction(op, operands, number))

    seen: set[str] = set()
    for item in unit.items:
        if isinstance(item, LabelDef):
            if item.name in seen:
                raise AssemblyError(f"duplicate label '{item.name}'", item.line)
            seen.add(item.name)
    for export in unit.exports:
        if export not in seen:
            raise AssemblyError(
                f"exported label '{export}' is not defined", declared.get((".export", export))
            )
    for flag in unit.flag_init:
        if flag not in unit.flags:
            raise AssemblyError(
                f"initialized flag '{flag}' is not declared", declared.get((".init", flag))
            )
    logger.debug(
        "Parsed unit %s: %d items, %d imports", unit.name, len(unit.items), len(unit.imports)
    )
    return unit
