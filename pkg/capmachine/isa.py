"""
Data definitions and total helper functions for the capability machine ISA.

Words are either Python ``int`` values (unbounded) or :class:`Capability`
instances. An infinite upper bound is represented by ``math.inf`` inside a
capability and by :data:`INFINITY_WORD` whenever it has to be written into a
register as an integer.
"""

from dataclasses import dataclass, replace
from enum import Enum, Flag, auto
from functools import lru_cache
import math
import re


INFINITY = math.inf
INFINITY_WORD = -42
OFFSET_LINK_FLAG = 2

NUM_REGISTERS = 33


class Perm(Enum):
    """Permissions, valued by their fixed integer encoding."""

    o = 0
    ro = 1
    rw = 2
    rwl = 3
    rx = 4
    e = 5
    rwx = 6
    rwlx = 7


class Locality(Enum):
    local = 0
    global_ = 1

    def __str__(self) -> str:
        return "global" if self is Locality.global_ else "local"

    @classmethod
    def parse(cls, text: str) -> "Locality":
        if text == "global":
            return cls.global_
        if text == "local":
            return cls.local
        raise ValueError(f"Unknown locality '{text}'")


class Grant(Flag):
    NONE = 0
    READ = auto()
    WRITE = auto()
    EXECUTE = auto()
    WRITE_LOCAL = auto()


# Immediate predecessors in the permission hierarchy (upper -> lower).
_PERM_EDGES: dict[Perm, tuple[Perm, ...]] = {
    Perm.rwlx: (Perm.rwl, Perm.rwx),
    Perm.rwl: (Perm.rw,),
    Perm.rwx: (Perm.rx, Perm.rw),
    Perm.rx: (Perm.e, Perm.ro),
    Perm.rw: (Perm.ro,),
    Perm.ro: (Perm.o,),
    Perm.e: (Perm.o,),
    Perm.o: (),
}


def _below(perm: Perm) -> frozenset[Perm]:
    seen = {perm}
    stack = [perm]
    while stack:
        for lower in _PERM_EDGES[stack.pop()]:
            if lower not in seen:
                seen.add(lower)
                stack.append(lower)
    return frozenset(seen)


_PERM_BELOW: dict[Perm, frozenset[Perm]] = {perm: _below(perm) for perm in Perm}

_GRANTS: dict[Perm, Grant] = {
    Perm.o: Grant.NONE,
    Perm.ro: Grant.READ,
    Perm.rw: Grant.READ | Grant.WRITE,
    Perm.rwl: Grant.READ | Grant.WRITE | Grant.WRITE_LOCAL,
    Perm.rx: Grant.READ | Grant.EXECUTE,
    Perm.e: Grant.NONE,
    Perm.rwx: Grant.READ | Grant.WRITE | Grant.EXECUTE,
    Perm.rwlx: Grant.READ | Grant.WRITE | Grant.EXECUTE | Grant.WRITE_LOCAL,
}

EXECUTABLE = frozenset({Perm.rx, Perm.rwx, Perm.rwlx})
WRITE_LOCAL = frozenset({Perm.rwl, Perm.rwlx})


def perm_grants(perm: Perm) -> Grant:
    """Returns the access rights a permission grants."""
    return _GRANTS[perm]


def perm_leq(a: Perm, b: Perm) -> bool:
    return a in _PERM_BELOW[b]


def loc_leq(a: Locality, b: Locality) -> bool:
    return a is b or (a is Locality.local and b is Locality.global_)


@dataclass(frozen=True)
class PermPair:
    perm: Perm
    loc: Locality

    def __str__(self) -> str:
        return f"({self.perm.name}, {self.loc})"


def perm_pair_leq(a: PermPair, b: PermPair) -> bool:
    """Pointwise ordering on permission/locality pairs."""
    return perm_leq(a.perm, b.perm) and loc_leq(a.loc, b.loc)


def all_perm_pairs() -> list[PermPair]:
    return [PermPair(perm, loc) for perm in Perm for loc in Locality]


def encode_perm(perm: Perm) -> int:
    return perm.value


def encode_loc(loc: Locality) -> int:
    return loc.value


def encode_perm_pair(pair: PermPair) -> int:
    return 2 * encode_perm(pair.perm) + encode_loc(pair.loc)


def decode_perm_pair(n: int) -> PermPair:
    """Left inverse of :func:`encode_perm_pair`; anything out of range is the bottom pair."""
    if not 0 <= n <= 15:
        return PermPair(Perm.o, Locality.local)
    return PermPair(Perm(n // 2), Locality(n % 2))


@dataclass(frozen=True)
class Capability:
    """
    A capability word

    Attributes
    ----------
    perm : Perm
        Granted permission
    loc : Locality
        Locality of the capability
    base : int
        First address of the authority range
    end : int | float
        Last address of the authority range, or ``math.inf``
    addr : int
        Current address; may lie outside of ``[base, end]``
    """

    perm: Perm
    loc: Locality
    base: int
    end: int | float
    addr: int

    @property
    def pair(self) -> PermPair:
        return PermPair(self.perm, self.loc)

    @property
    def is_local(self) -> bool:
        return self.loc is Locality.local

    def with_pair(self, pair: PermPair) -> "Capability":
        return replace(self, perm=pair.perm, loc=pair.loc)

    def __str__(self) -> str:
        return format_word(self)


Word = int | Capability


def update_pc_perm(word: Word) -> Word:
    """Promotes enter capabilities to executable ones."""
    if isinstance(word, Capability) and word.perm is Perm.e:
        return replace(word, perm=Perm.rx)
    return word


def within_bounds(cap: Capability) -> bool:
    return cap.base <= cap.addr <= cap.end


def is_non_zero(word: Word) -> bool:
    return isinstance(word, Capability) or word != 0


def is_non_local(word: Word) -> bool:
    return not isinstance(word, Capability) or word.loc is Locality.global_


def format_word(word: Word) -> str:
    """Formats a word in the textual syntax used by object, image and dump files."""
    if isinstance(word, Capability):
        end = "inf" if word.end == INFINITY else str(word.end)
        return f"cap {word.perm.name} {word.loc} {word.base} {end} {word.addr}"
    return f"int {word}"


def parse_word(text: str) -> Word:
    parts = text.split()
    if len(parts) == 2 and parts[0] == "int":
        return int(parts[1])
    if len(parts) == 6 and parts[0] == "cap":
        try:
            perm = Perm[parts[1]]
        except KeyError:
            raise ValueError(f"Unknown permission '{parts[1]}'") from None
        end: int | float = INFINITY if parts[4] == "inf" else int(parts[4])
        return Capability(
            perm, Locality.parse(parts[2]), int(parts[3]), end, int(parts[5])
        )
    raise ValueError(f"Malformed word '{text}'")


# --- Registers ---


@dataclass(frozen=True)
class Reg:
    """A register operand; ``index`` 32 is the program counter."""

    index: int

    def __post_init__(self) -> None:
        if not 0 <= self.index < NUM_REGISTERS:
            raise ValueError(f"Register index out of range: {self.index}")

    def __str__(self) -> str:
        return _REGISTER_ALIASES.get(self.index, f"r{self.index}")


PC = Reg(32)
R0 = Reg(0)
R1 = Reg(1)
R_STK = Reg(31)
R_ENV = Reg(30)
R_T1 = Reg(26)
R_T2 = Reg(27)
R_T3 = Reg(28)
R_T4 = Reg(29)
TEMP_REGISTERS = frozenset({R_T1, R_T2, R_T3, R_T4})
ALL_REGISTERS = tuple(Reg(i) for i in range(NUM_REGISTERS))

_REGISTER_ALIASES = {
    32: "pc",
    31: "r_stk",
    30: "r_env",
    26: "r_t1",
    27: "r_t2",
    28: "r_t3",
    29: "r_t4",
}
REGISTER_NAMES: dict[str, Reg] = {f"r{i}": Reg(i) for i in range(32)}
REGISTER_NAMES.update({name: Reg(index) for index, name in _REGISTER_ALIASES.items()})


def parse_register(token: str) -> Reg | None:
    return REGISTER_NAMES.get(token)


# --- Instructions ---

# Operand kinds: 'r' register only, 'v' register or immediate.
SIGNATURES: dict[str, str] = {
    "fail": "",
    "halt": "",
    "jmp": "r",
    "jnz": "rv",
    "move": "rv",
    "load": "rr",
    "store": "rr",
    "plus": "rvv",
    "minus": "rvv",
    "lt": "rvv",
    "lea": "rv",
    "restrict": "rv",
    "subseg": "rvv",
    "isptr": "rv",
    "getp": "rr",
    "getl": "rr",
    "getb": "rr",
    "gete": "rr",
    "geta": "rr",
}
OPCODES: dict[str, int] = {op: code for code, op in enumerate(SIGNATURES)}
MNEMONICS: tuple[str, ...] = tuple(SIGNATURES)

Operand = Reg | int


@dataclass(frozen=True)
class Instr:
    op: str
    args: tuple[Operand, ...] = ()

    def __post_init__(self) -> None:
        signature = SIGNATURES.get(self.op)
        if signature is None:
            raise ValueError(f"Unknown mnemonic '{self.op}'")
        if len(signature) != len(self.args):
            raise ValueError(
                f"'{self.op}' takes {len(signature)} operands, got {len(self.args)}"
            )
        for kind, arg in zip(signature, self.args):
            if kind == "r" and not isinstance(arg, Reg):
                raise ValueError(f"'{self.op}' expects a register operand, got {arg}")

    def __str__(self) -> str:
        return format_instr(self)


FAIL = Instr("fail")
HALT = Instr("halt")


def format_instr(instr: Instr) -> str:
    return " ".join([instr.op, *(str(arg) for arg in instr.args)])


def _zigzag(n: int) -> int:
    return 2 * n if n >= 0 else -2 * n - 1


def _unzigzag(z: int) -> int:
    return z // 2 if z % 2 == 0 else -(z + 1) // 2


def _pair(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + b


def _unpair(z: int) -> tuple[int, int]:
    w = (math.isqrt(8 * z + 1) - 1) // 2
    b = z - w * (w + 1) // 2
    return w - b, b


def _operand_code(arg: Operand) -> int:
    if isinstance(arg, Reg):
        return 2 * arg.index
    return 2 * _zigzag(arg) + 1


def encode_instr(instr: Instr) -> int:
    """
    Encodes an instruction as a non-negative integer.

    The low five bits hold the opcode; the remaining bits hold the operand codes
    combined with nested Cantor pairing.
    """
    codes = [_operand_code(arg) for arg in instr.args]
    if not codes:
        return OPCODES[instr.op]
    packed = codes[-1]
    for code in reversed(codes[:-1]):
        packed = _pair(code, packed)
    return OPCODES[instr.op] | (packed << 5)


@lru_cache(maxsize=65536)
def _decode_int(word: int) -> Instr:
    if word < 0:
        return FAIL
    opcode, packed = word & 0b11111, word >> 5
    if opcode >= len(MNEMONICS):
        return FAIL
    op = MNEMONICS[opcode]
    signature = SIGNATURES[op]
    if not signature:
        return Instr(op) if packed == 0 else FAIL

    codes = []
    for _ in range(len(signature) - 1):
        code, packed = _unpair(packed)
        codes.append(code)
    codes.append(packed)

    args: list[Operand] = []
    for kind, code in zip(signature, codes):
        if code % 2 == 0:
            if code // 2 >= NUM_REGISTERS:
                return FAIL
            args.append(Reg(code // 2))
        elif kind == "v":
            args.append(_unzigzag(code // 2))
        else:
            return FAIL
    return Instr(op, tuple(args))


def decode_word(word: Word) -> Instr:
    """Decodes a word to an instruction; every non-instruction word decodes to ``fail``."""
    if isinstance(word, Capability):
        return FAIL
    return _decode_int(word)


_INSTR_RE = re.compile(r"\s+")


def parse_instr(text: str) -> Instr:
    """Parses a single core instruction written with register names and decimal immediates."""
    tokens = _INSTR_RE.split(text.strip())
    args: list[Operand] = []
    for token in tokens[1:]:
        reg = parse_register(token)
        args.append(reg if reg is not None else int(token))
    return Instr(tokens[0], tuple(args))
