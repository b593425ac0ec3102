"""
Macro expansion.

Every macro is lowered to core instructions. Offsets inside an expansion are
expressed with generated labels and resolved once the layout of the whole unit
is known; a label used as the immediate of ``lea`` denotes the distance from the
instruction preceding the ``lea``, which is what ``move r pc; lea r L`` needs.
"""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
import logging

from ..errors import AssemblyError
from ..isa import (
    ALL_REGISTERS,
    PC,
    R0,
    R1,
    R_ENV,
    R_STK,
    R_T1,
    R_T2,
    R_T3,
    R_T4,
    Instr,
    Locality,
    Perm,
    PermPair,
    Reg,
    Word,
    encode_instr,
    encode_loc,
    encode_perm,
    encode_perm_pair,
)
from .parser import (
    AsmItem,
    AsmUnit,
    Binding,
    CallSpec,
    CoreArg,
    CoreInstr,
    DataWord,
    LabelDef,
    LabelRef,
    MacroCall,
    RegSet,
)

logger = logging.getLogger(__name__)

MALLOC_SYMBOL = "malloc"

E_LOCAL = encode_perm_pair(PermPair(Perm.e, Locality.local))
E_GLOBAL = encode_perm_pair(PermPair(Perm.e, Locality.global_))
RW_GLOBAL = encode_perm_pair(PermPair(Perm.rw, Locality.global_))

# Restore code pushed by scall. After i1 runs, r_t1 + 5 is the saved stack
# capability: four restore words and the saved pc sit between them.
RESTORE_CODE: tuple[Instr, ...] = (
    Instr("move", (R_T1, PC)),
    Instr("lea", (R_T1, 5)),
    Instr("load", (R_STK, R_T1)),
    Instr("load", (PC, R_STK)),
)
# Distance from the saved stack capability back to the first restore word.
SCALL_FRAME_OFFSET = len(RESTORE_CODE) + 1

# Closure activation code; the environment sits two cells before i1, the code one.
CLOSURE_CODE: tuple[Instr, ...] = (
    Instr("move", (R_T1, PC)),
    Instr("lea", (R_T1, -2)),
    Instr("load", (R_ENV, R_T1)),
    Instr("lea", (R_T1, 1)),
    Instr("load", (R_T1, R_T1)),
    Instr("jmp", (R_T1,)),
)
CLOSURE_RECORD_SIZE = 2 + len(CLOSURE_CODE)


def call_activation_code(privs: Sequence[Reg]) -> list[Instr]:
    """Activation code stored by ``call``: reload the private registers, then the pc."""
    code = [
        Instr("move", (R_T4, PC)),
        Instr("getb", (R_T1, R_T4)),
        Instr("geta", (R_T2, R_T4)),
        Instr("minus", (R_T1, R_T1, R_T2)),
        Instr("lea", (R_T4, R_T1)),
    ]
    for priv in privs:
        code.append(Instr("load", (priv, R_T4)))
        code.append(Instr("lea", (R_T4, 1)))
    code.append(Instr("load", (PC, R_T4)))
    return code


@dataclass(frozen=True)
class ExpandOptions:
    """
    Switches for the protective checks emitted by the calling-convention macros

    Attributes
    ----------
    clear_stack : bool, optional
        Emit ``mclear r_stk`` in ``scall`` before handing over the stack
    check_global : bool, optional
        Emit the ``reqglob`` check
    check_stack : bool, optional
        Emit the ``prepstack`` check and normalization
    """

    clear_stack: bool = True
    check_global: bool = True
    check_stack: bool = True


@dataclass(frozen=True)
class ExpandedUnit:
    """
    A unit with every macro eliminated and every label reference resolved

    ``items`` holds encoded-ready instructions and literal data words; ``labels``
    maps label names to word offsets from the first item.
    """

    name: str
    items: tuple[Instr | Word, ...]
    labels: dict[str, int]
    imports: tuple[str, ...] = ()
    exports: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()
    flag_perm: Perm = Perm.rw
    flag_init: dict[str, Word] = field(default_factory=dict)


class _Builder:
    def __init__(self, unit: AsmUnit, options: ExpandOptions) -> None:
        self.unit = unit
        self.options = options
        self.items: list[AsmItem] = []
        self.line = 0
        self._counter = 0
        self.env = _environment_slots(unit)

    def emit(self, op: str, *args: CoreArg) -> None:
        self.items.append(CoreInstr(op, args, self.line))

    def label(self, name: str) -> None:
        self.items.append(LabelDef(name, self.line))

    def fresh(self, hint: str) -> str:
        self._counter += 1
        return f".{hint}{self._counter}"

    def error(self, message: str) -> AssemblyError:
        return AssemblyError(message, self.line)

    def import_slot(self, symbol: str) -> int:
        try:
            return self.unit.imports.index(symbol)
        except ValueError:
            raise self.error(f"symbol '{symbol}' is not imported") from None

    def flag_slot(self, flag: str | None) -> int:
        if not self.unit.flags:
            raise self.error("assert needs at least one declared flag")
        if flag is None:
            return 0
        try:
            return self.unit.flags.index(flag)
        except ValueError:
            raise self.error(f"unknown flag '{flag}'") from None

    def env_slot(self, name: str) -> int:
        if name not in self.env:
            raise self.error(f"unknown environment variable '{name}'")
        return self.env[name]


def _environment_slots(unit: AsmUnit) -> dict[str, int]:
    slots: dict[str, int] = {}
    for item in unit.items:
        if isinstance(item, MacroCall) and item.name == "crtcls":
            bindings = item.args[0]
            if not isinstance(bindings, tuple):
                continue
            for index, binding in enumerate(bindings):
                if slots.setdefault(binding.name, index) != index:
                    raise AssemblyError(
                        f"environment variable '{binding.name}' bound at two offsets",
                        item.line,
                    )
    return slots


# --- register and stack macros ---


def _rclear(b: _Builder, regs: Iterable[Reg]) -> None:
    ordered = sorted(set(regs), key=lambda reg: reg.index)
    if PC in ordered:
        raise b.error("rclear cannot clear pc")
    for reg in ordered:
        b.emit("move", reg, 0)


def _resolve_set(regs: RegSet) -> list[Reg]:
    if regs.complement:
        return [reg for reg in ALL_REGISTERS if reg not in regs.regs]
    return list(regs.regs)


def _push(b: _Builder, value: Reg | int) -> None:
    b.emit("lea", R_STK, 1)
    if isinstance(value, Reg):
        b.emit("store", R_STK, value)
    else:
        b.emit("move", R_T1, value)
        b.emit("store", R_STK, R_T1)
        b.emit("move", R_T1, 0)


def _pop(b: _Builder, reg: Reg) -> None:
    b.emit("load", reg, R_STK)
    b.emit("minus", R_T1, 0, 1)
    b.emit("lea", R_STK, R_T1)


def _mclear(b: _Builder, reg: Reg) -> None:
    # An unbounded end reads back as a negative count.
    ok, loop, done = b.fresh("mclear_ok"), b.fresh("mclear_loop"), b.fresh("mclear_done")
    b.emit("move", R_T4, reg)
    b.emit("getb", R_T1, R_T4)
    b.emit("geta", R_T2, R_T4)
    b.emit("minus", R_T2, R_T1, R_T2)
    b.emit("lea", R_T4, R_T2)
    b.emit("gete", R_T2, R_T4)
    b.emit("minus", R_T1, R_T2, R_T1)
    b.emit("plus", R_T1, R_T1, 1)
    b.emit("lt", R_T3, -1, R_T1)
    b.emit("move", R_T2, PC)
    b.emit("lea", R_T2, LabelRef(ok))
    b.emit("jnz", R_T2, R_T3)
    b.emit("fail")
    b.label(ok)
    b.emit("move", R_T2, PC)
    b.emit("lea", R_T2, LabelRef(done))
    b.label(loop)
    b.emit("lt", R_T3, R_T1, 1)
    b.emit("jnz", R_T2, R_T3)
    b.emit("store", R_T4, R_T3)
    b.emit("lea", R_T4, 1)
    b.emit("minus", R_T1, R_T1, 1)
    b.emit("move", R_T3, PC)
    b.emit("lea", R_T3, LabelRef(loop))
    b.emit("jmp", R_T3)
    b.label(done)
    b.emit("move", R_T4, 0)
    b.emit("move", R_T1, 0)
    b.emit("move", R_T2, 0)
    b.emit("move", R_T3, 0)


# --- linking and allocation ---


def _fetch(b: _Builder, reg: Reg, symbol: str) -> None:
    slot = b.import_slot(symbol)
    b.emit("move", reg, PC)
    b.emit("getb", R_T1, reg)
    b.emit("geta", R_T2, reg)
    b.emit("minus", R_T1, R_T1, R_T2)
    b.emit("lea", reg, R_T1)
    b.emit("load", reg, reg)
    b.emit("lea", reg, slot)
    b.emit("move", R_T1, 0)
    b.emit("move", R_T2, 0)
    b.emit("load", reg, reg)


def _malloc(b: _Builder, reg: Reg, size: Reg | int) -> None:
    if reg == R0:
        raise b.error("malloc cannot target r0")
    ret = b.fresh("malloc_ret")
    saves_r1 = reg != R1
    _fetch(b, R_T3, MALLOC_SYMBOL)
    if saves_r1:
        b.emit("move", R_T2, R1)
    b.emit("move", R1, size)
    b.emit("move", R_T1, R0)
    b.emit("move", R0, PC)
    b.emit("lea", R0, LabelRef(ret))
    b.emit("restrict", R0, E_GLOBAL)
    b.emit("jmp", R_T3)
    b.label(ret)
    b.emit("move", reg, R1)
    b.emit("move", R0, R_T1)
    if saves_r1:
        b.emit("move", R1, R_T2)
    b.emit("move", R_T1, 0)
    if saves_r1:
        b.emit("move", R_T2, 0)


# --- assertions ---


def _assert_fail_block(b: _Builder, slot: int) -> None:
    b.emit("move", R_T3, PC)
    b.emit("getb", R_T1, R_T3)
    b.emit("geta", R_T2, R_T3)
    b.emit("minus", R_T1, R_T1, R_T2)
    b.emit("lea", R_T3, R_T1)
    b.emit("lea", R_T3, 1)
    b.emit("load", R_T1, R_T3)
    b.emit("lea", R_T1, slot)
    b.emit("move", R_T2, 1)
    b.emit("store", R_T1, R_T2)
    b.emit("halt")


def _assert(b: _Builder, lhs: Reg | int, rhs: Reg | int, flag: str | None) -> None:
    slot = b.flag_slot(flag)
    if not isinstance(lhs, Reg) and not isinstance(rhs, Reg):
        if lhs != rhs:
            _assert_fail_block(b, slot)
        return

    fail, success = b.fresh("assert_fail"), b.fresh("assert_ok")
    if isinstance(lhs, Reg) and isinstance(rhs, Reg):
        caps = b.fresh("assert_caps")
        b.emit("move", R_T3, PC)
        b.emit("lea", R_T3, LabelRef(fail))
        b.emit("isptr", R_T1, lhs)
        b.emit("isptr", R_T2, rhs)
        b.emit("minus", R_T1, R_T1, R_T2)
        b.emit("jnz", R_T3, R_T1)
        b.emit("move", R_T4, PC)
        b.emit("lea", R_T4, LabelRef(caps))
        b.emit("jnz", R_T4, R_T2)
        b.emit("minus", R_T1, lhs, rhs)
        b.emit("jnz", R_T3, R_T1)
        b.emit("move", R_T4, PC)
        b.emit("lea", R_T4, LabelRef(success))
        b.emit("jmp", R_T4)
        b.label(caps)
        for getter in ("geta", "getb", "gete", "getp", "getl"):
            b.emit(getter, R_T1, lhs)
            b.emit(getter, R_T2, rhs)
            b.emit("minus", R_T1, R_T1, R_T2)
            b.emit("jnz", R_T3, R_T1)
        b.emit("move", R_T4, PC)
        b.emit("lea", R_T4, LabelRef(success))
        b.emit("jmp", R_T4)
        b.label(fail)
        _assert_fail_block(b, slot)
        b.label(success)
        b.emit("move", R_T1, 0)
        b.emit("move", R_T2, 0)
        b.emit("move", R_T3, 0)
        b.emit("move", R_T4, 0)
        return

    reg, const = (lhs, rhs) if isinstance(lhs, Reg) else (rhs, lhs)
    assert isinstance(reg, Reg) and isinstance(const, int)
    b.emit("move", R_T3, PC)
    b.emit("lea", R_T3, LabelRef(fail))
    b.emit("isptr", R_T1, reg)
    b.emit("jnz", R_T3, R_T1)
    b.emit("minus", R_T1, reg, const)
    b.emit("jnz", R_T3, R_T1)
    b.emit("move", R_T3, PC)
    b.emit("lea", R_T3, LabelRef(success))
    b.emit("jmp", R_T3)
    b.label(fail)
    _assert_fail_block(b, slot)
    b.label(success)
    b.emit("move", R_T1, 0)
    b.emit("move", R_T3, 0)


# --- calling conventions ---


def _check_call(b: _Builder, spec: CallSpec) -> None:
    if PC in spec.args or PC in spec.privs:
        raise b.error("pc cannot be passed or kept private across a call")


def _call(b: _Builder, spec: CallSpec) -> None:
    _check_call(b, spec)
    activation = call_activation_code(spec.privs)
    ret = b.fresh("call_ret")
    _malloc(b, R_T4, len(spec.privs) + 1 + len(activation))
    for priv in spec.privs:
        b.emit("store", R_T4, priv)
        b.emit("lea", R_T4, 1)
    b.emit("move", R_T1, PC)
    b.emit("lea", R_T1, LabelRef(ret))
    b.emit("store", R_T4, R_T1)
    for instr in activation:
        b.emit("lea", R_T4, 1)
        b.emit("move", R_T1, encode_instr(instr))
        b.emit("store", R_T4, R_T1)
    b.emit("lea", R_T4, -(len(activation) - 1))
    b.emit("restrict", R_T4, E_LOCAL)
    b.emit("move", R0, R_T4)
    keep = {PC, spec.target, R0, *spec.args}
    _rclear(b, [reg for reg in ALL_REGISTERS if reg not in keep])
    b.label(ret)
    b.emit("jmp", spec.target)
    b.emit("move", R_T1, 0)
    b.emit("move", R_T2, 0)
    b.emit("move", R_T4, 0)


def _scall(b: _Builder, spec: CallSpec) -> None:
    _check_call(b, spec)
    ret = b.fresh("scall_ret")
    for priv in spec.privs:
        _push(b, priv)
    for instr in RESTORE_CODE:
        b.emit("lea", R_STK, 1)
        b.emit("move", R_T1, encode_instr(instr))
        b.emit("store", R_STK, R_T1)
    b.emit("move", R_T1, PC)
    b.emit("lea", R_T1, LabelRef(ret))
    _push(b, R_T1)
    b.emit("move", R_T1, R_STK)
    _push(b, R_T1)
    b.emit("move", R0, R_STK)
    b.emit("lea", R0, -SCALL_FRAME_OFFSET)
    b.emit("restrict", R0, E_LOCAL)
    # hand the callee only the part of the stack above the frame
    b.emit("geta", R_T1, R_STK)
    b.emit("plus", R_T1, R_T1, 1)
    b.emit("gete", R_T2, R_STK)
    b.emit("subseg", R_STK, R_T1, R_T2)
    if b.options.clear_stack:
        _mclear(b, R_STK)
    keep = {PC, R_STK, R0, spec.target, *spec.args}
    _rclear(b, [reg for reg in ALL_REGISTERS if reg not in keep])
    b.label(ret)
    b.emit("jmp", spec.target)
    b.emit("lea", R_STK, -SCALL_FRAME_OFFSET)
    for priv in reversed(spec.privs):
        _pop(b, priv)
    b.emit("move", R_T1, 0)


# --- closures ---


def _crtcls(b: _Builder, bindings: tuple[Binding, ...], code: Reg) -> None:
    if code == R1:
        raise b.error("crtcls code register cannot be r1")
    _malloc(b, R_T4, len(bindings))
    for binding in bindings:
        b.emit("store", R_T4, binding.reg)
        b.emit("lea", R_T4, 1)
    b.emit("lea", R_T4, -len(bindings))
    b.emit("restrict", R_T4, RW_GLOBAL)
    _malloc(b, R1, CLOSURE_RECORD_SIZE)
    b.emit("store", R1, R_T4)
    b.emit("move", R_T4, 0)
    b.emit("lea", R1, 1)
    b.emit("store", R1, code)
    for instr in CLOSURE_CODE:
        b.emit("lea", R1, 1)
        b.emit("move", R_T1, encode_instr(instr))
        b.emit("store", R1, R_T1)
    b.emit("move", R_T1, 0)
    b.emit("lea", R1, -(len(CLOSURE_CODE) - 1))
    b.emit("restrict", R1, E_GLOBAL)


def _load_env(b: _Builder, reg: Reg, name: str) -> None:
    b.emit("move", R_T1, R_ENV)
    b.emit("lea", R_T1, b.env_slot(name))
    b.emit("load", reg, R_T1)
    b.emit("move", R_T1, 0)


def _store_env(b: _Builder, name: str, value: Reg | int) -> None:
    b.emit("move", R_T1, R_ENV)
    b.emit("lea", R_T1, b.env_slot(name))
    if isinstance(value, Reg):
        b.emit("store", R_T1, value)
        b.emit("move", R_T1, 0)
        return
    b.emit("move", R_T2, value)
    b.emit("store", R_T1, R_T2)
    b.emit("move", R_T1, 0)
    b.emit("move", R_T2, 0)


# --- checks ---


def _reqglob(b: _Builder, reg: Reg) -> None:
    if not b.options.check_global:
        return
    ok = b.fresh("reqglob_ok")
    b.emit("getl", R_T1, reg)
    b.emit("minus", R_T1, R_T1, encode_loc(Locality.local))
    b.emit("move", R_T2, PC)
    b.emit("lea", R_T2, LabelRef(ok))
    b.emit("jnz", R_T2, R_T1)
    b.emit("fail")
    b.label(ok)
    b.emit("move", R_T1, 0)
    b.emit("move", R_T2, 0)


def _reqperm(b: _Builder, reg: Reg, perm: int) -> None:
    fail, ok = b.fresh("reqperm_fail"), b.fresh("reqperm_ok")
    b.emit("getp", R_T1, reg)
    b.emit("minus", R_T1, R_T1, perm)
    b.emit("move", R_T2, PC)
    b.emit("lea", R_T2, LabelRef(fail))
    b.emit("jnz", R_T2, R_T1)
    b.emit("move", R_T2, PC)
    b.emit("lea", R_T2, LabelRef(ok))
    b.emit("jmp", R_T2)
    b.label(fail)
    b.emit("fail")
    b.label(ok)
    b.emit("move", R_T1, 0)
    b.emit("move", R_T2, 0)


def _prepstack(b: _Builder, reg: Reg) -> None:
    if not b.options.check_stack:
        return
    _reqperm(b, reg, encode_perm(Perm.rwlx))
    b.emit("getb", R_T1, reg)
    b.emit("geta", R_T2, reg)
    b.emit("minus", R_T1, R_T1, R_T2)
    b.emit("lea", reg, R_T1)
    b.emit("minus", R_T1, 0, 1)
    b.emit("lea", reg, R_T1)
    b.emit("move", R_T1, 0)
    b.emit("move", R_T2, 0)


# --- dispatch ---


def _expand_macro(b: _Builder, call: MacroCall) -> None:
    args = call.args
    name = call.name
    if name == "fetch":
        _fetch(b, args[0], args[1].name)  # type: ignore[arg-type, union-attr]
    elif name == "malloc":
        _malloc(b, args[0], args[1])  # type: ignore[arg-type]
    elif name == "call":
        _call(b, args[0])  # type: ignore[arg-type]
    elif name == "scall":
        _scall(b, args[0])  # type: ignore[arg-type]
    elif name == "assert":
        flag = args[2].name if len(args) == 3 else None  # type: ignore[union-attr]
        _assert(b, args[0], args[1], flag)  # type: ignore[arg-type]
    elif name == "mclear":
        _mclear(b, args[0])  # type: ignore[arg-type]
    elif name == "rclear":
        _rclear(b, _resolve_set(args[0]))  # type: ignore[arg-type]
    elif name == "push":
        _push(b, args[0])  # type: ignore[arg-type]
    elif name == "pop":
        _pop(b, args[0])  # type: ignore[arg-type]
    elif name == "crtcls":
        bindings = args[0] if isinstance(args[0], tuple) else ()
        _crtcls(b, bindings, args[1])  # type: ignore[arg-type]
    elif name == "reqglob":
        _reqglob(b, args[0])  # type: ignore[arg-type]
    elif name == "reqperm":
        _reqperm(b, args[0], args[1])  # type: ignore[arg-type]
    elif name == "prepstack":
        _prepstack(b, args[0])  # type: ignore[arg-type]
    elif name == "load":
        _load_env(b, args[0], args[1].name)  # type: ignore[arg-type, union-attr]
    elif name == "store" and isinstance(args[0], LabelRef):
        _store_env(b, args[0].name, args[1])  # type: ignore[arg-type]
    elif name == "store":
        b.emit("move", R_T1, args[1])  # type: ignore[arg-type]
        b.emit("store", args[0], R_T1)  # type: ignore[arg-type]
        b.emit("move", R_T1, 0)
    elif name in ("lea", "restrict"):
        b.emit("move", args[0], args[1])  # type: ignore[arg-type]
        b.emit(name, args[0], args[2])  # type: ignore[arg-type]
    elif name == "subseg":
        b.emit("move", args[0], args[1])  # type: ignore[arg-type]
        b.emit("subseg", args[0], args[2], args[3])  # type: ignore[arg-type]
    else:
        raise b.error(f"unknown macro '{name}'")


def _resolve(name: str, items: list[AsmItem]) -> tuple[list[Instr | Word], dict[str, int]]:
    labels: dict[str, int] = {}
    offset = 0
    for item in items:
        if isinstance(item, LabelDef):
            labels[item.name] = offset
        else:
            offset += 1

    resolved: list[Instr | Word] = []
    for item in items:
        if isinstance(item, DataWord):
            resolved.append(item.word)
        elif isinstance(item, CoreInstr):
            args = []
            for arg in item.args:
                if isinstance(arg, LabelRef):
                    if arg.name not in labels:
                        raise AssemblyError(
                            f"undefined label '{arg.name}' in unit {name}", item.line
                        )
                    arg = labels[arg.name] - (len(resolved) - 1)
                args.append(arg)
            resolved.append(Instr(item.op, tuple(args)))
    return resolved, labels


def expand(
    unit: AsmUnit | ExpandedUnit, options: ExpandOptions | None = None
) -> ExpandedUnit:
    """
    Replaces every macro of ``unit`` by its core-instruction sequence.

    Parameters
    ----------
    unit : AsmUnit | ExpandedUnit
        Parsed unit; an already expanded unit is returned unchanged
    options : ExpandOptions, optional
        Which protective checks to emit (all by default)

    Returns
    -------
    ExpandedUnit
        Core instructions and data words with labels resolved to offsets
    """
    if isinstance(unit, ExpandedUnit):
        return unit
    b = _Builder(unit, options or ExpandOptions())
    for item in unit.items:
        if isinstance(item, MacroCall):
            b.line = item.line
            _expand_macro(b, item)
        else:
            b.items.append(item)
    items, labels = _resolve(unit.name, b.items)
    logger.debug("Expanded unit %s to %d words", unit.name, len(items))
    return ExpandedUnit(
        name=unit.name,
        items=tuple(items),
        labels={name: offset for name, offset in labels.items() if not name.startswith(".")},
        imports=tuple(unit.imports),
        exports=tuple(unit.exports),
        flags=tuple(unit.flags),
        flag_perm=unit.flag_perm,
        flag_init=dict(unit.flag_init),
    )
