"""Small-step operational semantics of the capability machine."""

from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass, replace
from enum import Enum

from .isa import (
    EXECUTABLE,
    INFINITY,
    INFINITY_WORD,
    NUM_REGISTERS,
    PC,
    WRITE_LOCAL,
    Capability,
    Grant,
    Instr,
    Locality,
    Perm,
    Reg,
    Word,
    decode_perm_pair,
    decode_word,
    encode_instr,
    encode_loc,
    encode_perm,
    format_word,
    is_non_zero,
    parse_word,
    perm_grants,
    perm_pair_leq,
    update_pc_perm,
    within_bounds,
)


class Memory(Mapping[int, Word]):
    """
    Sparse memory with total lookups.

    Unwritten addresses read as ``0``; iteration and ``len`` only reflect the
    explicitly written cells, in ascending address order.
    """

    def __init__(self, cells: Mapping[int, Word] | None = None) -> None:
        self._cells: dict[int, Word] = dict(cells) if cells is not None else {}

    def __getitem__(self, addr: int) -> Word:
        return self._cells.get(addr, 0)

    def __contains__(self, addr: object) -> bool:
        return addr in self._cells

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self._cells))

    def __len__(self) -> int:
        return len(self._cells)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Memory):
            return self._cells == other._cells
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._cells.items()))

    def __repr__(self) -> str:
        return f"Memory({len(self._cells)} cells)"

    def cells(self) -> dict[int, Word]:
        return dict(self._cells)

    def updated(self, cells: Mapping[int, Word]) -> "Memory":
        merged = dict(self._cells)
        merged.update(cells)
        return Memory(merged)


def reg_0() -> tuple[Word, ...]:
    return (0,) * NUM_REGISTERS


@dataclass(frozen=True)
class ExecConf:
    """
    Machine state: a register file indexed by register number and a memory

    Attributes
    ----------
    reg : tuple[Word, ...]
        One word per register; index 32 is ``pc``
    mem : Memory
        Current memory
    """

    reg: tuple[Word, ...]
    mem: Memory

    def __post_init__(self) -> None:
        if len(self.reg) != NUM_REGISTERS:
            raise ValueError(
                f"Register file must hold {NUM_REGISTERS} words, got {len(self.reg)}"
            )

    def __getitem__(self, reg: Reg) -> Word:
        return self.reg[reg.index]

    def with_registers(self, updates: Mapping[Reg, Word]) -> "ExecConf":
        reg = list(self.reg)
        for name, word in updates.items():
            reg[name.index] = word
        return replace(self, reg=tuple(reg))


class Status(Enum):
    RUNNING = "running"
    HALTED = "halted"
    FAILED = "failed"
    OUT_OF_FUEL = "out-of-fuel"


@dataclass(frozen=True)
class StepResult:
    """Outcome of a single step; ``conf`` is set while running, ``mem`` once halted."""

    status: Status
    conf: ExecConf | None = None
    mem: Memory | None = None


@dataclass(frozen=True)
class RunOutcome:
    """
    Outcome of a fuel-bounded run

    Attributes
    ----------
    status : Status
        HALTED, FAILED or OUT_OF_FUEL
    steps : int
        Number of executed steps
    mem : Memory | None
        Memory at halt time
    conf : ExecConf | None
        Final configuration when the run ran out of fuel
    reg : tuple[Word, ...] | None
        Register file at halt time
    """

    status: Status
    steps: int
    mem: Memory | None = None
    conf: ExecConf | None = None
    reg: tuple[Word, ...] | None = None


@dataclass(frozen=True)
class TraceEvent:
    step: int
    pc: Word
    instr: Instr | None
    status: Status


def format_trace_event(event: TraceEvent) -> str:
    """Formats a trace event as ``<step> <pc-addr> <mnemonic> <result>``."""
    pc_addr = str(event.pc.addr) if isinstance(event.pc, Capability) else "-"
    mnemonic = event.instr.op if event.instr is not None else "-"
    return f"{event.step} {pc_addr} {mnemonic} {event.status.value}"


TraceSink = Callable[[TraceEvent], None]


class Executor:
    """Mutable machine used by :func:`step` and :func:`run`; never shared between runs."""

    def __init__(self, conf: ExecConf) -> None:
        self.reg: list[Word] = list(conf.reg)
        self.mem: dict[int, Word] = conf.mem.cells()
        self.last_instr: Instr | None = None

    def conf(self) -> ExecConf:
        return ExecConf(tuple(self.reg), Memory(self.mem))

    def memory(self) -> Memory:
        return Memory(self.mem)

    def step(self) -> Status:
        self.last_instr = None
        pc = self.reg[PC.index]
        if not (
            isinstance(pc, Capability) and pc.perm in EXECUTABLE and within_bounds(pc)
        ):
            return Status.FAILED
        instr = decode_word(self.mem.get(pc.addr, 0))
        self.last_instr = instr
        return getattr(self, f"_exec_{instr.op}")(*instr.args)

    # --- helpers ---

    def _value(self, operand: Reg | int) -> Word:
        if isinstance(operand, Reg):
            return self.reg[operand.index]
        return operand

    def _next(self) -> Status:
        pc = self.reg[PC.index]
        if not isinstance(pc, Capability):
            return Status.FAILED
        self.reg[PC.index] = replace(pc, addr=pc.addr + 1)
        return Status.RUNNING

    def _set_and_next(self, dst: Reg, word: Word) -> Status:
        self.reg[dst.index] = word
        return self._next()

    def _capability(self, reg: Reg) -> Capability | None:
        word = self.reg[reg.index]
        return word if isinstance(word, Capability) else None

    def _int(self, operand: Reg | int) -> int | None:
        word = self._value(operand)
        return None if isinstance(word, Capability) else word

    # --- instructions ---

    def _exec_fail(self) -> Status:
        return Status.FAILED

    def _exec_halt(self) -> Status:
        return Status.HALTED

    def _exec_jmp(self, target: Reg) -> Status:
        self.reg[PC.index] = update_pc_perm(self.reg[target.index])
        return Status.RUNNING

    def _exec_jnz(self, target: Reg, cond: Reg | int) -> Status:
        if is_non_zero(self._value(cond)):
            return self._exec_jmp(target)
        return self._next()

    def _exec_move(self, dst: Reg, src: Reg | int) -> Status:
        return self._set_and_next(dst, self._value(src))

    def _exec_load(self, dst: Reg, src: Reg) -> Status:
        cap = self._capability(src)
        if cap is None or Grant.READ not in perm_grants(cap.perm):
            return Status.FAILED
        if not within_bounds(cap):
            return Status.FAILED
        return self._set_and_next(dst, self.mem.get(cap.addr, 0))

    def _exec_store(self, dst: Reg, src: Reg) -> Status:
        cap = self._capability(dst)
        if cap is None or Grant.WRITE not in perm_grants(cap.perm):
            return Status.FAILED
        if not within_bounds(cap):
            return Status.FAILED
        word = self.reg[src.index]
        if isinstance(word, Capability) and word.is_local:
            if cap.perm not in WRITE_LOCAL:
                return Status.FAILED
        self.mem[cap.addr] = word
        return self._next()

    def _arith(
        self, dst: Reg, a: Reg | int, b: Reg | int, fn: Callable[[int, int], int]
    ) -> Status:
        n1, n2 = self._int(a), self._int(b)
        if n1 is None or n2 is None:
            return Status.FAILED
        return self._set_and_next(dst, fn(n1, n2))

    def _exec_plus(self, dst: Reg, a: Reg | int, b: Reg | int) -> Status:
        return self._arith(dst, a, b, lambda x, y: x + y)

    def _exec_minus(self, dst: Reg, a: Reg | int, b: Reg | int) -> Status:
        return self._arith(dst, a, b, lambda x, y: x - y)

    def _exec_lt(self, dst: Reg, a: Reg | int, b: Reg | int) -> Status:
        return self._arith(dst, a, b, lambda x, y: 1 if x < y else 0)

    def _exec_lea(self, dst: Reg, offset: Reg | int) -> Status:
        n = self._int(offset)
        cap = self._capability(dst)
        if n is None or cap is None or cap.perm is Perm.e:
            return Status.FAILED
        if cap.addr + n < 0:
            return Status.FAILED
        return self._set_and_next(dst, replace(cap, addr=cap.addr + n))

    def _exec_restrict(self, dst: Reg, pair: Reg | int) -> Status:
        n = self._int(pair)
        cap = self._capability(dst)
        if n is None or cap is None:
            return Status.FAILED
        restricted = decode_perm_pair(n)
        if not perm_pair_leq(restricted, cap.pair):
            return Status.FAILED
        return self._set_and_next(dst, cap.with_pair(restricted))

    def _exec_subseg(self, dst: Reg, lo: Reg | int, hi: Reg | int) -> Status:
        n1, n2 = self._int(lo), self._int(hi)
        cap = self._capability(dst)
        if n1 is None or n2 is None or cap is None or cap.perm is Perm.e:
            return Status.FAILED
        if n1 < 0 or n1 < cap.base:
            return Status.FAILED
        end: int | float
        if n2 == INFINITY_WORD and cap.end == INFINITY:
            end = INFINITY
        elif 0 <= n2 <= cap.end:
            end = n2
        else:
            return Status.FAILED
        return self._set_and_next(dst, replace(cap, base=n1, end=end))

    def _exec_isptr(self, dst: Reg, src: Reg | int) -> Status:
        is_cap = isinstance(src, Reg) and isinstance(self.reg[src.index], Capability)
        return self._set_and_next(dst, 1 if is_cap else 0)

    def _exec_getp(self, dst: Reg, src: Reg) -> Status:
        cap = self._capability(src)
        if cap is None:
            return Status.FAILED
        return self._set_and_next(dst, encode_perm(cap.perm))

    def _exec_getl(self, dst: Reg, src: Reg) -> Status:
        cap = self._capability(src)
        if cap is None:
            return Status.FAILED
        return self._set_and_next(dst, encode_loc(cap.loc))

    def _exec_getb(self, dst: Reg, src: Reg) -> Status:
        cap = self._capability(src)
        if cap is None:
            return Status.FAILED
        return self._set_and_next(dst, cap.base)

    def _exec_gete(self, dst: Reg, src: Reg) -> Status:
        cap = self._capability(src)
        if cap is None:
            return Status.FAILED
        end = INFINITY_WORD if cap.end == INFINITY else int(cap.end)
        return self._set_and_next(dst, end)

    def _exec_geta(self, dst: Reg, src: Reg) -> Status:
        cap = self._capability(src)
        if cap is None:
            return Status.FAILED
        return self._set_and_next(dst, cap.addr)


def step(conf: ExecConf) -> StepResult:
    """Executes a single instruction of ``conf``."""
    executor = Executor(conf)
    status = executor.step()
    if status is Status.RUNNING:
        return StepResult(status, conf=executor.conf())
    if status is Status.HALTED:
        return StepResult(status, mem=executor.memory())
    return StepResult(status)


def run(conf: ExecConf, fuel: int, trace: TraceSink | None = None) -> RunOutcome:
    """
    Steps ``conf`` at most ``fuel`` times.

    Parameters
    ----------
    conf : ExecConf
        Initial configuration
    fuel : int
        Maximum number of steps (must be >= 0)
    trace : TraceSink, optional
        Receives one :class:`TraceEvent` per executed step

    Returns
    -------
    RunOutcome
        Halted with memory and registers, Failed, or OutOfFuel with the final configuration
    """
    if fuel < 0:
        raise ValueError(f"Fuel must be non-negative, got {fuel}")
    executor = Executor(conf)
    for count in range(1, fuel + 1):
        pc = executor.reg[PC.index]
        status = executor.step()
        if trace is not None:
            trace(TraceEvent(count, pc, executor.last_instr, status))
        if status is Status.HALTED:
            return RunOutcome(
                status, count, mem=executor.memory(), reg=tuple(executor.reg)
            )
        if status is Status.FAILED:
            return RunOutcome(status, count)
    return RunOutcome(Status.OUT_OF_FUEL, fuel, conf=executor.conf())


def dump_memory(mem: Mapping[int, Word]) -> str:
    """Formats memory as ``<addr>: <word>`` lines sorted by address."""
    return "".join(f"{addr}: {format_word(mem[addr])}\n" for addr in sorted(mem))


def parse_memory_dump(text: str) -> Memory:
    cells: dict[int, Word] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        addr, sep, word = line.partition(":")
        if not sep:
            raise ValueError(f"Line {number}: expected '<addr>: <word>'")
        cells[int(addr)] = parse_word(word)
    return Memory(cells)


def program_conf(
    program: list[Instr | Word],
    base: int = 0,
    registers: Mapping[Reg, Word] | None = None,
    memory: Mapping[int, Word] | None = None,
    perm: Perm = Perm.rx,
) -> ExecConf:
    """
    Places ``program`` at ``base`` and points an executable global pc at its first word.

    Instructions are encoded; plain words are stored as given.
    """
    cells: dict[int, Word] = dict(memory) if memory is not None else {}
    for offset, item in enumerate(program):
        cells[base + offset] = encode_instr(item) if isinstance(item, Instr) else item
    reg = list(reg_0())
    reg[PC.index] = Capability(
        perm, Locality.global_, base, base + len(program) - 1, base
    )
    for name, word in (registers or {}).items():
        reg[name.index] = word
    return ExecConf(tuple(reg), Memory(cells))
