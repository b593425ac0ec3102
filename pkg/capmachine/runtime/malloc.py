"""
In-machine bump allocator and a host-side conformance oracle.

The allocator is an ordinary component written in the assembly dialect. Its
flag table is private data: the bump capability over the remaining heap and two
cells where the callee-saved temporaries are kept during the call.
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import logging

import numpy as np

from ..assembler import parse
from ..config import LayoutConfig
from ..fuzz import random_word
from ..isa import (
    HALT,
    PC,
    R0,
    R1,
    R_T3,
    ALL_REGISTERS,
    Capability,
    Locality,
    Perm,
    Reg,
    Word,
    encode_instr,
    format_word,
    update_pc_perm,
)
from ..linker import ComponentLayout, Layout, ObjectImage, SystemImage, build_component, link
from ..machine import ExecConf, Memory, RunOutcome, Status, reg_0, run

logger = logging.getLogger(__name__)

Range = tuple[int, int]

MALLOC_NAME = "malloc"
# registers the allocator may change; everything else is restored before returning
MALLOC_CLOBBERS = frozenset({PC, R1, R_T3})


@dataclass(frozen=True)
class MallocLayout:
    """
    Placement of the allocator

    Attributes
    ----------
    code : int
        Base address of the allocator's code
    link : int
        Base address of its (empty) linking table
    data : int
        Base address of its three private state cells
    heap_base : int
        First heap address (>= 1)
    heap_end : int
        Last heap address
    permit_write_local : bool, optional
        Hand out rwlx instead of rwx capabilities; only used as a negative control
    """

    code: int
    link: int
    data: int
    heap_base: int
    heap_end: int
    permit_write_local: bool = False

    def __post_init__(self) -> None:
        if self.heap_base < 1:
            raise ValueError(f"Heap base must be >= 1, got {self.heap_base}")
        if self.heap_end < self.heap_base:
            raise ValueError("Heap must not be empty")

    @classmethod
    def from_config(cls, config: LayoutConfig, permit_write_local: bool = False) -> "MallocLayout":
        return cls(
            code=config.malloc_base,
            link=config.malloc_link,
            data=config.malloc_data,
            heap_base=config.heap_base,
            heap_end=config.heap_base + config.heap_size - 1,
            permit_write_local=permit_write_local,
        )

    @property
    def heap_perm(self) -> Perm:
        return Perm.rwlx if self.permit_write_local else Perm.rwx

    @property
    def component_layout(self) -> ComponentLayout:
        return ComponentLayout(code=self.code, link=self.link, flags=self.data)


def malloc_source(layout: MallocLayout) -> str:
    heap = Capability(
        layout.heap_perm, Locality.global_, layout.heap_base, layout.heap_end, layout.heap_base
    )
    return f"""\
.unit {MALLOC_NAME}
.export {MALLOC_NAME}
.flag heap t2 t4
.flagperm rwl
.init heap {format_word(heap)}
// save r_t2 and r_t4 in the data cells
{MALLOC_NAME}: move r_t3 pc
    lea r_t3 -1
    load r_t3 r_t3
    lea r_t3 1
    store r_t3 r_t2
    lea r_t3 1
    store r_t3 r_t4
    lea r_t3 -2
// size must be a non-negative integer
    isptr r_t2 r1
    move r_t4 pc
    lea r_t4 bad
    jnz r_t4 r_t2
    lt r_t2 r1 0
    jnz r_t4 r_t2
// bump, then shrink a copy of the old bump capability to [a, a+size-1]
    load r_t4 r_t3
    geta r_t2 r_t4
    lea r_t4 r1
    store r_t3 r_t4
    minus r1 0 r1
    lea r_t4 r1
    minus r1 r_t2 r1
    minus r1 r1 1
    subseg r_t4 r_t2 r1
    move r1 r_t4
zero: geta r_t2 r1
    gete r_t3 r1
    lt r_t2 r_t3 r_t2
    move r_t3 pc
    lea r_t3 done
    jnz r_t3 r_t2
    store r1 r_t2
    lea r1 1
    move r_t3 pc
    lea r_t3 zero
    jmp r_t3
// restore r_t2 and r_t4, return the allocation in r1
done: move r1 r_t4
    move r_t3 pc
    getb r_t2 r_t3
    geta r_t4 r_t3
    minus r_t2 r_t2 r_t4
    lea r_t3 r_t2
    lea r_t3 1
    load r_t3 r_t3
    lea r_t3 2
    load r_t4 r_t3
    lea r_t3 -1
    load r_t2 r_t3
    move r_t3 0
    jmp r0
bad: fail
"""


def malloc_component(layout: MallocLayout) -> ObjectImage:
    """Assembles the allocator for ``layout``; its single export is ``malloc``."""
    return build_component(parse(malloc_source(layout), MALLOC_NAME))


@dataclass(frozen=True)
class MallocCallRecord:
    """
    Observation of a single allocator call

    Attributes
    ----------
    size : Word
        Requested size (``r1`` on entry)
    pre : tuple[Word, ...]
        Register file on entry
    post : tuple[Word, ...]
        Register file when the continuation halted
    mem : Memory
        Memory after the call
    """

    size: Word
    pre: tuple[Word, ...]
    post: tuple[Word, ...]
    mem: Memory

    @property
    def result(self) -> Word:
        return self.post[R1.index]

    @property
    def allocated(self) -> Range | None:
        result = self.result
        if isinstance(result, Capability) and isinstance(result.end, int):
            return (result.base, result.end)
        return None


@dataclass
class MallocVerdict:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _overlaps(a: Range, b: Range) -> bool:
    return a[0] <= a[1] and b[0] <= b[1] and a[0] <= b[1] and b[0] <= a[1]


def check_malloc_spec(
    record: MallocCallRecord,
    prior: Sequence[Range],
    occupied: Sequence[Range] = (),
    perm: Perm = Perm.rwx,
) -> MallocVerdict:
    """
    Checks one allocator call against the allocation contract.

    Parameters
    ----------
    record : MallocCallRecord
        The observed call
    prior : Sequence[Range]
        Ranges handed out by earlier calls
    occupied : Sequence[Range], optional
        Ranges of the initial image (code, tables, data) the allocation must avoid
    perm : Perm, optional
        Expected permission of the returned capability

    Returns
    -------
    MallocVerdict
        One entry per violated clause
    """
    verdict = MallocVerdict()
    result = record.result
    if not (
        isinstance(result, Capability)
        and result.perm is perm
        and result.loc is Locality.global_
        and result.addr == result.base
    ):
        verdict.violations.append(f"shape: r1 = {format_word(result)}")
        return verdict

    if not isinstance(record.size, int) or result.end - result.base != record.size - 1:
        verdict.violations.append(
            f"size: requested {record.size}, got [{result.base}, {result.end}]"
        )
    allocated = record.allocated
    if allocated is not None:
        dirty = [a for a in range(allocated[0], allocated[1] + 1) if record.mem[a] != 0]
        if dirty:
            verdict.violations.append(f"zero-fill: non-zero cells at {dirty}")
        clashes = [r for r in (*prior, *occupied) if _overlaps(allocated, r)]
        if clashes:
            verdict.violations.append(f"freshness: {allocated} overlaps {clashes}")

    changed = [
        str(reg)
        for reg in ALL_REGISTERS
        if reg not in MALLOC_CLOBBERS and record.pre[reg.index] != record.post[reg.index]
    ]
    if changed:
        verdict.violations.append(f"preservation: {', '.join(changed)} changed")
    return verdict


class MallocHarness:
    """
    Links the allocator alone and calls it directly, one request at a time.

    The continuation is a global enter capability onto a single ``halt`` word, so
    every successful call ends with the machine halted right after the return.
    """

    def __init__(self, layout: MallocLayout, return_addr: int, fuel: int = 100_000) -> None:
        self.layout = layout
        self.fuel = fuel
        self.image: SystemImage = link(
            [malloc_component(layout)],
            Layout(
                components={MALLOC_NAME: layout.component_layout},
                regions={
                    "heap": (layout.heap_base, layout.heap_end),
                    "return": (return_addr, return_addr),
                },
            ),
        )
        self.mem = self.image.memory.updated({return_addr: encode_instr(HALT)})
        self.return_cap = Capability(
            Perm.e, Locality.global_, return_addr, return_addr, return_addr
        )
        self.allocations: list[Range] = []

    def occupied(self) -> list[Range]:
        ranges = self.image.components[MALLOC_NAME]
        return [ranges.code, ranges.link, ranges.flags, self.image.regions["return"]]

    def fill_heap(self, words: Mapping[int, Word]) -> None:
        self.mem = self.mem.updated(words)

    def call(
        self, size: Word, registers: Mapping[Reg, Word] | None = None
    ) -> tuple[RunOutcome, MallocCallRecord | None]:
        conf = ExecConf(reg_0(), self.mem).with_registers(
            {
                **(registers or {}),
                PC: update_pc_perm(self.image.entries[MALLOC_NAME]),
                R0: self.return_cap,
                R1: size,
            }
        )
        outcome = run(conf, self.fuel)
        if outcome.status is not Status.HALTED or outcome.mem is None or outcome.reg is None:
            logger.debug("malloc(%s) ended with %s", size, outcome.status.value)
            return outcome, None
        record = MallocCallRecord(size, conf.reg, outcome.reg, outcome.mem)
        self.mem = outcome.mem
        if record.allocated is not None:
            self.allocations.append(record.allocated)
        return outcome, record


def run_random_sequence(
    rng: np.random.Generator,
    layout: MallocLayout,
    return_addr: int,
    calls: int = 8,
    max_size: int = 16,
) -> list[MallocVerdict]:
    """
    Performs ``calls`` allocations of random sizes with random register contents.

    The heap is pre-filled with non-zero garbage so that zero-fill is observable.
    """
    harness = MallocHarness(layout, return_addr)
    harness.fill_heap(
        {
            addr: int(rng.integers(1, 1_000))
            for addr in range(layout.heap_base, layout.heap_end + 1)
        }
    )
    verdicts = []
    for _ in range(calls):
        size = int(rng.integers(0, max_size + 1))
        garbage = {
            reg: random_word(rng)
            for reg in ALL_REGISTERS
            if reg not in MALLOC_CLOBBERS and reg != R0
        }
        prior = list(harness.allocations)
        outcome, record = harness.call(size, garbage)
        if record is None:
            verdicts.append(MallocVerdict([f"run: {outcome.status.value}"]))
            continue
        verdicts.append(
            check_malloc_spec(record, prior, harness.occupied(), layout.heap_perm)
        )
    return verdicts
