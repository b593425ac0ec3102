"""Random machine configurations and straight-line programs for property checks."""

import numpy as np

from .isa import (
    INFINITY,
    MNEMONICS,
    NUM_REGISTERS,
    PC,
    SIGNATURES,
    Capability,
    Instr,
    Locality,
    Operand,
    Perm,
    Reg,
    Word,
    encode_instr,
)
from .machine import ExecConf, Memory, program_conf

MEMORY_SIZE = 16

_PERMS = list(Perm)
_LOCALITIES = list(Locality)


def random_capability(rng: np.random.Generator, span: int = MEMORY_SIZE) -> Capability:
    base = int(rng.integers(0, span))
    end: int | float = base + int(rng.integers(-1, span))
    if rng.random() < 0.1:
        end = INFINITY
    return Capability(
        _PERMS[int(rng.integers(len(_PERMS)))],
        _LOCALITIES[int(rng.integers(2))],
        base,
        end,
        int(rng.integers(-2, span + 4)),
    )


def random_instr(rng: np.random.Generator) -> Instr:
    op = MNEMONICS[int(rng.integers(len(MNEMONICS)))]
    args: list[Operand] = []
    for kind in SIGNATURES[op]:
        if kind == "v" and rng.random() < 0.5:
            args.append(int(rng.integers(-3, 20)))
        else:
            args.append(Reg(int(rng.integers(NUM_REGISTERS))))
    return Instr(op, tuple(args))


def random_word(rng: np.random.Generator) -> Word:
    choice = rng.random()
    if choice < 0.5:
        return encode_instr(random_instr(rng))
    if choice < 0.8:
        return int(rng.integers(-50, 50))
    return random_capability(rng)


def random_conf(rng: np.random.Generator) -> ExecConf:
    """
    Builds an arbitrary configuration: random register words and a 16-word memory.

    The pc is an executable capability over the memory most of the time so that
    stepping reaches the instruction semantics rather than failing immediately.
    """
    reg: list[Word] = [random_word(rng) for _ in range(NUM_REGISTERS)]
    if rng.random() < 0.9:
        reg[PC.index] = Capability(
            [Perm.rx, Perm.rwx, Perm.rwlx][int(rng.integers(3))],
            _LOCALITIES[int(rng.integers(2))],
            0,
            MEMORY_SIZE - 1,
            int(rng.integers(0, MEMORY_SIZE)),
        )
    mem = Memory({addr: random_word(rng) for addr in range(MEMORY_SIZE)})
    return ExecConf(tuple(reg), mem)


DATA_BASE = 100
DATA_SIZE = 16


def random_halting_program(rng: np.random.Generator) -> ExecConf:
    """
    Generates a straight-line program that always halts.

    Registers r1..r8 only ever hold integers; r9 is a global read-write capability
    over a data area that receives up to ``DATA_SIZE`` stores.
    """
    data = Reg(9)
    program: list[Instr | Word] = []
    stores = 0
    for _ in range(int(rng.integers(3, 30))):
        dst = Reg(int(rng.integers(1, 9)))
        src = Reg(int(rng.integers(1, 9)))
        imm = int(rng.integers(-20, 20))
        kind = int(rng.integers(6))
        if kind == 0:
            program.append(Instr("move", (dst, imm)))
        elif kind == 1:
            program.append(Instr("plus", (dst, src, imm)))
        elif kind == 2:
            program.append(Instr("minus", (dst, imm, src)))
        elif kind == 3:
            program.append(Instr("lt", (dst, src, imm)))
        elif kind == 4:
            program.append(Instr("isptr", (dst, data)))
        elif stores < DATA_SIZE:
            program.append(Instr("store", (data, src)))
            program.append(Instr("lea", (data, 1)))
            stores += 1
    program.append(Instr("halt"))
    data_cap = Capability(
        Perm.rw, Locality.global_, DATA_BASE, DATA_BASE + DATA_SIZE - 1, DATA_BASE
    )
    return program_conf(program, registers={data: data_cap})
