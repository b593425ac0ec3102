import itertools

from hypothesis import given, strategies as st
import pytest

from capmachine.isa import (
    INFINITY,
    PC,
    R0,
    R_STK,
    SIGNATURES,
    Capability,
    Grant,
    Instr,
    Locality,
    Perm,
    PermPair,
    Reg,
    all_perm_pairs,
    decode_perm_pair,
    decode_word,
    encode_instr,
    encode_loc,
    encode_perm,
    encode_perm_pair,
    format_word,
    is_non_local,
    is_non_zero,
    parse_instr,
    parse_register,
    parse_word,
    perm_grants,
    perm_leq,
    perm_pair_leq,
    update_pc_perm,
    within_bounds,
)
from tests.helper import cap

G = Locality.global_
L = Locality.local


def test_perm_grants():
    assert perm_grants(Perm.rwlx) == Grant.READ | Grant.WRITE | Grant.EXECUTE | Grant.WRITE_LOCAL
    assert perm_grants(Perm.e) == Grant.NONE
    assert perm_grants(Perm.ro) == Grant.READ

    readable = {p for p in Perm if Grant.READ in perm_grants(p)}
    writable = {p for p in Perm if Grant.WRITE in perm_grants(p)}
    executable = {p for p in Perm if Grant.EXECUTE in perm_grants(p)}
    write_local = {p for p in Perm if Grant.WRITE_LOCAL in perm_grants(p)}
    assert readable == {Perm.rwx, Perm.rwlx, Perm.rx, Perm.rw, Perm.rwl, Perm.ro}
    assert writable == {Perm.rwx, Perm.rwlx, Perm.rw, Perm.rwl}
    assert executable == {Perm.rx, Perm.rwx, Perm.rwlx}
    assert write_local == {Perm.rwl, Perm.rwlx}


def test_perm_pair_leq_examples():
    assert perm_pair_leq(PermPair(Perm.rw, L), PermPair(Perm.rwx, G))
    assert not perm_pair_leq(PermPair(Perm.rwl, L), PermPair(Perm.rwx, L))
    assert perm_pair_leq(PermPair(Perm.e, G), PermPair(Perm.e, G))
    assert not perm_pair_leq(PermPair(Perm.rw, G), PermPair(Perm.rwx, L))


def test_perm_hierarchy():
    assert perm_leq(Perm.o, Perm.e)
    assert perm_leq(Perm.e, Perm.rx)
    assert perm_leq(Perm.ro, Perm.rwlx)
    assert perm_leq(Perm.rw, Perm.rwl)
    assert not perm_leq(Perm.e, Perm.ro)
    assert not perm_leq(Perm.ro, Perm.e)
    assert not perm_leq(Perm.rwl, Perm.rwx)
    assert not perm_leq(Perm.rwx, Perm.rwl)


def test_perm_pair_leq_is_partial_order():
    pairs = all_perm_pairs()
    assert len(pairs) == 16
    for a in pairs:
        assert perm_pair_leq(a, a)
    for a, b in itertools.product(pairs, repeat=2):
        if perm_pair_leq(a, b) and perm_pair_leq(b, a):
            assert a == b
    for a, b, c in itertools.product(pairs, repeat=3):
        if perm_pair_leq(a, b) and perm_pair_leq(b, c):
            assert perm_pair_leq(a, c)


def test_perm_grants_is_monotone():
    for a, b in itertools.product(Perm, repeat=2):
        if perm_leq(a, b):
            assert perm_grants(a) & perm_grants(b) == perm_grants(a)


def test_encodings():
    assert encode_perm(Perm.rwlx) == 7
    assert encode_loc(G) == 1
    assert encode_loc(L) == 0
    assert sorted(encode_perm(p) for p in Perm) == list(range(8))
    assert encode_perm_pair(PermPair(Perm.o, L)) == 0
    assert encode_perm_pair(PermPair(Perm.e, G)) == 11


def test_perm_pair_round_trip():
    for pair in all_perm_pairs():
        assert decode_perm_pair(encode_perm_pair(pair)) == pair
    assert decode_perm_pair(encode_perm_pair(PermPair(Perm.rx, G))) == PermPair(Perm.rx, G)


@given(st.integers())
def test_decode_perm_pair_is_total(n):
    pair = decode_perm_pair(n)
    if not 0 <= n <= 15:
        assert pair == PermPair(Perm.o, L)


def _instructions():
    registers = [R0, R_STK, PC]
    immediates = [-42, -1, 0, 1, 2**40]
    for op, signature in SIGNATURES.items():
        choices = [registers if kind == "r" else registers + immediates for kind in signature]
        for args in itertools.product(*choices):
            yield Instr(op, tuple(args))


def test_instruction_round_trip():
    count = 0
    for instr in _instructions():
        word = encode_instr(instr)
        assert word >= 0
        assert decode_word(word) == instr
        count += 1
    assert count > 100


@given(
    st.sampled_from(sorted(op for op, sig in SIGNATURES.items() if sig == "rvv")),
    st.integers(0, 32),
    st.integers(-(10**12), 10**12),
    st.integers(0, 32),
)
def test_instruction_round_trip_random(op, dst, imm, src):
    instr = Instr(op, (Reg(dst), imm, Reg(src)))
    assert decode_word(encode_instr(instr)) == instr


def test_decode_fallbacks():
    assert decode_word(encode_instr(Instr("halt"))) == Instr("halt")
    assert decode_word(cap(Perm.rwx, 0, 10, 0)).op == "fail"
    assert decode_word(-1).op == "fail"
    # opcode beyond the instruction set
    assert decode_word(31).op == "fail"
    # halt carries no operands
    assert decode_word(encode_instr(Instr("halt")) | (1 << 5)).op == "fail"


@given(st.integers())
def test_decode_word_is_total(n):
    assert decode_word(n).op in SIGNATURES


def test_update_pc_perm():
    assert update_pc_perm(cap(Perm.e, 10, 20, 12)) == cap(Perm.rx, 10, 20, 12)
    local = cap(Perm.rwx, 0, 5, 3, L)
    assert update_pc_perm(local) == local
    assert update_pc_perm(7) == 7
    entry = cap(Perm.e, 10, 20, 12, L)
    assert update_pc_perm(update_pc_perm(entry)) == update_pc_perm(entry)


def test_within_bounds():
    assert within_bounds(cap(Perm.rw, 5, 10, 10))
    assert not within_bounds(cap(Perm.rw, 5, 10, 11))
    assert not within_bounds(cap(Perm.rw, 5, 10, 4))
    assert within_bounds(cap(Perm.rw, 5, INFINITY, 10**9))
    assert not within_bounds(cap(Perm.rw, 5, 4, 5))


def test_is_non_zero_and_non_local():
    assert not is_non_zero(0)
    assert is_non_zero(-42)
    assert is_non_zero(cap(Perm.o, 0, 0, 0))
    assert is_non_local(3)
    assert is_non_local(cap(Perm.rw, 0, 1, 0))
    assert not is_non_local(cap(Perm.rw, 0, 1, 0, L))


def test_word_syntax():
    assert format_word(5) == "int 5"
    assert format_word(cap(Perm.rwlx, 8000, 8063, 7999, L)) == "cap rwlx local 8000 8063 7999"
    assert format_word(cap(Perm.rw, 1, INFINITY, 1)) == "cap rw global 1 inf 1"
    for text in ("int -42", "cap e global 10 20 12", "cap o local 0 inf 3"):
        assert format_word(parse_word(text)) == text
    with pytest.raises(ValueError):
        parse_word("cap rwz global 0 1 0")
    with pytest.raises(ValueError):
        parse_word("cap rw global 0 1")


def test_registers():
    assert parse_register("pc") == PC
    assert parse_register("r_stk") == Reg(31)
    assert parse_register("r_t1") == Reg(26)
    assert parse_register("r32") is None
    assert str(Reg(30)) == "r_env"
    with pytest.raises(ValueError):
        Reg(33)


def test_parse_instr():
    assert parse_instr("move r1 42") == Instr("move", (Reg(1), 42))
    assert parse_instr("lea r_stk -1") == Instr("lea", (R_STK, -1))
    assert str(parse_instr("jnz r2 r3")) == "jnz r2 r3"
    with pytest.raises(ValueError):
        parse_instr("jmp 3")
    with pytest.raises(ValueError):
        parse_instr("halt r1")
