"""
Handwritten adversary components.

Callee adversaries are invoked by f1, f2 and f3 and export ``adv``. Context
adversaries own the initial pc of g1 and g2: they obtain the trusted closure by
calling the entry in ``r1``, then call that closure with a callback of their own.
Every adversary records the verdict it must produce for each scenario and variant.
"""

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum

from .programs import CALLEE_SCENARIOS, CONTEXT_SCENARIOS
from .variants import VARIANTS, Variant
from .verdict import Verdict

HFZ = Verdict.HALTED_FLAG_ZERO
HFS = Verdict.HALTED_FLAG_SET
FAILED = Verdict.FAILED
OOF = Verdict.OUT_OF_FUEL


class Intent(Enum):
    BENIGN = "benign"
    STASH_LOCAL_TO_HEAP = "stash-local-to-heap"
    REPLAY_RETURN_POINTER = "replay-return-pointer"
    STACK_SNOOP = "stack-snoop"
    CALLBACK_CAPTURE = "callback-capture"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Adversary:
    """
    An untrusted component with its expected outcomes

    Attributes
    ----------
    name : str
        Unique name within the corpus
    source : str
        Assembly source; the component is always named ``adversary``
    intent : Intent
        The attack the code attempts
    expected : Mapping[str, Mapping[Variant, Verdict]]
        Expected verdict per scenario and variant; only listed pairs are run
    description : str, optional
        One-line summary
    """

    name: str
    source: str
    intent: Intent
    expected: Mapping[str, Mapping[Variant, Verdict]]
    description: str = field(default="", compare=False)

    @property
    def scenarios(self) -> tuple[str, ...]:
        return tuple(self.expected)

    def expected_verdict(self, scenario: str, variant: Variant) -> Verdict:
        try:
            return self.expected[scenario][variant]
        except KeyError:
            raise ValueError(
                f"Adversary '{self.name}' has no expectation for {scenario}/{variant.value}"
            ) from None


def _table(
    default: Verdict,
    overrides: Mapping[Variant, Verdict] | None = None,
    variants: Iterable[Variant] = VARIANTS,
) -> dict[Variant, Verdict]:
    table = {variant: default for variant in variants}
    table.update(overrides or {})
    return table


def _for(scenarios: Iterable[str], table: dict[Variant, Verdict]) -> dict[str, dict[Variant, Verdict]]:
    return {scenario: dict(table) for scenario in scenarios}


# --- callee adversaries ---

_CALLEE_HEADER = """\
.import malloc adv
.export adv
"""

_BENIGN = _CALLEE_HEADER + """\
adv: jmp r0
"""

_STASH_LOCAL = _CALLEE_HEADER + """\
adv: malloc r5 1
    store r5 r0
    jmp r0
"""

# Keeps the first return pointer 20 words up its stack window and jumps to it
# when it finds it there again on a later call.
_REPLAY = _CALLEE_HEADER + """\
adv: isptr r5 r_stk
    move r6 pc
    lea r6 stk
    jnz r6 r5
    jmp r0
stk: move r7 r_stk
    lea r7 20
    load r8 r7
    move r6 pc
    lea r6 replay
    jnz r6 r8
    store r7 r0
    jmp r0
replay: jmp r8
"""

_SNOOP = _CALLEE_HEADER + """\
adv: isptr r5 r_stk
    move r6 pc
    lea r6 scan
    jnz r6 r5
    jmp r0
scan: move r7 r_stk
    move r8 16
loop: lea r7 1
    load r9 r7
    move r6 pc
    lea r6 seen
    jnz r6 r9
    minus r8 r8 1
    move r6 pc
    lea r6 loop
    jnz r6 r8
    jmp r0
seen: fail
"""

_TAMPER = _CALLEE_HEADER + """\
adv: lea r0 1
    jmp r0
"""

_SPIN = _CALLEE_HEADER + """\
adv: move r5 pc
    jmp r5
"""

# --- context adversaries ---

_CONTEXT_HEADER = """\
.import malloc
.export adv
adv: scall r1([],[])
    move r2 r1
"""

_GLOBAL_CALLBACK = """\
    move r1 pc
    lea r1 cb
    restrict r1 11
    scall r2([r1],[])
    halt
"""

_BENIGN_CALLBACK = _CONTEXT_HEADER + _GLOBAL_CALLBACK + """\
cb: jmp r0
"""

_SNOOP_CALLBACK = _CONTEXT_HEADER + _GLOBAL_CALLBACK + """\
cb: isptr r5 r_stk
    move r6 pc
    lea r6 scan
    jnz r6 r5
    jmp r0
scan: move r7 r_stk
    move r8 16
loop: lea r7 1
    load r9 r7
    move r6 pc
    lea r6 seen
    jnz r6 r9
    minus r8 r8 1
    move r6 pc
    lea r6 loop
    jnz r6 r8
    jmp r0
seen: fail
"""


def _phased(bindings: str, first: str, second: str, tail: str = "") -> str:
    """
    A context adversary whose callback counts its invocations in ``phase``.

    The first invocation returns at once, the second runs ``first`` and every
    later one runs ``second``; ``clo`` holds the trusted closure.
    """
    return (
        _CONTEXT_HEADER
        + f"""\
    move r5 0
    move r6 pc
    lea r6 cb
    crtcls [{bindings}] r6
    scall r2([r1],[])
    halt
cb: load r5 phase
    move r6 pc
    lea r6 notzero
    jnz r6 r5
    store phase 1
    jmp r0
notzero: minus r7 r5 1
    move r6 pc
    lea r6 second
    jnz r6 r7
    store phase 2
{first}second:
{second}{tail}"""
    )


# Stashes the return pointer of the second callback high up the stack, re-enters
# the closure so x is reset, and jumps to the stash from the nested callback.
_REPLAY_CALLBACK = _phased(
    "(phase, r5), (clo, r2)",
    first="""\
    move r8 r_stk
    lea r8 20
    store r8 r0
    load r2 clo
    jmp r2
""",
    second="""\
    move r8 r_stk
    lea r8 11
    load r9 r8
    jmp r9
""",
)

_STASH_CALLBACK = _phased(
    "(phase, r5), (clo, r2), (cell, r5)",
    first="""\
    malloc r8 1
    store r8 r0
    store cell r8
    load r2 clo
    jmp r2
""",
    second="""\
    load r8 cell
    load r9 r8
    jmp r9
""",
)

# Copies a trampoline onto the stack next to the return pointer and re-enters
# the closure with a local callback over those five words.
_CAPTURE_CALLBACK = _phased(
    "(phase, r5), (clo, r2)",
    first="""\
    move r8 r_stk
    lea r8 1
    move r9 pc
    lea r9 snip
"""
    + """\
    load r10 r9
    store r8 r10
    lea r8 1
    lea r9 1
""" * 4
    + """\
    store r8 r0
    move r11 r_stk
    geta r12 r11
    plus r12 r12 1
    plus r13 r12 4
    subseg r11 r12 r13
    lea r11 1
    restrict r11 10
    plus r12 r12 5
    gete r13 r_stk
    subseg r_stk r12 r13
    move r1 r11
    load r2 clo
    jmp r2
""",
    second="""\
    fail
""",
    tail="""\
snip: move r5 pc
    lea r5 4
    load r5 r5
    jmp r5
""",
)

# Calls the closure with a heap block as its stack and, during the second
# callback, replaces the saved environment pointer with a fresh zeroed one.
_FORGED_STACK = _CONTEXT_HEADER + """\
    malloc r7 40
    lea r7 -1
    move r5 0
    move r6 pc
    lea r6 cb
    crtcls [(phase, r5), (heap, r7)] r6
    move r_stk r7
    move r0 pc
    lea r0 back
    restrict r0 11
    jmp r2
back: halt
cb: load r5 phase
    move r6 pc
    lea r6 notzero
    jnz r6 r5
    store phase 1
    jmp r0
notzero: malloc r8 1
    load r9 heap
    lea r9 2
    store r9 r8
    jmp r0
"""

_STANDARD_ONLY = (Variant.STANDARD,)

_CORPUS: tuple[Adversary, ...] = (
    Adversary(
        "benign",
        _BENIGN,
        Intent.BENIGN,
        _for(CALLEE_SCENARIOS, _table(HFZ)),
        "returns immediately",
    ),
    Adversary(
        "stash-local-to-heap",
        _STASH_LOCAL,
        Intent.STASH_LOCAL_TO_HEAP,
        _for(CALLEE_SCENARIOS, _table(FAILED, {Variant.PWL_HEAP: HFZ})),
        "stores the local return pointer into a fresh heap cell",
    ),
    Adversary(
        "replay-return-pointer",
        _REPLAY,
        Intent.REPLAY_RETURN_POINTER,
        _for(CALLEE_SCENARIOS, _table(HFZ)),
        "stashes the return pointer on the stack and replays it on the next call",
    ),
    Adversary(
        "stack-snoop",
        _SNOOP,
        Intent.STACK_SNOOP,
        _for(CALLEE_SCENARIOS, _table(HFZ)),
        "fails if any of the first 16 words of its stack window is non-zero",
    ),
    Adversary(
        "tamper-return",
        _TAMPER,
        Intent.CUSTOM,
        _for(CALLEE_SCENARIOS, _table(FAILED)),
        "moves the enter-only return pointer before using it",
    ),
    Adversary(
        "spin",
        _SPIN,
        Intent.CUSTOM,
        _for(CALLEE_SCENARIOS, _table(OOF, variants=_STANDARD_ONLY)),
        "never returns",
    ),
    Adversary(
        "benign-callback",
        _BENIGN_CALLBACK,
        Intent.BENIGN,
        _for(CONTEXT_SCENARIOS, _table(HFZ)),
        "passes a callback that returns immediately",
    ),
    Adversary(
        "replay-callback",
        _REPLAY_CALLBACK,
        Intent.REPLAY_RETURN_POINTER,
        {
            "g1": _table(FAILED, {Variant.NO_CLEAR: HFS}),
            "g2": _table(HFZ),
        },
        "re-enters the closure and replays a stashed return pointer from the nested call",
    ),
    Adversary(
        "stash-callback",
        _STASH_CALLBACK,
        Intent.STASH_LOCAL_TO_HEAP,
        {
            "g1": _table(FAILED, {Variant.PWL_HEAP: HFS}),
            "g2": _table(HFZ),
        },
        "like replay-callback, stashing the return pointer on the heap",
    ),
    Adversary(
        "callback-capture",
        _CAPTURE_CALLBACK,
        Intent.CALLBACK_CAPTURE,
        {
            "g1": _table(FAILED, {Variant.NO_REQGLOB: HFS}),
            "g2": _table(HFZ),
        },
        "re-enters the closure with a local callback that captures the return pointer",
    ),
    Adversary(
        "forged-stack",
        _FORGED_STACK,
        Intent.CUSTOM,
        {
            "g1": _table(FAILED, {Variant.NO_PREPSTACK: HFS, Variant.PWL_HEAP: HFS}),
            "g2": _table(FAILED, {Variant.NO_PREPSTACK: HFZ, Variant.PWL_HEAP: HFZ}),
        },
        "passes a heap block as the stack and rewrites the saved environment pointer",
    ),
    Adversary(
        "snoop-callback",
        _SNOOP_CALLBACK,
        Intent.STACK_SNOOP,
        {
            "g1": _table(HFZ, {Variant.NO_CLEAR: FAILED}),
            "g2": _table(HFZ),
        },
        "callback fails if any of the first 16 words of its stack window is non-zero",
    ),
)


def adversary_corpus() -> list[Adversary]:
    return list(_CORPUS)


def get_adversary(name: str) -> Adversary:
    for adversary in _CORPUS:
        if adversary.name == name:
            return adversary
    raise ValueError(f"Unknown adversary '{name}'")
