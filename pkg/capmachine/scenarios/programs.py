"""Trusted example programs."""

TRUSTED_COMPONENT = "trusted"
TRUSTED_FLAG = "flag"

# Label of the final instruction of the stack-less and stack-based examples; the
# initial pc of those scenarios ends there.
HALT_LABELS = {"f1": "1f", "f2": "2f", "f3": "3f"}

_F1 = """\
.import malloc adv
.export f1
.flag flag
f1: malloc r2 1
    store r2 1
    fetch r3 adv
    call r3([],[r2])
    load r4 r2
    assert r4 1
1f: halt
"""

_F2 = """\
.import malloc adv
.export f2
.flag flag
f2: push 1
    fetch r1 adv
    scall r1([],[])
    pop r1
    assert r1 1
2f: halt
"""

_F3 = """\
.import malloc adv
.export f3
.flag flag
f3: push 1
    fetch r1 adv
    scall r1([],[])
    pop r1
    assert r1 1
    push 2
    fetch r1 adv
    scall r1([],[])
3f: halt
"""

# x lives in the closure environment; the assertion checks it still reads 1
# after the second callback, whatever the callback did in between.
_G1 = """\
.import malloc
.export g1
.flag flag
g1: malloc r2 1
    store r2 0
    move r3 pc
    lea r3 f4
    crtcls [(x, r2)] r3
    rclear all - [pc, r0, r1]
1g: jmp r0
f4: reqglob r1
    prepstack r_stk
    store x 0
    scall r1([],[r0,r1,r_env])
    store x 1
    scall r1([],[r0,r_env])
    load r1 x
    assert r1 1
    mclear r_stk
    rclear all - [r0, pc]
4f: jmp r0
"""

_G2 = """\
.import malloc
.export g2
.flag flag
g2: move r3 pc
    lea r3 f5
    crtcls [] r3
    rclear all - [pc, r0, r1]
2g: jmp r0
f5: reqglob r1
    prepstack r_stk
    scall r1([],[r0,r_env])
    mclear r_stk
    rclear all - [r0, pc]
5f: jmp r0
"""

TRUSTED_SOURCES = {"f1": _F1, "f2": _F2, "f3": _F3, "g1": _G1, "g2": _G2}
SCENARIOS = tuple(TRUSTED_SOURCES)
# Scenarios entered through the trusted code; the others start in the adversary.
CALLEE_SCENARIOS = ("f1", "f2", "f3")
CONTEXT_SCENARIOS = ("g1", "g2")
STACK_SCENARIOS = ("f2", "f3", "g1", "g2")


def trusted_source(name: str) -> str:
    if name not in TRUSTED_SOURCES:
        raise ValueError(f"Unknown scenario '{name}'")
    return TRUSTED_SOURCES[name]
