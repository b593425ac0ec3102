import os

from capmachine.isa import Capability, Instr, Locality, Perm, parse_instr
from capmachine.machine import ExecConf, program_conf

PROJECT_ROOT = os.path.abspath(os.path.join(__file__, "..", ".."))
CONFIG_PATH = os.path.join(PROJECT_ROOT, "config_templates", "config.yaml")


def cap(
    perm: Perm,
    base: int,
    end: int | float,
    addr: int,
    loc: Locality = Locality.global_,
) -> Capability:
    return Capability(perm, loc, base, end, addr)


def program(*lines: str) -> list[Instr]:
    return [parse_instr(line) for line in lines]


def conf_for(*lines: str, **kwargs) -> ExecConf:
    """A configuration running the given core instructions from address 0."""
    return program_conf(program(*lines), **kwargs)
