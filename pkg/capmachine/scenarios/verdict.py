from collections.abc import Mapping, Sequence
from enum import Enum

from ..isa import Word, is_non_zero
from ..machine import RunOutcome, Status


class Verdict(Enum):
    HALTED_FLAG_ZERO = "HaltedFlagZero"
    FAILED = "Failed"
    OUT_OF_FUEL = "OutOfFuel"
    HALTED_FLAG_SET = "HaltedFlagSet"

    @property
    def exit_code(self) -> int:
        return _EXIT_CODES[self]

    @classmethod
    def parse(cls, text: str) -> "Verdict":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"Unknown verdict '{text}'") from None


_EXIT_CODES = {
    Verdict.HALTED_FLAG_ZERO: 0,
    Verdict.FAILED: 1,
    Verdict.OUT_OF_FUEL: 2,
    Verdict.HALTED_FLAG_SET: 3,
}


def classify(
    outcome: RunOutcome, flag_addresses: Sequence[int]
) -> tuple[Verdict, int | None]:
    """
    Classifies a run by its status and, for halted runs, the given flag cells.

    Returns the verdict and the address of the first set flag, if any.
    """
    if outcome.status is Status.FAILED:
        return Verdict.FAILED, None
    if outcome.status is Status.OUT_OF_FUEL:
        return Verdict.OUT_OF_FUEL, None
    mem: Mapping[int, Word] = outcome.mem if outcome.mem is not None else {}
    for addr in flag_addresses:
        if is_non_zero(mem.get(addr, 0)):
            return Verdict.HALTED_FLAG_SET, addr
    return Verdict.HALTED_FLAG_ZERO, None
