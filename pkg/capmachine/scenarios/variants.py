from enum import Enum

from ..assembler import ExpandOptions


class Variant(Enum):
    """
    Machine builds the scenarios run on.

    Every variant other than ``standard`` switches off exactly one protection
    of the trusted code or the allocator.
    """

    STANDARD = "standard"
    NO_CLEAR = "no-clear"
    PWL_HEAP = "pwl-heap"
    NO_REQGLOB = "no-reqglob"
    NO_PREPSTACK = "no-prepstack"

    @property
    def expand_options(self) -> ExpandOptions:
        """Expansion options of the trusted component; adversaries always use the defaults."""
        return ExpandOptions(
            clear_stack=self is not Variant.NO_CLEAR,
            check_global=self is not Variant.NO_REQGLOB,
            check_stack=self is not Variant.NO_PREPSTACK,
        )

    @property
    def permit_write_local_heap(self) -> bool:
        return self is Variant.PWL_HEAP

    @classmethod
    def parse(cls, text: str) -> "Variant":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(
                f"Unknown variant '{text}', expected one of {[v.value for v in cls]}"
            ) from None


VARIANTS = tuple(Variant)
