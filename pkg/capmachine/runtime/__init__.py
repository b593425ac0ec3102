from .malloc import (
    MALLOC_NAME,
    MallocCallRecord,
    MallocHarness,
    MallocLayout,
    MallocVerdict,
    check_malloc_spec,
    malloc_component,
    malloc_source,
    run_random_sequence,
)

__all__ = [
    "MALLOC_NAME",
    "MallocCallRecord",
    "MallocHarness",
    "MallocLayout",
    "MallocVerdict",
    "check_malloc_spec",
    "malloc_component",
    "malloc_source",
    "run_random_sequence",
]
