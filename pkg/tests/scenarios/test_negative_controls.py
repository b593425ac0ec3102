import pytest

from capmachine.scenarios import Variant, Verdict, build_scenario, run_scenario
from capmachine.scenarios.manifest import default_manifest, run_entry

# Each weakened build has an attack that sets the flag only once the matching
# protection is switched off.
CONTROLS = [
    ("replay-callback", Variant.NO_CLEAR),
    ("stash-callback", Variant.PWL_HEAP),
    ("callback-capture", Variant.NO_REQGLOB),
    ("forged-stack", Variant.NO_PREPSTACK),
]


@pytest.mark.parametrize("adversary, variant", CONTROLS)
def test_protection_is_load_bearing(adversary, variant):
    weakened = run_scenario(build_scenario("g1", adversary, variant))
    standard = run_scenario(build_scenario("g1", adversary))
    assert weakened.verdict is Verdict.HALTED_FLAG_SET
    assert weakened.flag_addr == 200
    assert standard.verdict is not Verdict.HALTED_FLAG_SET


def test_every_weakened_build_has_a_control():
    flagged = {
        entry.variant
        for entry in default_manifest()
        if entry.expected is Verdict.HALTED_FLAG_SET
    }
    assert flagged == set(Variant) - {Variant.STANDARD}


@pytest.mark.parametrize("entry", default_manifest(), ids=lambda entry: entry.label)
def test_manifest_expectations(entry):
    result = run_entry(entry)
    assert result.matches, f"{entry.label}: got {result.verdict.value}"
