import pytest

from capmachine.config import LayoutConfig
from capmachine.isa import PC, R1, R_STK, Capability, Locality, Perm
from capmachine.scenarios import (
    SCENARIOS,
    Variant,
    Verdict,
    adversary_corpus,
    build_scenario,
    check_frame_property,
    get_adversary,
    run_scenario,
)
from capmachine.scenarios.programs import CALLEE_SCENARIOS, trusted_source
from tests.helper import cap

STANDARD_CASES = [
    (name, adversary.name)
    for adversary in adversary_corpus()
    for name in adversary.scenarios
    if Variant.STANDARD in adversary.expected[name]
]


def test_initial_registers():
    f1 = build_scenario("f1", "benign")
    pc = f1.conf[PC]
    assert isinstance(pc, Capability)
    assert (pc.perm, pc.loc, pc.base, pc.addr) == (Perm.rwx, Locality.global_, 1000, 1002)
    assert f1.conf[R_STK] == 0

    f2 = build_scenario("f2", "benign")
    assert f2.conf[R_STK] == cap(Perm.rwlx, 8000, 8063, 7999, Locality.local)

    g1 = build_scenario("g1", "benign-callback")
    assert g1.conf[R1] == g1.image.entries["g1"]
    assert g1.conf[PC] == cap(Perm.rx, 3000, g1.image.components["adversary"].code[1], 3002)


def test_layout_follows_config():
    config = LayoutConfig(trusted_base=1500, stack_base=9000, stack_size=32)
    scenario = build_scenario("f2", "benign", config=config)
    assert scenario.image.components["trusted"].code[0] == 1500
    assert scenario.conf[R_STK] == cap(Perm.rwlx, 9000, 9031, 8999, Locality.local)
    assert scenario.layout.registers["r_stk"] == "cap rwlx local 9000 9031 8999"


def test_unknown_names():
    with pytest.raises(ValueError):
        build_scenario("f9", "benign")
    with pytest.raises(ValueError):
        build_scenario("f1", "nobody")
    with pytest.raises(ValueError):
        trusted_source("h1")


def test_expected_tables_cover_known_scenarios():
    for adversary in adversary_corpus():
        assert set(adversary.scenarios) <= set(SCENARIOS)
        assert adversary.scenarios
    names = [adversary.name for adversary in adversary_corpus()]
    assert len(names) == len(set(names))
    with pytest.raises(ValueError):
        get_adversary("spin").expected_verdict("f1", Variant.NO_CLEAR)


@pytest.mark.parametrize("name, adversary", STANDARD_CASES)
def test_standard_build_keeps_flag_zero(name, adversary):
    scenario = build_scenario(name, adversary)
    result = run_scenario(scenario)
    assert result.verdict is not Verdict.HALTED_FLAG_SET
    assert result.verdict is scenario.adversary.expected_verdict(name, Variant.STANDARD)


@pytest.mark.parametrize("name, limit", [("f1", 1000), ("f2", 2000), ("f3", 5000)])
def test_benign_callee_runs_are_short(name, limit):
    result = run_scenario(build_scenario(name, "benign"))
    assert result.verdict is Verdict.HALTED_FLAG_ZERO
    assert result.steps < limit


def test_benign_context_runs():
    for name in ("g1", "g2"):
        result = run_scenario(build_scenario(name, "benign-callback"))
        assert result.verdict is Verdict.HALTED_FLAG_ZERO


def test_spin_runs_out_of_fuel():
    result = run_scenario(build_scenario("f1", "spin", fuel=500))
    assert result.verdict is Verdict.OUT_OF_FUEL
    assert result.mem is not None
    assert result.dump() != ""


def test_failed_run_has_empty_dump():
    result = run_scenario(build_scenario("f1", "tamper-return"))
    assert result.verdict is Verdict.FAILED
    assert result.mem is None
    assert result.dump() == ""


def test_runs_are_deterministic():
    first = run_scenario(build_scenario("g1", "snoop-callback"))
    second = run_scenario(build_scenario("g1", "snoop-callback"))
    assert first == second


@pytest.mark.parametrize("name", CALLEE_SCENARIOS)
def test_flag_address_is_reported(name):
    scenario = build_scenario(name, "benign")
    assert scenario.flag_addresses() == [200]


@pytest.mark.parametrize(
    "name, adversary", [("f1", "benign"), ("f2", "stack-snoop"), ("g2", "benign-callback")]
)
def test_frame_property(name, adversary):
    scenario = build_scenario(name, adversary)
    extra = {50: 7, 9500: cap(Perm.rwx, 0, 10, 3), 20_000: -1}
    assert check_frame_property(scenario, extra)


def test_frame_property_rejects_owned_addresses():
    scenario = build_scenario("f1", "benign")
    with pytest.raises(ValueError):
        check_frame_property(scenario, {1000: 1})
    with pytest.raises(ValueError):
        check_frame_property(scenario, {6500: 1})
