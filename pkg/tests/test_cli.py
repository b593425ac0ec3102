import pytest
import yaml

from capmachine.cli import EXIT_USAGE, main
from capmachine.linker import format_image, layout_to_dict
from capmachine.scenarios import Variant, build_scenario, default_manifest, run_scenario


def _toolchain(tmp_path, name, adversary, variant=Variant.STANDARD) -> tuple[list[str], str]:
    """Assembles and links a scenario through the command line; returns the objects and image paths."""
    scenario = build_scenario(name, adversary, variant)
    objects = []
    for unit in scenario.units:
        source = tmp_path / f"{unit.component}.s"
        source.write_text(unit.source)
        obj = tmp_path / f"{unit.component}.o"
        flags = []
        if not unit.options.clear_stack:
            flags.append("--no-clear-stack")
        if not unit.options.check_global:
            flags.append("--no-check-global")
        if not unit.options.check_stack:
            flags.append("--no-check-stack")
        assert main(["asm", str(source), "-o", str(obj), *flags]) == 0
        objects.append(str(obj))

    layout = tmp_path / "layout.yaml"
    layout.write_text(yaml.dump(layout_to_dict(scenario.layout)))
    image = tmp_path / "system.img"
    assert main(["link", *objects, "--layout", str(layout), "-o", str(image)]) == 0
    return objects, str(image)


# Every corpus pair on the standard machine, plus a weakened build.
PIPELINE_CASES = [
    (entry.scenario, entry.adversary, entry.variant)
    for entry in default_manifest()
    if entry.variant is Variant.STANDARD
] + [("g1", "replay-callback", Variant.NO_CLEAR)]


@pytest.mark.parametrize("name, adversary, variant", PIPELINE_CASES)
def test_toolchain_matches_library(tmp_path, capsys, name, adversary, variant):
    _, image = _toolchain(tmp_path, name, adversary, variant)
    expected = run_scenario(build_scenario(name, adversary, variant))
    capsys.readouterr()

    dump = tmp_path / "final.mem"
    code = main(["run", image, "--check-flag", "trusted.flag", "--dump", str(dump)])
    assert capsys.readouterr().out == f"{expected.verdict.value} {expected.steps}\n"
    assert code == expected.verdict.exit_code
    assert dump.read_text() == expected.dump()


def test_run_linked_image(tmp_path, capsys):
    scenario = build_scenario("f3", "benign")
    image = tmp_path / "f3.img"
    image.write_text(format_image(scenario.image))
    assert main(["run", str(image), "--check-flag", "flag"]) == 0
    assert capsys.readouterr().out.startswith("HaltedFlagZero ")


def test_run_without_flag(tmp_path, capsys):
    image = tmp_path / "f1.img"
    image.write_text(format_image(build_scenario("f1", "benign").image))
    assert main(["run", str(image)]) == 0


def test_run_from_entry(tmp_path, capsys):
    source = tmp_path / "loop.s"
    source.write_text(".export start spin\nstart: halt\nspin: move r1 pc\n    jmp r1\n")
    layout = tmp_path / "layout.yaml"
    layout.write_text(yaml.dump({"components": {"loop": {"code": 0, "link": 100, "flags": 200}}}))
    obj, image = tmp_path / "loop.o", tmp_path / "loop.img"
    assert main(["asm", str(source), "-o", str(obj)]) == 0
    assert main(["link", str(obj), "--layout", str(layout), "-o", str(image)]) == 0
    assert main(["run", str(image), "--entry", "start"]) == 0
    assert main(["run", str(image), "--entry", "spin", "--fuel", "50"]) == 2
    assert capsys.readouterr().out.splitlines()[-1] == "OutOfFuel 50"


def test_scenario_command(capsys):
    assert main(["scenario", "f1", "tamper-return"]) == 1
    assert capsys.readouterr().out.startswith("Failed ")
    assert main(["scenario", "g1", "callback-capture", "--variant", "no-reqglob"]) == 3


def test_config_file(tmp_path, capsys):
    config = tmp_path / "config.yaml"
    config.write_text(yaml.dump({"machine": {"fuel": 300}}))
    assert main(["-f", str(config), "scenario", "f1", "spin"]) == 2
    assert capsys.readouterr().out == "OutOfFuel 300\n"

    argv = ["-f", str(config), "-kvp", "machine.fuel=200", "scenario", "f1", "spin"]
    assert main(argv) == 2
    assert capsys.readouterr().out == "OutOfFuel 200\n"
    assert main(["-f", str(config), "scenario", "f1", "spin", "--fuel", "100"]) == 2
    assert capsys.readouterr().out == "OutOfFuel 100\n"


def test_trace_to_file(tmp_path):
    trace = tmp_path / "trace.txt"
    assert main(["scenario", "f1", "benign", "--trace", str(trace)]) == 0
    lines = trace.read_text().splitlines()
    assert lines[0] == "# run f1/benign/standard"
    assert lines[1] == "1 1002 move running"
    assert lines[-2].endswith(" halt halted")
    assert lines[-1].startswith("# f1/benign/standard HaltedFlagZero ")


def test_suite_command(tmp_path, capsys):
    manifest = tmp_path / "manifest.txt"
    manifest.write_text("f2 benign standard HaltedFlagZero\nf1 spin standard HaltedFlagZero\n")
    config = tmp_path / "config.yaml"
    config.write_text(yaml.dump({"machine": {"fuel": 1000}}))
    dumps = tmp_path / "dumps"
    code = main(
        ["-f", str(config), "suite", str(manifest), "--no-progress", "--dump-dir", str(dumps)]
    )
    assert code == 1
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("f2 benign standard HaltedFlagZero ")
    assert out[1] == "f1 spin standard OutOfFuel 1000"
    assert (dumps / "f1-spin-standard.mem").exists()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["run"],
        ["scenario", "f1", "benign", "--variant", "turbo"],
        ["run", "missing.img"],
        ["scenario", "f9", "benign"],
        ["scenario", "f1", "nobody"],
        ["-kvp", "machine.fuel=abc", "scenario", "f1", "benign"],
    ],
)
def test_usage_and_input_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE


def test_bad_flag(tmp_path):
    image = tmp_path / "f1.img"
    image.write_text(format_image(build_scenario("f1", "benign").image))
    assert main(["run", str(image), "--check-flag", "nope"]) == EXIT_USAGE
    assert main(["run", str(image), "--entry", "nowhere"]) == EXIT_USAGE


def test_malformed_inputs(tmp_path):
    source = tmp_path / "bad.s"
    source.write_text("frobnicate r1\n")
    assert main(["asm", str(source)]) == EXIT_USAGE
    image = tmp_path / "bad.img"
    image.write_text("nonsense\n")
    assert main(["run", str(image)]) == EXIT_USAGE


def test_link_rejects_python_tags_in_layout(tmp_path):
    source = tmp_path / "t.s"
    source.write_text(".export start\nstart: halt\n")
    obj = tmp_path / "t.o"
    assert main(["asm", str(source), "-o", str(obj)]) == 0
    layout = tmp_path / "layout.yaml"
    layout.write_text("components: !!python/object/apply:os.getcwd []\n")
    image = tmp_path / "t.img"
    assert main(["link", str(obj), "--layout", str(layout), "-o", str(image)]) == EXIT_USAGE
    assert not image.exists()
