from dataclasses import asdict
from copy import deepcopy

import pytest
import yaml

from capmachine.config import (
    Config,
    LayoutConfig,
    MachineConfig,
    MonitoringConfig,
    SuiteConfig,
    TraceConfig,
    parse_config,
    update_config,
)
from capmachine.runtime import MallocLayout
from tests.helper import CONFIG_PATH


def test_parse_config():
    # Base template (expected values)
    with open(CONFIG_PATH, "r") as fp:
        config_dict = yaml.safe_load(fp)

    # Parsing
    config = parse_config(CONFIG_PATH)

    # Comparison
    assert config.machine.fuel == config_dict["machine"]["fuel"]
    assert config.layout.trusted_base == config_dict["layout"]["trusted_base"]
    assert config.layout.heap_base == config_dict["layout"]["heap_base"]
    assert config.layout.heap_size == config_dict["layout"]["heap_size"]
    assert config.layout.stack_size == config_dict["layout"]["stack_size"]
    assert config.suite.workers == config_dict["suite"]["workers"]
    assert config.monitoring.enabled == config_dict["monitoring"]["enabled"]
    assert config.monitoring.trace is not None
    assert config.monitoring.trace.path == config_dict["monitoring"]["trace"]["path"]


def test_template_matches_defaults():
    config = parse_config(CONFIG_PATH)
    assert config.machine == MachineConfig()
    assert config.layout == LayoutConfig()
    assert config.suite == SuiteConfig()
    assert config.monitoring == MonitoringConfig(trace=TraceConfig())


def test_layout_config_builds_malloc_layout():
    layout = MallocLayout.from_config(LayoutConfig())
    assert layout.heap_base == 6000
    assert layout.heap_end == 6999
    assert MallocLayout.from_config(LayoutConfig(), permit_write_local=True).permit_write_local


def test_update_config():
    config = Config()

    # Other - empty list
    before_change = deepcopy(config)
    update_config(config, [])

    assert asdict(before_change) == asdict(config)

    # Valid update - replace values
    to_update = ["machine.fuel=500", "layout.stack_size=128", "suite.show_progress=false"]
    update_config(config, to_update)
    assert config.machine.fuel == 500
    assert config.layout.stack_size == 128
    assert config.suite.show_progress is False
    assert asdict(before_change) != asdict(config)

    # Invalid update - type mismatch
    for pair in ("machine.fuel=abc", "machine.fuel=true", "suite.show_progress=3"):
        with pytest.raises(ValueError) as _:
            update_config(config, [pair])

    # Invalid update - key not found
    for pair in ("Test1", "machine.speed=3", "engine.fuel=3"):
        with pytest.raises(ValueError) as _:
            update_config(config, [pair])


def test_update_config_nested_none():
    config = Config()
    with pytest.raises(ValueError):
        update_config(config, ["monitoring.trace.path=out.txt"])


def test_parse_empty_config(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert parse_config(str(path)) == Config()


def test_update_config_validates():
    config = Config()
    for pair in ("machine.fuel=-1", "suite.workers=0", "layout.heap_base=0", "layout.stack_size=-4"):
        with pytest.raises(ValueError):
            update_config(config, [pair])


def test_invalid_values_rejected():
    with pytest.raises(ValueError):
        MachineConfig(fuel=-5)
    with pytest.raises(ValueError):
        TraceConfig(step_frequency=0)
    with pytest.raises(ValueError):
        LayoutConfig(malloc_link=-1)


def test_parse_config_validates(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.dump({"suite": {"workers": 0}}))
    with pytest.raises(ValueError):
        parse_config(str(path))
