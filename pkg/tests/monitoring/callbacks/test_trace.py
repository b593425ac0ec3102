from datetime import datetime

import pytest

from capmachine.config import TraceConfig
from capmachine.monitoring.callbacks.trace import TraceWriter
from capmachine.monitoring.event import RunFinished, RunStarted, ScenarioFinished, StepTraced


@pytest.fixture
def trace_path(tmp_path):
    return tmp_path / "trace.txt"


def _step(step: int, pc_addr: int | None = 1002, mnemonic: str | None = "move") -> StepTraced:
    return StepTraced(
        timestamp=datetime.now(), step=step, pc_addr=pc_addr, mnemonic=mnemonic, result="running"
    )


def test_init(trace_path):
    """Test TraceWriter initialization."""
    writer = TraceWriter(TraceConfig(path=str(trace_path)))
    assert trace_path.exists()
    writer.close()
    assert writer.stream.closed

    with pytest.raises(ValueError):
        TraceWriter(TraceConfig(path=str(trace_path), step_frequency=0))


def test_stdout(capsys):
    writer = TraceWriter(TraceConfig())
    writer.add_step(_step(1))
    writer.close()
    assert capsys.readouterr().out == "1 1002 move running\n"


def test_add_step(trace_path):
    """Test that steps are written one per line, with placeholders for missing fields."""
    writer = TraceWriter(TraceConfig(path=str(trace_path)))
    writer.add_step(_step(1))
    writer.add_step(_step(2, pc_addr=None, mnemonic=None))
    writer.close()
    assert trace_path.read_text() == "1 1002 move running\n2 - - running\n"


def test_step_frequency(trace_path):
    writer = TraceWriter(TraceConfig(path=str(trace_path), step_frequency=3))
    for step in range(1, 8):
        writer.add_step(_step(step))
    writer.close()
    assert [line.split()[0] for line in trace_path.read_text().splitlines()] == ["3", "6"]


def test_run_markers(trace_path):
    """Test the comment lines around a run."""
    writer = TraceWriter(TraceConfig(path=str(trace_path)))
    now = datetime.now()
    writer.add_run_started(RunStarted(timestamp=now, label="f2/benign/standard"))
    writer.add_run_finished(
        RunFinished(timestamp=now, label="f2/benign/standard", status="HaltedFlagZero", steps=7)
    )
    writer.close()
    assert trace_path.read_text().splitlines() == [
        "# run f2/benign/standard",
        "# f2/benign/standard HaltedFlagZero 7",
    ]


def test_add_scenario_finished(trace_path):
    """Test that mismatching verdicts name the expectation."""
    writer = TraceWriter(TraceConfig(path=str(trace_path)))
    common = dict(timestamp=datetime.now(), scenario="f1", adversary="spin", variant="standard")
    writer.add_scenario_finished(
        ScenarioFinished(**common, verdict="OutOfFuel", steps=10, expected="OutOfFuel")
    )
    writer.add_scenario_finished(
        ScenarioFinished(**common, verdict="OutOfFuel", steps=10, expected="HaltedFlagZero")
    )
    writer.close()
    assert trace_path.read_text().splitlines() == [
        "# f1 spin standard OutOfFuel 10",
        "# f1 spin standard OutOfFuel 10 expected HaltedFlagZero",
    ]
