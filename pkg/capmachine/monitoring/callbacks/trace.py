import sys
from typing import TextIO

from ..event import RunFinished, RunStarted, ScenarioFinished, StepTraced
from ...config import TraceConfig


class TraceWriter:
    """Writes step events as ``<step> <pc-addr> <mnemonic> <result>`` lines."""

    def __init__(self, config: TraceConfig) -> None:
        self._config = config
        self._owns_stream = config.path != "-"
        self.stream: TextIO = open(config.path, "w") if self._owns_stream else sys.stdout

    def add_step(self, event: StepTraced) -> None:
        if event.step % self._config.step_frequency != 0:
            return
        pc_addr = "-" if event.pc_addr is None else str(event.pc_addr)
        mnemonic = event.mnemonic or "-"
        self.stream.write(f"{event.step} {pc_addr} {mnemonic} {event.result}\n")

    def add_run_started(self, event: RunStarted) -> None:
        self.stream.write(f"# run {event.label}\n")

    def add_run_finished(self, event: RunFinished) -> None:
        self.stream.write(f"# {event.label} {event.status} {event.steps}\n")

    def add_scenario_finished(self, event: ScenarioFinished) -> None:
        line = f"# {event.scenario} {event.adversary} {event.variant} {event.verdict} {event.steps}"
        if event.expected is not None and event.expected != event.verdict:
            line += f" expected {event.expected}"
        self.stream.write(line + "\n")

    def close(self) -> None:
        self.stream.flush()
        if self._owns_stream:
            self.stream.close()
