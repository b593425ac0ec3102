from datetime import datetime
from typing import Any, Callable
import logging

from .config import MonitoringConfig, TraceConfig
from .isa import Capability
from .machine import TraceEvent, TraceSink
from .monitoring.callbacks.trace import TraceWriter
from .monitoring.event import Event, RunFinished, RunStarted, ScenarioFinished, StepTraced
from .monitoring.event_bus import get_event_bus, setup_event_bus

logger = logging.getLogger(__name__)


def _writer_handlers(writer: TraceWriter) -> list[tuple[type[Event], Callable[[Any], None]]]:
    return [
        (StepTraced, writer.add_step),
        (RunStarted, writer.add_run_started),
        (RunFinished, writer.add_run_finished),
        (ScenarioFinished, writer.add_scenario_finished),
    ]


def setup_trace_writer(config: TraceConfig) -> TraceWriter:
    writer = TraceWriter(config)
    event_bus = get_event_bus()
    for event_type, handler in _writer_handlers(writer):
        event_bus.subscribe(event_type, handler)
    return writer


def close_trace_writer(writer: TraceWriter) -> None:
    """Detaches ``writer`` from the event bus and closes its stream."""
    event_bus = get_event_bus()
    for event_type, handler in _writer_handlers(writer):
        event_bus.unsubscribe(event_type, handler)
    writer.close()


def setup_monitoring(config: MonitoringConfig) -> TraceWriter | None:
    """Starts a fresh event bus for ``config`` and returns the trace writer, if any."""
    setup_event_bus(config)
    if config.enabled and config.trace:
        logger.debug("Writing traces to %s", config.trace.path)
        return setup_trace_writer(config.trace)
    return None


def _publish_step(event: TraceEvent) -> None:
    get_event_bus().publish(
        StepTraced(
            timestamp=datetime.now(),
            step=event.step,
            pc_addr=event.pc.addr if isinstance(event.pc, Capability) else None,
            mnemonic=event.instr.op if event.instr is not None else None,
            result=event.status.value,
        )
    )


def step_sink() -> TraceSink | None:
    """A machine trace sink feeding the event bus, or ``None`` when nobody listens."""
    if get_event_bus().has_listeners(StepTraced):
        return _publish_step
    return None
