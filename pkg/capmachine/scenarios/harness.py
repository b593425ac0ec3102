"""Building, running and classifying the example systems."""

from collections.abc import Mapping
from dataclasses import dataclass, replace
from datetime import datetime
import logging

from ..assembler import ExpandOptions, parse
from ..config import LayoutConfig
from ..isa import (
    PC,
    R1,
    R_STK,
    Capability,
    Locality,
    Perm,
    Reg,
    Word,
    format_word,
    update_pc_perm,
)
from ..linker import ComponentLayout, Layout, SystemImage, build_component, link
from ..machine import ExecConf, Memory, RunOutcome, Status, TraceSink, dump_memory, run
from ..monitoring.event import RunFinished, RunStarted
from ..monitoring.event_bus import get_event_bus
from ..runtime import MALLOC_NAME, MallocLayout, malloc_source
from ..utils import step_sink
from .adversaries import Adversary, get_adversary
from .programs import (
    CALLEE_SCENARIOS,
    HALT_LABELS,
    STACK_SCENARIOS,
    TRUSTED_COMPONENT,
    trusted_source,
)
from .variants import Variant
from .verdict import Verdict, classify

logger = logging.getLogger(__name__)

ADVERSARY_COMPONENT = "adversary"
ADVERSARY_ENTRY = "adv"
DEFAULT_FUEL = 100_000


@dataclass(frozen=True)
class ScenarioUnit:
    """Source of one component together with the options it is expanded with."""

    component: str
    source: str
    options: ExpandOptions


@dataclass(frozen=True)
class Scenario:
    """
    A linked example system ready to run

    Attributes
    ----------
    name : str
        Trusted program (f1, f2, f3, g1 or g2)
    adversary : Adversary
        The untrusted component
    variant : Variant
        Machine build
    units : tuple[ScenarioUnit, ...]
        Sources of the trusted, adversary and allocator components
    layout : Layout
        Placement and initial registers
    image : SystemImage
        The linked system
    conf : ExecConf
        Initial configuration
    fuel : int
        Step budget
    """

    name: str
    adversary: Adversary
    variant: Variant
    units: tuple[ScenarioUnit, ...]
    layout: Layout
    image: SystemImage
    conf: ExecConf
    fuel: int = DEFAULT_FUEL

    @property
    def label(self) -> str:
        return f"{self.name}/{self.adversary.name}/{self.variant.value}"

    def flag_addresses(self) -> list[int]:
        ranges = self.image.components[TRUSTED_COMPONENT]
        return [ranges.flags[0] + slot for slot in range(len(ranges.flag_names))]


@dataclass(frozen=True)
class ScenarioResult:
    """
    Classified outcome of a scenario run

    ``mem`` is the final memory of halted and out-of-fuel runs; failed runs
    leave nothing to inspect.
    """

    verdict: Verdict
    steps: int
    mem: Memory | None = None
    flag_addr: int | None = None

    def dump(self) -> str:
        return dump_memory(self.mem) if self.mem is not None else ""


def stack_capability(config: LayoutConfig) -> Capability:
    base = config.stack_base
    return Capability(
        Perm.rwlx, Locality.local, base, base + config.stack_size - 1, base - 1
    )


def scenario_units(
    name: str,
    adversary: Adversary,
    variant: Variant = Variant.STANDARD,
    config: LayoutConfig | None = None,
) -> tuple[ScenarioUnit, ...]:
    config = config or LayoutConfig()
    malloc_layout = MallocLayout.from_config(config, variant.permit_write_local_heap)
    return (
        ScenarioUnit(TRUSTED_COMPONENT, trusted_source(name), variant.expand_options),
        ScenarioUnit(ADVERSARY_COMPONENT, adversary.source, ExpandOptions()),
        ScenarioUnit(MALLOC_NAME, malloc_source(malloc_layout), ExpandOptions()),
    )


def scenario_layout(config: LayoutConfig) -> Layout:
    """Placement of the three components and the heap and stack regions (no registers)."""
    return Layout(
        components={
            TRUSTED_COMPONENT: ComponentLayout(
                config.trusted_base, config.trusted_link, config.trusted_flags
            ),
            ADVERSARY_COMPONENT: ComponentLayout(
                config.adversary_base, config.adversary_link, config.adversary_flags
            ),
            MALLOC_NAME: ComponentLayout(
                config.malloc_base, config.malloc_link, config.malloc_data
            ),
        },
        regions={
            "heap": (config.heap_base, config.heap_base + config.heap_size - 1),
            "stack": (config.stack_base, config.stack_base + config.stack_size - 1),
        },
    )


def _initial_registers(
    name: str, image: SystemImage, labels: Mapping[str, int], config: LayoutConfig
) -> dict[Reg, Word]:
    registers: dict[Reg, Word] = {}
    if name in CALLEE_SCENARIOS:
        base = image.components[TRUSTED_COMPONENT].code[0]
        registers[PC] = Capability(
            Perm.rwx, Locality.global_, base, base + labels[HALT_LABELS[name]], base + 2
        )
    else:
        registers[PC] = update_pc_perm(image.entries[ADVERSARY_ENTRY])
        registers[R1] = image.entries[name]
    if name in STACK_SCENARIOS:
        registers[R_STK] = stack_capability(config)
    return registers


def build_scenario(
    name: str,
    adversary: Adversary | str,
    variant: Variant = Variant.STANDARD,
    config: LayoutConfig | None = None,
    fuel: int = DEFAULT_FUEL,
) -> Scenario:
    """
    Assembles and links a trusted program, an adversary and the allocator.

    Parameters
    ----------
    name : str
        Trusted program (f1, f2, f3, g1 or g2)
    adversary : Adversary | str
        Adversary or its corpus name
    variant : Variant, optional
        Machine build
    config : LayoutConfig, optional
        Memory layout
    fuel : int, optional
        Step budget of the run

    Returns
    -------
    Scenario
        Linked image and initial configuration
    """
    config = config or LayoutConfig()
    if isinstance(adversary, str):
        adversary = get_adversary(adversary)
    units = scenario_units(name, adversary, variant, config)
    objects = [
        build_component(parse(unit.source, unit.component), options=unit.options)
        for unit in units
    ]
    layout = scenario_layout(config)
    image = link(objects, layout)

    registers = _initial_registers(name, image, objects[0].labels, config)
    layout = replace(
        layout,
        registers={str(reg): format_word(word) for reg, word in registers.items()},
    )
    image.registers = registers
    scenario = Scenario(
        name=name,
        adversary=adversary,
        variant=variant,
        units=units,
        layout=layout,
        image=image,
        conf=image.initial_conf(),
        fuel=fuel,
    )
    logger.debug("Built scenario %s", scenario.label)
    return scenario


def result_from_outcome(outcome: RunOutcome, flag_addresses: list[int]) -> ScenarioResult:
    verdict, flag_addr = classify(outcome, flag_addresses)
    mem = outcome.mem
    if outcome.status is Status.OUT_OF_FUEL and outcome.conf is not None:
        mem = outcome.conf.mem
    return ScenarioResult(verdict, outcome.steps, mem, flag_addr)


def run_scenario(scenario: Scenario, trace: TraceSink | None = None) -> ScenarioResult:
    """
    Runs a scenario to completion or until its fuel is spent.

    Step events go to ``trace`` when given, otherwise to the event bus when
    anything listens for them.
    """
    event_bus = get_event_bus()
    event_bus.publish(RunStarted(timestamp=datetime.now(), label=scenario.label))
    outcome = run(scenario.conf, scenario.fuel, trace or step_sink())
    result = result_from_outcome(outcome, scenario.flag_addresses())
    event_bus.publish(
        RunFinished(
            timestamp=datetime.now(),
            label=scenario.label,
            status=result.verdict.value,
            steps=result.steps,
        )
    )
    logger.info("%s: %s after %d steps", scenario.label, result.verdict.value, result.steps)
    return result


def check_frame_property(scenario: Scenario, extra: Mapping[int, Word]) -> bool:
    """
    Whether adding memory the system does not own leaves the run unchanged.

    The verdict and step count must match, and the final memory must be the
    original final memory plus the untouched extra cells.
    """
    owned = [
        r
        for ranges in scenario.image.components.values()
        for r in (ranges.code, ranges.link, ranges.flags)
    ] + list(scenario.image.regions.values())
    for addr in extra:
        if any(lo <= addr <= hi for lo, hi in owned):
            raise ValueError(f"Address {addr} belongs to the linked system")

    baseline = run_scenario(scenario)
    extended = replace(
        scenario, conf=ExecConf(scenario.conf.reg, scenario.conf.mem.updated(extra))
    )
    result = run_scenario(extended)
    if (result.verdict, result.steps) != (baseline.verdict, baseline.steps):
        return False
    if baseline.mem is None or result.mem is None:
        return baseline.mem is None and result.mem is None
    return result.mem == baseline.mem.updated(extra)
