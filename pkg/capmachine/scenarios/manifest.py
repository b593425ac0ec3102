"""Scenario manifests and the suite runner."""

from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from itertools import repeat
import logging
import os

from tqdm import tqdm

from ..config import LayoutConfig, SuiteConfig
from ..machine import TraceEvent, format_trace_event
from ..monitoring.event import ScenarioFinished
from ..monitoring.event_bus import get_event_bus
from .adversaries import adversary_corpus
from .harness import DEFAULT_FUEL, build_scenario, run_scenario
from .programs import SCENARIOS
from .variants import Variant
from .verdict import Verdict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ManifestEntry:
    scenario: str
    adversary: str
    variant: Variant
    expected: Verdict

    @property
    def label(self) -> str:
        return f"{self.scenario}-{self.adversary}-{self.variant.value}"


@dataclass(frozen=True)
class SuiteResult:
    entry: ManifestEntry
    verdict: Verdict
    steps: int

    @property
    def matches(self) -> bool:
        return self.verdict is self.entry.expected

    def format(self) -> str:
        e = self.entry
        return f"{e.scenario} {e.adversary} {e.variant.value} {self.verdict.value} {self.steps}"


def default_manifest() -> list[ManifestEntry]:
    """Every adversary against every scenario and variant it has an expectation for."""
    entries = []
    for adversary in adversary_corpus():
        for scenario, table in adversary.expected.items():
            for variant, expected in table.items():
                entries.append(ManifestEntry(scenario, adversary.name, variant, expected))
    entries.sort(key=lambda e: (SCENARIOS.index(e.scenario), e.adversary, e.variant.value))
    return entries


def format_manifest(entries: Iterable[ManifestEntry]) -> str:
    return "".join(
        f"{e.scenario} {e.adversary} {e.variant.value} {e.expected.value}\n" for e in entries
    )


def parse_manifest(text: str) -> list[ManifestEntry]:
    """Reads ``scenario adversary variant expected`` lines; ``#`` starts a comment."""
    entries = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 4:
            raise ValueError(
                f"Line {number}: expected 'scenario adversary variant verdict', got '{line}'"
            )
        scenario, adversary, variant, expected = fields
        if scenario not in SCENARIOS:
            raise ValueError(f"Line {number}: unknown scenario '{scenario}'")
        entries.append(
            ManifestEntry(scenario, adversary, Variant.parse(variant), Verdict.parse(expected))
        )
    return entries


def run_entry(
    entry: ManifestEntry, layout: LayoutConfig | None = None, fuel: int = DEFAULT_FUEL
) -> SuiteResult:
    scenario = build_scenario(entry.scenario, entry.adversary, entry.variant, layout, fuel)
    result = run_scenario(scenario)
    return SuiteResult(entry, result.verdict, result.steps)


def write_mismatch_dumps(
    entry: ManifestEntry,
    dump_dir: str,
    layout: LayoutConfig | None = None,
    fuel: int = DEFAULT_FUEL,
) -> None:
    """Re-runs ``entry`` and writes its final memory and step trace to ``dump_dir``."""
    os.makedirs(dump_dir, exist_ok=True)
    lines: list[str] = []

    def collect(event: TraceEvent) -> None:
        lines.append(format_trace_event(event))

    scenario = build_scenario(entry.scenario, entry.adversary, entry.variant, layout, fuel)
    result = run_scenario(scenario, trace=collect)
    base = os.path.join(dump_dir, entry.label)
    with open(f"{base}.mem", "w") as fp:
        fp.write(result.dump())
    with open(f"{base}.trace", "w") as fp:
        fp.write("\n".join(lines) + "\n")


def run_suite(
    entries: Sequence[ManifestEntry],
    config: SuiteConfig | None = None,
    layout: LayoutConfig | None = None,
    fuel: int = DEFAULT_FUEL,
    dump_dir: str | None = None,
) -> list[SuiteResult]:
    """
    Runs every manifest entry, in worker processes when configured.

    Results come back in manifest order. Entries whose verdict differs from the
    expected one get memory and trace dumps when ``dump_dir`` is given.
    """
    config = config or SuiteConfig()
    progress = dict(total=len(entries), disable=not config.show_progress, unit="run")
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            results = list(
                tqdm(
                    executor.map(run_entry, entries, repeat(layout), repeat(fuel)),
                    **progress,
                )
            )
    else:
        results = [run_entry(entry, layout, fuel) for entry in tqdm(entries, **progress)]

    event_bus = get_event_bus()
    for result in results:
        entry = result.entry
        event_bus.publish(
            ScenarioFinished(
                timestamp=datetime.now(),
                scenario=entry.scenario,
                adversary=entry.adversary,
                variant=entry.variant.value,
                verdict=result.verdict.value,
                steps=result.steps,
                expected=entry.expected.value,
            )
        )
        if not result.matches:
            logger.warning(
                "%s: expected %s, got %s", entry.label, entry.expected.value, result.verdict.value
            )
            if dump_dir is not None:
                write_mismatch_dumps(entry, dump_dir, layout, fuel)
    return results
