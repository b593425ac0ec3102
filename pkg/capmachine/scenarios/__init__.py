from .adversaries import Adversary, Intent, adversary_corpus, get_adversary
from .harness import (
    Scenario,
    ScenarioResult,
    ScenarioUnit,
    build_scenario,
    check_frame_property,
    run_scenario,
    scenario_layout,
    scenario_units,
)
from .manifest import (
    ManifestEntry,
    SuiteResult,
    default_manifest,
    format_manifest,
    parse_manifest,
    run_suite,
)
from .programs import SCENARIOS
from .variants import VARIANTS, Variant
from .verdict import Verdict, classify

__all__ = [
    "Adversary",
    "Intent",
    "ManifestEntry",
    "SCENARIOS",
    "Scenario",
    "ScenarioResult",
    "ScenarioUnit",
    "SuiteResult",
    "VARIANTS",
    "Variant",
    "Verdict",
    "adversary_corpus",
    "build_scenario",
    "check_frame_property",
    "classify",
    "default_manifest",
    "format_manifest",
    "get_adversary",
    "parse_manifest",
    "run_scenario",
    "run_suite",
    "scenario_layout",
    "scenario_units",
]
