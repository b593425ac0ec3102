from dataclasses import dataclass, field, fields, is_dataclass
from typing import Any

import yaml
from dacite import from_dict


@dataclass
class MachineConfig:
    """
    Configuration for running the machine

    Attributes
    ----------
    fuel : int, optional
        Maximum number of steps of a single run before it is reported as out of fuel
    """

    fuel: int = 100_000

    def __post_init__(self) -> None:
        if self.fuel < 0:
            raise ValueError(f"Fuel must be non-negative, got {self.fuel}")


@dataclass
class LayoutConfig:
    """
    Memory layout used when linking the example systems

    Attributes
    ----------
    trusted_base : int, optional
        First address of the trusted component's code
    adversary_base : int, optional
        First address of the adversary component's code
    malloc_base : int, optional
        First address of the allocator's code
    trusted_link : int, optional
        Linking table of the trusted component
    adversary_link : int, optional
        Linking table of the adversary component
    malloc_link : int, optional
        Linking table of the allocator (empty, it imports nothing)
    trusted_flags : int, optional
        Flag table of the trusted component
    adversary_flags : int, optional
        Flag table of the adversary component
    malloc_data : int, optional
        Private data cells of the allocator (bump capability and saved registers)
    heap_base : int, optional
        First heap address (must be >= 1)
    heap_size : int, optional
        Number of heap words
    stack_base : int, optional
        First stack address
    stack_size : int, optional
        Number of stack words
    """

    trusted_base: int = 1000
    adversary_base: int = 3000
    malloc_base: int = 5000
    trusted_link: int = 100
    adversary_link: int = 110
    malloc_link: int = 120
    trusted_flags: int = 200
    adversary_flags: int = 210
    malloc_data: int = 300
    heap_base: int = 6000
    heap_size: int = 1000
    stack_base: int = 8000
    stack_size: int = 64

    def __post_init__(self) -> None:
        negative = [name for name, value in vars(self).items() if value < 0]
        if negative:
            raise ValueError(f"Layout values must be non-negative: {', '.join(negative)}")
        if self.heap_base < 1:
            raise ValueError(f"Heap must start at address 1 or above, got {self.heap_base}")


@dataclass
class SuiteConfig:
    """
    Configuration for running a scenario manifest

    Attributes
    ----------
    workers : int, optional
        Number of worker processes (1 runs everything in-process)
    show_progress : bool, optional
        Display a progress bar while the suite runs
    """

    workers: int = 1
    show_progress: bool = True

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError(f"Need at least one worker, got {self.workers}")


@dataclass
class TraceConfig:
    """
    Configuration for step traces

    Attributes
    ----------
    path : str, optional
        Destination file; ``-`` writes to standard output
    step_frequency : int, optional
        Write every N-th step (1 = every step)
    """

    path: str = "-"
    step_frequency: int = 1

    def __post_init__(self) -> None:
        if self.step_frequency < 1:
            raise ValueError(f"Step frequency must be at least 1, got {self.step_frequency}")


@dataclass
class MonitoringConfig:
    """
    Configuration for the monitoring system

    Attributes
    ----------
    enabled : bool, optional
        Master switch to enable/disable all monitoring
    trace : TraceConfig, optional
        Configuration for writing step traces; ``None`` disables tracing
    """

    enabled: bool = False
    trace: TraceConfig | None = None


@dataclass
class Config:
    """
    Configuration definitions for the full program

    Attributes
    ----------
    machine : MachineConfig
        Configuration for the machine
    layout : LayoutConfig
        Memory layout of the example systems
    suite : SuiteConfig
        Configuration for suite runs
    monitoring : MonitoringConfig
        Configuration for the monitoring system
    """

    machine: MachineConfig = field(default_factory=MachineConfig)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    monitoring: MonitoringConfig = field(default_factory=MonitoringConfig)


def convert_lists_to_tuples(data_class: Any, data: dict[str, Any]) -> None:
    """Converts YAML lists to tuples in place for fields that expect tuples."""
    for dc_field in data_class.__dataclass_fields__.values():
        field_name = dc_field.name
        if field_name not in data:
            continue
        origin = getattr(dc_field.type, "__origin__", None)
        if origin is tuple and isinstance(data[field_name], list):
            data[field_name] = tuple(data[field_name])
        elif origin is dict and isinstance(data[field_name], dict):
            value_type = dc_field.type.__args__[1]
            for key, value in data[field_name].items():
                if getattr(value_type, "__origin__", None) is tuple and isinstance(
                    value, list
                ):
                    data[field_name][key] = tuple(value)
                elif is_dataclass(value_type) and isinstance(value, dict):
                    convert_lists_to_tuples(value_type, value)
        # Handle nested dataclasses
        elif is_dataclass(dc_field.type) and isinstance(data.get(field_name), dict):
            convert_lists_to_tuples(dc_field.type, data[field_name])


def parse_config(yaml_path: str) -> Config:
    """
    Parses a configuration file.

    Parameters
    ----------
    yaml_path : str
        Path to the yaml configuration file to use

    Returns
    -------
    Config
        The current configuration
    """
    with open(yaml_path, "r") as fp:
        config_dict = yaml.safe_load(fp) or {}

    convert_lists_to_tuples(Config, config_dict)
    return from_dict(data_class=Config, data=config_dict)


def parse_value(value: str) -> Any:
    """Parses the value as if it was being loaded in a YAML file"""
    return yaml.load(value, Loader=yaml.SafeLoader)


def _same_kind(old: Any, new: Any) -> bool:
    if isinstance(old, tuple):
        return isinstance(new, (list, tuple))
    return type(new) is type(old)


def _set_value(instance: Any, keys: list[str], text: str) -> None:
    *parents, attr = keys
    for key in parents:
        if not is_dataclass(instance) or key not in _field_names(instance):
            raise ValueError(f"Unknown configuration key '{key}'")
        instance = getattr(instance, key)
        if not is_dataclass(instance):
            raise ValueError(f"Configuration key '{key}' has no nested values to set")

    if attr not in _field_names(instance):
        raise ValueError(f"Unknown configuration key '{attr}'")
    old_value = getattr(instance, attr)
    value = parse_value(text)
    if old_value is not None and not _same_kind(old_value, value):
        raise ValueError(
            f"Expected '{attr}' to be '{type(old_value).__name__}' but got '{type(value).__name__}'"
        )

    setattr(instance, attr, tuple(value) if isinstance(old_value, tuple) else value)
    post_init = getattr(instance, "__post_init__", None)
    if post_init is not None:
        post_init()


def _field_names(instance: Any) -> set[str]:
    return {f.name for f in fields(instance)}


def update_config(config: Config, key_value_pairs: list[str]) -> None:
    """
    Applies ``a.b=value`` overrides to ``config`` in order.

    Values are read as YAML scalars and must keep the type of the value they
    replace. The touched section is validated again after each override.
    """
    for pair in key_value_pairs:
        path, sep, value = pair.partition("=")
        if not sep:
            raise ValueError(f"Expected 'key=value' but got '{pair}'")
        _set_value(config, path.split("."), value)
