from dataclasses import dataclass
from datetime import datetime


@dataclass
class Event:
    """
    Base class for an event. Contains attributes common to all events.

    Attributes
    ----------
    timestamp: datetime
        The time that the event occurred.
    """

    timestamp: datetime


@dataclass
class RunStarted(Event):
    """
    A machine run is about to start.

    Attributes
    ----------
    label: str
        What is being run (an image path or a scenario name).
    """

    label: str


@dataclass
class RunFinished(Event):
    """
    A machine run ended.

    Attributes
    ----------
    label: str
        The label given when the run started.
    status: str
        Final machine status.
    steps: int
        Number of executed steps.
    """

    label: str
    status: str
    steps: int


@dataclass
class StepTraced(Event):
    """
    A single executed instruction.

    Attributes
    ----------
    step: int
        1-based step number.
    pc_addr: int | None
        Address of the program counter before the step, ``None`` when pc held an integer.
    mnemonic: str | None
        Decoded instruction, ``None`` when the step failed before decoding.
    result: str
        Machine status after the step.
    """

    step: int
    pc_addr: int | None
    mnemonic: str | None
    result: str


@dataclass
class ScenarioFinished(Event):
    """
    One scenario of a suite was classified.
    """

    scenario: str
    adversary: str
    variant: str
    verdict: str
    steps: int
    expected: str | None = None
