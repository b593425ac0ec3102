from collections import defaultdict
from typing import Any, Callable, TypeVar

from .event import Event
from ..config import MonitoringConfig

T = TypeVar("T", bound=Event)

Listener = Callable[[Any], None]


class EventBus:
    """
    Routes monitoring events from runs and suites to whoever subscribed to them.

    A bus built from a ``MonitoringConfig`` starts enabled only when monitoring
    is enabled there; a bare bus starts enabled.
    """

    def __init__(self, config: MonitoringConfig | None = None) -> None:
        self._listeners: defaultdict[type[Event], list[Listener]] = defaultdict(list)
        self._config = config
        self._enabled = config.enabled if config is not None else True

    @property
    def enabled(self) -> bool:
        return self._enabled

    def has_listeners(self, event_type: type[Event]) -> bool:
        """Whether publishing ``event_type`` would reach anyone."""
        return self._enabled and bool(self._listeners.get(event_type))

    def publish(self, event: Event) -> None:
        """
        Deliver ``event`` to the listeners of its exact type, in subscription order.

        Parameters
        ----------
        event : Event
            Event to deliver; dropped while the bus is disabled
        """
        if not self._enabled:
            return
        for listener in self._listeners.get(type(event), ()):
            listener(event)

    def subscribe(self, event_type: type[T], callback: Callable[[T], None]) -> Callable[[T], None]:
        """
        Register ``callback`` for events of ``event_type``.

        Returns
        -------
        Callable[[T], None]
            The callback that was registered
        """
        self._listeners[event_type].append(callback)
        return callback

    def unsubscribe(self, event_type: type[T], callback: Callable[[T], None]) -> None:
        """Remove ``callback`` from ``event_type``; unknown callbacks are ignored."""
        listeners = self._listeners.get(event_type)
        if listeners is not None and callback in listeners:
            listeners.remove(callback)

    def disable(self) -> None:
        self._enabled = False

    def enable(self) -> None:
        self._enabled = True


_global_event_bus: EventBus | None = None


def setup_event_bus(config: MonitoringConfig) -> EventBus:
    """Replaces the process-wide bus with a fresh one configured by ``config``."""
    global _global_event_bus
    _global_event_bus = EventBus(config)
    return _global_event_bus


def reset_event_bus() -> None:
    """Drops the process-wide bus; the next ``get_event_bus`` starts a bare one."""
    global _global_event_bus
    _global_event_bus = None


def get_event_bus() -> EventBus:
    global _global_event_bus
    if _global_event_bus is None:
        _global_event_bus = EventBus()
    return _global_event_bus
