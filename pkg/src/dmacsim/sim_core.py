"""Cycle-indexed discrete-event kernel.

Components register a handler under a name and exchange events through a
single priority queue.  Events are ordered by ``(fire_at, phase, seq)``:
``seq`` is the global insertion counter, so two events scheduled for the same
cycle and phase are always delivered in the order they were scheduled.

Two phases exist per cycle.  ``PHASE_EVENT`` carries ordinary traffic (bus
grants, data beats, CSR writes).  ``PHASE_LATE`` runs after every ordinary
event of the same cycle and is used by components that must decide on the
state of the whole cycle, e.g. the descriptor fetcher choosing which read to
issue.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

PHASE_EVENT = 0
PHASE_LATE = 1


class SimulationError(RuntimeError):
    """Contract violation inside the kernel (e.g. scheduling in the past)."""


class SimulationExhausted(RuntimeError):
    """``run_until`` ran out of cycles or events before its condition held."""

    def __init__(self, message: str, cycle: int, last_event: "Event | None" = None):
        super().__init__(message)
        self.cycle = cycle
        self.last_event = last_event


@dataclass(order=True, frozen=True)
class Event:
    fire_at: int
    phase: int
    seq: int
    target: str = field(compare=False)
    payload: Any = field(compare=False, default=None)


class Simulator:
    def __init__(self, record_trace: bool = False):
        self.now = 0
        self._queue: list[Event] = []
        self._seq = 0
        self._handlers: dict[str, Callable[[Any], None]] = {}
        self.record_trace = record_trace
        self.trace: list[tuple[int, int, int, str, str]] = []
        self.last_event: Event | None = None
        self.delivered = 0

    def register(self, name: str, handler: Callable[[Any], None]) -> None:
        if name in self._handlers:
            raise SimulationError(f"handler {name!r} already registered")
        self._handlers[name] = handler

    def schedule(self, fire_at: int, target: str, payload: Any = None,
                 phase: int = PHASE_EVENT) -> Event:
        if fire_at < self.now:
            raise SimulationError(
                f"cannot schedule {target!r} at cycle {fire_at}, now is {self.now}")
        if target not in self._handlers:
            raise SimulationError(f"no handler registered for {target!r}")
        ev = Event(fire_at, phase, self._seq, target, payload)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def after(self, delay: int, target: str, payload: Any = None,
              phase: int = PHASE_EVENT) -> Event:
        return self.schedule(self.now + delay, target, payload, phase)

    def pending(self) -> int:
        return len(self._queue)

    def peek_time(self) -> int | None:
        return self._queue[0].fire_at if self._queue else None

    def step(self) -> Event:
        """Deliver exactly one event and return it."""
        ev = heapq.heappop(self._queue)
        self.now = ev.fire_at
        self.last_event = ev
        self.delivered += 1
        if self.record_trace:
            self.trace.append((ev.fire_at, ev.phase, ev.seq, ev.target, repr(ev.payload)))
        self._handlers[ev.target](ev.payload)
        return ev

    def run_until(self, condition: Callable[[], bool], max_cycles: int) -> int:
        """Advance until ``condition()`` holds at the end of a cycle.

        Returns the cycle at which the condition first held.  Raises
        :class:`SimulationExhausted` if the event queue drains or the clock
        would pass ``max_cycles`` first.
        """
        if max_cycles <= 0:
            raise ValueError("max_cycles must be positive")
        if condition():
            return self.now
        while self._queue:
            t = self._queue[0].fire_at
            if t > max_cycles:
                break
            while self._queue and self._queue[0].fire_at == t:
                self.step()
            if condition():
                return self.now
        if not self._queue:
            raise SimulationExhausted(
                f"event queue drained at cycle {self.now} before condition held "
                f"(last event: {self.last_event})", self.now, self.last_event)
        raise SimulationExhausted(
            f"condition not met within {max_cycles} cycles "
            f"(last event: {self.last_event})", max_cycles, self.last_event)
