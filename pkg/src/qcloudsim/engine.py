"""Deterministic discrete-event kernel: a virtual clock plus an event calendar.

Events fire in nondecreasing time order; events scheduled for the same
instant fire in insertion order, so two runs with identical schedules
replay identically. A single engine instance is strictly sequential and
must never be driven from two execution contexts at once.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Any


class SchedulingInPast(Exception):
    """Raised when an event is scheduled before the current clock."""


@dataclass(frozen=True)
class FiredEvent:
    """One entry of the fired-event log."""

    event_id: int
    fired_at: float
    payload: Any


class Engine:
    """Sequential event calendar over a real-valued clock (simulated seconds).

    Payloads are opaque. A callable payload is invoked (with no arguments)
    at fire time and may schedule further events; any other payload is just
    recorded in the fired log, which is how trace-only events are kept.
    """

    def __init__(self) -> None:
        self._now = 0.0
        self._heap: list[tuple[float, int, int, Any]] = []
        self._seq = 0
        self._next_id = 0
        self._fired: list[FiredEvent] = []

    def now(self) -> float:
        """Current value of the virtual clock."""
        return self._now

    def schedule(self, at: float, payload: Any = None) -> int:
        """Enqueue `payload` to fire at simulated time `at`; returns the event id."""
        if at < self._now:
            raise SchedulingInPast(
                f"cannot schedule event at t={at!r}; clock is already at t={self._now!r}"
            )
        event_id = self._next_id
        self._next_id += 1
        heapq.heappush(self._heap, (float(at), self._seq, event_id, payload))
        self._seq += 1
        return event_id

    def run_until(self, limit: float) -> float:
        """Fire every pending event with fire_at <= limit, in (time, insertion) order.

        Afterwards the clock sits at `limit`, except when the calendar drained
        while firing: then it stays at the last fire time. Passing
        ``math.inf`` therefore runs the calendar to completion without
        leaving the clock at infinity.
        """
        if limit < self._now:
            raise ValueError(f"run_until({limit!r}) would move the clock backwards from {self._now!r}")
        fired_any = False
        while self._heap and self._heap[0][0] <= limit:
            fire_at, _seq, event_id, payload = heapq.heappop(self._heap)
            self._now = fire_at
            self._fired.append(FiredEvent(event_id, fire_at, payload))
            fired_any = True
            if callable(payload):
                payload()
        if math.isfinite(limit) and (self._heap or not fired_any):
            self._now = limit
        return self._now

    def run_all(self) -> float:
        """Drain the calendar; the clock ends at the last fire time."""
        return self.run_until(math.inf)

    @property
    def pending_count(self) -> int:
        return len(self._heap)

    @property
    def fired_count(self) -> int:
        return len(self._fired)

    @property
    def fired_log(self) -> tuple[FiredEvent, ...]:
        return tuple(self._fired)

    def pending_events(self) -> list[tuple[float, int, int, Any]]:
        """Pending (fire_at, seq, event_id, payload) entries in firing order."""
        return sorted(self._heap)
