"""Deterministic discrete-event kernel and reproducible random streams.

Virtual time is a 64-bit count of microseconds so event ordering is exact
and identical on every platform.  Events with equal fire times dequeue in
scheduling (FIFO) order.  Randomness is drawn from streams derived from
(master_seed, purpose, node), so each subsystem's draw sequence is
independent of how many draws the others make.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

US_PER_S = 1_000_000

STREAM_PURPOSES = ("topology", "traffic", "medium", "protocol-jitter")


def to_us(seconds: float) -> int:
    """Convert seconds to integer virtual microseconds."""
    return round(seconds * US_PER_S)


def to_s(us: int) -> float:
    return us / US_PER_S


class EventKind(Enum):
    TIMER_FIRE = "timer-fire"
    TX_START = "tx-start"
    TX_END = "tx-end"
    RX_DELIVER = "rx-deliver"
    APP_SEND = "app-send"


class SchedulingError(Exception):
    """An event was scheduled before the current virtual clock."""


@dataclass
class Event:
    fire_time: int
    sequence: int
    kind: EventKind
    target: int | str
    action: Callable[[], None] = field(repr=False)
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


class Simulator:
    """Single-run event queue ordered by (fire_time, sequence)."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._now = 0
        self.events_processed = 0

    @property
    def now(self) -> int:
        """Current virtual clock in microseconds."""
        return self._now

    def schedule(self, fire_time: int, kind: EventKind, target: int | str,
                 action: Callable[[], None]) -> Event:
        """Queue an event; returns a handle whose cancel() withdraws it."""
        if fire_time < self._now:
            raise SchedulingError(
                f"event scheduled in the past: t={fire_time} < clock={self._now}"
            )
        event = Event(fire_time, self._seq, kind, target, action)
        heapq.heappush(self._heap, (fire_time, self._seq, event))
        self._seq += 1
        return event

    def schedule_in(self, delay: int, kind: EventKind, target: int | str,
                    action: Callable[[], None]) -> Event:
        return self.schedule(self._now + delay, kind, target, action)

    def run_until(self, end_time: int) -> int:
        """Process every event with fire_time <= end_time; clock ends at end_time."""
        if end_time < self._now:
            raise SchedulingError(
                f"run_until into the past: t={end_time} < clock={self._now}"
            )
        heap = self._heap
        while heap and heap[0][0] <= end_time:
            fire_time, _, event = heapq.heappop(heap)
            if event.cancelled:
                continue
            self._now = fire_time
            event.action()
            self.events_processed += 1
        self._now = end_time
        return self._now

    def pending(self) -> int:
        return sum(1 for _, _, e in self._heap if not e.cancelled)


class RandomStream:
    """Isolated PRNG keyed by (master_seed, purpose_tag, node_scope).

    The key is hashed with sha256 so derivation is stable across processes
    and Python versions (unlike the salted builtin hash()).
    """

    def __init__(self, master_seed: int, purpose_tag: str,
                 node_scope: int | None = None):
        if purpose_tag not in STREAM_PURPOSES:
            raise ValueError(f"unknown stream purpose: {purpose_tag!r}")
        self.master_seed = master_seed
        self.purpose_tag = purpose_tag
        self.node_scope = node_scope
        material = f"{master_seed}|{purpose_tag}|{node_scope}".encode()
        digest = hashlib.sha256(material).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "big"))

    def random(self) -> float:
        return self._rng.random()

    def uniform(self, a: float, b: float) -> float:
        return self._rng.uniform(a, b)

    def randrange(self, n: int) -> int:
        return self._rng.randrange(n)


def derive_stream(master_seed: int, purpose_tag: str,
                  node_scope: int | None = None) -> RandomStream:
    """Derive the deterministic stream for one (purpose, node) slot."""
    return RandomStream(master_seed, purpose_tag, node_scope)
