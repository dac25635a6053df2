"""Deterministic discrete-event core: clock, ordered queue, named RNG streams.

Events fire in strict (time, insertion sequence) order, so simultaneous
events replay identically and every run with the same seed is bit-exact.
"""

import heapq
import math
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(order=True, slots=True)
class Event:
    fire_at: float
    seq: int
    payload: Callable[[], Any] = field(compare=False)


class RngStream:
    """A named, independently seeded draw sequence.

    The same (seed, label) pair yields the same sequence on every run and
    platform; different labels are statistically independent.
    """

    __slots__ = ("seed", "label", "_gen")

    def __init__(self, seed: int, label: str):
        self.seed = seed
        self.label = label
        # crc32 keeps the label -> entropy mapping stable across processes
        # (hash() is salted and would break replay).
        self._gen = np.random.default_rng(
            np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(label.encode())])
        )

    def uniform(self, lo: float, hi: float) -> float:
        if lo > hi:
            raise ValueError(f"uniform bounds reversed: lo={lo} > hi={hi}")
        if lo == hi:
            return lo
        return float(self._gen.uniform(lo, hi))

    def randint(self, lo: int, hi: int) -> int:
        """Inclusive integer draw in [lo, hi]."""
        if lo > hi:
            raise ValueError(f"randint bounds reversed: lo={lo} > hi={hi}")
        return int(self._gen.integers(lo, hi + 1))

    def shuffle(self, items: list) -> list:
        self._gen.shuffle(items)
        return items

    def sample(self, items: list, k: int) -> list:
        idx = self._gen.choice(len(items), size=k, replace=False)
        return [items[int(i)] for i in idx]


def draw_uniform(stream: RngStream, lo: float, hi: float) -> float:
    return stream.uniform(lo, hi)


class Engine:
    """Single-threaded event loop; the sole mutator of simulation state."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._now = 0.0
        self._queue: list[Event] = []
        self._next_seq = 0
        self._streams: dict[str, RngStream] = {}
        # Called after every delivered event when non-empty (debug sweeps).
        self.debug_hooks: list[Callable[[], None]] = []

    def now(self) -> float:
        return self._now

    def stream(self, label: str) -> RngStream:
        st = self._streams.get(label)
        if st is None:
            st = self._streams[label] = RngStream(self.seed, label)
        return st

    def schedule(self, event: Event) -> None:
        if not math.isfinite(event.fire_at) or event.fire_at < self._now:
            raise SchedulingError(
                f"cannot schedule event at t={event.fire_at} (now={self._now})"
            )
        heapq.heappush(self._queue, event)

    def schedule_at(self, fire_at: float, payload: Callable[[], Any]) -> Event:
        ev = Event(fire_at, self._next_seq, payload)
        self._next_seq += 1
        self.schedule(ev)
        return ev

    def schedule_in(self, delay: float, payload: Callable[[], Any]) -> Event:
        return self.schedule_at(self._now + delay, payload)

    def run_until(self, t_end: float) -> None:
        if t_end < self._now:
            raise SchedulingError(f"run_until({t_end}) is in the past (now={self._now})")
        queue = self._queue
        hooks = self.debug_hooks
        while queue and queue[0].fire_at <= t_end:
            ev = heapq.heappop(queue)
            self._now = ev.fire_at
            ev.payload()
            if hooks:
                for hook in hooks:
                    hook()
        self._now = t_end
