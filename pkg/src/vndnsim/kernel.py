"""Deterministic discrete-event engine.

Time is an integer count of nanoseconds. Events with equal ``fire_at`` are
dispatched in ascending ``sequence`` order. Randomness comes from labeled
counter-based streams so that adding a consumer of randomness never shifts
the draws seen by another.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
from statistics import NormalDist
from typing import Any, Callable

import numpy as np

NS_PER_S = 1_000_000_000
NS_PER_MS = 1_000_000
NS_PER_US = 1_000


def seconds(value: float) -> int:
    """Convert seconds to integer nanoseconds (rounded to nearest)."""
    return round(value * NS_PER_S)


def microseconds(value: float) -> int:
    return round(value * NS_PER_US)


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""

    def __init__(self, fire_at: int, now: int, label: str = ""):
        super().__init__(f"cannot schedule {label or 'event'} at t={fire_at} ns, clock is t={now} ns")
        self.fire_at = fire_at
        self.now = now
        self.label = label


class SimulationFault(RuntimeError):
    """A handler raised while being dispatched; carries the event context."""

    def __init__(self, label: str, time: int, cause: BaseException):
        super().__init__(f"handler {label or '<unlabeled>'} failed at t={time} ns: {cause!r}")
        self.label = label
        self.time = time
        self.cause = cause


class Event(list):
    """Labeled heap entry ``[fire_at, sequence, action, args, label]``.

    Subclassing list keeps heap comparisons in C; ``sequence`` is unique so the
    comparison never reaches the action.
    """

    __slots__ = ()

    @property
    def fire_at(self) -> int:
        return self[0]

    @property
    def sequence(self) -> int:
        return self[1]

    @property
    def action(self) -> Callable[..., Any] | None:
        return self[2]

    @property
    def label(self) -> str:
        return self[4]

    @property
    def cancelled(self) -> bool:
        return self[2] is None

    def cancel(self) -> None:
        self[2] = None


class Simulator:
    """Single-threaded event loop with a virtual nanosecond clock."""

    def __init__(self) -> None:
        self.now = 0
        self._heap: list[Event] = []
        self._seq = itertools.count()
        self._running = False
        self.dispatched = 0

    def schedule(self, fire_at: int, action: Callable[..., Any], *args: Any, label: str = "") -> Event:
        if fire_at < self.now:
            raise SchedulingError(fire_at, self.now, label)
        event = Event((fire_at, next(self._seq), action, args, label))
        heapq.heappush(self._heap, event)
        return event

    def post(self, fire_at: int, action: Callable[..., Any], *args: Any) -> list:
        """Unlabeled :meth:`schedule` for hot paths; returns the raw heap entry.

        Cancel with ``entry[2] = None``.
        """
        if fire_at < self.now:
            raise SchedulingError(fire_at, self.now, getattr(action, "__qualname__", ""))
        entry = [fire_at, next(self._seq), action, args]
        heapq.heappush(self._heap, entry)
        return entry

    def schedule_in(self, delay: int, action: Callable[..., Any], *args: Any, label: str = "") -> Event:
        return self.schedule(self.now + delay, action, *args, label=label)

    def __len__(self) -> int:
        return sum(1 for ev in self._heap if ev[2] is not None)

    def peek_time(self) -> int | None:
        heap = self._heap
        while heap and heap[0][2] is None:
            heapq.heappop(heap)
        return heap[0][0] if heap else None

    def run_until(self, end: int) -> int:
        """Dispatch every event with ``fire_at <= end``; return how many ran.

        Events scheduled by handlers are honored if they fall inside the
        horizon. The clock is left at ``end``.
        """
        if self._running:
            raise RuntimeError("simulator is already running")
        self._running = True
        heap = self._heap
        pop = heapq.heappop
        count = 0
        event = None
        try:
            while heap and heap[0][0] <= end:
                event = pop(heap)
                action = event[2]
                if action is None:
                    continue
                self.now = event[0]
                action(*event[3])
                count += 1
        except Exception as exc:
            label = ""
            if event is not None:
                label = event[4] if len(event) > 4 and event[4] else getattr(event[2], "__qualname__", "")
            raise SimulationFault(label, self.now, exc) from exc
        finally:
            self._running = False
            self.dispatched += count
        if end > self.now:
            self.now = end
        return count


class RngStream:
    """Labeled pseudo-random stream backed by a Philox counter generator.

    The Philox key is a BLAKE2b digest of ``(seed, label)``, so streams are
    independent of each other and of creation order.
    """

    _BLOCK = 2048

    def __init__(self, label: str, seed: int):
        self.label = label
        self.seed = int(seed)
        digest = hashlib.blake2b(f"{self.seed}/{label}".encode(), digest_size=16).digest()
        self._gen = np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))
        self._it = iter(())

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        try:
            return next(self._it)
        except StopIteration:
            self._it = iter(self._gen.random(self._BLOCK).tolist())
            return next(self._it)

    def uniform_int(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both inclusive."""
        if lo > hi:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + int(self.random() * (hi - lo + 1))

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def normal(self, mean: float, sd: float) -> float:
        u = self.random()
        while u == 0.0:
            u = self.random()
        return NormalDist(mean, sd).inv_cdf(u)

    def nonce(self) -> int:
        return int(self.random() * 4294967296.0)

    def shuffle(self, items: list) -> list:
        """Fisher-Yates shuffle in place; returns ``items``."""
        for i in range(len(items) - 1, 0, -1):
            j = self.uniform_int(0, i)
            items[i], items[j] = items[j], items[i]
        return items


def rng_uniform_int(stream: RngStream, lo: int, hi: int) -> int:
    return stream.uniform_int(lo, hi)
