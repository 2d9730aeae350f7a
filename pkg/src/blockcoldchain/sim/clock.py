"""Virtual-time event queue."""

from __future__ import annotations

import heapq
import itertools
from typing import Any, Callable


class SimClock:
    """Millisecond virtual clock.

    Events fire in (time, sequence) order; the sequence number is the
    deterministic tie-break for events scheduled at the same instant.
    """

    def __init__(self) -> None:
        self.now = 0
        self._queue: list[tuple[int, int, Callable[..., Any], tuple]] = []
        self._seq = itertools.count()

    def schedule(self, at: int, callback: Callable[..., Any], *args: Any) -> None:
        if at < self.now:
            raise ValueError(f"cannot schedule in the past ({at} < {self.now})")
        heapq.heappush(self._queue, (at, next(self._seq), callback, args))

    def call_later(self, delay: int, callback: Callable[..., Any], *args: Any) -> None:
        self.schedule(self.now + delay, callback, *args)

    def peek(self) -> int | None:
        return self._queue[0][0] if self._queue else None

    def step(self) -> bool:
        if not self._queue:
            return False
        at, _, callback, args = heapq.heappop(self._queue)
        self.now = at
        callback(*args)
        return True

    def run_until(self, t: int) -> None:
        while self._queue and self._queue[0][0] <= t:
            self.step()
        self.now = max(self.now, t)

    def run(self, limit: int | None = None) -> None:
        """Drain the queue, optionally stopping at virtual time ``limit``."""
        while self._queue and (limit is None or self._queue[0][0] <= limit):
            self.step()

    def __len__(self) -> int:
        return len(self._queue)
