"""Blocking-wait policies for ranks sharing one fabric.

Both schedulers expose the same small surface used by the fabric:

``cond``
    condition variable guarding all fabric state.
``wait_until(predicate, what)``
    park the calling rank until ``predicate()`` holds; called with ``cond`` held.
``notify()``
    wake parked ranks after a state change; called with ``cond`` held.
``yield_point()``
    a step boundary; the fabric calls it at every flush fence.

:class:`ConcurrentScheduler` lets rank threads run freely and bounds every
wait by a wall-clock timeout.  :class:`RoundRobinScheduler` runs exactly one
rank at a time, passing control in fixed rank order whenever the running rank
blocks, finishes, or has passed a fixed number of step boundaries; a deadlock is detected exactly
instead of timing out.
"""
from __future__ import annotations

import threading
from typing import Callable

from .errors import DeadlockTimeout, RankShutdown

DEFAULT_TIMEOUT = 10.0
# Flush fences a round-robin rank may pass before it must hand off.
FENCE_QUANTUM = 8

_local = threading.local()


def current_rank():
    """Rank bound to the calling thread, or None outside a launch."""
    return getattr(_local, "rank", None)


class ConcurrentScheduler:
    name = "concurrent"

    def __init__(self, timeout: float = DEFAULT_TIMEOUT):
        self.timeout = timeout
        self.cond = threading.Condition(threading.RLock())
        self.shutting_down = False

    def start(self, size: int) -> None:
        pass

    def enter(self, rank: int) -> None:
        _local.rank = rank

    def exit(self, rank: int, failed: bool = False) -> None:
        _local.rank = None
        if failed:
            self.shutdown()

    def shutdown(self) -> None:
        with self.cond:
            self.shutting_down = True
            self.cond.notify_all()

    def notify(self) -> None:
        self.cond.notify_all()

    def yield_point(self) -> None:
        pass

    def wait_until(self, predicate: Callable[[], bool], what: str) -> None:
        ok = self.cond.wait_for(lambda: self.shutting_down or predicate(), self.timeout)
        if self.shutting_down and not predicate():
            raise RankShutdown(f"run shut down while waiting for {what}")
        if not ok:
            raise DeadlockTimeout(f"timed out after {self.timeout:g}s waiting for {what}")


class RoundRobinScheduler:
    """Cooperative scheduler: one runnable rank at a time, fixed hand-off order."""

    name = "round-robin-deterministic"

    READY, BLOCKED, DONE = "ready", "blocked", "done"

    def __init__(self, timeout: float = DEFAULT_TIMEOUT):
        # Kept for interface parity; deadlocks are detected, not timed.
        self.timeout = timeout
        self._lock = threading.RLock()
        self.cond = threading.Condition(self._lock)
        self.shutting_down = False
        # One wake-up channel per rank over the shared lock: a hand-off wakes
        # only the rank that receives the baton.
        self._turn: dict[int, threading.Condition] = {}
        self._state: dict[int, str] = {}
        self._predicates: dict[int, Callable[[], bool]] = {}
        self._deadlocked: set[int] = set()
        self._size = 0
        self._fences = 0
        self.current = None

    def start(self, size: int) -> None:
        with self.cond:
            self._size = size
            self._state = {r: self.READY for r in range(size)}
            self._turn = {r: threading.Condition(self._lock) for r in range(size)}
            self.current = 0 if size else None

    def enter(self, rank: int) -> None:
        _local.rank = rank
        with self.cond:
            self._await_turn(rank)

    def exit(self, rank: int, failed: bool = False) -> None:
        _local.rank = None
        with self.cond:
            self._state[rank] = self.DONE
            if failed:
                self.shutting_down = True
            if self.current == rank:
                self._hand_off(rank)

    def shutdown(self) -> None:
        with self.cond:
            self.shutting_down = True
            if self.current is None or self._state.get(self.current) == self.DONE:
                self._hand_off(self.current or 0)

    def notify(self) -> None:
        # Only the running rank mutates state; waiters are re-checked at hand-off.
        pass

    def yield_point(self) -> None:
        """Hand off after every ``FENCE_QUANTUM`` fences so no rank runs far ahead."""
        rank = current_rank()
        if rank is None or rank not in self._state or self._size < 2:
            return
        self._fences += 1
        if self._fences < FENCE_QUANTUM:
            return
        self._hand_off(rank)
        self._await_turn(rank)

    def wait_until(self, predicate: Callable[[], bool], what: str) -> None:
        rank = current_rank()
        if rank is None or rank not in self._state:
            if not predicate():
                raise DeadlockTimeout(f"nothing can make progress: waiting for {what}")
            return
        while not predicate():
            if self.shutting_down:
                raise RankShutdown(f"run shut down while waiting for {what}")
            self._state[rank] = self.BLOCKED
            self._predicates[rank] = predicate
            self._hand_off(rank)
            self._await_turn(rank)
            self._state[rank] = self.READY
            self._predicates.pop(rank, None)
            if rank in self._deadlocked:
                self._deadlocked.discard(rank)
                raise DeadlockTimeout(f"global deadlock: rank {rank} waiting for {what}")

    def _runnable(self, r: int) -> bool:
        st = self._state.get(r)
        if st == self.READY:
            return True
        if st == self.BLOCKED:
            return self.shutting_down or self._predicates[r]()
        return False

    def _hand_off(self, from_rank: int) -> None:
        order = [(from_rank + k) % self._size for k in range(1, self._size + 1)]
        for r in order:
            if self._runnable(r):
                self._give(r)
                return
        blocked = [r for r in order if self._state.get(r) == self.BLOCKED]
        if blocked:
            self._deadlocked.add(blocked[0])
            self._give(blocked[0])
        else:
            self.current = None

    def _give(self, rank: int) -> None:
        self.current = rank
        self._fences = 0
        self._turn[rank].notify()

    def _await_turn(self, rank: int) -> None:
        while self.current != rank:
            self._turn[rank].wait()


SCHEDULERS = {
    ConcurrentScheduler.name: ConcurrentScheduler,
    RoundRobinScheduler.name: RoundRobinScheduler,
}
