"""Cooperative deadlines, cancellation and time slicing.

Analysis code calls :func:`checkpoint` inside its loops.  Outside an evaluation
that is a no-op; inside one it polls the active :class:`Ctx` chain and raises
:class:`Timeout` or :class:`Cancelled` for the outermost context that expired,
and hands the CPU to the next ready task once a slice of ticks is used up.

The scheduler admits at most ``slots`` tasks at a time.  With one slot, parallel
branches interleave round-robin in a fixed tick-counted order, which keeps
single-worker evaluation deterministic.
"""

from __future__ import annotations

import contextvars
import threading
import time
from collections import deque

SLICE_TICKS = 256

_current: contextvars.ContextVar["Ctx | None"] = contextvars.ContextVar("trsconf_ctx", default=None)


class Interrupt(Exception):
    def __init__(self, ctx: "Ctx"):
        super().__init__(ctx)
        self.ctx = ctx


class Timeout(Interrupt):
    pass


class Cancelled(Interrupt):
    pass


class Cpu:
    def __init__(self, slots: int = 1):
        if slots < 1:
            raise ValueError("need at least one slot")
        self.slots = slots
        self._cond = threading.Condition()
        self._running = 0
        self._queue: deque[Task] = deque()

    def enqueue(self, task: "Task") -> None:
        with self._cond:
            self._queue.append(task)
            self._cond.notify_all()

    def wait_turn(self, task: "Task") -> None:
        with self._cond:
            self._cond.wait_for(lambda: bool(self._queue) and self._queue[0] is task and self._running < self.slots)
            self._queue.popleft()
            self._running += 1
            self._cond.notify_all()

    def acquire(self, task: "Task") -> None:
        self.enqueue(task)
        self.wait_turn(task)

    def release(self) -> None:
        with self._cond:
            self._running -= 1
            self._cond.notify_all()

    def maybe_yield(self, task: "Task") -> None:
        with self._cond:
            if not self._queue:
                return
        self.release()
        self.acquire(task)


class Task:
    __slots__ = ("cpu", "ticks")

    def __init__(self, cpu: Cpu | None):
        self.cpu = cpu
        self.ticks = 0


class Ctx:
    """A node in the deadline/cancellation chain of one running branch."""

    def __init__(self, task: Task, deadline: float | None = None, parent: "Ctx | None" = None,
                 cancellable: bool = False):
        self.task = task
        self.deadline = deadline
        self.parent = parent
        self.cancel_flag = threading.Event() if cancellable else None
        self.chain: tuple[Ctx, ...] = (parent.chain if parent else ()) + (self,)
        self._watched = tuple(c for c in self.chain if c.deadline is not None or c.cancel_flag is not None)

    def child(self, seconds: float | None = None) -> "Ctx":
        deadline = None if seconds is None else time.monotonic() + seconds
        return Ctx(self.task, deadline, self)

    def branch(self, task: Task) -> "Ctx":
        return Ctx(task, None, self, cancellable=True)

    def remaining(self) -> float | None:
        deadlines = [c.deadline for c in self.chain if c.deadline is not None]
        if not deadlines:
            return None
        return max(0.0, min(deadlines) - time.monotonic())

    def check(self) -> None:
        now = None
        for c in self._watched:
            if c.cancel_flag is not None and c.cancel_flag.is_set():
                raise Cancelled(c)
            if c.deadline is not None:
                if now is None:
                    now = time.monotonic()
                if now >= c.deadline:
                    raise Timeout(c)

    def tick(self) -> None:
        task = self.task
        task.ticks += 1
        if task.cpu is not None and task.ticks % SLICE_TICKS == 0:
            task.cpu.maybe_yield(task)
        self.check()


def checkpoint() -> None:
    ctx = _current.get()
    if ctx is not None:
        ctx.tick()


def current() -> Ctx | None:
    return _current.get()


class activate:
    """Context manager installing ``ctx`` as the active context of this thread."""

    def __init__(self, ctx: Ctx | None):
        self.ctx = ctx
        self._token = None

    def __enter__(self):
        self._token = _current.set(self.ctx)
        return self.ctx

    def __exit__(self, *exc):
        _current.reset(self._token)
        return False


def deadline_ctx(seconds: float | None) -> Ctx:
    """A standalone context for running one analysis under a wall-clock cap."""
    parent = _current.get()
    if parent is not None:
        return parent.child(seconds)
    return Ctx(Task(None), None if seconds is None else time.monotonic() + seconds)
