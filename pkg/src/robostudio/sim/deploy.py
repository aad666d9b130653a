"""Instant deployment: run a program asynchronously with a live trace feed.

deploy() returns immediately with a handle; the run proceeds on a worker
thread and trace entries stream to subscribers as they happen, so there is
no waiting between writing a program and watching the robot execute it.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass

from ..dsl import RobotProgram
from .bridge import BridgeBackend, TargetUnreachable
from .runner import (
    DEFAULT_ASK_TIMEOUT,
    DEFAULT_MAX_STEPS,
    ActionBackend,
    ExecutionTrace,
    Interpreter,
    LocalBackend,
    TraceEntry,
)
from .world import EventScript, WorldModel

_SENTINEL = object()


@dataclass(frozen=True)
class Simulated:
    world: WorldModel
    script: EventScript


@dataclass(frozen=True)
class Bridge:
    address: str


class RunHandle:
    """Live view of an asynchronous program run."""

    def __init__(self, interpreter: Interpreter, cancel: threading.Event):
        self._interpreter = interpreter
        self._cancel = cancel
        self._subscribers: list[queue.SimpleQueue] = []
        self._lock = threading.Lock()
        self._done = threading.Event()
        self._trace: ExecutionTrace | None = None
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _start(self) -> "RunHandle":
        self._thread.start()
        return self

    def _run(self) -> None:
        trace = self._interpreter.run()
        with self._lock:
            self._trace = trace
            for q in self._subscribers:
                q.put(_SENTINEL)
        self._done.set()

    def _publish(self, entry: TraceEntry) -> None:
        with self._lock:
            for q in self._subscribers:
                q.put(entry)

    def subscribe(self) -> "queue.SimpleQueue[TraceEntry | object]":
        """A queue of TraceEntry ending with a sentinel; safe across threads."""
        q: queue.SimpleQueue = queue.SimpleQueue()
        with self._lock:
            for entry in self._interpreter.trace.entries:
                q.put(entry)
            if self._trace is not None:
                q.put(_SENTINEL)
            self._subscribers.append(q)
        return q

    def events(self, timeout: float | None = None):
        """Iterate live trace entries until the run terminates."""
        q = self.subscribe()
        while True:
            item = q.get(timeout=timeout)
            if item is _SENTINEL:
                return
            yield item

    def cancel(self) -> None:
        self._cancel.set()

    def wait(self, timeout: float | None = None) -> ExecutionTrace:
        if not self._done.wait(timeout=timeout):
            raise TimeoutError("run did not finish in time")
        assert self._trace is not None
        return self._trace

    @property
    def done(self) -> bool:
        return self._done.is_set()


def deploy(
    program: RobotProgram,
    target: Simulated | Bridge,
    ask_timeout: float = DEFAULT_ASK_TIMEOUT,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> RunHandle:
    """Start the program on the target and return a handle immediately.

    Raises TargetUnreachable when a bridge target cannot be connected.
    """
    backend: ActionBackend
    if isinstance(target, Simulated):
        backend = LocalBackend(target.world, target.script)
    elif isinstance(target, Bridge):
        backend = BridgeBackend(target.address)
    else:
        raise TypeError(f"unknown deploy target {target!r}")
    cancel = threading.Event()
    interpreter = Interpreter(
        program,
        backend,
        ask_timeout=ask_timeout,
        max_steps=max_steps,
        cancel=cancel,
    )
    handle = RunHandle(interpreter, cancel)
    interpreter.on_entry = handle._publish
    return handle._start()


__all__ = ["Bridge", "RunHandle", "Simulated", "TargetUnreachable", "deploy"]
