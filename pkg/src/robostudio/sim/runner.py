"""Program execution under virtual time.

The interpreter walks the AST and asks an action backend to perform each
primitive. The local backend advances a virtual clock by computed travel
times instead of sleeping, so runs are fast and fully deterministic; the
bridge backend speaks the wire protocol to a (simulated or real) robot and
must produce the identical trace.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Protocol

from ..dsl import (
    AskBranchStep,
    CommandKind,
    DoStep,
    ForeverStep,
    IfHumanStep,
    RepeatStep,
    RobotProgram,
    Step,
)
from .world import (
    PERSON_CHANGE,
    SPOKEN_REPLY,
    WAKE_WORD,
    EventScript,
    UnknownPlaceError,
    WorldModel,
)

DEFAULT_ASK_TIMEOUT = 10.0
DEFAULT_MAX_STEPS = 10_000

ARMED = "Armed"
TRIGGERED = "Triggered"
MOVE_STARTED = "MoveStarted"
MOVE_ARRIVED = "MoveArrived"
SAID = "Said"
ASKED = "Asked"
HEARD = "Heard"
ASK_TIMED_OUT = "AskTimedOut"
DETECTED = "Detected"
BRANCH_TAKEN = "BranchTaken"
LOOP_ITERATION = "LoopIteration"
FINISHED = "Finished"
TIMED_OUT = "TimedOut"
CANCELLED = "Cancelled"

TERMINAL_KINDS = {FINISHED, TIMED_OUT, CANCELLED}


@dataclass(frozen=True)
class TraceEntry:
    t: float
    kind: str
    payload: dict

    def to_line(self) -> str:
        parts = " ".join(f"{k}={v}" for k, v in self.payload.items())
        return f"[{self.t:g}] {self.kind}" + (f" {parts}" if parts else "")

    def to_json(self) -> dict:
        return {"t": self.t, "kind": self.kind, **self.payload}

    @classmethod
    def from_json(cls, doc: dict) -> "TraceEntry":
        payload = {k: v for k, v in doc.items() if k not in ("t", "kind")}
        return cls(t=float(doc["t"]), kind=doc["kind"], payload=payload)


@dataclass
class ExecutionTrace:
    entries: list[TraceEntry] = field(default_factory=list)

    def kinds(self) -> list[str]:
        return [e.kind for e in self.entries]

    def of_kind(self, kind: str) -> list[TraceEntry]:
        return [e for e in self.entries if e.kind == kind]

    def to_lines(self) -> list[str]:
        return [e.to_line() for e in self.entries]

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self.entries]

    @classmethod
    def from_json(cls, docs: list[dict]) -> "ExecutionTrace":
        return cls(entries=[TraceEntry.from_json(d) for d in docs])


def validate_trace(trace: ExecutionTrace) -> list[str]:
    """Check trace well-formedness; returns human-readable violations."""
    problems: list[str] = []
    open_move: str | None = None
    ask_pending = False
    last_t = float("-inf")
    for i, entry in enumerate(trace.entries):
        if entry.t < last_t:
            problems.append(f"entry {i}: time went backwards ({entry.t} < {last_t})")
        last_t = entry.t
        if entry.kind == MOVE_STARTED:
            if open_move is not None:
                problems.append(f"entry {i}: MoveStarted while a move is in flight")
            open_move = entry.payload.get("place")
        elif entry.kind == MOVE_ARRIVED:
            if open_move != entry.payload.get("place"):
                problems.append(f"entry {i}: MoveArrived without matching MoveStarted")
            open_move = None
        elif entry.kind == ASKED:
            ask_pending = True
        elif entry.kind == HEARD:
            if not ask_pending:
                problems.append(f"entry {i}: Heard without a preceding Asked")
            ask_pending = False
        elif entry.kind == ASK_TIMED_OUT:
            ask_pending = False
        if entry.kind in TERMINAL_KINDS and i != len(trace.entries) - 1:
            problems.append(f"entry {i}: terminal {entry.kind} is not last")
    if trace.entries and trace.entries[-1].kind not in TERMINAL_KINDS:
        problems.append("trace does not end with a terminal entry")
    return problems


class CancelledRun(Exception):
    def __init__(self, path: str):
        self.path = path
        super().__init__(path)


class StepBudgetExceeded(Exception):
    def __init__(self, path: str):
        self.path = path
        super().__init__(path)


class ActionBackend(Protocol):
    """The robot side of the interpreter: performs primitives, owns time."""

    def now(self) -> float: ...
    def arm_wake_word(self, word: str) -> tuple[float, bool]: ...
    def goto(self, place: str) -> tuple[float, float]: ...
    def say(self, text: str) -> float: ...
    def ask(self, text: str, timeout: float) -> tuple[float, str | None]: ...
    def query_human(self) -> tuple[float, bool]: ...
    def close(self) -> None: ...


class LocalBackend:
    """Direct simulation against a world model and event script."""

    def __init__(self, world: WorldModel, script: EventScript):
        self.world = world.copy()
        self.script = script.copy()
        self.t = 0.0

    def now(self) -> float:
        return self.t

    def close(self) -> None:
        pass

    def _advance_to(self, t: float) -> None:
        for event in self.script.events:
            if event.kind == PERSON_CHANGE and not event.consumed and event.t <= t:
                event.consumed = True
                self.world.set_person(event.place, event.present)
        self.t = t

    def arm_wake_word(self, word: str) -> tuple[float, bool]:
        folded = word.casefold().strip()
        for event in self.script.events:
            if (
                event.kind == WAKE_WORD
                and not event.consumed
                and event.t >= self.t
                and event.word.casefold().strip() == folded
            ):
                event.consumed = True
                self._advance_to(event.t)
                return self.t, True
        return self.t, False

    def goto(self, place: str) -> tuple[float, float]:
        start = self.t
        duration = self.world.travel_time(self.world.robot_position, place)
        resolved = self.world.resolve(place)
        self._advance_to(start + duration)
        self.world.robot_position = resolved.name
        return start, self.t

    def say(self, text: str) -> float:
        return self.t

    def ask(self, text: str, timeout: float) -> tuple[float, str | None]:
        deadline = self.t + timeout
        for event in self.script.events:
            if (
                event.kind == SPOKEN_REPLY
                and not event.consumed
                and self.t <= event.t <= deadline
            ):
                event.consumed = True
                self._advance_to(event.t)
                return self.t, event.text
        self._advance_to(deadline)
        return self.t, None

    def query_human(self) -> tuple[float, bool]:
        self._advance_to(self.t)
        return self.t, self.world.persons_present(self.world.robot_position)


def match_arm(arms: list, reply: str) -> str | None:
    """Case-folded substring containment; first matching arm wins."""
    folded = reply.casefold()
    for arm in arms:
        if arm.pattern.casefold().strip() in folded:
            return arm.pattern
    return None


class Interpreter:
    def __init__(
        self,
        program: RobotProgram,
        backend: ActionBackend,
        ask_timeout: float = DEFAULT_ASK_TIMEOUT,
        max_steps: int = DEFAULT_MAX_STEPS,
        cancel: threading.Event | None = None,
        on_entry: Callable[[TraceEntry], None] | None = None,
    ):
        self.program = program
        self.backend = backend
        self.ask_timeout = ask_timeout
        self.max_steps = max_steps
        self.cancel = cancel
        self.on_entry = on_entry
        self.trace = ExecutionTrace()
        self._steps = 0

    def _emit(self, kind: str, **payload) -> None:
        entry = TraceEntry(t=self.backend.now(), kind=kind, payload=payload)
        self.trace.entries.append(entry)
        if self.on_entry is not None:
            self.on_entry(entry)

    def _tick(self, path: str) -> None:
        if self.cancel is not None and self.cancel.is_set():
            raise CancelledRun(path)
        self._steps += 1
        if self._steps > self.max_steps:
            raise StepBudgetExceeded(path)

    def run(self) -> ExecutionTrace:
        try:
            if self.program.entry is not None:
                word = self.program.entry.payload
                self._emit(ARMED, wake_word=word)
                _t, triggered = self.backend.arm_wake_word(word)
                if not triggered:
                    self._emit(TIMED_OUT, step="entry")
                    return self.trace
                self._emit(TRIGGERED, wake_word=word)
            self._exec_block(self.program.body, "body")
            self._emit(FINISHED)
        except CancelledRun as exc:
            self._emit(CANCELLED, step=exc.path)
        except StepBudgetExceeded as exc:
            self._emit(TIMED_OUT, step=exc.path)
        finally:
            self.backend.close()
        return self.trace

    def _exec_block(self, body: list[Step], prefix: str) -> None:
        for i, step in enumerate(body):
            self._exec_step(step, f"{prefix}[{i}]")

    def _exec_step(self, step: Step, path: str) -> None:
        self._tick(path)
        if isinstance(step, DoStep):
            self._exec_command(step, path)
        elif isinstance(step, IfHumanStep):
            _t, present = self.backend.query_human()
            self._emit(DETECTED, present=present)
            label = "yes" if present else "no"
            self._emit(BRANCH_TAKEN, label=label)
            branch = step.then_body if present else step.else_body
            self._exec_block(branch, f"{path}.{'then' if present else 'else'}")
        elif isinstance(step, AskBranchStep):
            self._emit(ASKED, text=step.question)
            _t, reply = self.backend.ask(step.question, self.ask_timeout)
            if reply is None:
                self._emit(ASK_TIMED_OUT, text=step.question)
                self._emit(BRANCH_TAKEN, label="default")
                self._exec_block(step.default, f"{path}.default")
                return
            self._emit(HEARD, text=reply)
            pattern = match_arm(step.arms, reply)
            if pattern is None:
                self._emit(BRANCH_TAKEN, label="default")
                self._exec_block(step.default, f"{path}.default")
            else:
                index = next(i for i, a in enumerate(step.arms) if a.pattern == pattern)
                self._emit(BRANCH_TAKEN, label=pattern)
                self._exec_block(step.arms[index].body, f"{path}.arms[{index}]")
        elif isinstance(step, RepeatStep):
            for i in range(1, step.count + 1):
                self._tick(path)
                self._emit(LOOP_ITERATION, n=i)
                self._exec_block(step.body, f"{path}.body")
        elif isinstance(step, ForeverStep):
            i = 0
            while True:
                i += 1
                self._tick(path)
                self._emit(LOOP_ITERATION, n=i)
                self._exec_block(step.body, f"{path}.body")
        else:
            raise AssertionError(f"unknown step type {type(step)!r}")

    def _exec_command(self, step: DoStep, path: str) -> None:
        command = step.command
        if command.kind is CommandKind.GOTO:
            start, arrived = self.backend.goto(command.payload)
            self.trace.entries.append(
                TraceEntry(t=start, kind=MOVE_STARTED, payload={"place": command.payload})
            )
            if self.on_entry is not None:
                self.on_entry(self.trace.entries[-1])
            self.trace.entries.append(
                TraceEntry(t=arrived, kind=MOVE_ARRIVED, payload={"place": command.payload})
            )
            if self.on_entry is not None:
                self.on_entry(self.trace.entries[-1])
        elif command.kind is CommandKind.SAY:
            self.backend.say(command.payload)
            self._emit(SAID, text=command.payload)
        elif command.kind is CommandKind.ASK:
            self._emit(ASKED, text=command.payload)
            _t, reply = self.backend.ask(command.payload, self.ask_timeout)
            if reply is None:
                self._emit(ASK_TIMED_OUT, text=command.payload)
            else:
                self._emit(HEARD, text=reply)
        elif command.kind is CommandKind.HUMAN_DETECTION:
            _t, present = self.backend.query_human()
            self._emit(DETECTED, present=present)
        else:
            raise AssertionError(f"command {command.kind} cannot appear in a body")


def run_program(
    program: RobotProgram,
    world: WorldModel,
    script: EventScript,
    ask_timeout: float = DEFAULT_ASK_TIMEOUT,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> ExecutionTrace:
    """Execute a program in the simulated world; deterministic virtual time.

    Raises UnknownPlaceError only when validation was skipped and the
    program moves to a place the world does not know.
    """
    backend = LocalBackend(world, script)
    interpreter = Interpreter(program, backend, ask_timeout=ask_timeout, max_steps=max_steps)
    return interpreter.run()


__all__ = [
    "ActionBackend",
    "ExecutionTrace",
    "Interpreter",
    "LocalBackend",
    "TraceEntry",
    "UnknownPlaceError",
    "match_arm",
    "run_program",
    "validate_trace",
    "DEFAULT_ASK_TIMEOUT",
    "DEFAULT_MAX_STEPS",
]
