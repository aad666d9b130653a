"""AST types for CocoScript, the line-oriented robot-task language.

A program is an optional wake-word entry trigger followed by a block of
steps. Steps are either single robot commands or one of the structural
constructs (human-detection branch, ask-with-arms branch, counted repeat,
forever loop).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class CommandKind(Enum):
    USER_REQUEST = "userRequest"
    GOTO = "goto"
    SAY = "say"
    ASK = "ask"
    HUMAN_DETECTION = "humanDetection"


# Command kinds that carry a text payload.
PAYLOAD_KINDS = frozenset(
    {CommandKind.USER_REQUEST, CommandKind.GOTO, CommandKind.SAY, CommandKind.ASK}
)


@dataclass(frozen=True)
class Command:
    """One primitive robot command. HUMAN_DETECTION carries no payload."""

    kind: CommandKind
    payload: str = ""

    def __post_init__(self) -> None:
        if self.kind in PAYLOAD_KINDS:
            if not self.payload.strip():
                raise ValueError(f"{self.kind.value} requires a non-empty payload")
            if _has_control_chars(self.payload):
                raise ValueError(f"{self.kind.value} payload contains control characters")
        elif self.payload:
            raise ValueError(f"{self.kind.value} takes no payload")

    def line(self) -> str:
        """The canonical CocoScript line for this command."""
        if self.kind is CommandKind.HUMAN_DETECTION:
            return self.kind.value
        return f"{self.kind.value}: {self.payload}"


def _has_control_chars(text: str) -> bool:
    return any(ord(ch) < 0x20 or ord(ch) == 0x7F for ch in text)


@dataclass
class DoStep:
    """Execute a single command."""

    command: Command


@dataclass
class IfHumanStep:
    """Branch on whether a person is in front of the robot."""

    then_body: list[Step] = field(default_factory=list)
    else_body: list[Step] = field(default_factory=list)


@dataclass
class AskArm:
    """One `when <pattern>:` arm of an ask branch."""

    pattern: str
    body: list[Step] = field(default_factory=list)


@dataclass
class AskBranchStep:
    """Ask a question and branch on the reply.

    Arm patterns match the reply by case-folded substring containment,
    first match wins; no match falls through to the default body.
    """

    question: str
    arms: list[AskArm] = field(default_factory=list)
    default: list[Step] = field(default_factory=list)


@dataclass
class RepeatStep:
    """Run the body a fixed number of times (count >= 1)."""

    count: int
    body: list[Step] = field(default_factory=list)


@dataclass
class ForeverStep:
    """Run the body indefinitely. Only legal as the last program step."""

    body: list[Step] = field(default_factory=list)


Step = DoStep | IfHumanStep | AskBranchStep | RepeatStep | ForeverStep


@dataclass
class RobotProgram:
    """A full program: optional wake-word entry plus the step body."""

    body: list[Step] = field(default_factory=list)
    entry: Command | None = None  # USER_REQUEST, when present

    def __post_init__(self) -> None:
        if self.entry is not None and self.entry.kind is not CommandKind.USER_REQUEST:
            raise ValueError("program entry must be a userRequest command")


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    """A problem found while parsing, validating, or converting a program."""

    severity: Severity
    code: str
    message: str
    path: str = ""  # node path into the AST, e.g. "body[1].then[0]"
    line: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        where = self.path
        if self.line is not None:
            where = f"line {self.line}" + (f", col {self.column}" if self.column else "")
        prefix = f"{self.severity.value}[{self.code}]"
        return f"{prefix} {where}: {self.message}" if where else f"{prefix}: {self.message}"


def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.severity is Severity.ERROR for d in diagnostics)


class ProgramError(Exception):
    """Raised by operations that cannot return diagnostics in-band."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


def walk_steps(body: list[Step], prefix: str = "body"):
    """Yield (path, step) pairs over a block in preorder."""
    for i, step in enumerate(body):
        path = f"{prefix}[{i}]"
        yield path, step
        if isinstance(step, IfHumanStep):
            yield from walk_steps(step.then_body, f"{path}.then")
            yield from walk_steps(step.else_body, f"{path}.else")
        elif isinstance(step, AskBranchStep):
            for j, arm in enumerate(step.arms):
                yield from walk_steps(arm.body, f"{path}.arms[{j}]")
            yield from walk_steps(step.default, f"{path}.default")
        elif isinstance(step, (RepeatStep, ForeverStep)):
            yield from walk_steps(step.body, f"{path}.body")
