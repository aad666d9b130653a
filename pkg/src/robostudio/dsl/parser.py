"""Parser for CocoScript source text.

The grammar is line-oriented: one command or structural keyword per line,
blocks closed by an explicit `end`. Indentation is not significant, so the
parser tolerates whitespace noise in generated code. Keywords match
case-insensitively and are normalized on emission.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .ast import (
    AskArm,
    AskBranchStep,
    Command,
    CommandKind,
    Diagnostic,
    DoStep,
    ForeverStep,
    IfHumanStep,
    ProgramError,
    RepeatStep,
    RobotProgram,
    Severity,
    Step,
    has_errors,
)

COMMAND_KEYWORDS = {
    "userrequest": CommandKind.USER_REQUEST,
    "goto": CommandKind.GOTO,
    "say": CommandKind.SAY,
    "ask": CommandKind.ASK,
}

_KEYWORD_COLON_RE = re.compile(r"^([A-Za-z]+)\s*:\s*(.*)$")
_ASK_WHEN_RE = re.compile(r"^ask-when\s*:\s*(.*)$", re.IGNORECASE)
_REPEAT_RE = re.compile(r"^repeat(?:\s+([^\s:]+))?\s*:?\s*$", re.IGNORECASE)
_WHEN_RE = re.compile(r"^when\s+(.*?)\s*:\s*$", re.IGNORECASE)
_WORD_RE = re.compile(r"^([A-Za-z][A-Za-z0-9_-]*)")


def _payload_invalid(text: str) -> bool:
    return any(ord(ch) < 0x20 or ord(ch) == 0x7F for ch in text)


class TokKind(Enum):
    COMMAND = "command"
    IF_HUMAN = "if_human"
    ASK_WHEN = "ask_when"
    ELSE = "else"
    WHEN = "when"
    REPEAT = "repeat"
    FOREVER = "forever"
    END = "end"


@dataclass
class _Tok:
    kind: TokKind
    line: int
    column: int
    command: Command | None = None
    pattern: str = ""
    count: int = 0


class _Parser:
    def __init__(self, source: str):
        self.diags: list[Diagnostic] = []
        self.toks = self._lex(source)
        self.pos = 0

    # -- lexing ---------------------------------------------------------

    def _lex(self, source: str) -> list[_Tok]:
        toks: list[_Tok] = []
        for lineno, raw in enumerate(source.splitlines(), start=1):
            text = raw.strip()
            if not text:
                continue
            col = len(raw) - len(raw.lstrip()) + 1
            tok = self._classify(text, lineno, col)
            if tok is not None:
                toks.append(tok)
        return toks

    def _classify(self, text: str, line: int, col: int) -> _Tok | None:
        lowered = " ".join(text.casefold().strip().rstrip(":").split())
        if lowered == "end":
            return _Tok(TokKind.END, line, col)
        if lowered == "else":
            return _Tok(TokKind.ELSE, line, col)
        if lowered == "forever":
            return _Tok(TokKind.FOREVER, line, col)
        if lowered == "if human":
            return _Tok(TokKind.IF_HUMAN, line, col)
        if lowered == "humandetection":
            if text.casefold().strip() != "humandetection":
                self._error("MalformedArgument", "humanDetection takes no payload", line, col)
                return None
            return _Tok(
                TokKind.COMMAND, line, col, command=Command(CommandKind.HUMAN_DETECTION)
            )

        m = _ASK_WHEN_RE.match(text)
        if m:
            question = m.group(1).strip()
            if not question or _payload_invalid(question):
                self._error(
                    "MalformedArgument", "ask-when requires a question text", line, col
                )
                question = "?"
            return _Tok(TokKind.ASK_WHEN, line, col, pattern=question)

        m = _REPEAT_RE.match(text)
        if m:
            raw_count = m.group(1)
            if raw_count is None or not raw_count.isdigit() or int(raw_count) < 1:
                self._error(
                    "MalformedArgument",
                    f"repeat requires a positive integer count, got {raw_count!r}",
                    line,
                    col,
                )
                # Keep the block structure so the error does not cascade.
                return _Tok(TokKind.REPEAT, line, col, count=1)
            return _Tok(TokKind.REPEAT, line, col, count=int(raw_count))

        m = _WHEN_RE.match(text)
        if m or text.casefold().startswith("when ") or lowered == "when":
            pattern = m.group(1) if m else ""
            if not pattern:
                self._error(
                    "MalformedArgument",
                    "when requires a pattern followed by ':'",
                    line,
                    col,
                )
                return None
            if pattern.casefold().strip() == "default":
                # Reserved: 'default' labels the fall-through branch itself.
                self._error(
                    "MalformedArgument",
                    "'default' is reserved for the else branch and cannot be a when pattern",
                    line,
                    col,
                )
                return None
            return _Tok(TokKind.WHEN, line, col, pattern=pattern)

        m = _KEYWORD_COLON_RE.match(text)
        if m:
            keyword, payload = m.group(1), m.group(2).strip()
            kind = COMMAND_KEYWORDS.get(keyword.casefold())
            if kind is None:
                self._error("UnknownCommand", f"unknown command {keyword!r}", line, col)
                return None
            try:
                command = Command(kind, payload)
            except ValueError as exc:
                self._error("MalformedArgument", str(exc), line, col)
                return None
            return _Tok(TokKind.COMMAND, line, col, command=command)

        word = _WORD_RE.match(text)
        first = word.group(1) if word else text.split()[0]
        if first.casefold() in COMMAND_KEYWORDS:
            self._error(
                "MalformedArgument", f"expected ':' after {first!r}", line, col
            )
        elif first.casefold() == "if":
            self._error(
                "MalformedArgument", "only 'if human' conditions are supported", line, col
            )
        else:
            self._error("UnknownCommand", f"unknown command {first!r}", line, col)
        return None

    # -- helpers --------------------------------------------------------

    def _error(self, code: str, message: str, line: int, col: int) -> None:
        self.diags.append(
            Diagnostic(Severity.ERROR, code, message, line=line, column=col)
        )

    def _peek(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def _next(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    # -- grammar --------------------------------------------------------

    def parse(self) -> RobotProgram | list[Diagnostic]:
        entry: Command | None = None
        tok = self._peek()
        if tok and tok.kind is TokKind.COMMAND and tok.command.kind is CommandKind.USER_REQUEST:
            entry = self._next().command
        body = self._parse_block(stop=frozenset(), depth=0)
        for i, step in enumerate(body):
            if isinstance(step, ForeverStep) and i != len(body) - 1:
                self._error(
                    "ForeverNotLast",
                    "forever may only appear as the last step of the program",
                    getattr(step, "line", 1),
                    1,
                )
        if not body and not has_errors(self.diags):
            self._error(
                "MalformedArgument", "program must contain at least one step", 1, 1
            )
        if has_errors(self.diags):
            return self.diags
        return RobotProgram(body=body, entry=entry)

    def _parse_block(self, stop: frozenset[TokKind], depth: int) -> list[Step]:
        steps: list[Step] = []
        while True:
            tok = self._peek()
            if tok is None or tok.kind in stop:
                return steps
            if tok.kind in (TokKind.ELSE, TokKind.WHEN, TokKind.END):
                self._error(
                    "UnbalancedBlock",
                    f"'{tok.kind.value}' without a matching open block",
                    tok.line,
                    tok.column,
                )
                self._next()
                continue
            step = self._parse_step(self._next(), depth)
            if step is not None:
                steps.append(step)

    def _parse_step(self, tok: _Tok, depth: int) -> Step | None:
        if tok.kind is TokKind.COMMAND:
            if tok.command.kind is CommandKind.USER_REQUEST:
                self._error(
                    "MultipleEntryTriggers",
                    "userRequest is only allowed once, as the first line of the program",
                    tok.line,
                    tok.column,
                )
                return None
            return DoStep(tok.command)
        if tok.kind is TokKind.ASK_WHEN:
            return self._parse_ask_when(tok, depth)
        if tok.kind is TokKind.IF_HUMAN:
            return self._parse_if(tok, depth)
        if tok.kind is TokKind.REPEAT:
            return self._parse_repeat(tok, depth)
        if tok.kind is TokKind.FOREVER:
            return self._parse_forever(tok, depth)
        raise AssertionError(f"unexpected token {tok.kind}")

    def _expect_end(self, opener: _Tok, construct: str) -> bool:
        tok = self._peek()
        if tok is not None and tok.kind is TokKind.END:
            self._next()
            return True
        self._error(
            "UnbalancedBlock",
            f"'{construct}' block is missing its 'end'",
            opener.line,
            opener.column,
        )
        return False

    def _parse_if(self, opener: _Tok, depth: int) -> Step:
        then_body = self._parse_block(frozenset({TokKind.ELSE, TokKind.END}), depth + 1)
        else_body: list[Step] = []
        tok = self._peek()
        if tok is not None and tok.kind is TokKind.ELSE:
            self._next()
            else_body = self._parse_block(frozenset({TokKind.END}), depth + 1)
        self._expect_end(opener, "if human")
        return IfHumanStep(then_body=then_body, else_body=else_body)

    def _parse_ask_when(self, tok: _Tok, depth: int) -> Step:
        arms: list[AskArm] = []
        seen: set[str] = set()
        while (nxt := self._peek()) is not None and nxt.kind is TokKind.WHEN:
            when = self._next()
            key = when.pattern.casefold().strip()
            if key in seen:
                self._error(
                    "MalformedArgument",
                    f"duplicate ask arm pattern {when.pattern!r}",
                    when.line,
                    when.column,
                )
            seen.add(key)
            body = self._parse_block(
                frozenset({TokKind.WHEN, TokKind.ELSE, TokKind.END}), depth + 1
            )
            arms.append(AskArm(pattern=when.pattern, body=body))
        if not arms:
            self._error(
                "MalformedArgument",
                "ask-when requires at least one 'when' arm",
                tok.line,
                tok.column,
            )
        default: list[Step] = []
        if (nxt := self._peek()) is not None and nxt.kind is TokKind.ELSE:
            self._next()
            default = self._parse_block(frozenset({TokKind.END}), depth + 1)
        self._expect_end(tok, "ask-when")
        return AskBranchStep(question=tok.pattern, arms=arms, default=default)

    def _parse_repeat(self, opener: _Tok, depth: int) -> Step:
        body = self._parse_block(frozenset({TokKind.END}), depth + 1)
        self._expect_end(opener, "repeat")
        if not body:
            self._error(
                "MalformedArgument", "repeat body must not be empty", opener.line, opener.column
            )
        return RepeatStep(count=opener.count, body=body)

    def _parse_forever(self, opener: _Tok, depth: int) -> Step:
        if depth > 0:
            self._error(
                "ForeverNotLast",
                "forever may only appear as the last step of the program",
                opener.line,
                opener.column,
            )
        body = self._parse_block(frozenset({TokKind.END}), depth + 1)
        self._expect_end(opener, "forever")
        if not body:
            self._error(
                "MalformedArgument", "forever body must not be empty", opener.line, opener.column
            )
        step = ForeverStep(body=body)
        step.line = opener.line  # type: ignore[attr-defined]
        return step


def parse_program(source: str) -> RobotProgram | list[Diagnostic]:
    """Parse CocoScript text into an AST, or return error diagnostics."""
    return _Parser(source).parse()


def parse_program_strict(source: str) -> RobotProgram:
    """Parse CocoScript text, raising ProgramError on any error."""
    result = parse_program(source)
    if isinstance(result, list):
        raise ProgramError(result)
    return result


def parse_command_line(text: str) -> Command:
    """Parse a single command line (as used in flowchart node labels)."""
    stripped = text.strip()
    if stripped.casefold() == "humandetection":
        return Command(CommandKind.HUMAN_DETECTION)
    m = _KEYWORD_COLON_RE.match(stripped)
    if m:
        kind = COMMAND_KEYWORDS.get(m.group(1).casefold())
        if kind is not None:
            return Command(kind, m.group(2).strip())
    raise ValueError(f"not a CocoScript command line: {text!r}")
