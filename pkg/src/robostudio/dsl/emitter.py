"""Canonical CocoScript emission.

Canonical form: Table-style keyword casing (`userRequest`, `goto`, `say`,
`ask`, `humanDetection`, lowercase structural keywords), a single space
after each colon, two-space indentation per block level, LF line endings,
and a single trailing newline. Empty else/default clauses are omitted.
"""

from __future__ import annotations

from .ast import (
    AskBranchStep,
    DoStep,
    ForeverStep,
    IfHumanStep,
    ProgramError,
    RepeatStep,
    RobotProgram,
    Step,
)

INDENT = "  "


def emit_program(program: RobotProgram) -> str:
    """Render a program in canonical CocoScript form."""
    text, _ = emit_program_with_spans(program)
    return text


def emit_program_with_spans(program: RobotProgram) -> tuple[str, dict[str, tuple[int, int]]]:
    """Render a program and report each step's 1-based (first, last) line span.

    Span keys are AST paths as produced by ``walk_steps`` plus ``"entry"``.
    """
    if not program.body:
        raise ProgramError([])
    lines: list[str] = []
    spans: dict[str, tuple[int, int]] = {}
    if program.entry is not None:
        lines.append(program.entry.line())
        spans["entry"] = (1, 1)
    _emit_block(program.body, 0, "body", lines, spans)
    return "\n".join(lines) + "\n", spans


def _emit_block(
    body: list[Step],
    level: int,
    prefix: str,
    lines: list[str],
    spans: dict[str, tuple[int, int]],
) -> None:
    pad = INDENT * level
    for i, step in enumerate(body):
        path = f"{prefix}[{i}]"
        start = len(lines) + 1
        if isinstance(step, DoStep):
            lines.append(pad + step.command.line())
        elif isinstance(step, IfHumanStep):
            lines.append(pad + "if human:")
            _emit_block(step.then_body, level + 1, f"{path}.then", lines, spans)
            if step.else_body:
                lines.append(pad + "else:")
                _emit_block(step.else_body, level + 1, f"{path}.else", lines, spans)
            lines.append(pad + "end")
        elif isinstance(step, AskBranchStep):
            lines.append(pad + f"ask-when: {step.question}")
            for j, arm in enumerate(step.arms):
                lines.append(pad + f"when {arm.pattern}:")
                _emit_block(arm.body, level + 1, f"{path}.arms[{j}]", lines, spans)
            if step.default:
                lines.append(pad + "else:")
                _emit_block(step.default, level + 1, f"{path}.default", lines, spans)
            lines.append(pad + "end")
        elif isinstance(step, RepeatStep):
            lines.append(pad + f"repeat {step.count}:")
            _emit_block(step.body, level + 1, f"{path}.body", lines, spans)
            lines.append(pad + "end")
        elif isinstance(step, ForeverStep):
            lines.append(pad + "forever:")
            _emit_block(step.body, level + 1, f"{path}.body", lines, spans)
            lines.append(pad + "end")
        else:
            raise AssertionError(f"unknown step type {type(step)!r}")
        spans[path] = (start, len(lines))


def canonicalize(source: str) -> str:
    """Normalize CocoScript text to canonical form. Idempotent."""
    from .parser import parse_program_strict

    return emit_program(parse_program_strict(source))
