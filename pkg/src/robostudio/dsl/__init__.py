"""CocoScript: the robot-task DSL (AST, parser, emitter, validator)."""

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
    walk_steps,
)
from .emitter import canonicalize, emit_program, emit_program_with_spans
from .parser import parse_command_line, parse_program, parse_program_strict
from .validator import WorldCatalog, is_deployable, validate_program

__all__ = [
    "AskArm",
    "AskBranchStep",
    "Command",
    "CommandKind",
    "Diagnostic",
    "DoStep",
    "ForeverStep",
    "IfHumanStep",
    "ProgramError",
    "RepeatStep",
    "RobotProgram",
    "Severity",
    "Step",
    "WorldCatalog",
    "canonicalize",
    "emit_program",
    "emit_program_with_spans",
    "has_errors",
    "is_deployable",
    "parse_command_line",
    "parse_program",
    "parse_program_strict",
    "validate_program",
    "walk_steps",
]
