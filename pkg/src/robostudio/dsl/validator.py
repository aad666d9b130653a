"""Deploy-time validation of programs against a world catalog."""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    AskBranchStep,
    CommandKind,
    Diagnostic,
    DoStep,
    ForeverStep,
    IfHumanStep,
    RepeatStep,
    RobotProgram,
    Severity,
    Step,
    walk_steps,
)


@dataclass(frozen=True)
class WorldCatalog:
    """The place names known to a deployed world.

    Place lookups are case-insensitive: generated programs often vary the
    casing of place names the user mentioned.
    """

    places: frozenset[str]

    @classmethod
    def of(cls, names) -> "WorldCatalog":
        return cls(places=frozenset(names))

    def resolve(self, name: str) -> str | None:
        """Return the catalog's spelling for ``name``, or None if unknown."""
        folded = name.casefold().strip()
        for place in self.places:
            if place.casefold() == folded:
                return place
        return None


def validate_program(program: RobotProgram, catalog: WorldCatalog) -> list[Diagnostic]:
    """Check a parsed program for deployability problems.

    Errors (UnknownPlace, UnreachableStep) block deployment; warnings
    (EmptyAskArm) do not.
    """
    diags: list[Diagnostic] = []
    for path, step in walk_steps(program.body):
        if isinstance(step, DoStep) and step.command.kind is CommandKind.GOTO:
            if catalog.resolve(step.command.payload) is None:
                diags.append(
                    Diagnostic(
                        Severity.ERROR,
                        "UnknownPlace",
                        f"unknown place {step.command.payload!r}",
                        path=path,
                    )
                )
        elif isinstance(step, AskBranchStep):
            for j, arm in enumerate(step.arms):
                if not arm.body:
                    diags.append(
                        Diagnostic(
                            Severity.WARNING,
                            "EmptyAskArm",
                            f"ask arm {arm.pattern!r} has an empty body",
                            path=f"{path}.arms[{j}]",
                        )
                    )
    diags.extend(_unreachable_steps(program.body, "body"))
    return diags


def _unreachable_steps(body: list[Step], prefix: str) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for i, step in enumerate(body):
        path = f"{prefix}[{i}]"
        if isinstance(step, ForeverStep) and i != len(body) - 1:
            for j in range(i + 1, len(body)):
                diags.append(
                    Diagnostic(
                        Severity.ERROR,
                        "UnreachableStep",
                        "step can never run: it follows a forever loop",
                        path=f"{prefix}[{j}]",
                    )
                )
        if isinstance(step, IfHumanStep):
            diags.extend(_unreachable_steps(step.then_body, f"{path}.then"))
            diags.extend(_unreachable_steps(step.else_body, f"{path}.else"))
        elif isinstance(step, AskBranchStep):
            for j, arm in enumerate(step.arms):
                diags.extend(_unreachable_steps(arm.body, f"{path}.arms[{j}]"))
            diags.extend(_unreachable_steps(step.default, f"{path}.default"))
        elif isinstance(step, (RepeatStep, ForeverStep)):
            diags.extend(_unreachable_steps(step.body, f"{path}.body"))
    return diags


def is_deployable(diagnostics: list[Diagnostic]) -> bool:
    return not any(d.severity is Severity.ERROR for d in diagnostics)
