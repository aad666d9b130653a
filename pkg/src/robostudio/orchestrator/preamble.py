"""The six-segment prompt preamble and its template files.

Every prompt is assembled from the same six segments in a fixed order:
role, context, rules, workflow, output format, example. Templates live as
versioned text files with `{slot_name}` markers filled at assembly time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

SEGMENT_ORDER = ("role", "context", "rules", "workflow", "output_format", "example")
SEGMENT_HEADINGS = {
    "role": "[Role]",
    "context": "[Context]",
    "rules": "[Rules]",
    "workflow": "[Workflow]",
    "output_format": "[Output Format]",
    "example": "[Example]",
}

_SLOT_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")
_SECTION_RE = re.compile(r"^\[(role|context|rules|workflow|output_format|example)\]\s*$")

TEMPLATE_VERSION = "v1"


class MissingSlot(KeyError):
    def __init__(self, name: str):
        self.slot = name
        super().__init__(f"prompt references slot {{{name}}} but no value was provided")


@dataclass(frozen=True)
class PromptPreamble:
    role: str
    context: str
    rules: str
    workflow: str
    output_format: str
    example: str = ""

    def __post_init__(self) -> None:
        for name in SEGMENT_ORDER[:-1]:
            if not getattr(self, name).strip():
                raise ValueError(f"preamble segment {name!r} must be non-empty")

    def slots(self) -> set[str]:
        names: set[str] = set()
        for segment in SEGMENT_ORDER:
            names.update(_SLOT_RE.findall(getattr(self, segment)))
        return names

    def has_intent_branching(self) -> bool:
        return bool(re.search(r"\bif\b", self.workflow, re.IGNORECASE))


def assemble_prompt(preamble: PromptPreamble, slots: dict[str, str]) -> str:
    """Join the six segments in order, substituting slot markers.

    Substitution is single-pass over the template text only, so slot
    values containing brace patterns are never re-expanded.
    """

    def fill(match: re.Match) -> str:
        name = match.group(1)
        if name not in slots:
            raise MissingSlot(name)
        return slots[name]

    parts = []
    for name in SEGMENT_ORDER:
        text = getattr(preamble, name)
        if not text.strip():
            continue
        parts.append(f"{SEGMENT_HEADINGS[name]}\n{_SLOT_RE.sub(fill, text).strip()}")
    return "\n\n".join(parts)


def parse_preamble_text(text: str) -> PromptPreamble:
    """Parse a template file with [role]/[context]/... section markers."""
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines():
        m = _SECTION_RE.match(line.strip())
        if m:
            current = m.group(1)
            sections[current] = []
            continue
        if current is not None:
            sections[current].append(line)
    kwargs = {name: "\n".join(sections.get(name, [])).strip() for name in SEGMENT_ORDER}
    return PromptPreamble(**kwargs)


def load_preamble(name: str, version: str = TEMPLATE_VERSION) -> PromptPreamble:
    """Load a named preamble template shipped with the package."""
    text = (
        resources.files("robostudio.orchestrator")
        .joinpath(f"templates/{version}/{name}.txt")
        .read_text(encoding="utf-8")
    )
    return parse_preamble_text(text)
