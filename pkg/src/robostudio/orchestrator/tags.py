"""XML-tag parsing and intent routing for model responses.

Responses are decomposed into ordered tagged segments from a closed
vocabulary; the tags present decide what the system does next. Body
formats are validated per tag (CocoScript for `code`, the Mermaid subset
for `flowchart`, a numbered list for `requirements`), and any violation
becomes a RepairNeeded carrying a machine-generated repair instruction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from ..dsl import RobotProgram, parse_program
from ..flowchart import FlowGraph, parse_mermaid

TAG_VOCABULARY = frozenset(
    {"requirements", "code", "explanation", "flowchart", "question", "answer", "modified_nodes"}
)

_TAG_TOKEN_RE = re.compile(r"</?([A-Za-z_][A-Za-z0-9_]*)>")
_REQ_ITEM_RE = re.compile(r"^\s*\d+[.)]\s+(.+?)\s*$")
_NODE_ID_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class TagSegment:
    tag: str
    body: str
    value: object = None  # parsed artifact: RobotProgram, FlowGraph, or list[str]


@dataclass
class TaggedResponse:
    segments: list[TagSegment] = field(default_factory=list)

    @property
    def tags(self) -> set[str]:
        return {s.tag for s in self.segments}

    def first(self, tag: str) -> TagSegment | None:
        for segment in self.segments:
            if segment.tag == tag:
                return segment
        return None

    def body(self, tag: str) -> str | None:
        segment = self.first(tag)
        return segment.body if segment else None


@dataclass(frozen=True)
class RepairNeeded:
    reason: str
    instruction: str


def _repair(reason: str, instruction: str) -> RepairNeeded:
    return RepairNeeded(reason=reason, instruction=instruction)


def parse_tagged_output(raw: str) -> TaggedResponse | RepairNeeded:
    """Split a raw response into validated tagged segments.

    Prose outside any tag is kept as implicit `answer` segments so a model
    that wraps its tags in chatter still routes correctly.
    """
    tokens = list(_TAG_TOKEN_RE.finditer(raw))
    for token in tokens:
        if token.group(1) not in TAG_VOCABULARY:
            return _repair(
                f"unknown tag <{token.group(1)}>",
                f"The tag <{token.group(1)}> is not allowed. Use only: "
                + ", ".join(sorted(TAG_VOCABULARY))
                + ".",
            )
    segments: list[TagSegment] = []
    pos = 0
    i = 0
    while i < len(tokens):
        token = tokens[i]
        name = token.group(1)
        if token.group(0).startswith("</"):
            return _repair(
                f"unbalanced closing tag </{name}>",
                f"Found a closing </{name}> without an opening <{name}>. "
                "Emit balanced tags.",
            )
        prose = raw[pos : token.start()].strip()
        if prose:
            segments.append(TagSegment(tag="answer", body=prose))
        j = i + 1
        while j < len(tokens) and not (
            tokens[j].group(0) == f"</{name}>"
        ):
            j += 1
        if j >= len(tokens):
            return _repair(
                f"unclosed tag <{name}>",
                f"The tag <{name}> is never closed. Emit balanced tags.",
            )
        body = raw[token.end() : tokens[j].start()].strip()
        checked = _validate_body(name, body)
        if isinstance(checked, RepairNeeded):
            return checked
        segments.append(checked)
        pos = tokens[j].end()
        i = j + 1
    trailing = raw[pos:].strip()
    if trailing:
        segments.append(TagSegment(tag="answer", body=trailing))
    if not segments:
        return _repair(
            "empty response",
            "The response contained no tagged content. Answer using the "
            "documented tags.",
        )
    return TaggedResponse(segments=segments)


def _validate_body(tag: str, body: str) -> TagSegment | RepairNeeded:
    if tag == "code":
        result = parse_program(body)
        if isinstance(result, list):
            details = "; ".join(str(d) for d in result[:3])
            return _repair(
                "invalid code body",
                f"The <code> body is not valid CocoScript: {details}. "
                "Regenerate the full program inside <code> using only the "
                "documented commands.",
            )
        return TagSegment(tag=tag, body=body, value=result)
    if tag == "flowchart":
        result = parse_mermaid(body)
        if isinstance(result, list):
            details = "; ".join(str(d) for d in result[:3])
            return _repair(
                "invalid flowchart body",
                f"The <flowchart> body is not valid flowchart text: {details}. "
                "Regenerate it in the documented flowchart TD subset.",
            )
        return TagSegment(tag=tag, body=body, value=result)
    if tag == "requirements":
        items = [m.group(1) for line in body.splitlines() if (m := _REQ_ITEM_RE.match(line))]
        if not items:
            return _repair(
                "invalid requirements body",
                "The <requirements> body must be a numbered list with at "
                "least one item (e.g. '1. ...').",
            )
        return TagSegment(tag=tag, body=body, value=items)
    if tag == "modified_nodes":
        ids = [part for part in re.split(r"[\s,]+", body) if part]
        if not ids or not all(_NODE_ID_RE.match(i) for i in ids):
            return _repair(
                "invalid modified_nodes body",
                "The <modified_nodes> body must list node ids separated by "
                "spaces or commas.",
            )
        return TagSegment(tag=tag, body=body, value=ids)
    if not body:
        return _repair(
            f"empty <{tag}> body",
            f"The <{tag}> tag must contain text.",
        )
    return TagSegment(tag=tag, body=body)


class Intent(Enum):
    EXPLAIN = "explain"
    MODIFY = "modify"
    ASK_BACK = "ask_back"
    PROPOSE = "propose"  # requirements proposed, confirmation pending
    CONFIRM = "confirm"
    REJECT = "reject"


class AmbiguousIntentError(Exception):
    def __init__(self, tags: set[str]):
        self.tags = tags
        super().__init__(f"contradictory tags in one response: {sorted(tags)}")


_CONTRADICTIONS = [
    ("question", "code"),
    ("question", "requirements"),
    ("question", "modified_nodes"),
    ("requirements", "code"),
    ("requirements", "modified_nodes"),
]

_CONFIRM_WORDS = {"confirmed", "confirm"}
_REJECT_WORDS = {"rejected", "reject"}


def detect_intent(response: TaggedResponse, requirements_pending: bool) -> Intent:
    """Route a response to an intent purely from the tags it contains."""
    tags = response.tags
    for a, b in _CONTRADICTIONS:
        if a in tags and b in tags:
            raise AmbiguousIntentError(tags)
    if "modified_nodes" in tags and "code" not in tags:
        raise AmbiguousIntentError(tags)
    if "code" in tags:
        return Intent.MODIFY
    if "requirements" in tags:
        return Intent.PROPOSE
    if "question" in tags:
        return Intent.ASK_BACK
    if requirements_pending:
        answer = response.body("answer")
        if answer is not None:
            word = answer.strip().strip(".!").casefold()
            if word in _CONFIRM_WORDS:
                return Intent.CONFIRM
            if word in _REJECT_WORDS:
                return Intent.REJECT
    return Intent.EXPLAIN


def response_program(response: TaggedResponse) -> RobotProgram | None:
    segment = response.first("code")
    return segment.value if segment else None  # type: ignore[return-value]


def response_graph(response: TaggedResponse) -> FlowGraph | None:
    segment = response.first("flowchart")
    return segment.value if segment else None  # type: ignore[return-value]
