"""Mermaid-subset parsing and emission for flowchart graphs.

Supported subset (documented in docs/mermaid-subset.md): a `flowchart TD`
header, node shapes `([stadium])` for Start/End, `[rectangle]` for
actions, `{diamond}` for decisions, and one edge per line written as
`a --> b`, `a -- label --> b`, or `a -->|label| b`. Labels may be
double-quoted with backslash escapes. Everything else in the full
Mermaid grammar (subgraphs, styling, chained edges) is out of subset.
"""

from __future__ import annotations

import re

from ..dsl.ast import CommandKind, Diagnostic, Severity
from ..dsl.parser import parse_command_line
from .graph import (
    LOOP_LABEL_RE,
    NO,
    YES,
    DecisionSpec,
    DecisionType,
    FlowEdge,
    FlowGraph,
    FlowNode,
    NodeKind,
    canonical_graph,
    validate_graph,
)

_ID_PART = r"[A-Za-z][A-Za-z0-9_]*"
_HEADER_RE = re.compile(r"^flowchart\s+(\S+)\s*$")
_BARE_WORD_RE = re.compile(r"^[A-Za-z0-9_]+$")
_BARE_EDGE_LABEL_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_ ]*$")
_UNSUPPORTED = (
    "subgraph",
    "style",
    "classdef",
    "class ",
    "click",
    "linkstyle",
    "direction",
)


class MermaidError(Exception):
    def __init__(self, code: str, message: str, line: int):
        self.diag = Diagnostic(Severity.ERROR, code, message, line=line, column=1)
        super().__init__(message)


def _quote(label: str) -> str:
    escaped = label.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def _format_node_label(label: str) -> str:
    return label if _BARE_WORD_RE.match(label) else _quote(label)


def _format_edge_label(label: str) -> str:
    return label if _BARE_EDGE_LABEL_RE.match(label) else _quote(label)


def _declare(node: FlowNode) -> str:
    text = _format_node_label(node.label)
    if node.kind in (NodeKind.START, NodeKind.END):
        return f"{node.id}([{text}])"
    if node.kind is NodeKind.ACTION:
        return f"{node.id}[{text}]"
    return f"{node.id}{{{text}}}"


def emit_mermaid(graph: FlowGraph) -> str:
    """Render a graph as canonical Mermaid-subset text.

    Nodes appear in deterministic topological order (ties by id); each
    node is declared on the first line it appears as a source, edges one
    per line, sinks as a bare declaration line.
    """
    g = canonical_graph(graph)
    grouped: dict[str, list[FlowEdge]] = {}
    for edge in g.edges:
        grouped.setdefault(edge.source, []).append(edge)
    lines = ["flowchart TD"]
    for node in g.nodes:
        out = grouped.get(node.id, [])
        if not out:
            lines.append(f"  {_declare(node)}")
            continue
        for j, edge in enumerate(out):
            source = _declare(node) if j == 0 else node.id
            if edge.label:
                lines.append(f"  {source} -- {_format_edge_label(edge.label)} --> {edge.target}")
            else:
                lines.append(f"  {source} --> {edge.target}")
    return "\n".join(lines) + "\n"


# -- parsing ---------------------------------------------------------------


def _find_outside_quotes(text: str, needle: str) -> int:
    """Index of the first occurrence of needle outside quotes/brackets."""
    depth = 0
    in_quote = False
    i = 0
    while i < len(text):
        ch = text[i]
        if in_quote:
            if ch == "\\":
                i += 2
                continue
            if ch == '"':
                in_quote = False
        elif ch == '"':
            in_quote = True
        elif ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif depth == 0 and text.startswith(needle, i):
            return i
        i += 1
    return -1


def _parse_label_text(raw: str, line: int) -> str:
    raw = raw.strip()
    if raw.startswith('"'):
        if not raw.endswith('"') or len(raw) < 2:
            raise MermaidError("MermaidSyntax", f"unterminated quoted label {raw!r}", line)
        body = raw[1:-1]
        out: list[str] = []
        i = 0
        while i < len(body):
            ch = body[i]
            if ch == "\\" and i + 1 < len(body):
                out.append(body[i + 1])
                i += 2
                continue
            if ch == '"':
                raise MermaidError(
                    "MermaidSyntax", f"unescaped quote in label {raw!r}", line
                )
            out.append(ch)
            i += 1
        return "".join(out)
    return raw


_NODE_DECL_RE = re.compile(
    rf"^(?P<id>{_ID_PART})\s*(?P<shape>\(\[.*\]\)|\[.*\]|\{{.*\}})?\s*$"
)


def _parse_endpoint(text: str, line: int) -> tuple[str, str | None, str | None]:
    """Parse `id`, `id[label]`, `id([label])`, or `id{label}`.

    Returns (id, shape kind, label) where shape kind is one of
    None, 'stadium', 'rect', 'diamond'.
    """
    m = _NODE_DECL_RE.match(text.strip())
    if not m:
        raise MermaidError("MermaidSyntax", f"cannot parse node reference {text!r}", line)
    node_id = m.group("id")
    shape = m.group("shape")
    if shape is None:
        return node_id, None, None
    if shape.startswith("(["):
        return node_id, "stadium", _parse_label_text(shape[2:-2], line)
    if shape.startswith("["):
        return node_id, "rect", _parse_label_text(shape[1:-1], line)
    return node_id, "diamond", _parse_label_text(shape[1:-1], line)


class _MermaidParser:
    def __init__(self) -> None:
        self.decls: dict[str, tuple[str, str, int]] = {}  # id -> (shape, label, line)
        self.order: list[str] = []
        self.referenced: dict[str, int] = {}
        self.edges: list[FlowEdge] = []
        self.diags: list[Diagnostic] = []

    def parse(self, text: str) -> FlowGraph | list[Diagnostic]:
        try:
            self._parse_lines(text)
            return self._build()
        except MermaidError as exc:
            self.diags.append(exc.diag)
            return [d for d in self.diags if d.severity is Severity.ERROR] or self.diags

    def _parse_lines(self, text: str) -> None:
        saw_header = False
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("%%"):
                if line.startswith("%%{"):
                    self.diags.append(
                        Diagnostic(
                            Severity.WARNING,
                            "UnsupportedFeature",
                            "init directives are ignored",
                            line=lineno,
                        )
                    )
                continue
            if not saw_header:
                m = _HEADER_RE.match(line)
                if not m:
                    raise MermaidError(
                        "MermaidSyntax", "expected 'flowchart TD' header", lineno
                    )
                if m.group(1) != "TD":
                    raise MermaidError(
                        "UnsupportedFeature",
                        f"only the TD direction is supported, got {m.group(1)!r}",
                        lineno,
                    )
                saw_header = True
                continue
            lowered = line.casefold()
            if any(lowered.startswith(k) for k in _UNSUPPORTED):
                raise MermaidError(
                    "UnsupportedFeature",
                    f"{line.split()[0]!r} is outside the supported subset",
                    lineno,
                )
            self._parse_body_line(line, lineno)
        if not saw_header:
            raise MermaidError("MermaidSyntax", "expected 'flowchart TD' header", 1)

    def _parse_body_line(self, line: str, lineno: int) -> None:
        arrow = _find_outside_quotes(line, "-->")
        if arrow < 0:
            node_id, shape, label = _parse_endpoint(line, lineno)
            if shape is None:
                raise MermaidError(
                    "MermaidSyntax", f"bare node reference {node_id!r} declares nothing", lineno
                )
            self._declare(node_id, shape, label, lineno)
            return
        left, right = line[:arrow].rstrip(), line[arrow + 3 :].strip()
        label: str | None = None
        dashes = _find_outside_quotes(left, " -- ")
        if dashes >= 0:
            label = _parse_label_text(left[dashes + 4 :], lineno)
            left = left[:dashes].rstrip()
        if right.startswith("|"):
            close = right.find("|", 1)
            if close < 0:
                raise MermaidError("MermaidSyntax", "unterminated |label|", lineno)
            label = _parse_label_text(right[1:close], lineno)
            right = right[close + 1 :].strip()
        if _find_outside_quotes(right, "-->") >= 0:
            raise MermaidError(
                "MermaidSyntax", "chained edges are outside the subset (one edge per line)", lineno
            )
        src_id, src_shape, src_label = _parse_endpoint(left, lineno)
        dst_id, dst_shape, dst_label = _parse_endpoint(right, lineno)
        if src_shape is not None:
            self._declare(src_id, src_shape, src_label, lineno)
        else:
            self.referenced.setdefault(src_id, lineno)
        if dst_shape is not None:
            self._declare(dst_id, dst_shape, dst_label, lineno)
        else:
            self.referenced.setdefault(dst_id, lineno)
        if label is not None and not label.strip():
            raise MermaidError("MermaidSyntax", "edge labels must be non-empty", lineno)
        self.edges.append(FlowEdge(source=src_id, target=dst_id, label=label))

    def _declare(self, node_id: str, shape: str, label: str | None, lineno: int) -> None:
        label = label if label is not None else node_id
        existing = self.decls.get(node_id)
        if existing is not None:
            if (existing[0], existing[1]) != (shape, label):
                raise MermaidError(
                    "DuplicateNodeId",
                    f"node {node_id!r} declared twice with different shapes/labels",
                    lineno,
                )
            return
        self.decls[node_id] = (shape, label, lineno)
        self.order.append(node_id)

    def _build(self) -> FlowGraph | list[Diagnostic]:
        for node_id, lineno in self.referenced.items():
            if node_id not in self.decls:
                raise MermaidError(
                    "MermaidSyntax",
                    f"node {node_id!r} is referenced but never declared with a shape",
                    lineno,
                )
        nodes: list[FlowNode] = []
        out_labels: dict[str, list[str | None]] = {}
        in_sources: dict[str, list[str]] = {}
        for edge in self.edges:
            out_labels.setdefault(edge.source, []).append(edge.label)
            in_sources.setdefault(edge.target, []).append(edge.source)
        for node_id in self.order:
            shape, label, lineno = self.decls[node_id]
            nodes.append(self._make_node(node_id, shape, label, lineno, out_labels))
        graph = FlowGraph(nodes=nodes, edges=list(self.edges))
        self._resolve_questions(graph)
        invariant_diags = validate_graph(graph)
        if invariant_diags:
            return invariant_diags
        return graph

    def _make_node(
        self,
        node_id: str,
        shape: str,
        label: str,
        lineno: int,
        out_labels: dict[str, list[str | None]],
    ) -> FlowNode:
        if shape == "stadium":
            folded = label.casefold()
            if folded == "start":
                return FlowNode(id=node_id, kind=NodeKind.START, label=label)
            if folded == "end":
                return FlowNode(id=node_id, kind=NodeKind.END, label=label)
            raise MermaidError(
                "MermaidSyntax",
                f"stadium nodes must be labeled Start or End, got {label!r}",
                lineno,
            )
        if shape == "rect":
            try:
                command = parse_command_line(label)
            except ValueError:
                raise MermaidError(
                    "MermaidSyntax",
                    f"action label {label!r} is not a valid command line",
                    lineno,
                ) from None
            return FlowNode(id=node_id, kind=NodeKind.ACTION, label=label, command=command)
        # diamond
        loop = LOOP_LABEL_RE.match(label)
        if loop:
            spec = DecisionSpec(DecisionType.LOOP_COUNT, count=int(loop.group(1)))
        elif set(out_labels.get(node_id, [])) == {YES, NO}:
            spec = DecisionSpec(DecisionType.HUMAN_PRESENT)
        else:
            spec = DecisionSpec(DecisionType.ANSWER_OF, question="")
        return FlowNode(id=node_id, kind=NodeKind.DECISION, label=label, decision=spec)

    def _resolve_questions(self, graph: FlowGraph) -> None:
        """Fill in AnswerOf questions from the preceding ask action."""
        from dataclasses import replace

        nodes = graph.node_map()
        for i, node in enumerate(graph.nodes):
            if (
                node.kind is NodeKind.DECISION
                and node.decision is not None
                and node.decision.type is DecisionType.ANSWER_OF
            ):
                preds = [e.source for e in graph.in_edges(node.id)]
                question = ""
                if len(preds) == 1:
                    pred = nodes[preds[0]]
                    if (
                        pred.kind is NodeKind.ACTION
                        and pred.command is not None
                        and pred.command.kind is CommandKind.ASK
                    ):
                        question = pred.command.payload
                graph.nodes[i] = replace(
                    node, decision=DecisionSpec(DecisionType.ANSWER_OF, question=question)
                )


def parse_mermaid(text: str) -> FlowGraph | list[Diagnostic]:
    """Parse Mermaid-subset text into a FlowGraph, or return diagnostics."""
    return _MermaidParser().parse(text)


def parse_mermaid_strict(text: str) -> FlowGraph:
    from ..dsl.ast import ProgramError

    result = parse_mermaid(text)
    if isinstance(result, list):
        raise ProgramError(result)
    return result
