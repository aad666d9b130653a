"""Flowchart graph types and invariant validation.

A FlowGraph is the node/edge form of a program: one Action node per
command, Decision nodes for human-detection branches, ask answers, and
counted-loop gates, plus Start/End markers. Edge order among a node's
outgoing edges is semantic (it encodes ask-arm priority), so equality
compares per-source edge sequences rather than the flat list.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum

from ..dsl.ast import Command, Diagnostic, Severity

ID_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")
LOOP_LABEL_RE = re.compile(r"^repeat (\d+)\?$")

START_LABEL = "Start"
END_LABEL = "End"
HUMAN_LABEL = "human?"
ANSWER_LABEL = "answer?"

YES = "yes"
NO = "no"
DEFAULT = "default"
REPEAT = "repeat"
DONE = "done"


class NodeKind(Enum):
    START = "start"
    END = "end"
    ACTION = "action"
    DECISION = "decision"


class DecisionType(Enum):
    HUMAN_PRESENT = "humanPresent"
    ANSWER_OF = "answerOf"
    LOOP_COUNT = "loopCount"


@dataclass(frozen=True)
class DecisionSpec:
    type: DecisionType
    question: str = ""  # ANSWER_OF only
    count: int = 0  # LOOP_COUNT only

    def label(self) -> str:
        if self.type is DecisionType.HUMAN_PRESENT:
            return HUMAN_LABEL
        if self.type is DecisionType.ANSWER_OF:
            return ANSWER_LABEL
        return f"repeat {self.count}?"


@dataclass(frozen=True)
class FlowNode:
    id: str
    kind: NodeKind
    label: str
    command: Command | None = None  # ACTION only
    decision: DecisionSpec | None = None  # DECISION only
    pending_behavior: str | None = None  # user-edited NL description, not yet applied


@dataclass(frozen=True)
class FlowEdge:
    source: str
    target: str
    label: str | None = None

    @property
    def key(self) -> tuple[str, str, str | None]:
        return (self.source, self.target, self.label)


@dataclass
class FlowGraph:
    nodes: list[FlowNode] = field(default_factory=list)
    edges: list[FlowEdge] = field(default_factory=list)

    def node_map(self) -> dict[str, FlowNode]:
        return {n.id: n for n in self.nodes}

    def out_edges(self, node_id: str) -> list[FlowEdge]:
        return [e for e in self.edges if e.source == node_id]

    def in_edges(self, node_id: str) -> list[FlowEdge]:
        return [e for e in self.edges if e.target == node_id]

    def start_node(self) -> FlowNode:
        starts = [n for n in self.nodes if n.kind is NodeKind.START]
        if len(starts) != 1:
            raise ValueError(f"graph has {len(starts)} start nodes")
        return starts[0]

    def without_pending(self) -> "FlowGraph":
        return FlowGraph(
            nodes=[replace(n, pending_behavior=None) for n in self.nodes],
            edges=list(self.edges),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FlowGraph):
            return NotImplemented
        if {n.id: n for n in self.nodes} != {n.id: n for n in other.nodes}:
            return False
        if len(self.edges) != len(other.edges):
            return False
        return _edges_by_source(self.edges) == _edges_by_source(other.edges)


def _edges_by_source(edges: list[FlowEdge]) -> dict[str, list[FlowEdge]]:
    grouped: dict[str, list[FlowEdge]] = {}
    for e in edges:
        grouped.setdefault(e.source, []).append(e)
    return grouped


def natural_key(node_id: str) -> tuple:
    """Sort key for node ids: S first, then n1..n10.., then E1.., then others."""
    parts: list = []
    for chunk in re.findall(r"\d+|\D+", node_id):
        parts.append((1, int(chunk)) if chunk.isdigit() else (0, chunk))
    rank = {"S": 0, "n": 1, "E": 2}.get(node_id[0], 3) if node_id else 3
    return (rank, parts)


def classify_back_edges(graph: FlowGraph) -> set[tuple[str, str, str | None]]:
    """Identify loop back-edges: edges targeting an ancestor on the DFS path.

    The walk follows out-edges in stored order from Start, matching the
    structured traversal used for conversion, so the classification is
    deterministic.
    """
    back: set[tuple[str, str, str | None]] = set()
    visited: set[str] = set()
    on_stack: set[str] = set()

    def dfs(node_id: str) -> None:
        visited.add(node_id)
        on_stack.add(node_id)
        for edge in graph.out_edges(node_id):
            if edge.target in on_stack:
                back.add(edge.key)
            elif edge.target not in visited:
                dfs(edge.target)
        on_stack.discard(node_id)

    starts = [n for n in graph.nodes if n.kind is NodeKind.START]
    if starts:
        dfs(starts[0].id)
    return back


def topo_order(graph: FlowGraph) -> list[str]:
    """Deterministic topological order over forward edges (ties by id)."""
    back = classify_back_edges(graph)
    forward = [e for e in graph.edges if e.key not in back]
    indeg = {n.id: 0 for n in graph.nodes}
    for e in forward:
        if e.target in indeg:
            indeg[e.target] += 1
    ready = sorted([i for i, d in indeg.items() if d == 0], key=natural_key)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        changed = False
        for e in forward:
            if e.source == node:
                indeg[e.target] -= 1
                if indeg[e.target] == 0:
                    ready.append(e.target)
                    changed = True
        if changed:
            ready.sort(key=natural_key)
    # Nodes in cycles not broken by back-edge detection (unreachable parts).
    for n in graph.nodes:
        if n.id not in order:
            order.append(n.id)
    return order


def canonical_graph(graph: FlowGraph) -> FlowGraph:
    """Reorder nodes/edges deterministically: topo order, grouped by source."""
    order = topo_order(graph)
    position = {node_id: i for i, node_id in enumerate(order)}
    nodes = sorted(graph.nodes, key=lambda n: position.get(n.id, len(position)))
    grouped = _edges_by_source(graph.edges)
    edges: list[FlowEdge] = []
    for node in nodes:
        edges.extend(grouped.get(node.id, []))
    return FlowGraph(nodes=nodes, edges=edges)


def validate_graph(graph: FlowGraph) -> list[Diagnostic]:
    """Check FlowGraph structural invariants; empty result means valid."""
    diags: list[Diagnostic] = []

    def err(code: str, message: str, path: str = "") -> None:
        diags.append(Diagnostic(Severity.ERROR, code, message, path=path))

    seen_ids: set[str] = set()
    for node in graph.nodes:
        if node.id in seen_ids:
            err("DuplicateNodeId", f"duplicate node id {node.id!r}", node.id)
        seen_ids.add(node.id)
        if not ID_RE.match(node.id):
            err("SchemaViolation", f"invalid node id {node.id!r}", node.id)

    starts = [n for n in graph.nodes if n.kind is NodeKind.START]
    ends = [n for n in graph.nodes if n.kind is NodeKind.END]
    if len(starts) != 1:
        err("SchemaViolation", f"graph must have exactly one Start node, found {len(starts)}")

    ids = {n.id for n in graph.nodes}
    for edge in graph.edges:
        if edge.source not in ids or edge.target not in ids:
            err(
                "SchemaViolation",
                f"edge {edge.source!r}->{edge.target!r} references a missing node",
            )
    if diags:
        return diags

    keys = [e.key for e in graph.edges]
    for key in {k for k in keys if keys.count(k) > 1}:
        err("SchemaViolation", f"duplicate edge {key!r}")

    back = classify_back_edges(graph)
    for node in graph.nodes:
        out = graph.out_edges(node.id)
        if node.kind is NodeKind.END:
            if out:
                err("SchemaViolation", f"End node {node.id!r} has outgoing edges", node.id)
        elif node.kind is NodeKind.DECISION:
            labels = [e.label for e in out]
            if len(out) < 2:
                err(
                    "MissingDecisionBranch",
                    f"decision {node.id!r} needs at least 2 outgoing edges",
                    node.id,
                )
            if None in labels or "" in labels:
                err(
                    "SchemaViolation",
                    f"decision {node.id!r} has an unlabeled outgoing edge",
                    node.id,
                )
            if len(set(labels)) != len(labels):
                err(
                    "SchemaViolation",
                    f"decision {node.id!r} has duplicate branch labels",
                    node.id,
                )
        else:  # START or ACTION
            if len(out) != 1:
                err(
                    "SchemaViolation",
                    f"{node.kind.value} node {node.id!r} must have exactly 1 outgoing "
                    f"edge, found {len(out)}",
                    node.id,
                )

    if starts:
        reachable: set[str] = set()
        stack = [starts[0].id]
        while stack:
            cur = stack.pop()
            if cur in reachable:
                continue
            reachable.add(cur)
            stack.extend(e.target for e in graph.out_edges(cur))
        for node in graph.nodes:
            if node.id not in reachable:
                err("DanglingNode", f"node {node.id!r} is not reachable from Start", node.id)

        # Every reachable node must reach an End, unless it sits on a forever
        # cycle (a cycle formed by back-edges).
        if not diags:
            reaches_end: set[str] = set()
            frontier = [n.id for n in ends]
            while frontier:
                cur = frontier.pop()
                if cur in reaches_end:
                    continue
                reaches_end.add(cur)
                frontier.extend(e.source for e in graph.in_edges(cur))
            in_cycle = _cycle_nodes(graph, back)
            for node_id in reachable:
                if node_id not in reaches_end and node_id not in in_cycle:
                    err(
                        "DanglingNode",
                        f"node {node_id!r} neither reaches an End nor loops forever",
                        node_id,
                    )
    return diags


def _cycle_nodes(graph: FlowGraph, back: set[tuple[str, str, str | None]]) -> set[str]:
    """Nodes that can reach a back-edge source (i.e. may loop forever)."""
    sources = {src for (src, _t, _l) in back}
    result: set[str] = set()
    frontier = list(sources)
    while frontier:
        cur = frontier.pop()
        if cur in result:
            continue
        result.add(cur)
        frontier.extend(e.source for e in graph.in_edges(cur))
    return result
