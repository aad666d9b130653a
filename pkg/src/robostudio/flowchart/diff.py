"""Structural diffing between flowchart graphs, for change highlighting.

Diffs match nodes by id. Edge changes are computed per source node with a
sequence diff so that arm-priority reordering is representable; applying
a diff to the old graph reproduces the new one exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from difflib import SequenceMatcher

from .graph import FlowEdge, FlowGraph, FlowNode


@dataclass
class GraphDiff:
    added_nodes: list[FlowNode] = field(default_factory=list)
    removed_nodes: list[str] = field(default_factory=list)
    relabeled_nodes: list[FlowNode] = field(default_factory=list)  # new versions
    added_edges: list[tuple[FlowEdge, int]] = field(default_factory=list)  # (edge, index)
    removed_edges: list[tuple[str, str, str | None]] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (
            self.added_nodes
            or self.removed_nodes
            or self.relabeled_nodes
            or self.added_edges
            or self.removed_edges
        )

    def to_payload(self) -> dict:
        """JSON shape consumed by the UI for highlighting."""
        return {
            "added_nodes": [n.id for n in self.added_nodes],
            "removed_nodes": list(self.removed_nodes),
            "relabeled_nodes": [n.id for n in self.relabeled_nodes],
            "added_edges": [
                {"source": e.source, "target": e.target, "label": e.label}
                for e, _i in self.added_edges
            ],
            "removed_edges": [
                {"source": s, "target": t, "label": l} for (s, t, l) in self.removed_edges
            ],
        }


def _node_payload(node: FlowNode) -> tuple:
    return (node.kind, node.label, node.command, node.decision, node.pending_behavior)


def _grouped(edges: list[FlowEdge]) -> dict[str, list[FlowEdge]]:
    grouped: dict[str, list[FlowEdge]] = {}
    for e in edges:
        grouped.setdefault(e.source, []).append(e)
    return grouped


def diff_graphs(before: FlowGraph, after: FlowGraph) -> GraphDiff:
    """Minimal node-id-matched diff such that apply(before, diff) == after."""
    diff = GraphDiff()
    before_nodes = {n.id: n for n in before.nodes}
    after_nodes = {n.id: n for n in after.nodes}
    for node_id, node in after_nodes.items():
        if node_id not in before_nodes:
            diff.added_nodes.append(node)
        elif _node_payload(before_nodes[node_id]) != _node_payload(node):
            diff.relabeled_nodes.append(node)
    diff.removed_nodes = [i for i in before_nodes if i not in after_nodes]

    before_groups = _grouped(before.edges)
    after_groups = _grouped(after.edges)
    for source in sorted(set(before_groups) | set(after_groups)):
        old = [e.key for e in before_groups.get(source, [])]
        new = [e.key for e in after_groups.get(source, [])]
        matcher = SequenceMatcher(a=old, b=new, autojunk=False)
        for op, i1, i2, j1, j2 in matcher.get_opcodes():
            if op in ("delete", "replace"):
                diff.removed_edges.extend(old[i1:i2])
            if op in ("insert", "replace"):
                for j in range(j1, j2):
                    diff.added_edges.append((after_groups[source][j], j))
    return diff


def apply_diff(graph: FlowGraph, diff: GraphDiff) -> FlowGraph:
    """Apply a diff produced by diff_graphs(before, after) to before."""
    removed_edge_keys = set(diff.removed_edges)
    groups = _grouped([e for e in graph.edges if e.key not in removed_edge_keys])

    nodes = [n for n in graph.nodes if n.id not in set(diff.removed_nodes)]
    replacements = {n.id: n for n in diff.relabeled_nodes}
    nodes = [replacements.get(n.id, n) for n in nodes]
    nodes.extend(diff.added_nodes)

    for edge, index in sorted(diff.added_edges, key=lambda pair: pair[1]):
        group = groups.setdefault(edge.source, [])
        group.insert(min(index, len(group)), edge)

    order = [n.id for n in nodes]
    edges: list[FlowEdge] = []
    for node_id in order:
        edges.extend(groups.pop(node_id, []))
    for leftover in groups.values():  # edges from removed nodes kept only if re-added
        edges.extend(leftover)
    return FlowGraph(nodes=nodes, edges=edges)


def annotate_pending(graph: FlowGraph, pending: dict[str, str]) -> FlowGraph:
    """Return a copy of the graph with pending-behavior annotations applied."""
    nodes = [
        replace(n, pending_behavior=pending[n.id]) if n.id in pending else n
        for n in graph.nodes
    ]
    return FlowGraph(nodes=nodes, edges=list(graph.edges))
