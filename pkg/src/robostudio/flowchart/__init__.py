"""Flowchart IR: graph types, AST/Mermaid/JSON conversions, and diffing."""

from .convert import (
    ast_to_graph,
    graph_to_ast,
    graph_to_ast_with_paths,
    node_paths,
)
from .diff import GraphDiff, annotate_pending, apply_diff, diff_graphs
from .graph import (
    DecisionSpec,
    DecisionType,
    FlowEdge,
    FlowGraph,
    FlowNode,
    NodeKind,
    canonical_graph,
    validate_graph,
)
from .mermaid import emit_mermaid, parse_mermaid, parse_mermaid_strict
from .render import (
    RENDER_GRAPH_VERSION,
    describe_node,
    graph_to_render_json,
    render_json_to_graph,
)

__all__ = [
    "DecisionSpec",
    "DecisionType",
    "FlowEdge",
    "FlowGraph",
    "FlowNode",
    "GraphDiff",
    "NodeKind",
    "RENDER_GRAPH_VERSION",
    "annotate_pending",
    "apply_diff",
    "ast_to_graph",
    "canonical_graph",
    "describe_node",
    "diff_graphs",
    "emit_mermaid",
    "graph_to_ast",
    "graph_to_ast_with_paths",
    "graph_to_render_json",
    "node_paths",
    "parse_mermaid",
    "parse_mermaid_strict",
    "render_json_to_graph",
    "validate_graph",
]
