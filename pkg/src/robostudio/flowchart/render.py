"""RenderGraph: the layout-free JSON topology exchanged with the UI.

Each node carries a natural-language `props.description` of its behavior;
the properties panel edits that text. A description differing from the
auto-generated one comes back as a pending-behavior annotation on the
node, to be resolved into a concrete command change by the node-property
edit chain.
"""

from __future__ import annotations

import json
from dataclasses import replace
from importlib import resources

import jsonschema

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

RENDER_GRAPH_VERSION = "renderGraph/v1"


def _schema() -> dict:
    text = resources.files("robostudio.flowchart").joinpath(
        "schemas/render_graph_v1.schema.json"
    ).read_text(encoding="utf-8")
    return json.loads(text)


_SCHEMA = _schema()


def describe_node(node: FlowNode) -> str:
    """Deterministic natural-language description of a node's behavior."""
    if node.kind is NodeKind.START:
        return "The program starts here."
    if node.kind is NodeKind.END:
        return "The program ends here."
    if node.kind is NodeKind.ACTION:
        cmd = node.command
        assert cmd is not None
        if cmd.kind is CommandKind.USER_REQUEST:
            return f'Wait for the wake word "{cmd.payload}" to start the service.'
        if cmd.kind is CommandKind.GOTO:
            return f"Move to {cmd.payload}."
        if cmd.kind is CommandKind.SAY:
            return f'Say "{cmd.payload}".'
        if cmd.kind is CommandKind.ASK:
            return f'Ask "{cmd.payload}" and wait for a reply.'
        return "Check whether a person is in front of the robot."
    spec = node.decision
    assert spec is not None
    if spec.type is DecisionType.HUMAN_PRESENT:
        return "Branch on whether a person is in front of the robot (yes/no)."
    if spec.type is DecisionType.ANSWER_OF:
        return f'Branch on the reply to "{spec.question}".'
    return f"Repeat the loop body {spec.count} times, then continue."


def graph_to_render_json(graph: FlowGraph) -> dict:
    """Serialize a graph to the renderGraph/v1 document."""
    g = canonical_graph(graph)
    nodes = []
    for node in g.nodes:
        description = (
            node.pending_behavior
            if node.pending_behavior is not None
            else describe_node(node)
        )
        nodes.append(
            {
                "id": node.id,
                "kind": node.kind.value,
                "label": node.label,
                "props": {"description": description},
            }
        )
    edges = [
        {"source": e.source, "target": e.target, "label": e.label} for e in g.edges
    ]
    return {"version": RENDER_GRAPH_VERSION, "nodes": nodes, "edges": edges}


def render_json_to_graph(doc: object) -> FlowGraph | list[Diagnostic]:
    """Reconstruct a FlowGraph from a renderGraph/v1 document.

    Validates the JSON schema, then the FlowGraph invariants. Descriptions
    differing from the auto-generated text become pending-behavior
    annotations.
    """
    diags: list[Diagnostic] = []
    validator = jsonschema.Draft202012Validator(_SCHEMA)
    for error in validator.iter_errors(doc):
        where = "/".join(str(p) for p in error.absolute_path)
        diags.append(
            Diagnostic(Severity.ERROR, "SchemaViolation", error.message, path=where)
        )
    if diags:
        return diags

    assert isinstance(doc, dict)
    seen: set[str] = set()
    nodes: list[FlowNode] = []
    out_labels: dict[str, list[str | None]] = {}
    for raw in doc["edges"]:
        out_labels.setdefault(raw["source"], []).append(raw["label"])
    for raw in doc["nodes"]:
        node_id = raw["id"]
        if node_id in seen:
            diags.append(
                Diagnostic(
                    Severity.ERROR,
                    "DuplicateNodeId",
                    f"duplicate node id {node_id!r}",
                    path=node_id,
                )
            )
            continue
        seen.add(node_id)
        node = _node_from_json(raw, out_labels, diags)
        if node is not None:
            nodes.append(node)
    if diags:
        return diags

    edges = [
        FlowEdge(source=raw["source"], target=raw["target"], label=raw["label"])
        for raw in doc["edges"]
    ]
    graph = FlowGraph(nodes=nodes, edges=edges)
    _resolve_answer_questions(graph)
    invariant_diags = validate_graph(graph)
    if invariant_diags:
        return invariant_diags
    # Pending-behavior detection needs final decision specs.
    for i, node in enumerate(graph.nodes):
        raw_desc = next(
            r["props"]["description"] for r in doc["nodes"] if r["id"] == node.id
        )
        if raw_desc != describe_node(node):
            graph.nodes[i] = replace(node, pending_behavior=raw_desc)
    return graph


def _node_from_json(
    raw: dict, out_labels: dict[str, list[str | None]], diags: list[Diagnostic]
) -> FlowNode | None:
    node_id, kind, label = raw["id"], raw["kind"], raw["label"]
    if kind == "start":
        return FlowNode(id=node_id, kind=NodeKind.START, label=label)
    if kind == "end":
        return FlowNode(id=node_id, kind=NodeKind.END, label=label)
    if kind == "action":
        try:
            command = parse_command_line(label)
        except ValueError:
            diags.append(
                Diagnostic(
                    Severity.ERROR,
                    "SchemaViolation",
                    f"action label {label!r} is not a valid command line",
                    path=node_id,
                )
            )
            return None
        return FlowNode(id=node_id, kind=NodeKind.ACTION, label=label, command=command)
    loop = LOOP_LABEL_RE.match(label)
    if loop:
        spec = DecisionSpec(DecisionType.LOOP_COUNT, count=int(loop.group(1)))
    elif set(out_labels.get(node_id, [])) == {YES, NO}:
        spec = DecisionSpec(DecisionType.HUMAN_PRESENT)
    else:
        spec = DecisionSpec(DecisionType.ANSWER_OF, question="")
    return FlowNode(id=node_id, kind=NodeKind.DECISION, label=label, decision=spec)


def _resolve_answer_questions(graph: FlowGraph) -> None:
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
                pred = nodes.get(preds[0])
                if (
                    pred is not None
                    and pred.kind is NodeKind.ACTION
                    and pred.command is not None
                    and pred.command.kind is CommandKind.ASK
                ):
                    question = pred.command.payload
            graph.nodes[i] = replace(
                node, decision=DecisionSpec(DecisionType.ANSWER_OF, question=question)
            )
