"""Graph conversion, Mermaid, render JSON, and diff tests."""

from __future__ import annotations

import random

from genprog import random_programs
from robostudio.dsl import (
    Command,
    CommandKind,
    DoStep,
    IfHumanStep,
    RobotProgram,
    parse_program_strict,
)
from robostudio.flowchart import (
    FlowEdge,
    FlowGraph,
    FlowNode,
    NodeKind,
    annotate_pending,
    apply_diff,
    ast_to_graph,
    diff_graphs,
    emit_mermaid,
    graph_to_ast,
    graph_to_render_json,
    parse_mermaid,
    parse_mermaid_strict,
    render_json_to_graph,
    validate_graph,
)


def say(text: str) -> DoStep:
    return DoStep(Command(CommandKind.SAY, text))


def _human_decision(node_id: str) -> FlowNode:
    from robostudio.flowchart import DecisionSpec, DecisionType

    return FlowNode(
        node_id,
        NodeKind.DECISION,
        "human?",
        decision=DecisionSpec(DecisionType.HUMAN_PRESENT),
    )


class TestAstToGraph:
    def test_single_say(self):
        g = ast_to_graph(RobotProgram(body=[say("hi")]))
        assert len(g.nodes) == 3
        assert len(g.edges) == 2
        kinds = [n.kind for n in g.nodes]
        assert kinds.count(NodeKind.START) == 1
        assert kinds.count(NodeKind.END) == 1
        action = next(n for n in g.nodes if n.kind is NodeKind.ACTION)
        assert action.label == "say: hi"
        assert action.id == "n1"

    def test_if_human_empty_else_converges_at_end(self):
        program = RobotProgram(body=[IfHumanStep(then_body=[say("greet")])])
        g = ast_to_graph(program)
        decision = next(n for n in g.nodes if n.kind is NodeKind.DECISION)
        labels = {e.label: e.target for e in g.out_edges(decision.id)}
        assert set(labels) == {"yes", "no"}
        greet = next(n for n in g.nodes if n.label == "say: greet")
        assert labels["yes"] == greet.id
        end = next(n for n in g.nodes if n.kind is NodeKind.END)
        assert labels["no"] == end.id
        assert g.out_edges(greet.id)[0].target == end.id

    def test_node_ids_follow_preorder(self):
        src = "userRequest: w\nsay: a\nif human:\n  say: b\nelse:\n  say: c\nend\n"
        g = ast_to_graph(parse_program_strict(src))
        by_label = {n.label: n.id for n in g.nodes}
        assert by_label["userRequest: w"] == "n1"
        assert by_label["say: a"] == "n2"
        assert by_label["human?"] == "n3"
        assert by_label["say: b"] == "n4"
        assert by_label["say: c"] == "n5"

    def test_forever_program_has_no_end(self):
        g = ast_to_graph(parse_program_strict("forever:\n  say: hi\nend\n"))
        assert not [n for n in g.nodes if n.kind is NodeKind.END]
        assert validate_graph(g) == []
        edge = g.out_edges("n1")[0]
        assert edge.target == "n1" and edge.label == "repeat"

    def test_repeat_gate_and_back_edge(self):
        g = ast_to_graph(parse_program_strict("repeat 2:\n  goto: Lab\nend\nsay: done\n"))
        gate = next(n for n in g.nodes if n.kind is NodeKind.DECISION)
        assert gate.label == "repeat 2?"
        labels = {e.label for e in g.out_edges(gate.id)}
        assert labels == {"repeat", "done"}

    def test_determinism(self):
        program = parse_program_strict("say: a\nif human:\n  say: b\nend\n")
        assert ast_to_graph(program) == ast_to_graph(program)
        assert emit_mermaid(ast_to_graph(program)) == emit_mermaid(ast_to_graph(program))


class TestGraphToAst:
    def test_round_trip_random(self):
        for program in random_programs(120, seed=77):
            g = ast_to_graph(program)
            assert validate_graph(g) == []
            assert graph_to_ast(g) == program

    def test_branch_into_sibling_branch_converges_legally(self):
        # A branch edge that targets the sibling branch's tail is a legal
        # re-convergence point, not an error.
        g = FlowGraph(
            nodes=[
                FlowNode("S", NodeKind.START, "Start"),
                _human_decision("n1"),
                FlowNode("n2", NodeKind.ACTION, "say: a", command=Command(CommandKind.SAY, "a")),
                FlowNode("n3", NodeKind.ACTION, "say: b", command=Command(CommandKind.SAY, "b")),
                FlowNode("E1", NodeKind.END, "End"),
            ],
            edges=[
                FlowEdge("S", "n1"),
                FlowEdge("n1", "n2", "yes"),
                FlowEdge("n1", "n3", "no"),
                FlowEdge("n2", "E1"),
                FlowEdge("n3", "n2"),
            ],
        )
        program = graph_to_ast(g)
        expected = parse_program_strict("if human:\nelse:\n  say: b\nend\nsay: a\n")
        assert program == expected

    def test_non_converging_branches_without_termination(self):
        # Branches end at different Action nodes that never re-converge and
        # never terminate (each spins on itself without loop semantics).
        g = FlowGraph(
            nodes=[
                FlowNode("S", NodeKind.START, "Start"),
                _human_decision("n1"),
                FlowNode("n2", NodeKind.ACTION, "say: a", command=Command(CommandKind.SAY, "a")),
                FlowNode("n3", NodeKind.ACTION, "say: b", command=Command(CommandKind.SAY, "b")),
            ],
            edges=[
                FlowEdge("S", "n1"),
                FlowEdge("n1", "n2", "yes"),
                FlowEdge("n1", "n3", "no"),
                FlowEdge("n2", "n2"),
                FlowEdge("n3", "n3"),
            ],
        )
        result = graph_to_ast(g)
        assert isinstance(result, list)
        assert any(d.code == "NonStructuredGraph" for d in result)

    def test_overlapping_branch_regions_rejected(self):
        # The no-branch dives into the middle of the yes-branch's sub-region.
        g = FlowGraph(
            nodes=[
                FlowNode("S", NodeKind.START, "Start"),
                _human_decision("D"),
                _human_decision("D2"),
                FlowNode("M", NodeKind.ACTION, "say: m", command=Command(CommandKind.SAY, "m")),
                FlowNode("Z", NodeKind.ACTION, "say: z", command=Command(CommandKind.SAY, "z")),
                FlowNode("E1", NodeKind.END, "End"),
            ],
            edges=[
                FlowEdge("S", "D"),
                FlowEdge("D", "D2", "yes"),
                FlowEdge("D", "M", "no"),
                FlowEdge("D2", "M", "yes"),
                FlowEdge("D2", "Z", "no"),
                FlowEdge("M", "Z"),
                FlowEdge("Z", "E1"),
            ],
        )
        result = graph_to_ast(g)
        assert isinstance(result, list)
        assert any(d.code == "NonStructuredGraph" for d in result)

    def test_single_edit_insert_action_mid_edge(self):
        program = parse_program_strict("say: a\ngoto: Lab\n")
        g = ast_to_graph(program)
        a = next(n for n in g.nodes if n.label == "say: a")
        edge = g.out_edges(a.id)[0]
        new_node = FlowNode(
            "u1", NodeKind.ACTION, "say: inserted", command=Command(CommandKind.SAY, "inserted")
        )
        edited = FlowGraph(
            nodes=g.nodes + [new_node],
            edges=[e for e in g.edges if e.key != edge.key]
            + [FlowEdge(a.id, "u1"), FlowEdge("u1", edge.target)],
        )
        result = graph_to_ast(edited)
        expected = parse_program_strict("say: a\nsay: inserted\ngoto: Lab\n")
        assert result == expected

    def test_dangling_node_rejected(self):
        g = ast_to_graph(parse_program_strict("say: a"))
        orphan = FlowNode(
            "u9", NodeKind.ACTION, "say: orphan", command=Command(CommandKind.SAY, "orphan")
        )
        bad = FlowGraph(nodes=g.nodes + [orphan], edges=list(g.edges))
        result = graph_to_ast(bad)
        assert isinstance(result, list)
        assert any(d.code in ("DanglingNode", "SchemaViolation") for d in result)

    def test_missing_decision_branch(self):
        src = "if human:\n  say: x\nelse:\n  say: y\nend"
        g = ast_to_graph(parse_program_strict(src))
        decision = next(n for n in g.nodes if n.kind is NodeKind.DECISION)
        yes_edge = next(e for e in g.out_edges(decision.id) if e.label == "yes")
        relabeled = FlowGraph(
            nodes=list(g.nodes),
            edges=[
                FlowEdge(e.source, e.target, "maybe") if e.key == yes_edge.key else e
                for e in g.edges
            ],
        )
        result = graph_to_ast(relabeled)
        assert isinstance(result, list)
        assert any(d.code == "MissingDecisionBranch" for d in result)


class TestMermaid:
    def test_emit_single_action_three_lines(self):
        g = ast_to_graph(RobotProgram(body=[say("hi")]))
        text = emit_mermaid(g)
        lines = text.strip().splitlines()
        assert lines[0] == "flowchart TD"
        assert len(lines) == 1 + 3
        assert lines[1] == "  S([Start]) --> n1"
        assert lines[2] == '  n1["say: hi"] --> E1'
        assert lines[3] == "  E1([End])"

    def test_parse_minimal(self):
        text = 'flowchart TD\nS([Start]) --> A["say: hi"]\nA --> E([End])\n'
        g = parse_mermaid_strict(text)
        assert len(g.nodes) == 3
        assert [n.kind for n in g.nodes] == [NodeKind.START, NodeKind.ACTION, NodeKind.END]

    def test_parse_decision_with_labeled_edge(self):
        text = (
            "flowchart TD\n"
            "S([Start]) --> D{person?}\n"
            'D -- yes --> A["say: hi"]\n'
            "D -- no --> E([End])\n"
            "A --> E\n"
        )
        g = parse_mermaid_strict(text)
        decision = next(n for n in g.nodes if n.kind is NodeKind.DECISION)
        assert decision.label == "person?"
        assert {e.label for e in g.out_edges(decision.id)} == {"yes", "no"}

    def test_pipe_label_syntax_accepted(self):
        text = (
            "flowchart TD\n"
            "S([Start]) --> D{person?}\n"
            'D -->|yes| A["say: hi"]\n'
            "D -->|no| E([End])\n"
            "A --> E\n"
        )
        g = parse_mermaid_strict(text)
        assert {e.label for e in g.out_edges("D")} == {"yes", "no"}

    def test_quote_escaping_round_trip(self):
        program = RobotProgram(body=[say('he said "hello"')])
        g = ast_to_graph(program)
        text = emit_mermaid(g)
        assert '\\"hello\\"' in text
        g2 = parse_mermaid_strict(text)
        assert g2 == g
        assert graph_to_ast(g2) == program

    def test_round_trip_random(self):
        for program in random_programs(100, seed=4242):
            g = ast_to_graph(program)
            assert parse_mermaid_strict(emit_mermaid(g)) == g

    def test_unsupported_direction(self):
        result = parse_mermaid("flowchart LR\nS([Start]) --> E([End])\n")
        assert isinstance(result, list)
        assert result[0].code == "UnsupportedFeature"

    def test_unsupported_subgraph(self):
        text = "flowchart TD\nsubgraph one\nS([Start]) --> E([End])\nend\n"
        result = parse_mermaid(text)
        assert isinstance(result, list)
        assert any(d.code == "UnsupportedFeature" for d in result)

    def test_syntax_error_carries_line_number(self):
        result = parse_mermaid("flowchart TD\nS([Start]) --> ???\n")
        assert isinstance(result, list)
        assert result[0].code == "MermaidSyntax"
        assert result[0].line == 2

    def test_duplicate_declaration_conflict(self):
        text = 'flowchart TD\nS([Start]) --> A["say: hi"]\nA["say: other"] --> E([End])\n'
        result = parse_mermaid(text)
        assert isinstance(result, list)
        assert any(d.code == "DuplicateNodeId" for d in result)

    def test_invalid_action_label(self):
        text = 'flowchart TD\nS([Start]) --> A["dance: hi"]\nA --> E([End])\n'
        result = parse_mermaid(text)
        assert isinstance(result, list)
        assert any(d.code == "MermaidSyntax" for d in result)


class TestRenderJson:
    def test_identity_round_trip_random(self):
        for program in random_programs(80, seed=808):
            g = ast_to_graph(program)
            doc = graph_to_render_json(g)
            assert render_json_to_graph(doc) == g

    def test_edge_to_missing_node(self):
        g = ast_to_graph(RobotProgram(body=[say("hi")]))
        doc = graph_to_render_json(g)
        doc["edges"].append({"source": "n1", "target": "ghost", "label": None})
        result = render_json_to_graph(doc)
        assert isinstance(result, list)
        assert any(d.code == "SchemaViolation" for d in result)

    def test_schema_violation_on_shape(self):
        assert isinstance(render_json_to_graph({"version": "renderGraph/v1"}), list)
        assert isinstance(render_json_to_graph(["not", "a", "graph"]), list)
        bad_version = {"version": "renderGraph/v2", "nodes": [], "edges": []}
        assert isinstance(render_json_to_graph(bad_version), list)

    def test_props_edit_becomes_pending_annotation(self):
        g = ast_to_graph(RobotProgram(body=[say("hi")]))
        doc = graph_to_render_json(g)
        node = next(n for n in doc["nodes"] if n["id"] == "n1")
        node["props"]["description"] = "say it twice as enthusiastically"
        g2 = render_json_to_graph(doc)
        assert not isinstance(g2, list)
        edited = g2.node_map()["n1"]
        assert edited.pending_behavior == "say it twice as enthusiastically"
        assert g2.without_pending() == g
        assert g2 != g

    def test_pending_annotation_round_trips(self):
        g = ast_to_graph(RobotProgram(body=[say("hi")]))
        annotated = annotate_pending(g, {"n1": "shout it"})
        doc = graph_to_render_json(annotated)
        assert render_json_to_graph(doc) == annotated


class TestDiff:
    def test_self_diff_empty(self):
        g = ast_to_graph(parse_program_strict("say: a\ngoto: Lab\n"))
        assert diff_graphs(g, g).is_empty()

    def test_constructed_add_remove(self):
        g = ast_to_graph(parse_program_strict("say: a\ngoto: Lab\n"))
        a = next(n for n in g.nodes if n.label == "say: a")
        edge = g.out_edges(a.id)[0]
        new_node = FlowNode(
            "u1", NodeKind.ACTION, "say: new", command=Command(CommandKind.SAY, "new")
        )
        edited = FlowGraph(
            nodes=g.nodes + [new_node],
            edges=[e for e in g.edges if e.key != edge.key]
            + [FlowEdge(a.id, "u1"), FlowEdge("u1", edge.target)],
        )
        d = diff_graphs(g, edited)
        assert [n.id for n in d.added_nodes] == ["u1"]
        assert d.removed_nodes == []
        assert len(d.added_edges) == 2
        assert d.removed_edges == [edge.key]
        assert apply_diff(g, d) == edited

    def test_apply_random_edit_scripts(self):
        rng = random.Random(99)
        programs = list(random_programs(40, seed=11))
        for program in programs:
            before = ast_to_graph(program)
            after = _random_edit(before, rng)
            d = diff_graphs(before, after)
            assert apply_diff(before, d) == after

    def test_payload(self):
        g1 = ast_to_graph(parse_program_strict("say: a"))
        g2 = ast_to_graph(parse_program_strict("say: b"))
        payload = diff_graphs(g1, g2).to_payload()
        assert payload["relabeled_nodes"] == ["n1"]


def _random_edit(graph: FlowGraph, rng: random.Random) -> FlowGraph:
    """Apply a few arbitrary edits; the result need not be a valid graph."""
    nodes = list(graph.nodes)
    edges = list(graph.edges)
    for _ in range(rng.randint(1, 4)):
        op = rng.choice(["add_node", "remove_edge", "relabel", "add_edge"])
        if op == "add_node":
            new_id = f"u{rng.randint(1, 999)}"
            if new_id not in {n.id for n in nodes}:
                nodes.append(
                    FlowNode(
                        new_id,
                        NodeKind.ACTION,
                        "say: edit",
                        command=Command(CommandKind.SAY, "edit"),
                    )
                )
        elif op == "remove_edge" and edges:
            edges.pop(rng.randrange(len(edges)))
        elif op == "relabel" and nodes:
            i = rng.randrange(len(nodes))
            node = nodes[i]
            if node.kind is NodeKind.ACTION:
                nodes[i] = FlowNode(
                    node.id,
                    NodeKind.ACTION,
                    "say: relabeled",
                    command=Command(CommandKind.SAY, "relabeled"),
                )
        elif op == "add_edge" and len(nodes) >= 2:
            a, b = rng.sample(nodes, 2)
            candidate = FlowEdge(a.id, b.id, None)
            if candidate.key not in {e.key for e in edges}:
                edges.append(candidate)
    return FlowGraph(nodes=nodes, edges=edges)
