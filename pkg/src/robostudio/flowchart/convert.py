"""Bidirectional conversion between program ASTs and flowchart graphs.

ast_to_graph assigns node ids deterministically: `S` for Start, `n<k>`
with k the AST preorder index for commands and decisions, `E1` for the
End. graph_to_ast is its inverse on that image and additionally accepts
user-edited graphs that are *structured*: decision branches re-converge
at a single node or all terminate, and back-edges only target an
ancestor on the current walk (loop heads).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..dsl.ast import (
    AskArm,
    AskBranchStep,
    Command,
    CommandKind,
    Diagnostic,
    DoStep,
    ForeverStep,
    IfHumanStep,
    RepeatStep,
    RobotProgram,
    Severity,
    Step,
)
from .graph import (
    DEFAULT,
    DONE,
    END_LABEL,
    NO,
    REPEAT,
    START_LABEL,
    YES,
    DecisionSpec,
    DecisionType,
    FlowEdge,
    FlowGraph,
    FlowNode,
    NodeKind,
    classify_back_edges,
    topo_order,
    validate_graph,
)

class _Builder:
    """Builds the graph with edges created eagerly in semantic order.

    An edge is appended the moment its source decides to branch (so a
    decision's out-edges sit in arm-priority order) and its target is
    patched in once the destination node exists.
    """

    def __init__(self) -> None:
        self.nodes: list[FlowNode] = []
        self.edges: list[FlowEdge] = []
        self.paths: dict[str, str] = {}
        self._counter = 0

    def _next_id(self) -> str:
        self._counter += 1
        return f"n{self._counter}"

    def action(self, command: Command, path: str) -> str:
        node_id = self._next_id()
        self.nodes.append(
            FlowNode(id=node_id, kind=NodeKind.ACTION, label=command.line(), command=command)
        )
        self.paths[node_id] = path
        return node_id

    def decision(self, spec: DecisionSpec, path: str) -> str:
        node_id = self._next_id()
        self.nodes.append(
            FlowNode(id=node_id, kind=NodeKind.DECISION, label=spec.label(), decision=spec)
        )
        self.paths[node_id] = path
        return node_id

    def edge_slot(self, source: str, label: str | None) -> int:
        self.edges.append(FlowEdge(source=source, target="", label=label))
        return len(self.edges) - 1

    def connect(self, stubs: list[int], target: str, force_label: str | None = None) -> None:
        from dataclasses import replace as _replace

        for i in stubs:
            edge = self.edges[i]
            label = edge.label if force_label is None else (edge.label or force_label)
            self.edges[i] = _replace(edge, target=target, label=label)

    def build(self, program: RobotProgram) -> FlowGraph:
        start = FlowNode(id="S", kind=NodeKind.START, label=START_LABEL)
        self.nodes.append(start)
        self.paths["S"] = ""
        stubs = [self.edge_slot("S", None)]
        if program.entry is not None:
            entry_id = self.action(program.entry, "entry")
            self.connect(stubs, entry_id)
            stubs = [self.edge_slot(entry_id, None)]
        _entry, stubs = self._block(program.body, "body", stubs)
        if stubs:
            end = FlowNode(id="E1", kind=NodeKind.END, label=END_LABEL)
            self.nodes.append(end)
            self.paths["E1"] = ""
            self.connect(stubs, "E1")
        return FlowGraph(nodes=self.nodes, edges=self.edges)

    def _block(
        self, body: list[Step], prefix: str, stubs: list[int]
    ) -> tuple[str | None, list[int]]:
        entry: str | None = None
        for i, step in enumerate(body):
            head, stubs = self._step(step, f"{prefix}[{i}]", stubs)
            if entry is None:
                entry = head
        return entry, stubs

    def _step(self, step: Step, path: str, stubs: list[int]) -> tuple[str, list[int]]:
        if isinstance(step, DoStep):
            node_id = self.action(step.command, path)
            self.connect(stubs, node_id)
            return node_id, [self.edge_slot(node_id, None)]
        if isinstance(step, IfHumanStep):
            d = self.decision(DecisionSpec(DecisionType.HUMAN_PRESENT), path)
            self.connect(stubs, d)
            yes = self.edge_slot(d, YES)
            no = self.edge_slot(d, NO)
            _, then_stubs = self._block(step.then_body, f"{path}.then", [yes])
            _, else_stubs = self._block(step.else_body, f"{path}.else", [no])
            return d, then_stubs + else_stubs
        if isinstance(step, AskBranchStep):
            ask_cmd = Command(CommandKind.ASK, step.question)
            a = self.action(ask_cmd, path)
            self.connect(stubs, a)
            d = self.decision(
                DecisionSpec(DecisionType.ANSWER_OF, question=step.question), path
            )
            self.connect([self.edge_slot(a, None)], d)
            arm_slots = [self.edge_slot(d, arm.pattern) for arm in step.arms]
            default_slot = self.edge_slot(d, DEFAULT)
            tails: list[int] = []
            for j, arm in enumerate(step.arms):
                _, arm_stubs = self._block(arm.body, f"{path}.arms[{j}]", [arm_slots[j]])
                tails.extend(arm_stubs)
            _, default_stubs = self._block(step.default, f"{path}.default", [default_slot])
            tails.extend(default_stubs)
            return a, tails
        if isinstance(step, RepeatStep):
            d = self.decision(
                DecisionSpec(DecisionType.LOOP_COUNT, count=step.count), path
            )
            head, body_stubs = self._block(step.body, f"{path}.body", [])
            assert head is not None, "repeat body is never empty"
            self.connect(stubs, head)
            self.connect(body_stubs, d)
            self.connect([self.edge_slot(d, REPEAT)], head)
            return head, [self.edge_slot(d, DONE)]
        if isinstance(step, ForeverStep):
            head, body_stubs = self._block(step.body, f"{path}.body", [])
            assert head is not None, "forever body is never empty"
            self.connect(stubs, head)
            # Tails loop back to the head; branch labels win over `repeat`.
            self.connect(body_stubs, head, force_label=REPEAT)
            return head, []
        raise AssertionError(f"unknown step type {type(step)!r}")


def ast_to_graph(program: RobotProgram) -> FlowGraph:
    """Convert a valid program to its flowchart graph."""
    return _Builder().build(program)


def node_paths(program: RobotProgram) -> dict[str, str]:
    """Map each graph node id to the AST path of the step that produced it."""
    builder = _Builder()
    builder.build(program)
    return builder.paths


class _Term(Enum):
    STOP = "stop"  # reached the region's stop node
    END = "end"  # reached an End node
    LOOP = "loop"  # followed a back-edge to the enclosing forever head
    FOREVER = "forever"  # entered a forever loop; control never continues


class _Unstructured(Exception):
    def __init__(self, code: str, message: str, node_id: str = ""):
        self.diag = Diagnostic(Severity.ERROR, code, message, path=node_id)
        super().__init__(message)


@dataclass
class _LoopInfo:
    repeat_gates: list[str] = field(default_factory=list)  # LOOP_COUNT gates on this head
    forever: bool = False


class _GraphReader:
    def __init__(self, graph: FlowGraph):
        self.graph = graph
        self.nodes = graph.node_map()
        self.back = classify_back_edges(graph)
        order = topo_order(graph)
        self.topo_pos = {node_id: i for i, node_id in enumerate(order)}
        self.reach = self._forward_reach(order)
        self.loops = self._find_loops()
        self.consumed: set[str] = set()
        self.entry_node: str | None = None
        self.step_origin: list[tuple[str, Step]] = []  # (node id, owning step)

    def _forward_reach(self, order: list[str]) -> dict[str, frozenset[str]]:
        reach: dict[str, frozenset[str]] = {}
        for node_id in reversed(order):
            acc: set[str] = {node_id}
            for edge in self.graph.out_edges(node_id):
                if edge.key not in self.back and edge.target in reach:
                    acc |= reach[edge.target]
            reach[node_id] = frozenset(acc)
        return reach

    def _find_loops(self) -> dict[str, _LoopInfo]:
        loops: dict[str, _LoopInfo] = {}
        for edge in self.graph.edges:
            if edge.key not in self.back:
                continue
            info = loops.setdefault(edge.target, _LoopInfo())
            source = self.nodes[edge.source]
            is_gate = (
                edge.label == REPEAT
                and source.kind is NodeKind.DECISION
                and source.decision is not None
                and source.decision.type is DecisionType.LOOP_COUNT
            )
            if is_gate:
                if edge.source not in info.repeat_gates:
                    info.repeat_gates.append(edge.source)
            else:
                info.forever = True
        for info in loops.values():
            # Enter outermost first: the outer loop's gate sits later in the
            # forward flow than any gate it wraps.
            info.repeat_gates.sort(key=lambda g: self.topo_pos.get(g, 0), reverse=True)
        return loops

    # -- region walking ---------------------------------------------------

    def program(self) -> RobotProgram:
        start = self.graph.start_node()
        self.consumed.add(start.id)
        out = self.graph.out_edges(start.id)
        cur = out[0].target
        entry: Command | None = None
        node = self.nodes.get(cur)
        if (
            node is not None
            and node.kind is NodeKind.ACTION
            and node.command is not None
            and node.command.kind is CommandKind.USER_REQUEST
            and cur not in self.loops
        ):
            entry = node.command
            self.consumed.add(cur)
            self.entry_node = cur
            cur = self.graph.out_edges(cur)[0].target
        steps, term = self.walk(cur, stop=None, hdr=None, active=frozenset(), top=True)
        if term not in (_Term.END, _Term.FOREVER):
            raise _Unstructured(
                "NonStructuredGraph", "program flow does not terminate at an End node"
            )
        if not steps:
            raise _Unstructured("NonStructuredGraph", "program body is empty")
        leftovers = [
            n.id
            for n in self.graph.nodes
            if n.id not in self.consumed and n.kind not in (NodeKind.END,)
        ]
        if leftovers:
            raise _Unstructured(
                "NonStructuredGraph",
                f"nodes not reachable by structured flow: {', '.join(sorted(leftovers))}",
                leftovers[0],
            )
        return RobotProgram(body=steps, entry=entry)

    def consume(self, node_id: str) -> FlowNode:
        if node_id in self.consumed:
            raise _Unstructured(
                "NonStructuredGraph",
                f"node {node_id!r} is shared between non-nested regions",
                node_id,
            )
        self.consumed.add(node_id)
        return self.nodes[node_id]

    def walk(
        self,
        cur: str,
        stop: str | None,
        hdr: str | None,
        active: frozenset[tuple[str, str]],
        top: bool = False,
    ) -> tuple[list[Step], _Term]:
        steps: list[Step] = []
        while True:
            if cur == stop:
                return steps, _Term.STOP
            node = self.nodes[cur]
            if node.kind is NodeKind.END:
                return steps, _Term.END

            if cur in self.loops:
                info = self.loops[cur]
                if info.forever and (cur, "forever") not in active:
                    if not top:
                        raise _Unstructured(
                            "NonStructuredGraph",
                            "a forever loop may only be the final top-level construct",
                            cur,
                        )
                    body, term = self.walk(
                        cur, stop=None, hdr=cur, active=active | {(cur, "forever")}
                    )
                    if term is not _Term.LOOP:
                        raise _Unstructured(
                            "NonStructuredGraph",
                            f"forever loop at {cur!r} has a path that escapes the loop",
                            cur,
                        )
                    steps.append(ForeverStep(body=body))
                    return steps, _Term.FOREVER
                pending_gates = [g for g in info.repeat_gates if (cur, g) not in active]
                if pending_gates:
                    gate = pending_gates[0]
                    body, term = self.walk(
                        cur, stop=gate, hdr=None, active=active | {(cur, gate)}
                    )
                    if term is not _Term.STOP:
                        raise _Unstructured(
                            "NonStructuredGraph",
                            f"counted loop at {cur!r} has a path that avoids its gate",
                            cur,
                        )
                    gate_node = self.consume(gate)
                    repeat_step = RepeatStep(count=gate_node.decision.count, body=body)
                    self.step_origin.append((gate, repeat_step))
                    steps.append(repeat_step)
                    done = [e for e in self.graph.out_edges(gate) if e.label == DONE]
                    others = [e for e in self.graph.out_edges(gate) if e.label not in (DONE, REPEAT)]
                    if len(done) != 1 or others:
                        raise _Unstructured(
                            "MissingDecisionBranch",
                            f"loop gate {gate!r} must have exactly 'repeat' and 'done' branches",
                            gate,
                        )
                    nxt = done[0]
                    advanced = self._advance(nxt, hdr)
                    if advanced is None:
                        return steps, _Term.LOOP
                    cur = advanced
                    continue

            node = self.consume(cur)
            if node.kind is NodeKind.START:
                raise _Unstructured(
                    "NonStructuredGraph", "Start node in mid-flow", cur
                )
            if node.kind is NodeKind.ACTION:
                assert node.command is not None
                if node.command.kind is CommandKind.USER_REQUEST:
                    raise _Unstructured(
                        "NonStructuredGraph",
                        "userRequest is only allowed as the program entry",
                        cur,
                    )
                edge = self.graph.out_edges(cur)[0]
                nxt_node = self.nodes.get(edge.target)
                if (
                    node.command.kind is CommandKind.ASK
                    and edge.key not in self.back
                    and nxt_node is not None
                    and nxt_node.kind is NodeKind.DECISION
                    and nxt_node.decision is not None
                    and nxt_node.decision.type is DecisionType.ANSWER_OF
                    and edge.target not in self.loops
                ):
                    step, follow, term = self._branches(
                        edge.target, node.command.payload, stop, hdr, active
                    )
                    self.step_origin.append((cur, step))
                    steps.append(step)
                    if follow is None:
                        return steps, term
                    cur = follow
                    continue
                do_step = DoStep(node.command)
                self.step_origin.append((cur, do_step))
                steps.append(do_step)
                advanced = self._advance(edge, hdr)
                if advanced is None:
                    return steps, _Term.LOOP
                cur = advanced
                continue
            if node.kind is NodeKind.DECISION:
                assert node.decision is not None
                if node.decision.type is DecisionType.LOOP_COUNT:
                    raise _Unstructured(
                        "NonStructuredGraph",
                        f"loop gate {cur!r} is not the tail of a loop body",
                        cur,
                    )
                if node.decision.type is DecisionType.ANSWER_OF:
                    raise _Unstructured(
                        "NonStructuredGraph",
                        f"answer decision {cur!r} must directly follow an ask action",
                        cur,
                    )
                self.consumed.discard(cur)  # _branches re-consumes
                step, follow, term = self._branches(cur, None, stop, hdr, active)
                steps.append(step)
                if follow is None:
                    return steps, term
                cur = follow
                continue
            raise AssertionError(f"unhandled node kind {node.kind}")

    def _advance(self, edge: FlowEdge, hdr: str | None) -> str | None:
        """Follow an edge; None means it legally looped back to the forever head."""
        if edge.key in self.back:
            if hdr is not None and edge.target == hdr:
                return None
            raise _Unstructured(
                "NonStructuredGraph",
                f"back-edge {edge.source!r}->{edge.target!r} does not target the "
                "enclosing loop head",
                edge.source,
            )
        return edge.target

    def _branches(
        self,
        decision_id: str,
        ask_question: str | None,
        stop: str | None,
        hdr: str | None,
        active: frozenset[tuple[str, str]],
    ) -> tuple[Step, str | None, _Term]:
        """Parse a decision's branches; returns (step, continuation, term)."""
        node = self.consume(decision_id)
        assert node.decision is not None
        out = self.graph.out_edges(decision_id)
        labels = [e.label for e in out]

        if ask_question is None:
            if set(labels) != {YES, NO}:
                raise _Unstructured(
                    "MissingDecisionBranch",
                    f"human decision {decision_id!r} must have exactly 'yes' and 'no' "
                    f"branches, found {labels}",
                    decision_id,
                )
        else:
            if DEFAULT not in labels:
                raise _Unstructured(
                    "MissingDecisionBranch",
                    f"answer decision {decision_id!r} is missing its 'default' branch",
                    decision_id,
                )
            if len(labels) < 2:
                raise _Unstructured(
                    "MissingDecisionBranch",
                    f"answer decision {decision_id!r} needs at least one answer arm",
                    decision_id,
                )

        back_edges = [e for e in out if e.key in self.back]
        fwd_edges = [e for e in out if e.key not in self.back]
        for e in back_edges:
            if hdr is None or e.target != hdr:
                raise _Unstructured(
                    "NonStructuredGraph",
                    f"branch {e.label!r} of {decision_id!r} loops to a node that is "
                    "not the enclosing loop head",
                    decision_id,
                )

        join: str | None = None
        if not back_edges and fwd_edges:
            common = frozenset.intersection(*[self.reach[e.target] for e in fwd_edges])
            if common:
                join = min(common, key=lambda n: self.topo_pos.get(n, 1 << 30))

        results: dict[tuple[str, str, str | None], tuple[list[Step], _Term]] = {}
        for e in out:
            if e.key in self.back:
                results[e.key] = ([], _Term.LOOP)
            else:
                results[e.key] = self.walk(
                    e.target, stop=join if join is not None else stop, hdr=hdr, active=active
                )

        terms = {term for _steps, term in results.values()}
        if join is not None:
            if terms != {_Term.STOP}:
                raise _Unstructured(
                    "NonStructuredGraph",
                    f"branches of {decision_id!r} do not all re-converge at {join!r}",
                    decision_id,
                )
        else:
            if len(terms) != 1 or _Term.STOP in terms:
                raise _Unstructured(
                    "NonStructuredGraph",
                    f"branches of {decision_id!r} neither re-converge nor all terminate",
                    decision_id,
                )

        def body_of(label: str | None) -> list[Step]:
            for e in out:
                if e.label == label:
                    return results[e.key][0]
            raise AssertionError(label)

        if ask_question is None:
            step: Step = IfHumanStep(then_body=body_of(YES), else_body=body_of(NO))
            self.step_origin.append((decision_id, step))
        else:
            arms = [
                AskArm(pattern=e.label, body=results[e.key][0])
                for e in out
                if e.label != DEFAULT
            ]
            seen: set[str] = set()
            for arm in arms:
                key = arm.pattern.casefold().strip()
                if key in seen:
                    raise _Unstructured(
                        "NonStructuredGraph",
                        f"answer decision {decision_id!r} has duplicate arm "
                        f"pattern {arm.pattern!r}",
                        decision_id,
                    )
                seen.add(key)
            step = AskBranchStep(
                question=ask_question, arms=arms, default=body_of(DEFAULT)
            )
            self.step_origin.append((decision_id, step))

        if join is not None:
            return step, join, _Term.STOP
        return step, None, terms.pop()


def graph_to_ast(graph: FlowGraph) -> RobotProgram | list[Diagnostic]:
    """Convert a flowchart graph back to a program, or report why it cannot."""
    diags = validate_graph(graph)
    if diags:
        return diags
    try:
        return _GraphReader(graph).program()
    except _Unstructured as exc:
        return [exc.diag]


def graph_to_ast_with_paths(
    graph: FlowGraph,
) -> tuple[RobotProgram, dict[str, str]] | list[Diagnostic]:
    """graph_to_ast plus a map from original node ids to AST paths."""
    diags = validate_graph(graph)
    if diags:
        return diags
    reader = _GraphReader(graph)
    try:
        program = reader.program()
    except _Unstructured as exc:
        return [exc.diag]
    path_by_step: dict[int, str] = {}
    from ..dsl.ast import walk_steps

    for path, step in walk_steps(program.body):
        path_by_step[id(step)] = path
    mapping: dict[str, str] = {}
    if reader.entry_node is not None:
        mapping[reader.entry_node] = "entry"
    for node_id, step in reader.step_origin:
        if id(step) in path_by_step:
            mapping[node_id] = path_by_step[id(step)]
    return program, mapping
