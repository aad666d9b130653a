"""Session workflows: message routing, Sync Change, MagicDebug, deploy.

Code is the source of truth throughout: every accepted change lands as a
canonical program in the event log, and the flowchart is re-derived from
it. Failed chains append nothing, so a failure leaves the session exactly
as it was.
"""

from __future__ import annotations

import queue
import re
import threading
from dataclasses import dataclass, field

from ..dsl import (
    AskBranchStep,
    Command,
    CommandKind,
    Diagnostic,
    DoStep,
    ForeverStep,
    IfHumanStep,
    RepeatStep,
    RobotProgram,
    emit_program,
    has_errors,
    parse_program_strict,
    validate_program,
)
from ..flowchart import (
    FlowGraph,
    GraphDiff,
    diff_graphs,
    graph_to_ast_with_paths,
    graph_to_render_json,
    node_paths,
    render_json_to_graph,
)
from ..orchestrator import (
    ChainContext,
    ChainOutcome,
    FunctionKind,
    OutcomeKind,
    Provider,
    ProviderConfig,
    build_chain_specs,
    run_chain,
)
from ..sim import (
    Bridge,
    EventScript,
    RunHandle,
    Simulated,
    WorldModel,
    deploy as sim_deploy,
)
from ..flowchart import emit_mermaid
from .session import (
    MODE_MAGIC_DEBUG,
    MODE_NORMAL,
    SessionState,
    SessionStore,
)


class ServiceError(Exception):
    """A request-level failure; carries diagnostics for the client."""

    def __init__(self, code: str, message: str, diagnostics: list[Diagnostic] | None = None):
        self.code = code
        self.diagnostics = diagnostics or []
        super().__init__(message)

    def to_json(self) -> dict:
        return {
            "error": self.code,
            "message": str(self),
            "diagnostics": [
                {
                    "severity": d.severity.value,
                    "code": d.code,
                    "message": d.message,
                    "path": d.path,
                    "line": d.line,
                }
                for d in self.diagnostics
            ],
        }


@dataclass
class EventBus:
    """Per-session server-push fan-out with replayable history."""

    history: list[dict] = field(default_factory=list)
    subscribers: list[queue.SimpleQueue] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def publish(self, kind: str, payload: dict) -> None:
        with self.lock:
            envelope = {"seq": len(self.history) + 1, "kind": kind, "payload": payload}
            self.history.append(envelope)
            for q in self.subscribers:
                q.put(envelope)

    def subscribe(self, after: int = 0) -> "queue.SimpleQueue[dict]":
        q: queue.SimpleQueue = queue.SimpleQueue()
        with self.lock:
            for envelope in self.history[after:]:
                q.put(envelope)
            self.subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.SimpleQueue) -> None:
        with self.lock:
            if q in self.subscribers:
                self.subscribers.remove(q)


class SessionService:
    def __init__(
        self,
        store: SessionStore,
        provider: Provider,
        provider_config: ProviderConfig | None = None,
        world: WorldModel | None = None,
        events: EventScript | None = None,
    ):
        self.store = store
        self.provider = provider
        self.provider_config = provider_config or ProviderConfig()
        self.world = world
        self.events = events or EventScript.empty()
        self.chains = build_chain_specs()
        self.buses: dict[str, EventBus] = {}
        self.runs: dict[str, RunHandle] = {}
        self._runs_lock = threading.Lock()

    # -- helpers -----------------------------------------------------------

    def bus(self, session_id: str) -> EventBus:
        with self._runs_lock:
            if session_id not in self.buses:
                self.buses[session_id] = EventBus()
            return self.buses[session_id]

    def _world_places(self) -> list[str]:
        return sorted(self.world.places) if self.world is not None else []

    def _context(self, state: SessionState, extra_turn: str | None = None) -> ChainContext:
        transcript = [dict(t) for t in state.transcript]
        graph = state.graph()
        selected_labels: list[str] = []
        if graph is not None and state.debug_node_ids:
            by_id = graph.node_map()
            selected_labels = [
                by_id[i].label for i in state.debug_node_ids if i in by_id
            ]
        return ChainContext(
            transcript=transcript,
            requirements=list(state.requirements) if state.requirements else None,
            requirements_confirmed=state.requirements_confirmed,
            program_source=state.program_source,
            mermaid=emit_mermaid(graph.without_pending()) if graph is not None else None,
            selected_node_ids=list(state.debug_node_ids),
            selected_node_labels=selected_labels,
            world_places=self._world_places(),
        )

    # -- operations ----------------------------------------------------------

    def create_session(self) -> SessionState:
        state = self.store.create()
        self.bus(state.id).publish("session", state.to_json())
        return state

    def get_session(self, session_id: str) -> SessionState:
        return self.store.get(session_id)

    def post_message(self, session_id: str, text: str) -> tuple[ChainOutcome, SessionState]:
        """Route a user turn to the current mode's chain and record results."""
        with self.store.lock(session_id):
            state = self.store.get(session_id)
            if state.mode == MODE_MAGIC_DEBUG:
                kind = FunctionKind.MAGIC_DEBUG
            elif state.program_source is None:
                kind = FunctionKind.AUTHORING
            else:
                kind = FunctionKind.CONVERSATIONAL_MODIFY
            outcome = run_chain(
                self.chains[kind],
                self._context(state),
                text,
                self.provider,
                config=self.provider_config,
            )
            if outcome.kind is OutcomeKind.FAILED:
                # Atomicity: nothing is appended, the session is untouched.
                return outcome, state
            if outcome.kind is OutcomeKind.NODES_MODIFIED:
                problem = self._check_debug_isolation(state, outcome)
                if problem is not None:
                    return problem, state
            new_state = self.store.append(session_id, "user_turn", {"text": text})
            new_state = self.store.append(session_id, "outcome", outcome.to_payload())
            self.bus(session_id).publish("outcome", outcome.to_payload())
            if new_state.last_diff is not None and outcome.kind in (
                OutcomeKind.PROGRAM_GENERATED,
                OutcomeKind.NODES_MODIFIED,
            ):
                self.bus(session_id).publish("diff", new_state.last_diff)
            return outcome, new_state

    def _check_debug_isolation(
        self, state: SessionState, outcome: ChainOutcome
    ) -> ChainOutcome | None:
        """Modifications in debug mode may only touch the selected region."""
        assert state.program_source is not None and outcome.program_source is not None
        old_program = parse_program_strict(state.program_source)
        new_program = parse_program_strict(outcome.program_source)
        selected = set(state.debug_node_ids)
        stray = [i for i in outcome.modified_node_ids if i not in selected]
        if stray:
            return ChainOutcome(
                kind=OutcomeKind.FAILED,
                failure_reason=(
                    f"modification listed nodes outside the selection: {stray}"
                ),
                repair_count=outcome.repair_count,
            )
        paths = node_paths(old_program)
        selected_paths = {paths[i] for i in selected if i in paths}
        if not region_isolated(old_program, new_program, selected_paths):
            return ChainOutcome(
                kind=OutcomeKind.FAILED,
                failure_reason="modification changed the program outside the selected nodes",
                repair_count=outcome.repair_count,
            )
        return None

    def get_flowchart(self, session_id: str) -> tuple[dict, dict | None]:
        state = self.store.get(session_id)
        graph = state.graph()
        if graph is None:
            raise ServiceError("NoProgramYet", "the session has no program yet")
        return graph_to_render_json(graph), state.last_diff

    def sync_change(self, session_id: str, edited_doc: object) -> tuple[GraphDiff, SessionState]:
        """Turn a user-edited flowchart back into code and commit it."""
        with self.store.lock(session_id):
            state = self.store.get(session_id)
            current_graph = state.graph()
            if current_graph is None:
                raise ServiceError("NoProgramYet", "the session has no program yet")
            edited = render_json_to_graph(edited_doc)
            if isinstance(edited, list):
                raise ServiceError(
                    "InvalidFlowchart", "the edited flowchart is invalid", edited
                )
            if edited == current_graph:
                return GraphDiff(), state  # no-op sync

            result = graph_to_ast_with_paths(edited.without_pending())
            if isinstance(result, list):
                code = result[0].code if result else "NonStructuredGraph"
                raise ServiceError(code, "the edited flowchart has no program equivalent", result)
            program, id_to_path = result

            pending = {n.id: n.pending_behavior for n in edited.nodes if n.pending_behavior}
            for node_id, description in sorted(pending.items()):
                program = self._apply_prop_edit(
                    state, program, id_to_path, node_id, description
                )

            new_source = emit_program(program)
            explanation = self._sync_explanation(state, new_source)
            new_state = self.store.append(
                session_id,
                "sync",
                {"program": new_source, "explanation": explanation},
            )
            diff = diff_graphs(current_graph.without_pending(), new_state.graph())
            self.bus(session_id).publish("diff", diff.to_payload())
            self.bus(session_id).publish("sync", {"program": new_source})
            return diff, new_state

    def _apply_prop_edit(
        self,
        state: SessionState,
        program: RobotProgram,
        id_to_path: dict[str, str],
        node_id: str,
        description: str,
    ) -> RobotProgram:
        path = id_to_path.get(node_id)
        if path is None:
            raise ServiceError(
                "UnknownNodeId",
                f"edited node {node_id!r} does not map to a program step",
            )
        old_command = command_at(program, path)
        if old_command is None:
            raise ServiceError(
                "InvalidFlowchart",
                f"node {node_id!r} has no editable command",
            )
        context = self._context(state)
        context.node_command = old_command.line()
        context.node_description = description
        outcome = run_chain(
            self.chains[FunctionKind.NODE_PROPERTY_EDIT],
            context,
            description,
            self.provider,
            config=self.provider_config,
        )
        if outcome.kind is not OutcomeKind.NODES_MODIFIED or not outcome.command_line:
            raise ServiceError(
                "NodeEditFailed",
                f"could not turn the description for {node_id!r} into a command: "
                f"{outcome.failure_reason or outcome.answer or 'no command produced'}",
            )
        from ..dsl.parser import parse_command_line

        return replace_command_at(program, path, parse_command_line(outcome.command_line))

    def _sync_explanation(self, state: SessionState, new_source: str) -> str | None:
        context = self._context(state)
        context.program_source = new_source
        outcome = run_chain(
            self.chains[FunctionKind.FLOWCHART_SYNC],
            context,
            "(flowchart synchronized)",
            self.provider,
            config=self.provider_config,
        )
        if outcome.kind is OutcomeKind.ANSWER_ONLY:
            return outcome.explanation or outcome.answer
        return None

    def magic_debug_start(self, session_id: str, node_ids: list[str]) -> tuple[str, SessionState]:
        with self.store.lock(session_id):
            state = self.store.get(session_id)
            graph = state.graph()
            if graph is None:
                raise ServiceError("NoProgramYet", "the session has no program yet")
            known = {n.id for n in graph.nodes}
            missing = [i for i in node_ids if i not in known]
            if missing or not node_ids:
                raise ServiceError(
                    "UnknownNodeId", f"unknown node ids: {missing or '(empty selection)'}"
                )
            by_id = graph.node_map()
            context = self._context(state)
            context.selected_node_ids = list(node_ids)
            context.selected_node_labels = [by_id[i].label for i in node_ids]
            outcome = run_chain(
                self.chains[FunctionKind.MAGIC_DEBUG],
                context,
                "Explain the selected nodes.",
                self.provider,
                config=self.provider_config,
                step_name="explain_selection",
            )
            if outcome.kind is not OutcomeKind.ANSWER_ONLY:
                raise ServiceError(
                    "ChainFailed", outcome.failure_reason or "debug explanation failed"
                )
            explanation = outcome.answer or ""
            new_state = self.store.append(
                session_id,
                "debug_start",
                {"node_ids": list(node_ids), "explanation": explanation},
            )
            self.bus(session_id).publish("mode", new_state.to_json()["mode"])
            return explanation, new_state

    def magic_debug_end(self, session_id: str) -> SessionState:
        with self.store.lock(session_id):
            state = self.store.get(session_id)
            if state.mode != MODE_MAGIC_DEBUG:
                raise ServiceError("NotInDebugMode", "the session is not in debug mode")
            new_state = self.store.append(session_id, "debug_end", {})
            self.bus(session_id).publish("mode", new_state.to_json()["mode"])
            return new_state

    def deploy_session(self, session_id: str, target: str, address: str | None = None) -> str:
        """Validate, deploy, and stream the run's trace to the session bus."""
        with self.store.lock(session_id):
            state = self.store.get(session_id)
            if state.program_source is None:
                raise ServiceError("NoProgramYet", "the session has no program yet")
            if self.world is None:
                raise ServiceError("NoWorld", "the service has no world configured")
            program = parse_program_strict(state.program_source)
            diags = validate_program(program, self.world.catalog())
            if has_errors(diags):
                raise ServiceError("ValidationFailed", "the program is not deployable", diags)
            if target == "simulated":
                handle = sim_deploy(program, Simulated(self.world, self.events))
            elif target == "bridge":
                if not address:
                    raise ServiceError("TargetUnreachable", "bridge target needs an address")
                from ..sim import TargetUnreachable

                try:
                    handle = sim_deploy(program, Bridge(address))
                except TargetUnreachable as exc:
                    raise ServiceError("TargetUnreachable", str(exc)) from exc
            else:
                raise ServiceError("BadTarget", f"unknown deploy target {target!r}")
            run_id = f"run-{len(self.runs) + 1}-{session_id[:4]}"
            with self._runs_lock:
                self.runs[run_id] = handle
            self.store.append(session_id, "deploy", {"target": target, "run_id": run_id})
            bus = self.bus(session_id)
            threading.Thread(
                target=self._pump_trace, args=(bus, run_id, handle), daemon=True
            ).start()
            return run_id

    def _pump_trace(self, bus: EventBus, run_id: str, handle: RunHandle) -> None:
        for entry in handle.events():
            bus.publish("trace", {"run_id": run_id, **entry.to_json()})
        bus.publish("run_finished", {"run_id": run_id})

    def run_handle(self, run_id: str) -> RunHandle:
        with self._runs_lock:
            if run_id not in self.runs:
                raise ServiceError("UnknownRun", f"unknown run {run_id!r}")
            return self.runs[run_id]


# -- program surgery helpers -------------------------------------------------


_PATH_SEGMENT_RE = re.compile(r"([a-z]+)((?:\[\d+\])+)")


def _locate(program: RobotProgram, path: str) -> tuple[list, int]:
    """Return (container list, index) for a step path like body[1].arms[0][2]."""
    container: list = program.body
    step = None
    for match in _PATH_SEGMENT_RE.finditer(path):
        name = match.group(1)
        indices = [int(x) for x in match.group(2)[1:-1].split("][")]
        if name == "body" and step is None:
            container = program.body
        elif name == "then":
            container = step.then_body
        elif name == "else":
            container = step.else_body
        elif name == "default":
            container = step.default
        elif name == "body":
            container = step.body
        elif name == "arms":
            container = step.arms[indices.pop(0)].body
        else:
            raise KeyError(f"bad path segment {name!r} in {path!r}")
        for i in indices:
            step = container[i]
            last = (container, i)
    return last


def command_at(program: RobotProgram, path: str) -> Command | None:
    """The editable command at a node path, if the node maps to one."""
    if path == "entry":
        return program.entry
    container, i = _locate(program, path)
    step = container[i]
    if isinstance(step, DoStep):
        return step.command
    if isinstance(step, AskBranchStep):
        return Command(CommandKind.ASK, step.question)
    return None


def replace_command_at(program: RobotProgram, path: str, command: Command) -> RobotProgram:
    """Replace the command at a path; structure is otherwise untouched."""
    if path == "entry":
        if command.kind is not CommandKind.USER_REQUEST:
            raise ServiceError(
                "InvalidFlowchart", "the entry node must stay a userRequest command"
            )
        return RobotProgram(body=program.body, entry=command)
    container, i = _locate(program, path)
    step = container[i]
    if isinstance(step, DoStep):
        container[i] = DoStep(command)
    elif isinstance(step, AskBranchStep):
        if command.kind is not CommandKind.ASK:
            raise ServiceError(
                "InvalidFlowchart", "a branching ask node must stay an ask command"
            )
        container[i] = AskBranchStep(
            question=command.payload, arms=step.arms, default=step.default
        )
    else:
        raise ServiceError("InvalidFlowchart", f"step at {path} has no editable command")
    return program


def region_isolated(
    old: RobotProgram, new: RobotProgram, selected_paths: set[str]
) -> bool:
    """True iff old and new differ only within the selected steps' region."""
    if "entry" in selected_paths:
        pass  # entry may change freely
    elif old.entry != new.entry:
        return False
    return _blocks_isolated(old.body, new.body, "body", selected_paths)


def _blocks_isolated(old_steps, new_steps, prefix: str, selected: set[str]) -> bool:
    indices = [
        i for i in range(len(old_steps)) if f"{prefix}[{i}]" in selected
    ]
    if indices:
        lo, hi = min(indices), max(indices)
        tail_len = len(old_steps) - hi - 1
        if len(new_steps) < lo + tail_len:
            return False
        for i in range(lo):
            if not _steps_isolated(old_steps[i], new_steps[i], f"{prefix}[{i}]", selected):
                return False
        for k in range(tail_len):
            i = hi + 1 + k
            j = len(new_steps) - tail_len + k
            if not _steps_isolated(old_steps[i], new_steps[j], f"{prefix}[{i}]", selected):
                return False
        return True
    if len(old_steps) != len(new_steps):
        return False
    return all(
        _steps_isolated(old_steps[i], new_steps[i], f"{prefix}[{i}]", selected)
        for i in range(len(old_steps))
    )


def _steps_isolated(old, new, path: str, selected: set[str]) -> bool:
    if path in selected:
        return True
    if type(old) is not type(new):
        return False
    if isinstance(old, DoStep):
        return old == new
    if isinstance(old, IfHumanStep):
        return _blocks_isolated(
            old.then_body, new.then_body, f"{path}.then", selected
        ) and _blocks_isolated(old.else_body, new.else_body, f"{path}.else", selected)
    if isinstance(old, AskBranchStep):
        if old.question != new.question or len(old.arms) != len(new.arms):
            return False
        for j, (oa, na) in enumerate(zip(old.arms, new.arms)):
            if oa.pattern != na.pattern:
                return False
            if not _blocks_isolated(oa.body, na.body, f"{path}.arms[{j}]", selected):
                return False
        return _blocks_isolated(old.default, new.default, f"{path}.default", selected)
    if isinstance(old, RepeatStep):
        return old.count == new.count and _blocks_isolated(
            old.body, new.body, f"{path}.body", selected
        )
    if isinstance(old, ForeverStep):
        return _blocks_isolated(old.body, new.body, f"{path}.body", selected)
    raise AssertionError(f"unknown step type {type(old)!r}")
