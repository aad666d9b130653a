"""Prompt chains: one per user-facing function, with repair and coherence.

A chain step assembles the six-segment preamble into a system message,
forwards the conversation, and parses the tagged response. Malformed
output triggers a bounded repair loop that appends (never replaces)
context. When a response carries both code and a flowchart, the two are
checked for equivalence; the session always keeps the graph re-derived
from code, so code stays the single source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..dsl import RobotProgram, emit_program, parse_program_strict
from ..flowchart import ast_to_graph, emit_mermaid, graph_to_ast
from .preamble import PromptPreamble, assemble_prompt, load_preamble
from .providers import Provider, ProviderConfig
from .tags import (
    AmbiguousIntentError,
    Intent,
    RepairNeeded,
    TaggedResponse,
    detect_intent,
    parse_tagged_output,
)


class FunctionKind(Enum):
    AUTHORING = "authoring"
    CONVERSATIONAL_MODIFY = "conversationalModify"
    FLOWCHART_SYNC = "flowchartSync"
    MAGIC_DEBUG = "magicDebug"
    NODE_PROPERTY_EDIT = "nodePropertyEdit"


@dataclass(frozen=True)
class ChainStep:
    name: str
    preamble: PromptPreamble
    slots: tuple[str, ...]  # context fields assembled into the preamble
    expected_tags: frozenset[str]  # outcome-bearing tags this step may emit
    intent_routing: bool = False
    requires_with_code: frozenset[str] = frozenset()  # tags that must accompany <code>
    code_is_single_command: bool = False

    def __post_init__(self) -> None:
        from .tags import TAG_VOCABULARY

        unknown = self.expected_tags - TAG_VOCABULARY
        if unknown:
            raise ValueError(f"expected tags outside vocabulary: {sorted(unknown)}")
        if self.intent_routing and not self.preamble.has_intent_branching():
            raise ValueError(
                f"step {self.name!r} routes intents but its workflow has no if-branching"
            )


@dataclass(frozen=True)
class ChainSpec:
    function_kind: FunctionKind
    steps: tuple[ChainStep, ...]

    def step(self, name: str) -> ChainStep:
        for s in self.steps:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass
class ChainContext:
    """The slice of session state a chain can see."""

    transcript: list[dict[str, str]] = field(default_factory=list)
    requirements: list[str] | None = None
    requirements_confirmed: bool = False
    program_source: str | None = None
    mermaid: str | None = None
    selected_node_ids: list[str] = field(default_factory=list)
    selected_node_labels: list[str] = field(default_factory=list)
    world_places: list[str] = field(default_factory=list)
    node_command: str | None = None
    node_description: str | None = None

    def slot_values(self) -> dict[str, str]:
        return {
            "world_places": ", ".join(self.world_places) or "(none configured)",
            "requirements": "\n".join(
                f"{i + 1}. {item}" for i, item in enumerate(self.requirements or [])
            )
            or "(none yet)",
            "current_code": self.program_source or "(no program yet)",
            "current_flowchart": self.mermaid or "(no flowchart yet)",
            "selected_nodes": "\n".join(
                f"{i}: {label}"
                for i, label in zip(self.selected_node_ids, self.selected_node_labels)
            )
            or "(none)",
            "node_command": self.node_command or "",
            "node_description": self.node_description or "",
        }


class OutcomeKind(Enum):
    REQUIREMENTS_PROPOSED = "requirementsProposed"
    PROGRAM_GENERATED = "programGenerated"
    ANSWER_ONLY = "answerOnly"
    NODES_MODIFIED = "nodesModified"
    FAILED = "failed"


@dataclass
class ChainOutcome:
    kind: OutcomeKind
    requirements: list[str] | None = None
    requirements_confirmed: bool = False
    requirements_rejected: bool = False
    program_source: str | None = None
    explanation: str | None = None
    mermaid: str | None = None
    modified_node_ids: list[str] = field(default_factory=list)
    answer: str | None = None
    command_line: str | None = None
    failure_reason: str | None = None
    repair_count: int = 0

    def to_payload(self) -> dict:
        return {
            "kind": self.kind.value,
            "requirements": self.requirements,
            "requirements_confirmed": self.requirements_confirmed,
            "requirements_rejected": self.requirements_rejected,
            "program": self.program_source,
            "explanation": self.explanation,
            "flowchart": self.mermaid,
            "modified_node_ids": self.modified_node_ids,
            "answer": self.answer,
            "failure_reason": self.failure_reason,
            "repair_count": self.repair_count,
        }


def build_chain_specs() -> dict[FunctionKind, ChainSpec]:
    """The per-function chains, loaded from the versioned templates."""
    return {
        FunctionKind.AUTHORING: ChainSpec(
            FunctionKind.AUTHORING,
            steps=(
                ChainStep(
                    name="intake",
                    preamble=load_preamble("authoring_intake"),
                    slots=("world_places", "requirements"),
                    expected_tags=frozenset({"requirements", "answer", "question"}),
                    intent_routing=True,
                ),
                ChainStep(
                    name="generate",
                    preamble=load_preamble("authoring_generate"),
                    slots=("world_places", "requirements"),
                    expected_tags=frozenset({"code", "explanation", "flowchart"}),
                ),
            ),
        ),
        FunctionKind.CONVERSATIONAL_MODIFY: ChainSpec(
            FunctionKind.CONVERSATIONAL_MODIFY,
            steps=(
                ChainStep(
                    name="modify",
                    preamble=load_preamble("modify_turn"),
                    slots=("world_places", "current_code", "current_flowchart"),
                    expected_tags=frozenset(
                        {"code", "explanation", "flowchart", "answer", "question"}
                    ),
                    intent_routing=True,
                ),
            ),
        ),
        FunctionKind.FLOWCHART_SYNC: ChainSpec(
            FunctionKind.FLOWCHART_SYNC,
            steps=(
                ChainStep(
                    name="explain",
                    preamble=load_preamble("sync_explain"),
                    slots=("current_code",),
                    expected_tags=frozenset({"explanation"}),
                ),
            ),
        ),
        FunctionKind.MAGIC_DEBUG: ChainSpec(
            FunctionKind.MAGIC_DEBUG,
            steps=(
                ChainStep(
                    name="explain_selection",
                    preamble=load_preamble("debug_explain"),
                    slots=("current_code", "selected_nodes"),
                    expected_tags=frozenset({"answer"}),
                ),
                ChainStep(
                    name="debug_turn",
                    preamble=load_preamble("debug_turn"),
                    slots=("world_places", "current_code", "selected_nodes"),
                    expected_tags=frozenset(
                        {
                            "code",
                            "explanation",
                            "flowchart",
                            "modified_nodes",
                            "answer",
                            "question",
                        }
                    ),
                    intent_routing=True,
                    requires_with_code=frozenset({"modified_nodes"}),
                ),
            ),
        ),
        FunctionKind.NODE_PROPERTY_EDIT: ChainSpec(
            FunctionKind.NODE_PROPERTY_EDIT,
            steps=(
                ChainStep(
                    name="edit",
                    preamble=load_preamble("node_prop_edit"),
                    slots=("world_places", "node_command", "node_description"),
                    expected_tags=frozenset({"code", "question"}),
                    intent_routing=True,
                    code_is_single_command=True,
                ),
            ),
        ),
    }


class _StepFailure(Exception):
    def __init__(self, reason: str, repair_count: int):
        self.reason = reason
        self.repair_count = repair_count
        super().__init__(reason)


class _StepRunner:
    def __init__(self, provider: Provider, config: ProviderConfig):
        self.provider = provider
        self.config = config
        self.repair_count = 0

    def run(
        self, step: ChainStep, context: ChainContext, user_input: str
    ) -> TaggedResponse:
        system = assemble_prompt(step.preamble, context.slot_values())
        messages: list[dict[str, str]] = [{"role": "system", "content": system}]
        transcript = context.transcript
        if self.config.max_transcript_turns is not None:
            transcript = transcript[-self.config.max_transcript_turns :]
        for turn in transcript:
            messages.append({"role": turn["role"], "content": turn["text"]})
        messages.append({"role": "user", "content": user_input})

        attempts = 0
        coherence_retried = False
        while True:
            raw = self.provider.complete(messages, timeout=self.config.timeout)
            parsed = parse_tagged_output(raw)
            problem: RepairNeeded | None = None
            if isinstance(parsed, RepairNeeded):
                problem = parsed
            else:
                problem = self._check_step(step, parsed)
                if problem is None:
                    coherence = self._check_coherence(parsed)
                    if coherence is not None:
                        if coherence_retried:
                            raise _StepFailure(
                                f"coherence check failed twice: {coherence.reason}",
                                self.repair_count,
                            )
                        coherence_retried = True
                        problem = coherence
            if problem is None:
                return parsed  # type: ignore[return-value]
            attempts += 1
            self.repair_count += 1
            if attempts > self.config.max_repair_retries:
                raise _StepFailure(
                    f"RepairExhausted: {problem.reason} "
                    f"(after {self.config.max_repair_retries} repair retries)",
                    self.repair_count,
                )
            messages.append({"role": "assistant", "content": raw})
            messages.append({"role": "user", "content": problem.instruction})

    def _check_step(self, step: ChainStep, response: TaggedResponse) -> RepairNeeded | None:
        allowed = set(step.expected_tags) | {"answer", "explanation"}
        stray = response.tags - allowed
        if stray:
            return RepairNeeded(
                reason=f"unexpected tags {sorted(stray)} for step {step.name}",
                instruction=(
                    "Only these tags are allowed here: "
                    + ", ".join(sorted(allowed))
                    + ". Answer again using them."
                ),
            )
        if "code" in response.tags:
            missing = step.requires_with_code - response.tags
            if missing:
                return RepairNeeded(
                    reason=f"code response missing {sorted(missing)}",
                    instruction=(
                        "When you output <code>, you must also include: "
                        + ", ".join(f"<{t}>" for t in sorted(missing))
                        + "."
                    ),
                )
            if step.code_is_single_command:
                from ..dsl.parser import parse_command_line

                body = response.first("code").body.strip()
                try:
                    parse_command_line(body)
                except ValueError:
                    return RepairNeeded(
                        reason=f"node edit must be a single command line, got {body!r}",
                        instruction=(
                            "Output exactly one command line inside <code>, "
                            "for example <code>say: hello</code>."
                        ),
                    )
        return None

    def _check_coherence(self, response: TaggedResponse) -> RepairNeeded | None:
        """When code and flowchart are both present they must agree."""
        code_seg = response.first("code")
        flow_seg = response.first("flowchart")
        if code_seg is None or flow_seg is None:
            return None
        program: RobotProgram = code_seg.value  # type: ignore[assignment]
        converted = graph_to_ast(flow_seg.value)  # type: ignore[arg-type]
        if isinstance(converted, list) or converted != program:
            return RepairNeeded(
                reason="code and flowchart describe different programs",
                instruction=(
                    "Your <flowchart> does not match your <code>. Regenerate "
                    "both so the flowchart is exactly the program's structure."
                ),
            )
        return None


def run_chain(
    spec: ChainSpec,
    context: ChainContext,
    user_input: str,
    provider: Provider,
    config: ProviderConfig | None = None,
    step_name: str | None = None,
) -> ChainOutcome:
    """Execute a chain for one user turn and route the result.

    ``step_name`` pins execution to a single named step (used for the
    debug-mode entry explanation); otherwise the chain's routing logic
    decides which steps run.
    """
    config = config or ProviderConfig()
    runner = _StepRunner(provider, config)
    try:
        if step_name is not None:
            response = runner.run(spec.step(step_name), context, user_input)
            return _route(spec, None, response, context, runner)
        if spec.function_kind is FunctionKind.AUTHORING:
            return _run_authoring(spec, context, user_input, runner)
        step = (
            spec.step("debug_turn")
            if spec.function_kind is FunctionKind.MAGIC_DEBUG
            else spec.steps[0]
        )
        response = runner.run(step, context, user_input)
        return _route(spec, step, response, context, runner)
    except _StepFailure as failure:
        return ChainOutcome(
            kind=OutcomeKind.FAILED,
            failure_reason=failure.reason,
            repair_count=failure.repair_count,
        )
    except AmbiguousIntentError as exc:
        return ChainOutcome(
            kind=OutcomeKind.FAILED,
            failure_reason=f"AmbiguousIntent: {exc}",
            repair_count=runner.repair_count,
        )


def _run_authoring(
    spec: ChainSpec, context: ChainContext, user_input: str, runner: _StepRunner
) -> ChainOutcome:
    response = runner.run(spec.step("intake"), context, user_input)
    pending = context.requirements is not None and not context.requirements_confirmed
    intent = detect_intent(response, requirements_pending=pending)
    if intent is Intent.MODIFY:
        # The confirmation gate: generation may only follow a confirmed list.
        raise _StepFailure(
            "authoring produced code before the requirements were confirmed",
            runner.repair_count,
        )
    if intent is Intent.PROPOSE:
        segment = response.first("requirements")
        assert segment is not None
        return ChainOutcome(
            kind=OutcomeKind.REQUIREMENTS_PROPOSED,
            requirements=list(segment.value),  # type: ignore[arg-type]
            repair_count=runner.repair_count,
        )
    if intent is Intent.REJECT:
        return ChainOutcome(
            kind=OutcomeKind.ANSWER_ONLY,
            answer="Okay, I discarded the proposed requirements. What should the robot do?",
            requirements_rejected=True,
            repair_count=runner.repair_count,
        )
    if intent is Intent.CONFIRM:
        confirmed = ChainContext(
            transcript=context.transcript,
            requirements=context.requirements,
            requirements_confirmed=True,
            program_source=context.program_source,
            mermaid=context.mermaid,
            world_places=context.world_places,
        )
        generated = runner.run(spec.step("generate"), confirmed, user_input)
        outcome = _program_outcome(generated, runner, confirmed=True)
        return outcome
    return ChainOutcome(
        kind=OutcomeKind.ANSWER_ONLY,
        answer=response.body("answer") or response.body("question") or "",
        repair_count=runner.repair_count,
    )


def _route(
    spec: ChainSpec,
    step: ChainStep | None,
    response: TaggedResponse,
    context: ChainContext,
    runner: _StepRunner,
) -> ChainOutcome:
    intent = detect_intent(response, requirements_pending=False)
    if intent is Intent.MODIFY:
        if spec.function_kind is FunctionKind.NODE_PROPERTY_EDIT:
            return _command_outcome(response, runner)
        if spec.function_kind is FunctionKind.MAGIC_DEBUG:
            return _nodes_modified_outcome(response, runner)
        return _program_outcome(response, runner)
    explanation = response.body("explanation")
    answer = response.body("answer") or response.body("question") or explanation or ""
    return ChainOutcome(
        kind=OutcomeKind.ANSWER_ONLY,
        answer=answer,
        explanation=explanation,
        repair_count=runner.repair_count,
    )


def _program_outcome(
    response: TaggedResponse, runner: _StepRunner, confirmed: bool = False
) -> ChainOutcome:
    code_seg = response.first("code")
    assert code_seg is not None
    program: RobotProgram = code_seg.value  # type: ignore[assignment]
    # Code is the source of truth: the canonical program and its re-derived
    # flowchart are what the session keeps.
    canonical = emit_program(program)
    mermaid = emit_mermaid(ast_to_graph(parse_program_strict(canonical)))
    return ChainOutcome(
        kind=OutcomeKind.PROGRAM_GENERATED,
        program_source=canonical,
        explanation=response.body("explanation"),
        mermaid=mermaid,
        requirements_confirmed=confirmed,
        repair_count=runner.repair_count,
    )


def _nodes_modified_outcome(response: TaggedResponse, runner: _StepRunner) -> ChainOutcome:
    nodes_seg = response.first("modified_nodes")
    if nodes_seg is None:
        raise _StepFailure(
            "debug modification response did not list <modified_nodes>",
            runner.repair_count,
        )
    base = _program_outcome(response, runner)
    return ChainOutcome(
        kind=OutcomeKind.NODES_MODIFIED,
        program_source=base.program_source,
        explanation=base.explanation,
        mermaid=base.mermaid,
        modified_node_ids=list(nodes_seg.value),  # type: ignore[arg-type]
        repair_count=runner.repair_count,
    )


def _command_outcome(response: TaggedResponse, runner: _StepRunner) -> ChainOutcome:
    from ..dsl.parser import parse_command_line

    code_seg = response.first("code")
    assert code_seg is not None
    body = code_seg.body.strip()
    try:
        command = parse_command_line(body)
    except ValueError:
        raise _StepFailure(
            f"node edit must produce a single command line, got {body!r}",
            runner.repair_count,
        ) from None
    return ChainOutcome(
        kind=OutcomeKind.NODES_MODIFIED,
        command_line=command.line(),
        repair_count=runner.repair_count,
    )
