"""Event-sourced session state.

Every state change is an appended log record; the in-memory state is the
fold of those records through a pure reducer. Replaying a session's log
from empty therefore reproduces the exact final state, which is also how
sessions are recovered after a restart (snapshot + tail for speed).
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..dsl import parse_program_strict
from ..flowchart import (
    FlowGraph,
    annotate_pending,
    ast_to_graph,
    diff_graphs,
)

EVENT_LOG_VERSION = "eventLog/v1"
SNAPSHOT_EVERY = 50

MODE_NORMAL = "normal"
MODE_MAGIC_DEBUG = "magicDebug"


class StorageError(Exception):
    pass


class UnknownSession(KeyError):
    pass


@dataclass(frozen=True)
class SessionState:
    id: str
    transcript: tuple[dict, ...] = ()
    requirements: tuple[str, ...] | None = None
    requirements_confirmed: bool = False
    program_source: str | None = None
    pending_props: tuple[tuple[str, str], ...] = ()  # (node id, description)
    mode: str = MODE_NORMAL
    debug_node_ids: tuple[str, ...] = ()
    last_diff: dict | None = None

    def graph(self) -> FlowGraph | None:
        """The session's flowchart, derived from code plus pending edits."""
        if self.program_source is None:
            return None
        graph = ast_to_graph(parse_program_strict(self.program_source))
        return annotate_pending(graph, dict(self.pending_props))

    def requirements_pending(self) -> bool:
        return self.requirements is not None and not self.requirements_confirmed

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "transcript": list(self.transcript),
            "requirements": (
                None
                if self.requirements is None
                else {
                    "items": list(self.requirements),
                    "state": "confirmed" if self.requirements_confirmed else "pending",
                }
            ),
            "program": self.program_source,
            "pending_props": dict(self.pending_props),
            "mode": (
                {"kind": self.mode, "node_ids": list(self.debug_node_ids)}
                if self.mode == MODE_MAGIC_DEBUG
                else {"kind": self.mode}
            ),
            "last_diff": self.last_diff,
        }


@dataclass(frozen=True)
class EventLogRecord:
    session_id: str
    seq: int
    timestamp: float
    kind: str
    payload: dict

    def to_json(self) -> dict:
        return {
            "version": EVENT_LOG_VERSION,
            "session_id": self.session_id,
            "seq": self.seq,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "payload": self.payload,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "EventLogRecord":
        return cls(
            session_id=doc["session_id"],
            seq=int(doc["seq"]),
            timestamp=float(doc["timestamp"]),
            kind=doc["kind"],
            payload=doc["payload"],
        )


def _with_turn(state: SessionState, role: str, text: str) -> SessionState:
    return replace(state, transcript=state.transcript + ({"role": role, "text": text},))


def _program_changed(state: SessionState, new_source: str) -> SessionState:
    old_graph = state.graph()
    new_graph = ast_to_graph(parse_program_strict(new_source))
    diff = (
        diff_graphs(old_graph.without_pending(), new_graph)
        if old_graph is not None
        else diff_graphs(new_graph, new_graph)
    )
    return replace(
        state,
        program_source=new_source,
        pending_props=(),
        last_diff=diff.to_payload(),
    )


def apply_event(state: SessionState, kind: str, payload: dict) -> SessionState:
    """The pure reducer: fold one event into the session state."""
    if kind == "created":
        return state
    if kind == "user_turn":
        return _with_turn(state, "user", payload["text"])
    if kind == "outcome":
        return _apply_outcome(state, payload)
    if kind == "sync":
        new = _program_changed(state, payload["program"])
        explanation = payload.get("explanation")
        if explanation:
            new = _with_turn(new, "assistant", explanation)
        return new
    if kind == "debug_start":
        new = replace(
            state,
            mode=MODE_MAGIC_DEBUG,
            debug_node_ids=tuple(payload["node_ids"]),
        )
        if payload.get("explanation"):
            new = _with_turn(new, "assistant", payload["explanation"])
        return new
    if kind == "debug_end":
        return replace(state, mode=MODE_NORMAL, debug_node_ids=())
    if kind == "deploy":
        return _with_turn(state, "system", f"deployed to {payload.get('target', '?')}")
    raise StorageError(f"unknown event kind {kind!r}")


def _apply_outcome(state: SessionState, payload: dict) -> SessionState:
    kind = payload["kind"]
    if kind == "requirementsProposed":
        new = replace(
            state,
            requirements=tuple(payload["requirements"]),
            requirements_confirmed=False,
        )
        listing = "\n".join(f"{i + 1}. {r}" for i, r in enumerate(payload["requirements"]))
        return _with_turn(new, "assistant", f"Here is what I understood:\n{listing}")
    if kind == "programGenerated":
        new = _program_changed(state, payload["program"])
        if payload.get("requirements_confirmed"):
            new = replace(new, requirements_confirmed=True)
        return _with_turn(new, "assistant", payload.get("explanation") or "Program updated.")
    if kind == "nodesModified":
        new = _program_changed(state, payload["program"])
        return _with_turn(new, "assistant", payload.get("explanation") or "Nodes updated.")
    if kind == "answerOnly":
        new = state
        if payload.get("requirements_rejected"):
            new = replace(new, requirements=None, requirements_confirmed=False)
        return _with_turn(new, "assistant", payload.get("answer") or "")
    raise StorageError(f"unknown outcome kind {kind!r}")


class SessionStore:
    """Holds sessions in memory and mirrors every event to a JSONL log."""

    def __init__(self, data_dir: str | Path | None = None):
        self.data_dir = Path(data_dir) if data_dir else None
        if self.data_dir is not None:
            try:
                (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise StorageError(f"cannot create data dir: {exc}") from exc
        self._states: dict[str, SessionState] = {}
        self._seqs: dict[str, int] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.Lock()
        if self.data_dir is not None:
            self._load_existing()

    # -- infrastructure ---------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        assert self.data_dir is not None
        return self.data_dir / "sessions" / f"{session_id}.jsonl"

    def _snapshot_path(self, session_id: str) -> Path:
        assert self.data_dir is not None
        return self.data_dir / "sessions" / f"{session_id}.snapshot.json"

    def _load_existing(self) -> None:
        assert self.data_dir is not None
        for log in sorted((self.data_dir / "sessions").glob("*.jsonl")):
            session_id = log.stem
            state, seq = self._recover(session_id)
            self._states[session_id] = state
            self._seqs[session_id] = seq
            self._locks[session_id] = threading.RLock()

    def _recover(self, session_id: str) -> tuple[SessionState, int]:
        state = SessionState(id=session_id)
        seq = 0
        snapshot = self._snapshot_path(session_id)
        if snapshot.exists():
            doc = json.loads(snapshot.read_text(encoding="utf-8"))
            state = _state_from_json(doc["state"])
            seq = int(doc["seq"])
        for record in self.read_log(session_id):
            if record.seq <= seq:
                continue
            state = apply_event(state, record.kind, record.payload)
            seq = record.seq
        return state, seq

    def lock(self, session_id: str) -> threading.RLock:
        with self._registry_lock:
            if session_id not in self._locks:
                raise UnknownSession(session_id)
            return self._locks[session_id]

    # -- public API --------------------------------------------------------

    def create(self) -> SessionState:
        session_id = uuid.uuid4().hex[:12]
        state = SessionState(id=session_id)
        with self._registry_lock:
            self._states[session_id] = state
            self._seqs[session_id] = 0
            self._locks[session_id] = threading.RLock()
        self.append(session_id, "created", {})
        return self.get(session_id)

    def ids(self) -> list[str]:
        with self._registry_lock:
            return list(self._states)

    def get(self, session_id: str) -> SessionState:
        try:
            return self._states[session_id]
        except KeyError:
            raise UnknownSession(session_id) from None

    def append(self, session_id: str, kind: str, payload: dict) -> SessionState:
        """Apply an event and persist it; state is untouched if either fails."""
        state = self.get(session_id)
        new_state = apply_event(state, kind, payload)  # may raise: nothing persisted
        seq = self._seqs[session_id] + 1
        record = EventLogRecord(
            session_id=session_id,
            seq=seq,
            timestamp=time.time(),
            kind=kind,
            payload=payload,
        )
        if self.data_dir is not None:
            try:
                with self._log_path(session_id).open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
            except OSError as exc:
                raise StorageError(f"cannot append event: {exc}") from exc
        self._states[session_id] = new_state
        self._seqs[session_id] = seq
        if self.data_dir is not None and seq % SNAPSHOT_EVERY == 0:
            self._write_snapshot(session_id, new_state, seq)
        return new_state

    def _write_snapshot(self, session_id: str, state: SessionState, seq: int) -> None:
        doc = {"version": EVENT_LOG_VERSION, "seq": seq, "state": state.to_json()}
        try:
            self._snapshot_path(session_id).write_text(
                json.dumps(doc, ensure_ascii=False), encoding="utf-8"
            )
        except OSError as exc:
            raise StorageError(f"cannot write snapshot: {exc}") from exc

    def read_log(self, session_id: str) -> list[EventLogRecord]:
        if self.data_dir is None:
            raise StorageError("store has no persistence directory")
        path = self._log_path(session_id)
        if not path.exists():
            return []
        records = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(EventLogRecord.from_json(json.loads(line)))
        return records

    def replay(self, session_id: str) -> SessionState:
        """Rebuild the state purely from the event log (ignores snapshots)."""
        state = SessionState(id=session_id)
        for record in self.read_log(session_id):
            state = apply_event(state, record.kind, record.payload)
        return state


def _state_from_json(doc: dict) -> SessionState:
    requirements = doc.get("requirements")
    mode = doc.get("mode") or {"kind": MODE_NORMAL}
    return SessionState(
        id=doc["id"],
        transcript=tuple(doc.get("transcript", [])),
        requirements=None if requirements is None else tuple(requirements["items"]),
        requirements_confirmed=(
            requirements is not None and requirements.get("state") == "confirmed"
        ),
        program_source=doc.get("program"),
        pending_props=tuple(sorted(doc.get("pending_props", {}).items())),
        mode=mode.get("kind", MODE_NORMAL),
        debug_node_ids=tuple(mode.get("node_ids", [])),
        last_diff=doc.get("last_diff"),
    )
