"""WebSocket bridge between the backend and a (simulated or real) robot.

The wire format is versioned JSON text frames: an envelope with a
per-direction strictly increasing sequence number, a kind (command, event,
or ack), and a typed payload mirroring the robot command set and the
robot's reports. The simulated server implements the robot side; a real
robot adapter implements the same schema.
"""

from __future__ import annotations

import asyncio
import json
import threading
from dataclasses import dataclass, field

from websockets.sync.client import connect as ws_connect

from .runner import LocalBackend
from .world import EventScript, WorldModel

BRIDGE_VERSION = "bridge/v1"

COMMAND_TYPES = {"goto", "say", "ask", "queryHumanDetection", "armWakeWord"}
EVENT_TYPES = {"arrived", "utteranceHeard", "humanDetection", "wakeWordTriggered"}
KINDS = {"command", "event", "ack"}


class ProtocolError(Exception):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True)
class BridgeMessage:
    seq: int
    kind: str  # command | event | ack
    payload: dict

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ProtocolError(f"unknown kind {self.kind!r}")
        if self.kind == "command" and self.payload.get("type") not in COMMAND_TYPES:
            raise ProtocolError(f"unknown command type {self.payload.get('type')!r}")
        if self.kind == "event" and self.payload.get("type") not in EVENT_TYPES:
            raise ProtocolError(f"unknown event type {self.payload.get('type')!r}")


def encode_bridge(message: BridgeMessage) -> bytes:
    """Canonical UTF-8 JSON frame: sorted keys, compact separators."""
    doc = {"seq": message.seq, "kind": message.kind, "payload": message.payload}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def decode_bridge(data: bytes | str, last_seq: int | None = None) -> BridgeMessage:
    """Decode one frame; enforces seq progression when last_seq is given."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict) or not {"seq", "kind", "payload"} <= set(doc):
        raise ProtocolError("frame must be an object with seq, kind, payload")
    if not isinstance(doc["seq"], int):
        raise ProtocolError("seq must be an integer")
    message = BridgeMessage(seq=doc["seq"], kind=doc["kind"], payload=doc["payload"])
    if last_seq is not None and message.seq <= last_seq:
        raise ProtocolError(f"seq regression: {message.seq} after {last_seq}")
    return message


class BridgeChannel:
    """Stateful encode/decode for one peer: numbering out, checking in."""

    def __init__(self) -> None:
        self._next_seq = 1
        self._last_received: int | None = None

    def frame(self, kind: str, payload: dict) -> bytes:
        message = BridgeMessage(seq=self._next_seq, kind=kind, payload=payload)
        self._next_seq += 1
        return encode_bridge(message)

    def accept(self, data: bytes | str) -> BridgeMessage:
        message = decode_bridge(data, last_seq=self._last_received)
        self._last_received = message.seq
        return message


@dataclass
class BridgeServer:
    """One-controller simulated robot endpoint over WebSocket.

    time_scale maps virtual seconds to wall-clock seconds for demos;
    0 (the default) answers as fast as possible.
    """

    world: WorldModel
    script: EventScript
    host: str = "127.0.0.1"
    port: int = 0
    time_scale: float = 0.0
    _server: object = field(default=None, repr=False)
    _thread: threading.Thread | None = field(default=None, repr=False)
    _loop: asyncio.AbstractEventLoop | None = field(default=None, repr=False)
    _busy: bool = field(default=False, repr=False)

    def start(self) -> "BridgeServer":
        import websockets

        ready = threading.Event()

        async def main() -> None:
            self._loop = asyncio.get_running_loop()
            async with websockets.serve(self._handle, self.host, self.port) as server:
                self.port = server.sockets[0].getsockname()[1]
                ready.set()
                await asyncio.Future()

        def runner() -> None:
            try:
                asyncio.run(main())
            except (RuntimeError, asyncio.CancelledError):
                pass

        self._thread = threading.Thread(target=runner, daemon=True)
        self._thread.start()
        if not ready.wait(timeout=10):
            raise RuntimeError("bridge server failed to start (BindError)")
        return self

    def stop(self) -> None:
        if self._loop is not None:
            self._loop.call_soon_threadsafe(
                lambda: [task.cancel() for task in asyncio.all_tasks(self._loop)]
            )
        if self._thread is not None:
            self._thread.join(timeout=5)

    @property
    def address(self) -> str:
        return f"ws://{self.host}:{self.port}"

    async def _handle(self, connection) -> None:
        if self._busy:
            await connection.close(code=1013, reason="controller already connected")
            return
        self._busy = True
        backend = LocalBackend(self.world, self.script)
        channel = BridgeChannel()
        try:
            async for raw in connection:
                try:
                    message = channel.accept(raw)
                    if message.kind != "command":
                        raise ProtocolError(
                            f"peer may only send commands, got {message.kind}"
                        )
                    before = backend.now()
                    events = _apply_command(backend, message.payload)
                except ProtocolError as exc:
                    # The error travels in the close frame, then we hang up.
                    await connection.close(code=1002, reason=exc.reason[:120])
                    return
                await connection.send(
                    channel.frame("ack", {"acks": message.seq, "t": before}).decode("utf-8")
                )
                if self.time_scale > 0 and backend.now() > before:
                    await asyncio.sleep((backend.now() - before) * self.time_scale)
                for payload in events:
                    await connection.send(channel.frame("event", payload).decode("utf-8"))
        finally:
            self._busy = False
            # Disconnect aborts cleanly: virtual actions are atomic, so the
            # robot is already settled at a place.


def _apply_command(backend: LocalBackend, payload: dict) -> list[dict]:
    kind = payload["type"]
    if kind == "say":
        backend.say(payload.get("text", ""))
        return []
    if kind == "goto":
        _start, arrived = backend.goto(payload["place"])
        return [{"type": "arrived", "place": payload["place"], "t": arrived}]
    if kind == "ask":
        t, reply = backend.ask(payload.get("text", ""), float(payload.get("timeout", 10.0)))
        return [{"type": "utteranceHeard", "text": reply, "t": t}]
    if kind == "queryHumanDetection":
        t, present = backend.query_human()
        return [{"type": "humanDetection", "present": present, "t": t}]
    if kind == "armWakeWord":
        t, triggered = backend.arm_wake_word(payload.get("word", ""))
        return [
            {
                "type": "wakeWordTriggered",
                "word": payload.get("word") if triggered else None,
                "t": t,
            }
        ]
    raise ProtocolError(f"unknown command type {kind!r}")


def serve_bridge(
    world: WorldModel,
    script: EventScript,
    listen_address: tuple[str, int] = ("127.0.0.1", 0),
    time_scale: float = 0.0,
) -> BridgeServer:
    """Start the simulated robot's WebSocket endpoint; returns the server."""
    host, port = listen_address
    return BridgeServer(
        world=world, script=script, host=host, port=port, time_scale=time_scale
    ).start()


class TargetUnreachable(ConnectionError):
    pass


class BridgeBackend:
    """Action backend that drives a robot through the bridge protocol.

    ``recorder(direction, frame_text)`` observes every frame; it exists so
    protocol goldens can be captured and replayed byte-for-byte.
    """

    def __init__(self, address: str, open_timeout: float = 5.0, recorder=None):
        try:
            self._ws = ws_connect(address, open_timeout=open_timeout)
        except Exception as exc:
            raise TargetUnreachable(f"cannot reach bridge at {address}: {exc}") from exc
        self._channel = BridgeChannel()
        self._t = 0.0
        self._recorder = recorder

    def now(self) -> float:
        return self._t

    def close(self) -> None:
        try:
            self._ws.close()
        except Exception:
            pass

    def _send(self, text: str) -> None:
        if self._recorder is not None:
            self._recorder("send", text)
        self._ws.send(text)

    def _recv(self) -> str:
        raw = self._ws.recv()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        if self._recorder is not None:
            self._recorder("recv", text)
        return text

    def _call(self, payload: dict, expect_event: bool) -> dict | None:
        frame = self._channel.frame("command", payload)
        self._send(frame.decode("utf-8"))
        ack = self._channel.accept(self._recv())
        if ack.kind != "ack":
            raise ProtocolError(f"expected ack, got {ack.kind}")
        ack_t = float(ack.payload.get("t", self._t))
        if not expect_event:
            self._t = max(self._t, ack_t)
            return None
        event = self._channel.accept(self._recv())
        if event.kind != "event":
            raise ProtocolError(f"expected event, got {event.kind}")
        self._t = max(self._t, float(event.payload.get("t", self._t)))
        return event.payload

    def arm_wake_word(self, word: str) -> tuple[float, bool]:
        event = self._call({"type": "armWakeWord", "word": word}, expect_event=True)
        assert event is not None
        return self._t, event.get("word") is not None

    def goto(self, place: str) -> tuple[float, float]:
        start = self._t
        event = self._call({"type": "goto", "place": place}, expect_event=True)
        assert event is not None
        return start, self._t

    def say(self, text: str) -> float:
        self._call({"type": "say", "text": text}, expect_event=False)
        return self._t

    def ask(self, text: str, timeout: float) -> tuple[float, str | None]:
        event = self._call(
            {"type": "ask", "text": text, "timeout": timeout}, expect_event=True
        )
        assert event is not None
        return self._t, event.get("text")

    def query_human(self) -> tuple[float, bool]:
        event = self._call({"type": "queryHumanDetection"}, expect_event=True)
        assert event is not None
        return self._t, bool(event.get("present"))
