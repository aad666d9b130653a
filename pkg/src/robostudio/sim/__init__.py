"""Robot simulator: world model, virtual-time runner, bridge, deployment."""

from .bridge import (
    BRIDGE_VERSION,
    BridgeBackend,
    BridgeChannel,
    BridgeMessage,
    BridgeServer,
    ProtocolError,
    TargetUnreachable,
    decode_bridge,
    encode_bridge,
    serve_bridge,
)
from .deploy import Bridge, RunHandle, Simulated, deploy
from .runner import (
    DEFAULT_ASK_TIMEOUT,
    DEFAULT_MAX_STEPS,
    ActionBackend,
    ExecutionTrace,
    Interpreter,
    LocalBackend,
    TraceEntry,
    match_arm,
    run_program,
    validate_trace,
)
from .world import (
    EventScript,
    Place,
    ScriptEvent,
    UnknownPlaceError,
    WorldError,
    WorldModel,
)

__all__ = [
    "ActionBackend",
    "BRIDGE_VERSION",
    "Bridge",
    "BridgeBackend",
    "BridgeChannel",
    "BridgeMessage",
    "BridgeServer",
    "DEFAULT_ASK_TIMEOUT",
    "DEFAULT_MAX_STEPS",
    "EventScript",
    "ExecutionTrace",
    "Interpreter",
    "LocalBackend",
    "Place",
    "ProtocolError",
    "RunHandle",
    "ScriptEvent",
    "Simulated",
    "TargetUnreachable",
    "TraceEntry",
    "UnknownPlaceError",
    "WorldError",
    "WorldModel",
    "decode_bridge",
    "encode_bridge",
    "match_arm",
    "run_program",
    "serve_bridge",
    "validate_trace",
]
