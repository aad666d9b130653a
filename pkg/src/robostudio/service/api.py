"""REST + WebSocket API for the studio UI.

Request/response operations are REST; server push (chain outcomes,
diffs, run traces) flows over one WebSocket per session. State-changing
calls serialize per session inside the service layer.
"""

from __future__ import annotations

import asyncio
import queue

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from ..orchestrator import OutcomeKind, ProviderConfig, provider_from_config
from ..sim import EventScript, WorldModel
from .config import ServiceConfig
from .session import SessionStore, StorageError, UnknownSession
from .workflows import ServiceError, SessionService


def create_service(config: ServiceConfig) -> SessionService:
    store = SessionStore(config.data_dir)
    provider = provider_from_config(config.provider)
    world = WorldModel.from_file(config.world_file) if config.world_file else None
    events = (
        EventScript.from_file(config.events_file)
        if config.events_file
        else EventScript.empty()
    )
    return SessionService(
        store=store,
        provider=provider,
        provider_config=config.provider,
        world=world,
        events=events,
    )


def create_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="robostudio", version="0.1.0")
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def service_error(_request, exc: ServiceError):
        status = {
            "NoProgramYet": 409,
            "NotInDebugMode": 409,
            "UnknownNodeId": 404,
            "UnknownRun": 404,
            "TargetUnreachable": 502,
        }.get(exc.code, 422)
        return JSONResponse(status_code=status, content=exc.to_json())

    @app.exception_handler(UnknownSession)
    async def unknown_session(_request, exc: UnknownSession):
        return JSONResponse(
            status_code=404, content={"error": "UnknownSession", "message": str(exc)}
        )

    @app.exception_handler(StorageError)
    async def storage_error(_request, exc: StorageError):
        return JSONResponse(
            status_code=500, content={"error": "StorageError", "message": str(exc)}
        )

    @app.post("/sessions", status_code=201)
    def create_session():
        return {"session": service.create_session().to_json()}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return {"session": service.get_session(session_id).to_json()}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: dict):
        text = str(body.get("text", "")).strip()
        if not text:
            raise ServiceError("BadRequest", "message text must be non-empty")
        outcome, state = service.post_message(session_id, text)
        status = 502 if outcome.kind is OutcomeKind.FAILED else 200
        return JSONResponse(
            status_code=status,
            content={"outcome": outcome.to_payload(), "session": state.to_json()},
        )

    @app.get("/sessions/{session_id}/flowchart")
    def get_flowchart(session_id: str):
        graph, diff = service.get_flowchart(session_id)
        return {"graph": graph, "diff": diff}

    @app.put("/sessions/{session_id}/flowchart")
    def sync_change(session_id: str, body: dict):
        diff, state = service.sync_change(session_id, body.get("graph"))
        return {"diff": diff.to_payload(), "session": state.to_json()}

    @app.post("/sessions/{session_id}/magic-debug")
    def magic_debug_start(session_id: str, body: dict):
        node_ids = [str(i) for i in body.get("node_ids", [])]
        explanation, state = service.magic_debug_start(session_id, node_ids)
        return {"explanation": explanation, "session": state.to_json()}

    @app.delete("/sessions/{session_id}/magic-debug")
    def magic_debug_end(session_id: str):
        return {"session": service.magic_debug_end(session_id).to_json()}

    @app.post("/sessions/{session_id}/deploy")
    def deploy(session_id: str, body: dict):
        run_id = service.deploy_session(
            session_id,
            target=str(body.get("target", "simulated")),
            address=body.get("address"),
        )
        return {"run_id": run_id}

    @app.get("/sessions/{session_id}/runs/{run_id}/trace")
    def run_trace(session_id: str, run_id: str, timeout: float = 30.0):
        handle = service.run_handle(run_id)
        trace = handle.wait(timeout=timeout)
        return {"trace": trace.to_json()}

    @app.delete("/sessions/{session_id}/runs/{run_id}")
    def cancel_run(session_id: str, run_id: str):
        service.run_handle(run_id).cancel()
        return {"cancelled": run_id}

    @app.websocket("/sessions/{session_id}/events")
    async def events(websocket: WebSocket, session_id: str, after: int = 0):
        try:
            service.get_session(session_id)
        except UnknownSession:
            await websocket.close(code=4404, reason="unknown session")
            return
        await websocket.accept()
        bus = service.bus(session_id)
        q = bus.subscribe(after=after)
        loop = asyncio.get_running_loop()
        try:
            while True:
                try:
                    envelope = await loop.run_in_executor(None, lambda: q.get(timeout=0.5))
                except queue.Empty:
                    # Heartbeat keeps disconnect detection responsive.
                    await asyncio.sleep(0)
                    continue
                await websocket.send_json(envelope)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            bus.unsubscribe(q)

    return app


def create_app_from_config(config: ServiceConfig) -> FastAPI:
    return create_app(create_service(config))
