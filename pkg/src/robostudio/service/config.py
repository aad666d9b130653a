"""Service configuration file loading."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..orchestrator import ProviderConfig


@dataclass(frozen=True)
class ServiceConfig:
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    world_file: str | None = None
    events_file: str | None = None
    data_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    bridge_host: str | None = None  # also start a simulated-robot bridge
    bridge_port: int = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        provider_doc = doc.get("provider", {})
        provider = ProviderConfig(
            kind=provider_doc.get("kind", "scripted"),
            script_path=provider_doc.get("script_path"),
            base_url=provider_doc.get("base_url"),
            model=provider_doc.get("model", "gpt-4"),
            api_key_env=provider_doc.get("api_key_env", "ROBOSTUDIO_API_KEY"),
            max_repair_retries=int(provider_doc.get("max_repair_retries", 2)),
            timeout=float(provider_doc.get("timeout", 30.0)),
        )
        return cls(
            provider=provider,
            world_file=doc.get("world_file"),
            events_file=doc.get("events_file"),
            data_dir=doc.get("data_dir"),
            host=doc.get("host", "127.0.0.1"),
            port=int(doc.get("port", 8000)),
            bridge_host=doc.get("bridge_host"),
            bridge_port=int(doc.get("bridge_port", 0)),
        )
