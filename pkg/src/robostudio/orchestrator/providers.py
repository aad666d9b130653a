"""Model providers: a deterministic scripted stub and a live HTTP adapter.

The scripted provider replays canned responses matched by substring or
call ordinal, which makes every chain test and golden transcript fully
deterministic and offline. The live provider speaks a generic
chat-completion HTTP API and is configured via environment credentials.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

SCRIPT_VERSION = "providerScript/v1"


class ProviderError(Exception):
    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class ProviderTimeout(ProviderError):
    pass


class Provider(Protocol):
    def complete(self, messages: list[dict[str, str]], timeout: float) -> str: ...


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "scripted"  # "scripted" | "live"
    script_path: str | None = None
    base_url: str | None = None
    model: str = "gpt-4"
    api_key_env: str = "ROBOSTUDIO_API_KEY"
    max_repair_retries: int = 2
    timeout: float = 30.0
    # Oldest turns are dropped beyond this count (None forwards everything).
    max_transcript_turns: int | None = None

    def __post_init__(self) -> None:
        if self.max_repair_retries < 0:
            raise ValueError("max_repair_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_transcript_turns is not None and self.max_transcript_turns < 1:
            raise ValueError("max_transcript_turns must be >= 1 when set")


@dataclass
class ScriptEntry:
    match: str | int  # substring of the prompt, or 1-based call ordinal
    response: str
    used: bool = field(default=False, compare=False)


class ScriptedProvider:
    """Replays scripted responses; first unused matching entry wins."""

    def __init__(self, entries: list[ScriptEntry]):
        self.entries = entries
        self.calls = 0

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str | int, str]]) -> "ScriptedProvider":
        return cls([ScriptEntry(match=m, response=r) for m, r in pairs])

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("version") != SCRIPT_VERSION:
            raise ProviderError(
                f"unsupported script version {doc.get('version')!r}; expected {SCRIPT_VERSION}"
            )
        entries = [
            ScriptEntry(match=e["match"], response=e["response"]) for e in doc["entries"]
        ]
        return cls(entries)

    def complete(self, messages: list[dict[str, str]], timeout: float) -> str:
        self.calls += 1
        prompt = "\n".join(m.get("content", "") for m in messages)
        for entry in self.entries:
            if entry.used:
                continue
            if isinstance(entry.match, int):
                if entry.match == self.calls:
                    entry.used = True
                    return entry.response
            elif entry.match in prompt:
                entry.used = True
                return entry.response
        raise ProviderError(
            f"scripted provider exhausted: no entry matches call {self.calls}"
        )


class LiveProvider:
    """Adapter for a chat-completion HTTP endpoint (bearer-token auth)."""

    def __init__(self, base_url: str, model: str, api_key: str):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key

    def complete(self, messages: list[dict[str, str]], timeout: float) -> str:
        try:
            response = httpx.post(
                f"{self.base_url}/chat/completions",
                json={"model": self.model, "messages": messages},
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=timeout,
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"provider call timed out after {timeout}s") from exc
        except httpx.TransportError as exc:
            raise ProviderError(f"provider transport failure: {exc}") from exc
        if response.status_code != 200:
            raise ProviderError(
                f"provider returned HTTP {response.status_code}", status=response.status_code
            )
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc


def scripted_provider(script: list[tuple[str | int, str]] | str | Path) -> ScriptedProvider:
    """Build the deterministic stub from pairs or a script file path."""
    if isinstance(script, (str, Path)):
        return ScriptedProvider.from_file(script)
    return ScriptedProvider.from_pairs(script)


def live_provider(config: ProviderConfig) -> LiveProvider:
    """Build the HTTP adapter from config + environment credential."""
    if not config.base_url:
        raise ProviderError("live provider requires base_url")
    api_key = os.environ.get(config.api_key_env, "")
    if not api_key:
        raise ProviderError(f"environment variable {config.api_key_env} is not set")
    return LiveProvider(base_url=config.base_url, model=config.model, api_key=api_key)


def provider_from_config(config: ProviderConfig) -> Provider:
    if config.kind == "scripted":
        if not config.script_path:
            raise ProviderError("scripted provider requires script_path")
        return ScriptedProvider.from_file(config.script_path)
    if config.kind == "live":
        return live_provider(config)
    raise ProviderError(f"unknown provider kind {config.kind!r}")
