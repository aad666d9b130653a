"""LLM orchestration: preambles, chains, tag routing, and providers."""

from .chains import (
    ChainContext,
    ChainOutcome,
    ChainSpec,
    ChainStep,
    FunctionKind,
    OutcomeKind,
    build_chain_specs,
    run_chain,
)
from .preamble import (
    MissingSlot,
    PromptPreamble,
    assemble_prompt,
    load_preamble,
    parse_preamble_text,
)
from .providers import (
    LiveProvider,
    Provider,
    ProviderConfig,
    ProviderError,
    ProviderTimeout,
    ScriptedProvider,
    live_provider,
    provider_from_config,
    scripted_provider,
)
from .tags import (
    TAG_VOCABULARY,
    AmbiguousIntentError,
    Intent,
    RepairNeeded,
    TaggedResponse,
    TagSegment,
    detect_intent,
    parse_tagged_output,
)

__all__ = [
    "AmbiguousIntentError",
    "ChainContext",
    "ChainOutcome",
    "ChainSpec",
    "ChainStep",
    "FunctionKind",
    "Intent",
    "LiveProvider",
    "MissingSlot",
    "OutcomeKind",
    "PromptPreamble",
    "Provider",
    "ProviderConfig",
    "ProviderError",
    "ProviderTimeout",
    "RepairNeeded",
    "ScriptedProvider",
    "TAG_VOCABULARY",
    "TagSegment",
    "TaggedResponse",
    "assemble_prompt",
    "build_chain_specs",
    "detect_intent",
    "live_provider",
    "load_preamble",
    "parse_preamble_text",
    "parse_tagged_output",
    "provider_from_config",
    "run_chain",
    "scripted_provider",
]
