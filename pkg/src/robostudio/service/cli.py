"""Headless command-line interface.

Subcommands: author (replay a scripted authoring conversation and print
the final program), roundtrip (verify AST/Mermaid/JSON identity for a
program file), run (execute a program in the simulator and print its
trace), and serve (start the HTTP API, optionally with a bridge).
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from ..dsl import (
    emit_program,
    has_errors,
    parse_program,
    parse_program_strict,
    validate_program,
)
from ..flowchart import (
    ast_to_graph,
    emit_mermaid,
    graph_to_ast,
    graph_to_render_json,
    parse_mermaid,
    render_json_to_graph,
)
from ..orchestrator import OutcomeKind, ProviderConfig, scripted_provider
from ..sim import EventScript, WorldModel, run_program
from .config import ServiceConfig
from .session import SessionStore
from .workflows import SessionService


@click.group()
def main() -> None:
    """Robot-task programming studio."""


@main.command()
@click.option("--script", "script_path", required=True, type=click.Path(exists=True))
@click.option("--transcript", "transcript_path", required=True, type=click.Path(exists=True))
@click.option("--world", "world_path", type=click.Path(exists=True), default=None)
@click.option("--retries", type=int, default=2, show_default=True)
def author(script_path: str, transcript_path: str, world_path: str | None, retries: int) -> None:
    """Replay a scripted authoring session; print the final program."""
    provider = scripted_provider(script_path)
    world = WorldModel.from_file(world_path) if world_path else None
    store = SessionStore(None)
    service = SessionService(
        store=store,
        provider=provider,
        provider_config=ProviderConfig(max_repair_retries=retries),
        world=world,
    )
    state = service.create_session()
    turns = [
        line.strip()
        for line in Path(transcript_path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    for turn in turns:
        outcome, state = service.post_message(state.id, turn)
        click.echo(f"# user: {turn}", err=True)
        click.echo(f"# -> {outcome.kind.value}", err=True)
        if outcome.kind is OutcomeKind.FAILED:
            click.echo(f"chain failed: {outcome.failure_reason}", err=True)
            sys.exit(1)
    if state.program_source is None:
        click.echo("no program was generated", err=True)
        sys.exit(1)
    click.echo(state.program_source, nl=False)


@main.command()
@click.argument("program_file", type=click.Path(exists=True))
def roundtrip(program_file: str) -> None:
    """Verify AST <-> Mermaid <-> render-JSON identity for a program file."""
    source = Path(program_file).read_text(encoding="utf-8")
    parsed = parse_program(source)
    if isinstance(parsed, list):
        for diag in parsed:
            click.echo(str(diag), err=True)
        sys.exit(1)
    graph = ast_to_graph(parsed)
    mermaid_back = parse_mermaid(emit_mermaid(graph))
    if isinstance(mermaid_back, list) or mermaid_back != graph:
        click.echo("mermaid round trip mismatch", err=True)
        sys.exit(2)
    if graph_to_ast(mermaid_back) != parsed:
        click.echo("mermaid->ast round trip mismatch", err=True)
        sys.exit(2)
    render_back = render_json_to_graph(graph_to_render_json(graph))
    if isinstance(render_back, list) or render_back != graph:
        click.echo("render-json round trip mismatch", err=True)
        sys.exit(2)
    if graph_to_ast(render_back) != parsed:
        click.echo("render-json->ast round trip mismatch", err=True)
        sys.exit(2)
    if emit_program(parsed) != emit_program(parse_program_strict(emit_program(parsed))):
        click.echo("canonical text round trip mismatch", err=True)
        sys.exit(2)
    click.echo(f"{program_file}: round trips OK")


@main.command()
@click.option("--program", "program_path", required=True, type=click.Path(exists=True))
@click.option("--world", "world_path", required=True, type=click.Path(exists=True))
@click.option("--events", "events_path", type=click.Path(exists=True), default=None)
@click.option("--ask-timeout", type=float, default=10.0, show_default=True)
@click.option("--max-steps", type=int, default=10_000, show_default=True)
def run(
    program_path: str,
    world_path: str,
    events_path: str | None,
    ask_timeout: float,
    max_steps: int,
) -> None:
    """Execute a program in the simulator and print the trace."""
    program = parse_program_strict(Path(program_path).read_text(encoding="utf-8"))
    world = WorldModel.from_file(world_path)
    script = EventScript.from_file(events_path) if events_path else EventScript.empty()
    diags = validate_program(program, world.catalog())
    for diag in diags:
        click.echo(str(diag), err=True)
    if has_errors(diags):
        sys.exit(1)
    trace = run_program(
        program, world, script, ask_timeout=ask_timeout, max_steps=max_steps
    )
    for line in trace.to_lines():
        click.echo(line)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(config_path: str) -> None:
    """Start the API server (and the bridge endpoint when configured)."""
    import uvicorn

    from .api import create_app_from_config

    config = ServiceConfig.from_file(config_path)
    if config.bridge_host is not None:
        from ..sim import serve_bridge

        world = WorldModel.from_file(config.world_file) if config.world_file else None
        events = (
            EventScript.from_file(config.events_file)
            if config.events_file
            else EventScript.empty()
        )
        if world is None:
            click.echo("bridge requires world_file", err=True)
            sys.exit(1)
        bridge = serve_bridge(world, events, (config.bridge_host, config.bridge_port))
        click.echo(f"bridge listening on {bridge.address}", err=True)
    app = create_app_from_config(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


if __name__ == "__main__":
    main()
