#!/usr/bin/env python3
"""Regenerate frozen fixture files: provider scripts, golden traces,
golden mermaid, and bridge protocol frames.

Run from the repository root after changing emitters or fixtures:

    python3 tools/make_fixtures.py

Outputs are committed; tests compare against them byte-for-byte.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT / "src"))

from robostudio.dsl import canonicalize, parse_program_strict  # noqa: E402
from robostudio.flowchart import ast_to_graph, emit_mermaid  # noqa: E402
from robostudio.sim import (  # noqa: E402
    Bridge,
    EventScript,
    WorldModel,
    deploy,
    run_program,
    serve_bridge,
)

FIXTURES = ROOT / "fixtures"


def program_text(name: str) -> str:
    text = (FIXTURES / "programs" / f"{name}.coco").read_text(encoding="utf-8")
    if canonicalize(text) != text:
        raise SystemExit(f"fixture program {name} is not canonical")
    return text


def mermaid_of(source: str) -> str:
    return emit_mermaid(ast_to_graph(parse_program_strict(source)))


def generation_response(source: str, explanation: str) -> str:
    return (
        f"<code>\n{source}</code>\n"
        f"<explanation>{explanation}</explanation>\n"
        f"<flowchart>\n{mermaid_of(source)}</flowchart>"
    )


def write_script(name: str, entries: list[tuple[str | int, str]]) -> None:
    doc = {
        "version": "providerScript/v1",
        "entries": [{"match": m, "response": r} for m, r in entries],
    }
    path = FIXTURES / "scripts" / f"{name}.json"
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {path.relative_to(ROOT)}")


def write_transcript(name: str, turns: list[str]) -> None:
    path = FIXTURES / "transcripts" / f"{name}.txt"
    path.write_text("\n".join(turns) + "\n", encoding="utf-8")
    print(f"wrote {path.relative_to(ROOT)}")


SCENARIOS = {
    "training1": {
        "describe": (
            "I want a guidance service. When I say guide me, take the visitor "
            "to the Exhibition Area and then return to the Reception Area."
        ),
        "requirements": [
            'Wait for the wake word "guide me".',
            "Guide the visitor to the Exhibition Area and announce the arrival.",
            "Return to the Reception Area and report back.",
        ],
        "explanation": (
            "After hearing the wake word, the robot guides the visitor to the "
            "Exhibition Area, announces the stop, and returns to the Reception Area."
        ),
    },
    "training2": {
        "describe": (
            "Create a service that greets people nearby and asks if they need "
            "navigation help, then guides them if they say yes."
        ),
        "requirements": [
            "Greet any person who is nearby.",
            "Ask whether they need navigation help.",
            "Guide them to the Exhibition Area when they say yes, otherwise wish them a nice day.",
        ],
        "explanation": (
            "When a person is detected the robot greets them, asks if they need "
            "navigation help, and either guides them to the Exhibition Area or "
            "wishes them a nice day."
        ),
    },
    "task1": {
        "describe": (
            "Program the robot to patrol the office after hours. When I say start "
            "patrol it should visit the Office Area, Meeting Room, Lab, and "
            "Reception Area once each and remind anyone remaining to leave."
        ),
        "requirements": [
            'Start patrolling on the wake word "start patrol".',
            "Visit the Office Area, Meeting Room, Lab, and Reception Area exactly once, in an order without repetition.",
            "At every stop, remind remaining employees that the office is closed.",
        ],
        "explanation": (
            "On the wake word the robot patrols four locations in one pass and "
            "plays a leave reminder at each stop."
        ),
    },
    "task2": {
        "describe": (
            "Design a tour guide service for visitors. On start the tour it should "
            "offer a full tour of the Exhibition Area and the Multimedia Studio or "
            "just the highlights, then finish at the Reception Area."
        ),
        "requirements": [
            'Begin the tour on the wake word "start the tour".',
            "Offer the visitor a full tour or a highlights tour and follow their choice.",
            "Introduce the dual-arm robot in the Exhibition Area and, on the full tour, the mixed-reality platform in the Multimedia Studio.",
            "Conclude the tour back at the Reception Area.",
        ],
        "explanation": (
            "The robot welcomes visitors, asks which tour they want, walks the "
            "chosen route with introductions, and closes the tour at the reception."
        ),
    },
    "task3": {
        "describe": (
            "Build a visitor guidance service. Employees schedule visitors in "
            "advance; when a visitor arrives and gives their name, guide known "
            "visitors to their destination and apologize to unknown visitors."
        ),
        "requirements": [
            'Start on the wake word "visitor service" and ask the visitor for their name.',
            "Guide Jack to the Meeting Room for the air conditioning repair.",
            "Guide Mary to the Exhibition Area.",
            "Apologize to unknown visitors and refer them to the reception desk.",
        ],
        "explanation": (
            "The robot asks arriving visitors for their name, escorts scheduled "
            "visitors to their destination, and politely redirects unknown ones."
        ),
    },
}


def scenario_scripts() -> None:
    for name, scenario in SCENARIOS.items():
        source = program_text(name)
        requirements = "\n".join(
            f"{i + 1}. {r}" for i, r in enumerate(scenario["requirements"])
        )
        entries: list[tuple[str | int, str]] = [
            (scenario["describe"][:40], f"<requirements>\n{requirements}\n</requirements>"),
            ("that is right", "<answer>CONFIRMED</answer>"),
            ("program generator", generation_response(source, scenario["explanation"])),
            (
                "flowchart synchronized",
                f"<explanation>{scenario['explanation']}</explanation>",
            ),
        ]
        write_script(f"{name}_author", entries)
        write_transcript(
            name, [scenario["describe"], "Yes, that is right, please go ahead."]
        )


E2E_V2 = """userRequest: guide me
goto: Exhibition Area
say: Here we are at the exhibition area.
say: Thank you for visiting us today!
goto: Reception Area
say: I am back at the reception area.
"""

E2E_V3 = """userRequest: guide me
say: Please follow me.
goto: Exhibition Area
say: Here we are at the exhibition area.
say: Thank you for visiting us today!
goto: Reception Area
say: I am back at the reception area. You are always welcome back!
"""

E2E_V4 = """userRequest: guide me
say: Please follow me.
goto: Exhibition Area
say: Here we are at the exhibition area.
say: Thank you so much for visiting us today, it was a pleasure!
goto: Reception Area
say: I am back at the reception area. You are always welcome back!
"""


def e2e_script() -> None:
    training1 = program_text("training1")
    for text in (E2E_V2, E2E_V3, E2E_V4):
        if canonicalize(text) != text:
            raise SystemExit("e2e program stage is not canonical")
    debug_response = (
        f"<code>\n{E2E_V4}</code>\n"
        "<explanation>The thank-you is much more enthusiastic now.</explanation>\n"
        f"<flowchart>\n{mermaid_of(E2E_V4)}</flowchart>\n"
        "<modified_nodes>n5</modified_nodes>"
    )
    entries: list[tuple[str | int, str]] = [
        (
            "I need a guidance service",
            "<requirements>\n1. Wait for the wake word \"guide me\".\n"
            "2. Guide the visitor to the Exhibition Area and announce the arrival.\n"
            "3. Return to the Reception Area and report back.\n</requirements>",
        ),
        ("please go ahead", "<answer>CONFIRMED</answer>"),
        (
            "program generator",
            generation_response(
                training1,
                "After the wake word the robot guides the visitor to the "
                "Exhibition Area and returns to the Reception Area.",
            ),
        ),
        (
            "thank the visitor",
            generation_response(
                E2E_V2,
                "The robot now thanks the visitor before returning to the reception.",
            ),
        ),
        (
            "always welcome back",
            "<code>say: I am back at the reception area. You are always welcome back!</code>",
        ),
        (
            "flowchart synchronized",
            "<explanation>The robot asks the visitor to follow, gives the tour, "
            "thanks them, and reports back with a welcome-back note.</explanation>",
        ),
        (
            "Explain the selected nodes",
            "<answer>The node `say: Thank you for visiting us today!` thanks the "
            "visitor right before the robot returns to the reception.</answer>",
        ),
        ("more enthusiastic", debug_response),
    ]
    write_script("e2e_full", entries)
    golden = FIXTURES / "golden"
    golden.mkdir(exist_ok=True)
    (golden / "e2e_final.coco").write_text(E2E_V4, encoding="utf-8")
    (golden / "e2e_stage2.coco").write_text(E2E_V2, encoding="utf-8")
    (golden / "e2e_stage3.coco").write_text(E2E_V3, encoding="utf-8")
    print("wrote fixtures/golden/e2e_*.coco")


TRACE_RUNS = [
    ("training1", "training1"),
    ("training2", "training2"),
    ("task1", "task1"),
    ("task2", "task2_full"),
    ("task2", "task2_highlights"),
    ("task3", "task3_known"),
    ("task3", "task3_unknown"),
]


def golden_traces_and_mermaid() -> None:
    world = WorldModel.from_file(FIXTURES / "worlds" / "office.json")
    traces_dir = FIXTURES / "golden" / "traces"
    mermaid_dir = FIXTURES / "golden" / "mermaid"
    traces_dir.mkdir(parents=True, exist_ok=True)
    mermaid_dir.mkdir(parents=True, exist_ok=True)
    for program_name, events_name in TRACE_RUNS:
        program = parse_program_strict(program_text(program_name))
        script = EventScript.from_file(FIXTURES / "events" / f"{events_name}.json")
        trace = run_program(program, world, script)
        path = traces_dir / f"{events_name}.json"
        path.write_text(
            json.dumps(trace.to_json(), indent=1, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        print(f"wrote {path.relative_to(ROOT)}")
    for name in SCENARIOS:
        path = mermaid_dir / f"{name}.mmd"
        path.write_text(mermaid_of(program_text(name)), encoding="utf-8")
        print(f"wrote {path.relative_to(ROOT)}")


def golden_bridge_frames() -> None:
    from robostudio.sim.bridge import BridgeBackend
    from robostudio.sim.runner import Interpreter

    world = WorldModel.from_file(FIXTURES / "worlds" / "office.json")
    script = EventScript.from_file(FIXTURES / "events" / "task1.json")
    program = parse_program_strict(program_text("task1"))
    frames: list[dict] = []
    server = serve_bridge(world, script)
    try:
        backend = BridgeBackend(
            server.address, recorder=lambda d, f: frames.append({"dir": d, "frame": f})
        )
        Interpreter(program, backend).run()
    finally:
        server.stop()
    path = FIXTURES / "golden" / "bridge_frames_task1.jsonl"
    path.write_text(
        "\n".join(json.dumps(f, ensure_ascii=False) for f in frames) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {path.relative_to(ROOT)} ({len(frames)} frames)")


if __name__ == "__main__":
    scenario_scripts()
    e2e_script()
    golden_traces_and_mermaid()
    golden_bridge_frames()
    print("done")
