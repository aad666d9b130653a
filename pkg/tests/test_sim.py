"""Simulator, bridge protocol, and deployment tests."""

from __future__ import annotations

import time

import pytest

from conftest import FIXTURES
from robostudio.dsl import parse_program_strict, validate_program
from robostudio.sim import (
    Bridge,
    BridgeChannel,
    BridgeMessage,
    EventScript,
    ProtocolError,
    Simulated,
    TargetUnreachable,
    UnknownPlaceError,
    WorldModel,
    decode_bridge,
    deploy,
    encode_bridge,
    run_program,
    serve_bridge,
    validate_trace,
)


def load_world() -> WorldModel:
    return WorldModel.from_file(FIXTURES / "worlds" / "office.json")


def load_fixture(name: str):
    return parse_program_strict((FIXTURES / "programs" / f"{name}.coco").read_text())


def load_events(name: str) -> EventScript:
    return EventScript.from_file(FIXTURES / "events" / f"{name}.json")


class TestWorld:
    def test_travel_time_positive(self):
        world = load_world()
        assert world.travel_time("Reception Area", "Exhibition Area") == 10.0
        assert world.travel_time("Reception Area", "Reception Area") == 0.0

    def test_duplicate_coordinates_rejected(self):
        doc = {
            "version": "world/v1",
            "places": [
                {"name": "A", "x": 0, "y": 0},
                {"name": "B", "x": 0, "y": 0},
            ],
        }
        with pytest.raises(Exception):
            WorldModel.from_dict(doc)

    def test_event_timestamps_must_be_ordered(self):
        doc = {
            "version": "events/v1",
            "events": [
                {"t": 5, "kind": "wakeWord", "word": "x"},
                {"t": 1, "kind": "wakeWord", "word": "y"},
            ],
        }
        with pytest.raises(Exception):
            EventScript.from_dict(doc)


class TestRunProgram:
    def test_straight_line(self):
        world = WorldModel.from_dict(
            {
                "version": "world/v1",
                "start": "A",
                "places": [
                    {"name": "A", "x": 3, "y": 0},
                    {"name": "B", "x": 0, "y": 0},
                ],
            }
        )
        program = parse_program_strict("goto: A\nsay: done\n")
        trace = run_program(program, world, EventScript.empty())
        assert trace.kinds() == ["MoveStarted", "MoveArrived", "Said", "Finished"]
        assert validate_trace(trace) == []

    def test_unknown_place_raises_when_validation_skipped(self):
        world = load_world()
        program = parse_program_strict("goto: Mars\n")
        assert validate_program(program, world.catalog())  # would have caught it
        with pytest.raises(UnknownPlaceError):
            run_program(program, world, EventScript.empty())

    def test_if_human_true_branch(self):
        world = load_world()
        world.set_person("Reception Area", True)
        program = parse_program_strict("if human:\n  say: hi\nelse:\n  say: bye\nend\n")
        trace = run_program(program, world, EventScript.empty())
        assert trace.kinds() == ["Detected", "BranchTaken", "Said", "Finished"]
        assert trace.entries[0].payload == {"present": True}
        assert trace.entries[1].payload == {"label": "yes"}
        assert trace.entries[2].payload == {"text": "hi"}

    def test_ask_matching_is_casefolded_substring(self):
        world = load_world()
        script = EventScript.from_dict(
            {
                "version": "events/v1",
                "events": [{"t": 1, "kind": "spokenReply", "text": "The EXHIBITION please"}],
            }
        )
        program = parse_program_strict(
            "ask-when: Where to?\nwhen exhibition:\n  say: ok\nelse:\n  say: hm\nend\n"
        )
        trace = run_program(program, world, script)
        assert trace.of_kind("BranchTaken")[0].payload == {"label": "exhibition"}
        assert trace.of_kind("Heard")[0].payload == {"text": "The EXHIBITION please"}

    def test_ask_timeout_takes_default(self):
        world = load_world()
        program = parse_program_strict(
            "ask-when: Where to?\nwhen exhibition:\n  say: ok\nelse:\n  say: fallback\nend\n"
        )
        trace = run_program(program, world, EventScript.empty(), ask_timeout=5.0)
        kinds = trace.kinds()
        assert kinds == ["Asked", "AskTimedOut", "BranchTaken", "Said", "Finished"]
        assert trace.of_kind("BranchTaken")[0].payload == {"label": "default"}
        assert trace.of_kind("Said")[0].t == 5.0  # timeout advanced virtual time

    def test_wake_word_blocks_until_match(self):
        world = load_world()
        program = load_fixture("training1")
        trace = run_program(program, world, load_events("training1"))
        assert trace.entries[0].kind == "Armed"
        assert trace.entries[1].kind == "Triggered"
        assert trace.entries[1].t == 1.0

    def test_missing_wake_word_times_out(self):
        world = load_world()
        program = load_fixture("training1")
        trace = run_program(program, world, EventScript.empty())
        assert trace.kinds() == ["Armed", "TimedOut"]

    def test_task1_patrol(self):
        world = load_world()
        trace = run_program(load_fixture("task1"), world, load_events("task1"))
        arrived = [e.payload["place"] for e in trace.of_kind("MoveArrived")]
        assert len(arrived) == 4
        assert len(set(arrived)) == 4  # no repeated place
        saids = trace.of_kind("Said")
        assert len(saids) == 4
        assert validate_trace(trace) == []

    def test_task2_routes_differ_by_reply(self):
        world = load_world()
        program = load_fixture("task2")
        full = run_program(program, world, load_events("task2_full"))
        highlights = run_program(program, world, load_events("task2_highlights"))
        full_route = [e.payload["place"] for e in full.of_kind("MoveArrived")]
        short_route = [e.payload["place"] for e in highlights.of_kind("MoveArrived")]
        assert full_route != short_route
        assert "Multimedia Studio" in full_route
        assert "Multimedia Studio" not in short_route

    def test_task3_unknown_visitor_default_branch(self):
        world = load_world()
        program = load_fixture("task3")
        trace = run_program(program, world, load_events("task3_unknown"))
        assert trace.of_kind("BranchTaken")[0].payload == {"label": "default"}
        assert not trace.of_kind("MoveArrived")

    def test_forever_hits_step_budget(self):
        world = load_world()
        program = parse_program_strict("forever:\n  say: hi\nend\n")
        trace = run_program(program, world, EventScript.empty(), max_steps=50)
        assert trace.entries[-1].kind == "TimedOut"
        assert validate_trace(trace) == []

    def test_determinism(self):
        world = load_world()
        program = load_fixture("task2")
        t1 = run_program(program, world, load_events("task2_full"))
        t2 = run_program(program, world, load_events("task2_full"))
        assert t1.to_json() == t2.to_json()

    def test_all_fixture_traces_are_well_formed(self):
        world = load_world()
        pairs = [
            ("training1", "training1"),
            ("training2", "training2"),
            ("task1", "task1"),
            ("task2", "task2_full"),
            ("task2", "task2_highlights"),
            ("task3", "task3_known"),
            ("task3", "task3_unknown"),
        ]
        for prog_name, events_name in pairs:
            trace = run_program(load_fixture(prog_name), world, load_events(events_name))
            assert validate_trace(trace) == [], (prog_name, events_name)


class TestBridgeCodec:
    def test_encode_decode_identity_all_kinds(self):
        samples = [
            BridgeMessage(1, "command", {"type": "goto", "place": "Lab"}),
            BridgeMessage(2, "command", {"type": "say", "text": "hi"}),
            BridgeMessage(3, "command", {"type": "ask", "text": "q", "timeout": 10.0}),
            BridgeMessage(4, "command", {"type": "queryHumanDetection"}),
            BridgeMessage(5, "command", {"type": "armWakeWord", "word": "go"}),
            BridgeMessage(6, "event", {"type": "arrived", "place": "Lab", "t": 4.0}),
            BridgeMessage(7, "event", {"type": "utteranceHeard", "text": None, "t": 9.0}),
            BridgeMessage(8, "event", {"type": "humanDetection", "present": True, "t": 1.0}),
            BridgeMessage(9, "event", {"type": "wakeWordTriggered", "word": "go", "t": 0.0}),
            BridgeMessage(10, "ack", {"acks": 5, "t": 0.0}),
        ]
        for message in samples:
            assert decode_bridge(encode_bridge(message)) == message

    def test_unknown_kind(self):
        with pytest.raises(ProtocolError):
            decode_bridge(b'{"seq": 1, "kind": "gossip", "payload": {}}')

    def test_malformed_json(self):
        with pytest.raises(ProtocolError):
            decode_bridge(b"{nope")

    def test_seq_regression(self):
        channel = BridgeChannel()
        channel.accept(encode_bridge(BridgeMessage(5, "ack", {"acks": 1})))
        with pytest.raises(ProtocolError) as info:
            channel.accept(encode_bridge(BridgeMessage(4, "ack", {"acks": 2})))
        assert "regression" in str(info.value)


class TestBridgeServer:
    def test_say_gets_ack_and_no_event(self):
        from websockets.sync.client import connect

        server = serve_bridge(load_world(), EventScript.empty())
        try:
            with connect(server.address) as ws:
                channel = BridgeChannel()
                ws.send(channel.frame("command", {"type": "say", "text": "hi"}).decode())
                ack = channel.accept(ws.recv())
                assert ack.kind == "ack" and ack.payload["acks"] == 1
                ws.send(
                    channel.frame(
                        "command", {"type": "queryHumanDetection"}
                    ).decode()
                )
                ack2 = channel.accept(ws.recv())
                assert ack2.kind == "ack"
                event = channel.accept(ws.recv())
                assert event.kind == "event"
                assert event.payload["type"] == "humanDetection"
        finally:
            server.stop()

    def test_goto_ack_then_arrived(self):
        from websockets.sync.client import connect

        server = serve_bridge(load_world(), EventScript.empty())
        try:
            with connect(server.address) as ws:
                channel = BridgeChannel()
                ws.send(
                    channel.frame("command", {"type": "goto", "place": "Exhibition Area"}).decode()
                )
                ack = channel.accept(ws.recv())
                event = channel.accept(ws.recv())
                assert ack.kind == "ack" and ack.payload["t"] == 0.0
                assert event.payload == {"type": "arrived", "place": "Exhibition Area", "t": 10.0}
        finally:
            server.stop()

    def test_bridge_equivalence_all_fixtures(self):
        pairs = [
            ("training1", "training1"),
            ("training2", "training2"),
            ("task1", "task1"),
            ("task2", "task2_full"),
            ("task3", "task3_unknown"),
        ]
        for prog_name, events_name in pairs:
            program = load_fixture(prog_name)
            world, script = load_world(), load_events(events_name)
            direct = run_program(program, world, script)
            server = serve_bridge(world, script)
            try:
                handle = deploy(program, Bridge(server.address))
                via_bridge = handle.wait(timeout=30)
            finally:
                server.stop()
            assert via_bridge.to_json() == direct.to_json(), (prog_name, events_name)


class TestDeploy:
    def test_simulated_deploy_and_trace_stream(self):
        world = load_world()
        handle = deploy(
            load_fixture("task1"), Simulated(world, load_events("task1"))
        )
        kinds = [e.kind for e in handle.events(timeout=10)]
        assert kinds[-1] == "Finished"
        assert kinds.count("MoveArrived") == 4

    def test_deploy_returns_quickly_and_first_event_fast(self):
        world = load_world()
        started = time.perf_counter()
        handle = deploy(load_fixture("task1"), Simulated(world, load_events("task1")))
        q = handle.subscribe()
        first = q.get(timeout=5)
        elapsed = time.perf_counter() - started
        assert elapsed < 0.05, f"deploy-to-first-event took {elapsed * 1000:.1f} ms"
        assert getattr(first, "kind", None) is not None
        handle.wait(timeout=10)

    def test_cancel_marks_trace(self):
        world = load_world()
        program = parse_program_strict("forever:\n  say: hi\nend\n")
        handle = deploy(program, Simulated(world, EventScript.empty()))
        handle.cancel()
        trace = handle.wait(timeout=10)
        assert trace.entries[-1].kind == "Cancelled"
        assert validate_trace(trace) == []

    def test_unreachable_bridge(self):
        with pytest.raises(TargetUnreachable):
            deploy(load_fixture("training1"), Bridge("ws://127.0.0.1:1"))
