/**
 * UI state-machine tests: the button-enablement invariants hold across a
 * scripted event sequence covering every transition.
 */

import { describe, expect, it } from "vitest";

import { SessionView, ViewEvent } from "../src/state.js";
import { sampleGraph, sampleSession } from "./helpers.js";

function freshView(): SessionView {
  const view = new SessionView();
  view.apply({ type: "session", session: sampleSession() });
  view.apply({ type: "serverGraph", graph: sampleGraph(), diff: null });
  return view;
}

function editedGraph() {
  const graph = sampleGraph();
  graph.nodes[2].props.description = "changed";
  return graph;
}

describe("button enablement invariants", () => {
  it("Sync Change is enabled iff the view is dirty", () => {
    const view = freshView();
    expect(view.dirty).toBe(false);
    expect(view.canSyncChange).toBe(false);

    view.apply({ type: "localEdit", graph: editedGraph() });
    expect(view.dirty).toBe(true);
    expect(view.canSyncChange).toBe(true);

    view.apply({ type: "syncStarted" });
    expect(view.canSyncChange).toBe(false); // in-flight sync disables it

    view.apply({
      type: "syncOk",
      diff: {
        added_nodes: [],
        removed_nodes: [],
        relabeled_nodes: ["n2"],
        added_edges: [],
        removed_edges: [],
      },
    });
    expect(view.dirty).toBe(false);
    expect(view.canSyncChange).toBe(false);
  });

  it("failed sync keeps the dirty flag and offenders highlighted", () => {
    const view = freshView();
    view.apply({ type: "localEdit", graph: editedGraph() });
    view.apply({ type: "syncStarted" });
    view.apply({ type: "syncRejected", offendingNodes: ["n2"] });
    expect(view.dirty).toBe(true);
    expect(view.canSyncChange).toBe(true);
    expect(view.offendingNodes).toEqual(["n2"]);
  });

  it("Magic Debug is enabled iff the selection is non-empty", () => {
    const view = freshView();
    expect(view.canMagicDebug).toBe(false);

    view.apply({ type: "select", id: "n1", additive: false });
    expect(view.canMagicDebug).toBe(true);

    view.apply({ type: "select", id: "n2", additive: true });
    expect(view.selection.size).toBe(2);
    expect(view.canMagicDebug).toBe(true);

    view.apply({ type: "select", id: "n1", additive: true }); // toggle off
    view.apply({ type: "select", id: "n2", additive: true }); // toggle off
    expect(view.selection.size).toBe(0);
    expect(view.canMagicDebug).toBe(false);
  });

  it("debug mode disables Magic Debug until exit", () => {
    const view = freshView();
    view.apply({ type: "select", id: "n1", additive: false });
    view.apply({ type: "modeChanged", mode: "magicDebug", nodeIds: ["n1"] });
    expect(view.canMagicDebug).toBe(false);
    view.apply({ type: "modeChanged", mode: "normal", nodeIds: [] });
    expect(view.selection.size).toBe(0); // exit clears the selection
    expect(view.canMagicDebug).toBe(false);
  });

  it("holds across a scripted sequence covering all transitions", () => {
    const view = freshView();
    const script: ViewEvent[] = [
      { type: "chainStarted" },
      {
        type: "outcome",
        outcome: {
          kind: "requirementsProposed",
          requirements: ["a"],
          requirements_confirmed: false,
          requirements_rejected: false,
          program: null,
          explanation: null,
          flowchart: null,
          modified_node_ids: [],
          answer: null,
          failure_reason: null,
          repair_count: 0,
        },
      },
      { type: "serverGraph", graph: sampleGraph(), diff: null },
      { type: "select", id: "n1", additive: false },
      { type: "localEdit", graph: editedGraph() },
      { type: "syncStarted" },
      {
        type: "syncOk",
        diff: {
          added_nodes: [],
          removed_nodes: [],
          relabeled_nodes: [],
          added_edges: [],
          removed_edges: [],
        },
      },
      { type: "modeChanged", mode: "magicDebug", nodeIds: ["n1"] },
      { type: "chainStarted" },
      { type: "chainFailed", reason: "nope" },
      { type: "modeChanged", mode: "normal", nodeIds: [] },
      { type: "runStarted", runId: "r1" },
      { type: "trace", entry: { t: 0, kind: "MoveStarted", place: "Exhibition Area" } },
      { type: "trace", entry: { t: 10, kind: "MoveArrived", place: "Exhibition Area" } },
      { type: "runFinished" },
      { type: "connectionLost" },
      { type: "connectionRestored" },
    ];
    for (const event of script) {
      view.apply(event); // apply() itself asserts the state invariants
      expect(view.canSyncChange).toBe(view.dirty && !view.syncing && !view.inFlight);
      expect(view.canMagicDebug).toBe(
        view.selection.size > 0 && view.mode === "normal" && !view.inFlight,
      );
    }
    expect(view.traceRows.length).toBe(2);
    expect(view.traceRows[1].nodeId).toBe("n1"); // goto node highlighted
  });

  it("server graph refresh drops stale selections", () => {
    const view = freshView();
    view.apply({ type: "select", id: "n2", additive: false });
    const smaller = sampleGraph();
    smaller.nodes = smaller.nodes.filter((n) => n.id !== "n2");
    smaller.edges = smaller.edges.filter((e) => e.source !== "n2" && e.target !== "n2");
    view.apply({ type: "serverGraph", graph: smaller, diff: null });
    expect(view.selection.size).toBe(0);
    expect(view.canMagicDebug).toBe(false);
  });

  it("chain in flight disables sending", () => {
    const view = freshView();
    expect(view.canSend).toBe(true);
    view.apply({ type: "chainStarted" });
    expect(view.canSend).toBe(false);
    view.apply({ type: "chainFailed", reason: "x" });
    expect(view.canSend).toBe(true);
    view.apply({ type: "connectionLost" });
    expect(view.canSend).toBe(false);
    view.apply({ type: "connectionRestored" });
    expect(view.canSend).toBe(true);
  });
});
