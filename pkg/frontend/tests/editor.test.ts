/** Local flowchart edit operations and their arity guards. */

import { describe, expect, it } from "vitest";

import {
  EditRejected,
  NODE_LIBRARY,
  addNode,
  connect,
  editProps,
  insertOnEdge,
  removeEdge,
  removeNode,
} from "../src/editor.js";
import { compareIds, findBackEdges, layoutGraph } from "../src/layout.js";
import { sampleGraph } from "./helpers.js";

const SAY = NODE_LIBRARY[0];

describe("editor operations", () => {
  it("splices a node into an edge", () => {
    const graph = sampleGraph();
    const edge = graph.edges[1]; // n1 -> n2
    const { graph: edited, id } = insertOnEdge(graph, edge, SAY);
    expect(id).toBe("u1");
    expect(edited.nodes.map((n) => n.id)).toContain("u1");
    expect(edited.edges).toContainEqual({ source: "n1", target: "u1", label: null });
    expect(edited.edges).toContainEqual({ source: "u1", target: "n2", label: null });
    expect(edited.edges).not.toContainEqual(edge);
    // Original untouched (edits are copies).
    expect(graph.nodes.map((n) => n.id)).not.toContain("u1");
  });

  it("rejects a second outgoing edge from an action node", () => {
    const graph = sampleGraph();
    expect(() => connect(graph, "n1", "E1", null)).toThrow(EditRejected);
  });

  it("rejects outgoing edges from End and unlabeled decision branches", () => {
    let graph = sampleGraph();
    expect(() => connect(graph, "E1", "n1", null)).toThrow(EditRejected);
    graph = addNode(graph, NODE_LIBRARY.find((t) => t.kind === "decision")!);
    const decision = graph.nodes[graph.nodes.length - 1];
    expect(() => connect(graph, decision.id, "n1", null)).toThrow(EditRejected);
    graph = connect(graph, decision.id, "n1", "yes");
    expect(() => connect(graph, decision.id, "n2", "yes")).toThrow(EditRejected);
    graph = connect(graph, decision.id, "n2", "no");
    expect(graph.edges.filter((e) => e.source === decision.id)).toHaveLength(2);
  });

  it("removing a node drops its edges; Start is protected", () => {
    const graph = sampleGraph();
    const edited = removeNode(graph, "n2");
    expect(edited.nodes.map((n) => n.id)).not.toContain("n2");
    expect(edited.edges.every((e) => e.source !== "n2" && e.target !== "n2")).toBe(true);
    expect(() => removeNode(graph, "S")).toThrow(EditRejected);
  });

  it("removeEdge and editProps", () => {
    const graph = sampleGraph();
    const edited = removeEdge(graph, graph.edges[2]);
    expect(edited.edges).toHaveLength(2);
    const withProps = editProps(graph, "n2", "shout it");
    expect(withProps.nodes.find((n) => n.id === "n2")!.props.description).toBe("shout it");
    expect(graph.nodes.find((n) => n.id === "n2")!.props.description).toBe('Say "welcome".');
  });
});

describe("layout", () => {
  it("is stable and layered", () => {
    const graph = sampleGraph();
    const a = layoutGraph(graph);
    const b = layoutGraph(graph);
    expect([...a.positions.entries()]).toEqual([...b.positions.entries()]);
    const y = (id: string) => a.positions.get(id)!.y;
    expect(y("S")).toBeLessThan(y("n1"));
    expect(y("n1")).toBeLessThan(y("n2"));
    expect(y("n2")).toBeLessThan(y("E1"));
  });

  it("detects loop back-edges", () => {
    const graph = sampleGraph();
    graph.edges.push({ source: "n2", target: "n1", label: "repeat" });
    const back = findBackEdges(graph);
    expect([...back][0]).toEqual({ source: "n2", target: "n1", label: "repeat" });
    const layout = layoutGraph(graph);
    expect(layout.positions.size).toBe(4);
  });

  it("orders ids naturally", () => {
    const ids = ["n10", "n2", "S", "E1", "n1"];
    ids.sort(compareIds);
    expect(ids).toEqual(["S", "n1", "n2", "n10", "E1"]);
  });
});
