/**
 * Pure flowchart edit operations over the render-graph document.
 *
 * Edits are local until Sync Change ships the document to the backend;
 * operations that would violate the graph's arity rules are rejected
 * here with a message so the canvas can surface them inline.
 */

import type { RenderEdge, RenderGraph, RenderNode } from "./types.js";

export interface NodeTemplate {
  kind: "action" | "decision" | "start" | "end";
  label: string;
  description: string;
}

/** The node library: the five command templates plus structure nodes. */
export const NODE_LIBRARY: NodeTemplate[] = [
  { kind: "action", label: "say: Hello!", description: 'Say "Hello!".' },
  { kind: "action", label: "goto: Reception Area", description: "Move to Reception Area." },
  { kind: "action", label: "ask: Do you need help?", description: 'Ask "Do you need help?" and wait for a reply.' },
  { kind: "action", label: "userRequest: hello robot", description: 'Wait for the wake word "hello robot" to start the service.' },
  {
    kind: "action",
    label: "humanDetection",
    description: "Check whether a person is in front of the robot.",
  },
  { kind: "decision", label: "human?", description: "Branch on whether a person is in front of the robot (yes/no)." },
  { kind: "start", label: "Start", description: "The program starts here." },
  { kind: "end", label: "End", description: "The program ends here." },
];

export class EditRejected extends Error {
  constructor(
    message: string,
    public nodeId: string | null = null,
  ) {
    super(message);
  }
}

function clone(graph: RenderGraph): RenderGraph {
  return JSON.parse(JSON.stringify(graph)) as RenderGraph;
}

function outEdges(graph: RenderGraph, id: string): RenderEdge[] {
  return graph.edges.filter((e) => e.source === id);
}

function node(graph: RenderGraph, id: string): RenderNode {
  const found = graph.nodes.find((n) => n.id === id);
  if (!found) throw new EditRejected(`unknown node ${id}`, id);
  return found;
}

export function freshId(graph: RenderGraph): string {
  let i = 1;
  const ids = new Set(graph.nodes.map((n) => n.id));
  while (ids.has(`u${i}`)) i += 1;
  return `u${i}`;
}

/** Validate that adding one more out-edge from `source` is legal. */
function checkCanAddOutEdge(graph: RenderGraph, source: string, label: string | null): void {
  const from = node(graph, source);
  const existing = outEdges(graph, source);
  if (from.kind === "end") {
    throw new EditRejected("an End node cannot have outgoing connections", source);
  }
  if ((from.kind === "action" || from.kind === "start") && existing.length >= 1) {
    throw new EditRejected(
      `${from.kind} nodes have exactly one outgoing connection`,
      source,
    );
  }
  if (from.kind === "decision") {
    if (!label) {
      throw new EditRejected("decision branches need a label", source);
    }
    if (existing.some((e) => e.label === label)) {
      throw new EditRejected(`branch label "${label}" already exists`, source);
    }
  }
}

export function addNode(graph: RenderGraph, template: NodeTemplate): RenderGraph {
  const next = clone(graph);
  next.nodes.push({
    id: freshId(next),
    kind: template.kind,
    label: template.label,
    props: { description: template.description },
  });
  return next;
}

export function connect(
  graph: RenderGraph,
  source: string,
  target: string,
  label: string | null = null,
): RenderGraph {
  node(graph, target);
  checkCanAddOutEdge(graph, source, label);
  if (graph.edges.some((e) => e.source === source && e.target === target && e.label === label)) {
    throw new EditRejected("this connection already exists", source);
  }
  const next = clone(graph);
  next.edges.push({ source, target, label });
  return next;
}

export function removeEdge(graph: RenderGraph, edge: RenderEdge): RenderGraph {
  const next = clone(graph);
  const index = next.edges.findIndex(
    (e) => e.source === edge.source && e.target === edge.target && e.label === edge.label,
  );
  if (index < 0) throw new EditRejected("no such connection");
  next.edges.splice(index, 1);
  return next;
}

export function removeNode(graph: RenderGraph, id: string): RenderGraph {
  const target = node(graph, id);
  if (target.kind === "start") {
    throw new EditRejected("the Start node cannot be removed", id);
  }
  const next = clone(graph);
  next.nodes = next.nodes.filter((n) => n.id !== id);
  next.edges = next.edges.filter((e) => e.source !== id && e.target !== id);
  return next;
}

/** Splice a new action node into an existing connection. */
export function insertOnEdge(
  graph: RenderGraph,
  edge: RenderEdge,
  template: NodeTemplate,
): { graph: RenderGraph; id: string } {
  if (template.kind !== "action") {
    throw new EditRejected("only command nodes can be spliced into a connection");
  }
  let next = removeEdge(graph, edge);
  const id = freshId(next);
  next.nodes.push({
    id,
    kind: template.kind,
    label: template.label,
    props: { description: template.description },
  });
  next.edges.push({ source: edge.source, target: id, label: edge.label });
  next.edges.push({ source: id, target: edge.target, label: null });
  return { graph: next, id };
}

/** Edit the natural-language behavior text shown in the properties panel. */
export function editProps(graph: RenderGraph, id: string, description: string): RenderGraph {
  node(graph, id);
  const next = clone(graph);
  const target = next.nodes.find((n) => n.id === id)!;
  target.props.description = description;
  return next;
}

export function graphsEqual(a: RenderGraph | null, b: RenderGraph | null): boolean {
  return JSON.stringify(a) === JSON.stringify(b);
}
