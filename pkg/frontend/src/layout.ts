/**
 * Layered DAG layout with stable ordering.
 *
 * The backend ships topology only, so the client computes coordinates:
 * layers by longest path from the Start node over forward edges (loop
 * back-edges are detected by DFS ancestry and drawn as side arcs), and a
 * stable within-layer order by node id so identical graphs always render
 * identically.
 */

import type { RenderEdge, RenderGraph } from "./types.js";

export interface Point {
  x: number;
  y: number;
}

export interface Layout {
  positions: Map<string, Point>;
  backEdges: Set<RenderEdge>;
  width: number;
  height: number;
}

export const NODE_W = 190;
export const NODE_H = 46;
const GAP_X = 40;
const GAP_Y = 60;

function naturalKey(id: string): (string | number)[] {
  const parts: (string | number)[] = [];
  for (const chunk of id.match(/\d+|\D+/g) ?? []) {
    parts.push(/^\d+$/.test(chunk) ? Number(chunk) : chunk);
  }
  return parts;
}

function rank(id: string): number {
  if (id.startsWith("S")) return 0;
  if (id.startsWith("n")) return 1;
  if (id.startsWith("E")) return 2;
  return 3;
}

export function compareIds(a: string, b: string): number {
  if (rank(a) !== rank(b)) return rank(a) - rank(b);
  const ka = naturalKey(a);
  const kb = naturalKey(b);
  for (let i = 0; i < Math.max(ka.length, kb.length); i += 1) {
    const x = ka[i];
    const y = kb[i];
    if (x === undefined) return -1;
    if (y === undefined) return 1;
    if (x !== y) {
      if (typeof x === "number" && typeof y === "number") return x - y;
      return String(x) < String(y) ? -1 : 1;
    }
  }
  return 0;
}

export function findBackEdges(graph: RenderGraph): Set<RenderEdge> {
  const back = new Set<RenderEdge>();
  const bySource = new Map<string, RenderEdge[]>();
  for (const edge of graph.edges) {
    const list = bySource.get(edge.source) ?? [];
    list.push(edge);
    bySource.set(edge.source, list);
  }
  const visited = new Set<string>();
  const onStack = new Set<string>();
  const start = graph.nodes.find((n) => n.kind === "start");

  const dfs = (id: string): void => {
    visited.add(id);
    onStack.add(id);
    for (const edge of bySource.get(id) ?? []) {
      if (onStack.has(edge.target)) back.add(edge);
      else if (!visited.has(edge.target)) dfs(edge.target);
    }
    onStack.delete(id);
  };
  if (start) dfs(start.id);
  return back;
}

export function layoutGraph(graph: RenderGraph): Layout {
  const back = findBackEdges(graph);
  const forward = graph.edges.filter((e) => !back.has(e));
  const layer = new Map<string, number>();
  for (const n of graph.nodes) layer.set(n.id, 0);

  // Longest-path layering; the graph minus back-edges is acyclic.
  let changed = true;
  let guard = graph.nodes.length + 1;
  while (changed && guard > 0) {
    changed = false;
    guard -= 1;
    for (const edge of forward) {
      const need = (layer.get(edge.source) ?? 0) + 1;
      if ((layer.get(edge.target) ?? 0) < need) {
        layer.set(edge.target, need);
        changed = true;
      }
    }
  }

  const rows = new Map<number, string[]>();
  for (const n of graph.nodes) {
    const l = layer.get(n.id) ?? 0;
    const row = rows.get(l) ?? [];
    row.push(n.id);
    rows.set(l, row);
  }
  const positions = new Map<string, Point>();
  let width = 0;
  const layers = [...rows.keys()].sort((a, b) => a - b);
  for (const l of layers) {
    const row = rows.get(l)!.sort(compareIds);
    const rowWidth = row.length * NODE_W + (row.length - 1) * GAP_X;
    width = Math.max(width, rowWidth);
    row.forEach((id, i) => {
      positions.set(id, {
        x: i * (NODE_W + GAP_X),
        y: l * (NODE_H + GAP_Y),
      });
    });
  }
  // Center each row.
  for (const l of layers) {
    const row = rows.get(l)!;
    const rowWidth = row.length * NODE_W + (row.length - 1) * GAP_X;
    const offset = (width - rowWidth) / 2;
    for (const id of row) {
      const p = positions.get(id)!;
      positions.set(id, { x: p.x + offset, y: p.y });
    }
  }
  const height = (layers[layers.length - 1] ?? 0) * (NODE_H + GAP_Y) + NODE_H;
  return { positions, backEdges: back, width: Math.max(width, NODE_W), height };
}
