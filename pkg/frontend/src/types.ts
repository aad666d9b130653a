/** Wire types mirroring the backend's JSON formats. */

export interface RenderNode {
  id: string;
  kind: "start" | "end" | "action" | "decision";
  label: string;
  props: { description: string };
}

export interface RenderEdge {
  source: string;
  target: string;
  label: string | null;
}

export interface RenderGraph {
  version: "renderGraph/v1";
  nodes: RenderNode[];
  edges: RenderEdge[];
}

export interface DiffPayload {
  added_nodes: string[];
  removed_nodes: string[];
  relabeled_nodes: string[];
  added_edges: RenderEdge[];
  removed_edges: RenderEdge[];
}

export interface OutcomePayload {
  kind:
    | "requirementsProposed"
    | "programGenerated"
    | "answerOnly"
    | "nodesModified"
    | "failed";
  requirements: string[] | null;
  requirements_confirmed: boolean;
  requirements_rejected: boolean;
  program: string | null;
  explanation: string | null;
  flowchart: string | null;
  modified_node_ids: string[];
  answer: string | null;
  failure_reason: string | null;
  repair_count: number;
}

export interface SessionJson {
  id: string;
  transcript: { role: string; text: string }[];
  requirements: { items: string[]; state: "pending" | "confirmed" } | null;
  program: string | null;
  pending_props: Record<string, string>;
  mode: { kind: "normal" | "magicDebug"; node_ids?: string[] };
  last_diff: DiffPayload | null;
}

export interface TracePayload {
  run_id?: string;
  t: number;
  kind: string;
  [key: string]: unknown;
}

export interface EventEnvelope {
  seq: number;
  kind: "session" | "outcome" | "diff" | "sync" | "mode" | "trace" | "run_finished";
  payload: Record<string, unknown>;
}
