/**
 * The UI session state machine.
 *
 * All semantics live here, headless and synchronous, so the
 * button-enablement invariants can be checked after every event:
 *   - Sync Change is enabled iff the flowchart has unsynced local edits;
 *   - Magic Debug is enabled iff the node selection is non-empty.
 * The UI never changes program meaning locally: edits only mark the view
 * dirty until they are sent through Sync Change or a chat turn.
 */

import type {
  DiffPayload,
  EventEnvelope,
  OutcomePayload,
  RenderGraph,
  SessionJson,
} from "./types.js";

export type ViewEvent =
  | { type: "session"; session: SessionJson }
  | { type: "serverGraph"; graph: RenderGraph; diff: DiffPayload | null }
  | { type: "localEdit"; graph: RenderGraph }
  | { type: "select"; id: string; additive: boolean }
  | { type: "clearSelection" }
  | { type: "chainStarted" }
  | { type: "outcome"; outcome: OutcomePayload }
  | { type: "chainFailed"; reason: string }
  | { type: "syncStarted" }
  | { type: "syncOk"; diff: DiffPayload }
  | { type: "syncRejected"; offendingNodes: string[] }
  | { type: "modeChanged"; mode: "normal" | "magicDebug"; nodeIds: string[] }
  | { type: "runStarted"; runId: string }
  | { type: "trace"; entry: Record<string, unknown> }
  | { type: "runFinished" }
  | { type: "connectionLost" }
  | { type: "connectionRestored" };

export interface TraceRow {
  t: number;
  kind: string;
  detail: string;
  nodeId: string | null;
}

export class SessionView {
  session: SessionJson | null = null;
  serverGraph: RenderGraph | null = null;
  localGraph: RenderGraph | null = null;
  dirty = false;
  selection = new Set<string>();
  mode: "normal" | "magicDebug" = "normal";
  debugNodeIds: string[] = [];
  inFlight = false;
  syncing = false;
  lastDiff: DiffPayload | null = null;
  offendingNodes: string[] = [];
  traceRows: TraceRow[] = [];
  activeNodeId: string | null = null;
  runActive = false;
  connected = true;
  lastError: string | null = null;

  /** Sync Change button: enabled iff there are unsynced local edits. */
  get canSyncChange(): boolean {
    return this.dirty && !this.syncing && !this.inFlight;
  }

  /** Magic Debug button: enabled iff some nodes are selected. */
  get canMagicDebug(): boolean {
    return this.selection.size > 0 && this.mode === "normal" && !this.inFlight;
  }

  get canSend(): boolean {
    return !this.inFlight && this.connected;
  }

  get graph(): RenderGraph | null {
    return this.localGraph ?? this.serverGraph;
  }

  apply(event: ViewEvent): void {
    switch (event.type) {
      case "session":
        this.session = event.session;
        this.mode = event.session.mode.kind;
        this.debugNodeIds = event.session.mode.node_ids ?? [];
        break;
      case "serverGraph": {
        this.serverGraph = event.graph;
        this.localGraph = null;
        this.dirty = false;
        this.lastDiff = event.diff;
        this.offendingNodes = [];
        const ids = new Set(event.graph.nodes.map((n) => n.id));
        this.selection = new Set([...this.selection].filter((id) => ids.has(id)));
        break;
      }
      case "localEdit":
        this.localGraph = event.graph;
        this.dirty = true;
        this.offendingNodes = [];
        break;
      case "select": {
        if (!event.additive) this.selection.clear();
        if (this.selection.has(event.id)) this.selection.delete(event.id);
        else this.selection.add(event.id);
        break;
      }
      case "clearSelection":
        this.selection.clear();
        break;
      case "chainStarted":
        this.inFlight = true;
        this.lastError = null;
        break;
      case "outcome":
        this.inFlight = false;
        if (event.outcome.kind === "failed") {
          this.lastError = event.outcome.failure_reason;
        }
        break;
      case "chainFailed":
        this.inFlight = false;
        this.lastError = event.reason;
        break;
      case "syncStarted":
        this.syncing = true;
        break;
      case "syncOk":
        this.syncing = false;
        this.dirty = false;
        this.localGraph = null;
        this.lastDiff = event.diff;
        break;
      case "syncRejected":
        this.syncing = false;
        this.offendingNodes = event.offendingNodes;
        break;
      case "modeChanged":
        this.mode = event.mode;
        this.debugNodeIds = event.nodeIds;
        if (event.mode === "normal") this.selection.clear();
        break;
      case "runStarted":
        this.runActive = true;
        this.traceRows = [];
        this.activeNodeId = null;
        break;
      case "trace": {
        const row = this.traceRow(event.entry);
        this.traceRows.push(row);
        if (row.nodeId !== null) this.activeNodeId = row.nodeId;
        break;
      }
      case "runFinished":
        this.runActive = false;
        this.activeNodeId = null;
        break;
      case "connectionLost":
        this.connected = false;
        break;
      case "connectionRestored":
        this.connected = true;
        break;
    }
    this.checkInvariants();
  }

  /** Map a trace entry to the flowchart node it is executing, by label. */
  private traceRow(entry: Record<string, unknown>): TraceRow {
    const kind = String(entry.kind ?? "?");
    const t = Number(entry.t ?? 0);
    const graph = this.graph;
    let nodeId: string | null = null;
    let detail = "";
    const byLabel = (label: string) =>
      graph?.nodes.find((n) => n.kind === "action" && n.label === label)?.id ?? null;
    if (kind === "MoveStarted" || kind === "MoveArrived") {
      detail = String(entry.place ?? "");
      nodeId = byLabel(`goto: ${detail}`);
    } else if (kind === "Said") {
      detail = String(entry.text ?? "");
      nodeId = byLabel(`say: ${detail}`);
    } else if (kind === "Asked") {
      detail = String(entry.text ?? "");
      nodeId = byLabel(`ask: ${detail}`);
    } else if (kind === "Armed" || kind === "Triggered") {
      detail = String(entry.wake_word ?? "");
      nodeId = byLabel(`userRequest: ${detail}`);
    } else if (kind === "Heard") {
      detail = String(entry.text ?? "");
    } else if (kind === "BranchTaken") {
      detail = String(entry.label ?? "");
    } else if (kind === "Detected") {
      detail = String(entry.present ?? "");
    }
    return { t, kind, detail, nodeId };
  }

  /** Enforced after every event; throws if an invariant is violated. */
  private checkInvariants(): void {
    if (this.dirty && this.localGraph === null) {
      throw new Error("invariant: dirty flag without a local graph");
    }
    if (!this.dirty && this.localGraph !== null) {
      throw new Error("invariant: local graph kept while clean");
    }
    if (this.mode === "magicDebug" && this.debugNodeIds.length === 0) {
      throw new Error("invariant: debug mode without selected nodes");
    }
  }

  applyEnvelope(envelope: EventEnvelope): void {
    switch (envelope.kind) {
      case "outcome":
        this.apply({ type: "outcome", outcome: envelope.payload as unknown as OutcomePayload });
        break;
      case "diff":
        this.lastDiff = envelope.payload as unknown as DiffPayload;
        break;
      case "mode": {
        const mode = envelope.payload as { kind: "normal" | "magicDebug"; node_ids?: string[] };
        this.apply({ type: "modeChanged", mode: mode.kind, nodeIds: mode.node_ids ?? [] });
        break;
      }
      case "trace":
        this.apply({ type: "trace", entry: envelope.payload });
        break;
      case "run_finished":
        this.apply({ type: "runFinished" });
        break;
      default:
        break;
    }
  }
}
