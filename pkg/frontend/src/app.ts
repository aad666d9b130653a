/**
 * The studio application: a flowchart view (node library, interactive
 * canvas, properties panel, buttons group) beside a conversational view.
 *
 * Every semantic change goes through the backend: chat turns via
 * POST /messages, flowchart edits via PUT /flowchart (Sync Change).
 * Everything the canvas does before Sync Change is local and reversible.
 */

import { ApiError, EventStream, StudioApi } from "./api.js";
import {
  EditRejected,
  NODE_LIBRARY,
  NodeTemplate,
  connect,
  editProps,
  insertOnEdge,
  removeEdge,
  removeNode,
} from "./editor.js";
import { NODE_H, NODE_W, layoutGraph } from "./layout.js";
import { SessionView } from "./state.js";
import type { RenderEdge, SessionJson } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export class StudioApp {
  view = new SessionView();
  api: StudioApi;
  stream: EventStream | null = null;
  sessionId: string | null = null;
  runId: string | null = null;
  selectedEdge: RenderEdge | null = null;
  onchange: (() => void) | null = null;

  private root: HTMLElement;
  private els!: Record<string, HTMLElement>;

  constructor(root: HTMLElement, baseUrl: string) {
    this.root = root;
    this.api = new StudioApi(baseUrl);
    this.buildSkeleton();
  }

  async start(): Promise<void> {
    const { session } = await this.api.createSession();
    this.adoptSession(session);
    this.stream = new EventStream(this.api.baseUrl, session.id, {
      onEnvelope: (envelope) => {
        this.view.applyEnvelope(envelope);
        this.render();
      },
      onStatus: (connected) => {
        this.view.apply({ type: connected ? "connectionRestored" : "connectionLost" });
        this.render();
      },
    });
    this.render();
  }

  stop(): void {
    this.stream?.close();
  }

  private adoptSession(session: SessionJson): void {
    this.sessionId = session.id;
    this.view.apply({ type: "session", session });
  }

  // -- user actions -------------------------------------------------------

  async sendMessage(text: string): Promise<void> {
    if (!this.sessionId || !this.view.canSend || !text.trim()) return;
    this.view.apply({ type: "chainStarted" });
    this.render();
    try {
      const { outcome, session } = await this.api.postMessage(this.sessionId, text);
      this.view.apply({ type: "outcome", outcome });
      this.adoptSession(session);
      if (session.program !== null) await this.refreshFlowchart();
    } catch (error) {
      this.view.apply({ type: "chainFailed", reason: describeError(error) });
    }
    this.render();
  }

  async confirmRequirements(): Promise<void> {
    await this.sendMessage("Yes, that is right, please go ahead.");
  }

  async refreshFlowchart(): Promise<void> {
    if (!this.sessionId) return;
    const { graph, diff } = await this.api.getFlowchart(this.sessionId);
    this.view.apply({ type: "serverGraph", graph, diff });
    this.render();
  }

  async syncChange(): Promise<void> {
    if (!this.sessionId || !this.view.canSyncChange || !this.view.localGraph) return;
    this.view.apply({ type: "syncStarted" });
    this.render();
    try {
      const { diff, session } = await this.api.syncChange(this.sessionId, this.view.localGraph);
      this.view.apply({ type: "syncOk", diff });
      this.adoptSession(session);
      await this.refreshFlowchart();
    } catch (error) {
      const offending =
        error instanceof ApiError
          ? error.diagnostics.map((d) => d.path).filter(Boolean)
          : [];
      this.view.apply({ type: "syncRejected", offendingNodes: offending });
      this.view.lastError = describeError(error);
    }
    this.render();
  }

  async magicDebug(): Promise<void> {
    if (!this.sessionId || !this.view.canMagicDebug) return;
    const ids = [...this.view.selection];
    try {
      const { session } = await this.api.magicDebugStart(this.sessionId, ids);
      this.adoptSession(session);
    } catch (error) {
      this.view.lastError = describeError(error);
    }
    this.render();
  }

  async exitMagicDebug(): Promise<void> {
    if (!this.sessionId) return;
    const { session } = await this.api.magicDebugEnd(this.sessionId);
    this.adoptSession(session);
    this.render();
  }

  async deploy(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const { run_id } = await this.api.deploy(this.sessionId);
      this.runId = run_id;
      this.view.apply({ type: "runStarted", runId: run_id });
    } catch (error) {
      this.view.lastError = describeError(error);
    }
    this.render();
  }

  async cancelRun(): Promise<void> {
    if (this.sessionId && this.runId) {
      await this.api.cancelRun(this.sessionId, this.runId);
    }
  }

  /** Local edit: splice a library node into the selected connection. */
  spliceOnSelectedEdge(template: NodeTemplate): string | null {
    const graph = this.view.graph;
    if (!graph || !this.selectedEdge) return null;
    try {
      const { graph: edited, id } = insertOnEdge(graph, this.selectedEdge, template);
      this.selectedEdge = null;
      this.view.apply({ type: "localEdit", graph: edited });
      this.render();
      return id;
    } catch (error) {
      this.showEditError(error);
      return null;
    }
  }

  connectNodes(source: string, target: string, label: string | null): void {
    const graph = this.view.graph;
    if (!graph) return;
    try {
      this.view.apply({ type: "localEdit", graph: connect(graph, source, target, label) });
    } catch (error) {
      this.showEditError(error);
    }
    this.render();
  }

  deleteSelection(): void {
    let graph = this.view.graph;
    if (!graph) return;
    try {
      for (const id of this.view.selection) graph = removeNode(graph, id);
      if (this.selectedEdge) {
        graph = removeEdge(graph, this.selectedEdge);
        this.selectedEdge = null;
      }
      this.view.selection.clear();
      this.view.apply({ type: "localEdit", graph });
    } catch (error) {
      this.showEditError(error);
    }
    this.render();
  }

  editNodeProps(id: string, description: string): void {
    const graph = this.view.graph;
    if (!graph) return;
    this.view.apply({ type: "localEdit", graph: editProps(graph, id, description) });
    this.render();
  }

  private showEditError(error: unknown): void {
    this.view.lastError =
      error instanceof EditRejected
        ? `${error.message}${error.nodeId ? ` (${error.nodeId})` : ""}`
        : describeError(error);
  }

  /** A node carries a pending badge while its description edit is unsynced. */
  hasPendingEdit(nodeId: string): boolean {
    if (!this.view.localGraph || !this.view.serverGraph) return false;
    const local = this.view.localGraph.nodes.find((n) => n.id === nodeId);
    const server = this.view.serverGraph.nodes.find((n) => n.id === nodeId);
    return !!local && !!server && local.props.description !== server.props.description;
  }

  // -- rendering ------------------------------------------------------------

  private buildSkeleton(): void {
    this.root.innerHTML = `
      <div class="studio">
        <section class="flowchart-view">
          <div class="library" data-testid="library"></div>
          <svg class="canvas" data-testid="canvas"></svg>
          <aside class="props" data-testid="props"></aside>
          <div class="buttons" data-testid="buttons">
            <button data-testid="sync-change">Sync Change</button>
            <button data-testid="magic-debug">Magic Debug</button>
            <button data-testid="exit-debug" hidden>Exit Debug</button>
            <button data-testid="deploy">Deploy</button>
            <button data-testid="cancel-run" hidden>Cancel Run</button>
          </div>
          <div class="banner" data-testid="banner" hidden></div>
          <div class="error" data-testid="error" hidden></div>
          <ol class="trace" data-testid="trace"></ol>
        </section>
        <section class="conversation-view">
          <ol class="transcript" data-testid="transcript"></ol>
          <div class="requirements" data-testid="requirements" hidden></div>
          <form data-testid="chat-form">
            <input data-testid="chat-input" type="text" autocomplete="off" />
            <button data-testid="chat-send" type="submit">Send</button>
          </form>
          <div class="offline" data-testid="offline" hidden>
            Connection lost, retrying…
          </div>
        </section>
      </div>`;
    const byId = (id: string) =>
      this.root.querySelector(`[data-testid="${id}"]`) as HTMLElement;
    this.els = {
      library: byId("library"),
      canvas: byId("canvas"),
      props: byId("props"),
      sync: byId("sync-change"),
      debug: byId("magic-debug"),
      exitDebug: byId("exit-debug"),
      deploy: byId("deploy"),
      cancelRun: byId("cancel-run"),
      banner: byId("banner"),
      error: byId("error"),
      trace: byId("trace"),
      transcript: byId("transcript"),
      requirements: byId("requirements"),
      form: byId("chat-form"),
      input: byId("chat-input"),
      send: byId("chat-send"),
      offline: byId("offline"),
    };
    this.els.form.addEventListener("submit", (event) => {
      event.preventDefault();
      const input = this.els.input as HTMLInputElement;
      const text = input.value;
      input.value = "";
      void this.sendMessage(text);
    });
    this.els.sync.addEventListener("click", () => void this.syncChange());
    this.els.debug.addEventListener("click", () => void this.magicDebug());
    this.els.exitDebug.addEventListener("click", () => void this.exitMagicDebug());
    this.els.deploy.addEventListener("click", () => void this.deploy());
    this.els.cancelRun.addEventListener("click", () => void this.cancelRun());
    this.renderLibrary();
  }

  private renderLibrary(): void {
    this.els.library.innerHTML = "";
    for (const template of NODE_LIBRARY) {
      const item = document.createElement("button");
      item.type = "button";
      item.dataset.testid = `library-${template.kind}-${template.label.split(":")[0]}`;
      item.textContent = template.label;
      item.addEventListener("click", () => this.spliceOnSelectedEdge(template));
      this.els.library.appendChild(item);
    }
  }

  render(): void {
    const view = this.view;
    (this.els.sync as HTMLButtonElement).disabled = !view.canSyncChange;
    (this.els.debug as HTMLButtonElement).disabled = !view.canMagicDebug;
    (this.els.send as HTMLButtonElement).disabled = !view.canSend;
    (this.els.input as HTMLInputElement).disabled = !view.canSend;
    this.els.exitDebug.hidden = view.mode !== "magicDebug";
    this.els.cancelRun.hidden = !view.runActive;
    this.els.offline.hidden = view.connected;
    this.els.error.hidden = !view.lastError;
    this.els.error.textContent = view.lastError ?? "";

    if (view.mode === "magicDebug") {
      const labels = view.debugNodeIds
        .map((id) => view.graph?.nodes.find((n) => n.id === id)?.label ?? id)
        .join(", ");
      this.els.banner.hidden = false;
      this.els.banner.textContent = `Magic Debug: ${labels}`;
    } else {
      this.els.banner.hidden = true;
      this.els.banner.textContent = "";
    }

    this.renderTranscript();
    this.renderRequirements();
    this.renderCanvas();
    this.renderProps();
    this.renderTrace();
    this.onchange?.();
  }

  private renderTranscript(): void {
    const list = this.els.transcript;
    list.innerHTML = "";
    for (const turn of this.view.session?.transcript ?? []) {
      const item = document.createElement("li");
      item.className = `turn turn-${turn.role}`;
      item.textContent = `${turn.role}: ${turn.text}`;
      list.appendChild(item);
    }
    if (this.view.inFlight) {
      const item = document.createElement("li");
      item.className = "turn turn-progress";
      item.dataset.testid = "progress";
      item.textContent = "…thinking…";
      list.appendChild(item);
    }
  }

  private renderRequirements(): void {
    const box = this.els.requirements;
    const requirements = this.view.session?.requirements;
    if (!requirements || requirements.state !== "pending") {
      box.hidden = true;
      box.innerHTML = "";
      return;
    }
    box.hidden = false;
    box.innerHTML = "";
    const list = document.createElement("ol");
    for (const item of requirements.items) {
      const li = document.createElement("li");
      li.textContent = item;
      list.appendChild(li);
    }
    const confirm = document.createElement("button");
    confirm.dataset.testid = "confirm-requirements";
    confirm.textContent = "Confirm";
    confirm.addEventListener("click", () => void this.confirmRequirements());
    box.append(list, confirm);
  }

  private renderCanvas(): void {
    const svg = this.els.canvas as unknown as SVGSVGElement;
    svg.innerHTML = "";
    const graph = this.view.graph;
    if (!graph) return;
    const layout = layoutGraph(graph);
    svg.setAttribute("viewBox", `-20 -20 ${layout.width + 40} ${layout.height + 40}`);
    svg.setAttribute("width", String(layout.width + 40));
    svg.setAttribute("height", String(layout.height + 40));
    const diff = this.view.lastDiff;

    for (const edge of graph.edges) {
      const from = layout.positions.get(edge.source);
      const to = layout.positions.get(edge.target);
      if (!from || !to) continue;
      const group = document.createElementNS(SVG_NS, "g");
      group.setAttribute("data-testid", `edge-${edge.source}-${edge.target}`);
      group.setAttribute("class", "edge" + (layout.backEdges.has(edge) ? " back" : ""));
      const line = document.createElementNS(SVG_NS, "path");
      const x1 = from.x + NODE_W / 2;
      const y1 = from.y + NODE_H;
      const x2 = to.x + NODE_W / 2;
      const y2 = to.y;
      const path = layout.backEdges.has(edge)
        ? `M ${x1} ${y1 - NODE_H / 2} C ${x1 + NODE_W} ${y1}, ${x2 + NODE_W} ${y2}, ${x2} ${y2 + NODE_H / 2}`
        : `M ${x1} ${y1} C ${x1} ${y1 + 25}, ${x2} ${y2 - 25}, ${x2} ${y2}`;
      line.setAttribute("d", path);
      line.setAttribute("fill", "none");
      group.appendChild(line);
      if (edge.label) {
        const text = document.createElementNS(SVG_NS, "text");
        text.setAttribute("x", String((x1 + x2) / 2));
        text.setAttribute("y", String((y1 + y2) / 2));
        text.textContent = edge.label;
        group.appendChild(text);
      }
      if (this.selectedEdge && sameEdge(this.selectedEdge, edge)) {
        group.classList.add("selected");
      }
      group.addEventListener("click", (event) => {
        event.stopPropagation();
        this.selectedEdge = sameEdge(this.selectedEdge, edge) ? null : edge;
        this.render();
      });
      svg.appendChild(group);
    }

    for (const node of graph.nodes) {
      const p = layout.positions.get(node.id);
      if (!p) continue;
      const group = document.createElementNS(SVG_NS, "g");
      group.setAttribute("data-testid", `node-${node.id}`);
      const classes = ["node", `kind-${node.kind}`];
      if (this.view.selection.has(node.id)) classes.push("selected");
      if (this.view.activeNodeId === node.id) classes.push("active");
      if (diff?.added_nodes.includes(node.id)) classes.push("diff-added");
      if (diff?.relabeled_nodes.includes(node.id)) classes.push("diff-relabeled");
      if (this.view.offendingNodes.includes(node.id)) classes.push("offending");
      if (this.hasPendingEdit(node.id)) classes.push("pending");
      group.setAttribute("class", classes.join(" "));
      const shape = document.createElementNS(SVG_NS, "rect");
      shape.setAttribute("x", String(p.x));
      shape.setAttribute("y", String(p.y));
      shape.setAttribute("width", String(NODE_W));
      shape.setAttribute("height", String(NODE_H));
      shape.setAttribute("rx", node.kind === "start" || node.kind === "end" ? "22" : "6");
      const text = document.createElementNS(SVG_NS, "text");
      text.setAttribute("x", String(p.x + NODE_W / 2));
      text.setAttribute("y", String(p.y + NODE_H / 2 + 4));
      text.setAttribute("text-anchor", "middle");
      text.textContent = node.label;
      group.append(shape, text);
      group.addEventListener("click", (event) => {
        event.stopPropagation();
        this.view.apply({
          type: "select",
          id: node.id,
          additive: (event as MouseEvent).shiftKey,
        });
        this.render();
      });
      svg.appendChild(group);
    }
  }

  private renderProps(): void {
    const box = this.els.props;
    box.innerHTML = "";
    const graph = this.view.graph;
    const selected = [...this.view.selection];
    if (!graph || selected.length !== 1) {
      box.textContent = selected.length > 1 ? `${selected.length} nodes selected` : "";
      return;
    }
    const node = graph.nodes.find((n) => n.id === selected[0]);
    if (!node) return;
    const title = document.createElement("h3");
    title.textContent = `${node.id}: ${node.label}`;
    const field = document.createElement("textarea");
    field.dataset.testid = "props-description";
    field.value = node.props.description;
    const apply = document.createElement("button");
    apply.dataset.testid = "props-apply";
    apply.textContent = "Apply description";
    apply.addEventListener("click", () => this.editNodeProps(node.id, field.value));
    box.append(title, field, apply);
  }

  private renderTrace(): void {
    const list = this.els.trace;
    list.innerHTML = "";
    for (const row of this.view.traceRows) {
      const item = document.createElement("li");
      item.dataset.kind = row.kind;
      if (row.nodeId) item.dataset.node = row.nodeId;
      item.textContent = `[${row.t}] ${row.kind} ${row.detail}`.trim();
      list.appendChild(item);
    }
  }
}

function sameEdge(a: RenderEdge | null, b: RenderEdge): boolean {
  return !!a && a.source === b.source && a.target === b.target && a.label === b.label;
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) return error.message;
  return error instanceof Error ? error.message : String(error);
}
