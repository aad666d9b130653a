/**
 * Backend client: REST calls plus the per-session WebSocket event stream.
 *
 * The stream resumes from the last seen sequence number after a drop, so
 * a reconnecting client misses nothing.
 */

import type {
  DiffPayload,
  EventEnvelope,
  OutcomePayload,
  RenderGraph,
  SessionJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public status: number,
    public body: Record<string, unknown> | null,
  ) {
    super(message);
  }

  get diagnostics(): { code: string; path: string; message: string }[] {
    const diags = this.body?.diagnostics;
    return Array.isArray(diags) ? (diags as { code: string; path: string; message: string }[]) : [];
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = (await response.json().catch(() => null)) as Record<string, unknown> | null;
  if (!response.ok) {
    const message = (body?.message as string) ?? `HTTP ${response.status}`;
    throw new ApiError(message, response.status, body);
  }
  return body as T;
}

export class StudioApi {
  constructor(public baseUrl: string) {}

  createSession(): Promise<{ session: SessionJson }> {
    return request(`${this.baseUrl}/sessions`, { method: "POST" });
  }

  getSession(id: string): Promise<{ session: SessionJson }> {
    return request(`${this.baseUrl}/sessions/${id}`);
  }

  postMessage(
    id: string,
    text: string,
  ): Promise<{ outcome: OutcomePayload; session: SessionJson }> {
    return request(`${this.baseUrl}/sessions/${id}/messages`, {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }

  getFlowchart(id: string): Promise<{ graph: RenderGraph; diff: DiffPayload | null }> {
    return request(`${this.baseUrl}/sessions/${id}/flowchart`);
  }

  syncChange(
    id: string,
    graph: RenderGraph,
  ): Promise<{ diff: DiffPayload; session: SessionJson }> {
    return request(`${this.baseUrl}/sessions/${id}/flowchart`, {
      method: "PUT",
      body: JSON.stringify({ graph }),
    });
  }

  magicDebugStart(
    id: string,
    nodeIds: string[],
  ): Promise<{ explanation: string; session: SessionJson }> {
    return request(`${this.baseUrl}/sessions/${id}/magic-debug`, {
      method: "POST",
      body: JSON.stringify({ node_ids: nodeIds }),
    });
  }

  magicDebugEnd(id: string): Promise<{ session: SessionJson }> {
    return request(`${this.baseUrl}/sessions/${id}/magic-debug`, { method: "DELETE" });
  }

  deploy(id: string, target = "simulated", address?: string): Promise<{ run_id: string }> {
    return request(`${this.baseUrl}/sessions/${id}/deploy`, {
      method: "POST",
      body: JSON.stringify({ target, address }),
    });
  }

  cancelRun(id: string, runId: string): Promise<{ cancelled: string }> {
    return request(`${this.baseUrl}/sessions/${id}/runs/${runId}`, { method: "DELETE" });
  }

  runTrace(id: string, runId: string): Promise<{ trace: Record<string, unknown>[] }> {
    return request(`${this.baseUrl}/sessions/${id}/runs/${runId}/trace`);
  }
}

export interface StreamHandlers {
  onEnvelope: (envelope: EventEnvelope) => void;
  onStatus?: (connected: boolean) => void;
}

/** Reconnecting event stream; resumes after the last seen seq. */
export class EventStream {
  private ws: WebSocket | null = null;
  private lastSeq = 0;
  private closed = false;
  private retryMs = 250;

  constructor(
    private baseUrl: string,
    private sessionId: string,
    private handlers: StreamHandlers,
  ) {
    this.connect();
  }

  private wsUrl(): string {
    const http = this.baseUrl.replace(/^http/, "ws");
    return `${http}/sessions/${this.sessionId}/events?after=${this.lastSeq}`;
  }

  private connect(): void {
    if (this.closed) return;
    const ws = new WebSocket(this.wsUrl());
    this.ws = ws;
    ws.onopen = () => {
      this.retryMs = 250;
      this.handlers.onStatus?.(true);
    };
    ws.onmessage = (event: MessageEvent) => {
      const envelope = JSON.parse(String(event.data)) as EventEnvelope;
      if (envelope.seq > this.lastSeq) this.lastSeq = envelope.seq;
      this.handlers.onEnvelope(envelope);
    };
    ws.onclose = () => {
      if (this.closed) return;
      this.handlers.onStatus?.(false);
      setTimeout(() => this.connect(), this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, 5000);
    };
    ws.onerror = () => {
      try {
        ws.close();
      } catch {
        /* already closed */
      }
    };
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
