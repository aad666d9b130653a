// @vitest-environment jsdom
/**
 * End-to-end: a scripted user completes training scenario 1 against the
 * real backend (scripted provider): author, confirm, view the flowchart,
 * insert one node, Sync Change, deploy, and watch two arrival highlights.
 *
 * The backend process is spawned for the test; the UI runs in jsdom and
 * talks real HTTP + WebSocket.
 */

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocketImpl from "ws";

import { StudioApp } from "../src/app.js";
import { waitFor } from "./helpers.js";

const REPO = resolve(__dirname, "..", "..");
const PORT = 8900 + Math.floor(Math.random() * 90);
const BASE = `http://127.0.0.1:${PORT}`;

let backend: ChildProcess | null = null;

async function backendReady(): Promise<void> {
  const deadline = Date.now() + 25_000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/sessions/nonexistent`);
      if (response.status === 404) return;
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error("backend did not start in time");
}

beforeAll(async () => {
  (globalThis as Record<string, unknown>).WebSocket = WebSocketImpl;
  const dir = mkdtempSync(join(tmpdir(), "studio-e2e-"));
  const config = {
    provider: {
      kind: "scripted",
      script_path: join(REPO, "fixtures", "scripts", "training1_author.json"),
    },
    world_file: join(REPO, "fixtures", "worlds", "office.json"),
    events_file: join(REPO, "fixtures", "events", "training1.json"),
    data_dir: join(dir, "data"),
    host: "127.0.0.1",
    port: PORT,
  };
  const configPath = join(dir, "config.json");
  writeFileSync(configPath, JSON.stringify(config));
  backend = spawn(
    "python3",
    ["-m", "robostudio.service.cli", "serve", "--config", configPath],
    { cwd: REPO, stdio: ["ignore", "pipe", "pipe"] },
  );
  backend.stderr?.on("data", () => {});
  await backendReady();
}, 40_000);

afterAll(() => {
  backend?.kill("SIGTERM");
});

describe("training scenario 1, end to end", () => {
  it("author -> confirm -> edit flowchart -> Sync Change -> deploy -> watch run", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const app = new StudioApp(document.getElementById("app")!, BASE);
    const highlights: string[] = [];
    app.onchange = () => {
      const active = app.view.activeNodeId;
      if (active && highlights[highlights.length - 1] !== active) highlights.push(active);
    };
    await app.start();
    expect(app.sessionId).toBeTruthy();

    const query = (selector: string) => document.querySelector(selector) as HTMLElement;
    const input = query('[data-testid="chat-input"]') as HTMLInputElement;
    const form = query('[data-testid="chat-form"]') as HTMLFormElement;

    //  1. Author: describe the service in the chat panel.
    const transcript = readFileSync(
      join(REPO, "fixtures", "transcripts", "training1.txt"),
      "utf-8",
    )
      .split("\n")
      .filter(Boolean);
    input.value = transcript[0];
    form.dispatchEvent(new window.Event("submit", { bubbles: true, cancelable: true }));
    await waitFor(
      () => app.view.session?.requirements?.state === "pending",
      15_000,
      "requirements proposal",
    );
    // The requirement list renders as numbered items with a Confirm button.
    expect(document.querySelectorAll('[data-testid="requirements"] li').length).toBe(3);

    //  2. Confirm via the explicit affordance; the program gets generated.
    query('[data-testid="confirm-requirements"]').click();
    await waitFor(() => app.view.session?.program != null, 15_000, "program generation");
    await waitFor(() => app.view.serverGraph != null, 15_000, "flowchart fetch");

    //  3. The flowchart renders one node per command.
    expect(document.querySelectorAll(".node").length).toBe(
      app.view.serverGraph!.nodes.length,
    );
    expect(app.view.canSyncChange).toBe(false);

    //  4. Insert one node: select the edge after the entry, click a library item.
    const entryEdge = app.view.graph!.edges.find((e) => e.source === "n1")!;
    (document.querySelector(
      `[data-testid="edge-${entryEdge.source}-${entryEdge.target}"]`,
    ) as unknown as SVGGElement).dispatchEvent(
      new window.MouseEvent("click", { bubbles: true }),
    );
    const inserted = app.spliceOnSelectedEdge({
      kind: "action",
      label: "say: Please follow me.",
      description: 'Say "Please follow me.".',
    });
    expect(inserted).toBe("u1");
    await waitFor(() => app.view.dirty, 5_000, "dirty flag");
    const syncButton = query('[data-testid="sync-change"]') as HTMLButtonElement;
    expect(syncButton.disabled).toBe(false);

    //  5. Sync Change converts the edited flowchart back into code.
    syncButton.click();
    await waitFor(() => !app.view.dirty && !app.view.syncing, 15_000, "sync to finish");
    expect(app.view.session!.program).toContain("say: Please follow me.");
    // Diff highlighting marks the inserted node (under its canonical id).
    await waitFor(
      () => document.querySelectorAll(".node.diff-added").length === 1,
      5_000,
      "diff highlight",
    );

    //  6. Deploy and watch the live run: two arrivals, highlighted in order.
    (query('[data-testid="deploy"]') as HTMLButtonElement).click();
    await waitFor(() => app.runId != null, 15_000, "deploy");
    await waitFor(() => !app.view.runActive && app.view.traceRows.length > 0, 20_000, "run finish");

    const arrivals = app.view.traceRows.filter((r) => r.kind === "MoveArrived");
    expect(arrivals.length).toBe(2);
    expect(arrivals.map((a) => a.detail)).toEqual(["Exhibition Area", "Reception Area"]);
    const gotoNodes = app.view.graph!.nodes
      .filter((n) => n.label.startsWith("goto:"))
      .map((n) => n.id);
    for (const arrival of arrivals) {
      expect(arrival.nodeId).not.toBeNull();
      expect(gotoNodes).toContain(arrival.nodeId!);
      expect(highlights).toContain(arrival.nodeId!);
    }
    // The trace list in the DOM shows both arrivals with their nodes.
    expect(document.querySelectorAll('[data-testid="trace"] [data-kind="MoveArrived"]').length).toBe(2);

    app.stop();
  }, 90_000);
});
