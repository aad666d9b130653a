// @vitest-environment jsdom
/** DOM behaviors of the studio app against a stubbed backend API. */

import { describe, expect, it } from "vitest";

import { StudioApp } from "../src/app.js";
import type { StudioApi } from "../src/api.js";
import { sampleGraph, sampleSession, waitFor } from "./helpers.js";
import type { OutcomePayload } from "../src/types.js";

function outcome(partial: Partial<OutcomePayload>): OutcomePayload {
  return {
    kind: "answerOnly",
    requirements: null,
    requirements_confirmed: false,
    requirements_rejected: false,
    program: null,
    explanation: null,
    flowchart: null,
    modified_node_ids: [],
    answer: null,
    failure_reason: null,
    repair_count: 0,
    ...partial,
  };
}

function makeApp(apiStub: Partial<StudioApi>): StudioApp {
  document.body.innerHTML = '<div id="app"></div>';
  const app = new StudioApp(document.getElementById("app")!, "http://stub");
  Object.assign(app.api, apiStub);
  app.sessionId = "s1";
  app.view.apply({ type: "session", session: sampleSession() });
  app.view.apply({ type: "serverGraph", graph: sampleGraph(), diff: null });
  app.render();
  return app;
}

const query = (selector: string) => document.querySelector(selector) as HTMLElement;

describe("chat panel", () => {
  it("disables input while a chain is in flight and shows progress", async () => {
    let release: (value: unknown) => void = () => {};
    const gate = new Promise((resolve) => {
      release = resolve;
    });
    const app = makeApp({
      postMessage: async () => {
        await gate;
        return { outcome: outcome({ answer: "hi" }), session: sampleSession() };
      },
      getFlowchart: async () => ({ graph: sampleGraph(), diff: null }),
    });
    const pending = app.sendMessage("hello");
    await waitFor(() => app.view.inFlight, 2000, "in flight");
    expect((query('[data-testid="chat-input"]') as HTMLInputElement).disabled).toBe(true);
    expect(query('[data-testid="progress"]')).toBeTruthy();
    release(null);
    await pending;
    expect((query('[data-testid="chat-input"]') as HTMLInputElement).disabled).toBe(false);
    expect(document.querySelector('[data-testid="progress"]')).toBeNull();
  });

  it("renders a failed outcome as an inline error, session untouched", async () => {
    const app = makeApp({
      postMessage: async () => ({
        outcome: outcome({ kind: "failed", failure_reason: "RepairExhausted" }),
        session: sampleSession(),
      }),
      getFlowchart: async () => ({ graph: sampleGraph(), diff: null }),
    });
    await app.sendMessage("break please");
    expect(query('[data-testid="error"]').textContent).toContain("RepairExhausted");
  });
});

describe("flowchart panel", () => {
  it("prop edit sets the pending badge and the dirty flag", () => {
    const app = makeApp({});
    app.view.apply({ type: "select", id: "n2", additive: false });
    app.render();
    const field = query('[data-testid="props-description"]') as HTMLTextAreaElement;
    field.value = "say it twice as enthusiastically";
    query('[data-testid="props-apply"]').click();
    expect(app.view.dirty).toBe(true);
    expect(app.hasPendingEdit("n2")).toBe(true);
    expect(document.querySelector('[data-testid="node-n2"]')!.classList.contains("pending")).toBe(
      true,
    );
    expect((query('[data-testid="sync-change"]') as HTMLButtonElement).disabled).toBe(false);
  });

  it("locally rejects a second outgoing edge from an action node", () => {
    const app = makeApp({});
    app.connectNodes("n1", "E1", null);
    expect(app.view.lastError).toContain("exactly one outgoing connection");
    expect(app.view.dirty).toBe(false); // rejected edits do not dirty the view
  });

  it("magic debug banner lists the selected node labels", () => {
    const app = makeApp({});
    app.view.apply({ type: "select", id: "n1", additive: false });
    app.view.apply({ type: "select", id: "n2", additive: true });
    app.view.apply({ type: "modeChanged", mode: "magicDebug", nodeIds: ["n1", "n2"] });
    app.render();
    const banner = query('[data-testid="banner"]');
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("goto: Exhibition Area");
    expect(banner.textContent).toContain("say: welcome");
    app.view.apply({ type: "modeChanged", mode: "normal", nodeIds: [] });
    app.render();
    expect(query('[data-testid="banner"]').hidden).toBe(true);
  });

  it("connection loss shows the offline banner", () => {
    const app = makeApp({});
    app.view.apply({ type: "connectionLost" });
    app.render();
    expect(query('[data-testid="offline"]').hidden).toBe(false);
    app.view.apply({ type: "connectionRestored" });
    app.render();
    expect(query('[data-testid="offline"]').hidden).toBe(true);
  });
});
