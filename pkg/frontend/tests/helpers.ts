import type { RenderGraph, SessionJson } from "../src/types.js";

export function sampleGraph(): RenderGraph {
  return {
    version: "renderGraph/v1",
    nodes: [
      { id: "S", kind: "start", label: "Start", props: { description: "The program starts here." } },
      {
        id: "n1",
        kind: "action",
        label: "goto: Exhibition Area",
        props: { description: "Move to Exhibition Area." },
      },
      {
        id: "n2",
        kind: "action",
        label: "say: welcome",
        props: { description: 'Say "welcome".' },
      },
      { id: "E1", kind: "end", label: "End", props: { description: "The program ends here." } },
    ],
    edges: [
      { source: "S", target: "n1", label: null },
      { source: "n1", target: "n2", label: null },
      { source: "n2", target: "E1", label: null },
    ],
  };
}

export function sampleSession(overrides: Partial<SessionJson> = {}): SessionJson {
  return {
    id: "s1",
    transcript: [],
    requirements: null,
    program: "goto: Exhibition Area\nsay: welcome\n",
    pending_props: {},
    mode: { kind: "normal" },
    last_diff: null,
    ...overrides,
  };
}

export async function waitFor(
  predicate: () => boolean,
  timeoutMs = 15_000,
  label = "condition",
): Promise<void> {
  const start = Date.now();
  while (!predicate()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error(`timed out waiting for ${label}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
}
