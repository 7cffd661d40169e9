import { describe, expect, it } from "vitest";

import type { CompareResponse, MilestoneSnapshot } from "../src/api.js";
import {
  buildConfig,
  renderComparePanel,
  renderConfigPanel,
  renderMilestonePopup,
  renderQaPanel,
  renderStatusPanel,
  renderTurn,
} from "../src/render.js";
import { applyTurn, initialState, selectResult } from "../src/state.js";

const DONE: MilestoneSnapshot = {
  stages: {
    data_preprocessing: "done",
    vector_representation: "done",
    index_construction: "running",
  },
  details: {
    data_preprocessing: "3 objects ingested",
    vector_representation: "encoders: text=hash-ngram(16)",
    index_construction: "",
  },
  llm_only: false,
};

describe("status panel", () => {
  it("shows tick marks and details per stage", () => {
    const html = renderStatusPanel(DONE);
    expect(html).toContain("✓");
    expect(html).toContain("◐");
    expect(html).toContain("3 objects ingested");
    expect(html).toContain("Data preprocessing");
  });

  it("renders all stages pending before configuration", () => {
    const html = renderStatusPanel(null);
    expect((html.match(/○/g) ?? []).length).toBe(3);
  });

  it("marks llm-only mode with a badge", () => {
    const html = renderStatusPanel({ ...DONE, llm_only: true });
    expect(html).toContain("LLM-only mode");
  });
});

describe("milestone popup", () => {
  it("lists the three stage outcomes", () => {
    const html = renderMilestonePopup(DONE);
    expect(html).toContain("Configuration applied");
    expect(html).toContain("Data preprocessing: done");
    expect(html).toContain("Index construction: running");
  });
});

describe("qa panel", () => {
  function stateWithTurn(ids: string[], degraded = false) {
    return applyTurn(initialState(), "red coats", {
      session_id: "s",
      turn: 0,
      answer: "Found results",
      degraded,
      results: ids.map((id, i) => ({ rank: i + 1, id, distance: 0.1 * i })),
      stats: { visited: 1, full_evals: 1, abandoned: 0 },
    });
  }

  it("renders result cards in the API's order", () => {
    const html = renderQaPanel(stateWithTurn(["z9", "a1", "m5"]));
    const order = [...html.matchAll(/data-id="([^"]+)"/g)].map((m) => m[1]);
    expect(order).toEqual(["z9", "a1", "m5"]);
  });

  it("shows a warning banner for degraded answers", () => {
    const html = renderQaPanel(stateWithTurn(["a"], true));
    expect(html).toContain("warning-banner");
    expect(html).toContain("degraded");
  });

  it("highlights the selected card and the refine hint", () => {
    let state = stateWithTurn(["a", "b"]);
    state = selectResult(state, 0, "b");
    const html = renderQaPanel(state);
    expect(html).toMatch(/card selected" data-turn="0" data-id="b"/);
    expect(html).toContain("Refining from");
  });

  it("disables submit while a query is pending", () => {
    const html = renderQaPanel({ ...stateWithTurn(["a"]), pending: true });
    expect(html).toContain("disabled");
  });

  it("escapes markup in answers", () => {
    const state = applyTurn(initialState(), "<script>", {
      session_id: "s", turn: 0, answer: "<b>bold</b>", degraded: false,
      results: [], stats: { visited: 0, full_evals: 0, abandoned: 0 },
    });
    const html = renderTurn(state.transcript[0], 0);
    expect(html).not.toContain("<b>bold</b>");
    expect(html).toContain("&lt;b&gt;");
  });
});

describe("compare panel", () => {
  const COMPARE: CompareResponse = {
    frameworks: {
      MUST: { latency_ms: 1.5, results: [{ rank: 1, id: "a", distance: 0.1 }] },
      MR: { latency_ms: 2.5, results: [{ rank: 1, id: "b", distance: 0.2 }] },
      JE: { latency_ms: 0.9, error: "joint-embedding index has not been built" },
    },
  };

  it("renders one column per framework including failures", () => {
    const html = renderComparePanel(COMPARE, "a");
    expect((html.match(/compare-column/g) ?? []).length).toBe(3);
    expect(html).toContain('data-framework="MUST"');
    expect(html).toContain("not been built");
  });

  it("highlights the user's selection", () => {
    const html = renderComparePanel(COMPARE, "a");
    expect(html).toMatch(/compare-row selected">a/);
  });

  it("renders nothing without a comparison", () => {
    expect(renderComparePanel(null, null)).toBe("");
  });
});

describe("config form", () => {
  it("renders fields mirroring the system configuration", () => {
    const html = renderConfigPanel();
    for (const name of ["kb_manifest", "weights_mode", "index_R", "retrieval_k",
                        "llm_provider", "fw_must"]) {
      expect(html).toContain(`name="${name}"`);
    }
  });

  it("builds a config document from form values", () => {
    const config = buildConfig({
      kb_name: "shop", kb_manifest: "data/m.jsonl", kb_ingest: true,
      text_kind: "hash-ngram", text_dim: "32",
      image_kind: "color-hist", image_dim: "48",
      weights_mode: "manual", weights_values: "0.8, 0.2",
      index_R: "16", index_L_build: "40", index_alpha: "1.2",
      index_passes: "2", index_seed: "7",
      fw_must: true, fw_mr: true, fw_je: false,
      retrieval_k: "5", retrieval_L: "50", retrieval_framework: "MUST",
      llm_provider: "template", llm_model: "default", llm_temperature: "0.3",
    }) as any;
    expect(config.knowledge_base).toEqual(
      { name: "shop", manifest: "data/m.jsonl", ingest_enabled: true });
    expect(config.encoders[0]).toEqual(
      { modality: "text", kind: "hash-ngram", dimension: 32 });
    expect(config.weights).toEqual({ mode: "manual", values: [0.8, 0.2] });
    expect(config.index.frameworks).toEqual(["MUST", "MR"]);
    expect(config.llm.temperature).toBeCloseTo(0.3);
  });
});
