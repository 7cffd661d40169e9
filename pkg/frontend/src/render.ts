/**
 * HTML renderers for the three working panels and the comparison view.
 *
 * Everything is a template-literal string so the logic stays testable
 * without a DOM; main.ts owns innerHTML assignment and event wiring.
 */

import type { CompareResponse, MilestoneSnapshot, ResultRow } from "./api.js";
import type { AppState, TurnView } from "./state.js";

const TICKS: Record<string, string> = {
  pending: "○",
  running: "◐",
  done: "✓",
  failed: "✗",
};

const STAGE_LABELS: Record<string, string> = {
  data_preprocessing: "Data preprocessing",
  vector_representation: "Vector representation",
  index_construction: "Index construction",
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderConfigPanel(): string {
  return `
  <h2>① Configuration</h2>
  <form id="config-form">
    <fieldset>
      <legend>Knowledge base</legend>
      <label>Name <input name="kb_name" value="demo"></label>
      <label>Manifest path <input name="kb_manifest" placeholder="data/manifest.jsonl"></label>
      <label><input type="checkbox" name="kb_ingest" checked> Ingest external knowledge</label>
    </fieldset>
    <fieldset>
      <legend>Embedding</legend>
      <label>Text encoder
        <select name="text_kind">
          <option value="hash-ngram">hash-ngram</option>
          <option value="external-http">external-http</option>
        </select>
      </label>
      <label>Text dims <input name="text_dim" type="number" value="64"></label>
      <label>Image encoder
        <select name="image_kind">
          <option value="passthrough-vector">passthrough-vector</option>
          <option value="color-hist">color-hist</option>
          <option value="external-http">external-http</option>
        </select>
      </label>
      <label>Image dims <input name="image_dim" type="number" value="48"></label>
    </fieldset>
    <fieldset>
      <legend>Vector weights</legend>
      <label>Mode
        <select name="weights_mode">
          <option value="uniform">uniform</option>
          <option value="learned">learned</option>
          <option value="manual">manual</option>
        </select>
      </label>
      <label>Manual values <input name="weights_values" placeholder="0.8, 0.2"></label>
      <label>Triplets path <input name="weights_triplets" placeholder="data/triplets.jsonl"></label>
    </fieldset>
    <fieldset>
      <legend>Index</legend>
      <label>R <input name="index_R" type="number" value="32"></label>
      <label>L_build <input name="index_L_build" type="number" value="100"></label>
      <label>alpha <input name="index_alpha" type="number" step="0.05" value="1.2"></label>
      <label>passes <input name="index_passes" type="number" value="2"></label>
      <label>seed <input name="index_seed" type="number" value="0"></label>
      <label><input type="checkbox" name="fw_must" checked> MUST</label>
      <label><input type="checkbox" name="fw_mr" checked> MR</label>
      <label><input type="checkbox" name="fw_je" checked> JE</label>
    </fieldset>
    <fieldset>
      <legend>Retrieval</legend>
      <label>k <input name="retrieval_k" type="number" value="10"></label>
      <label>L <input name="retrieval_L" type="number" value="100"></label>
      <label>Framework
        <select name="retrieval_framework">
          <option>MUST</option><option>MR</option><option>JE</option>
        </select>
      </label>
    </fieldset>
    <fieldset>
      <legend>LLM</legend>
      <label>Provider
        <select name="llm_provider">
          <option value="template">template</option>
          <option value="external">external</option>
        </select>
      </label>
      <label>Endpoint <input name="llm_endpoint" placeholder="http://localhost:9000/chat"></label>
      <label>Model <input name="llm_model" value="default"></label>
      <label>Temperature <input name="llm_temperature" type="number" step="0.1" value="0.2"></label>
    </fieldset>
    <button type="submit">Apply configuration</button>
    <span id="config-error" class="field-error"></span>
  </form>`;
}

/** Translate flat form values into the service's configuration document. */
export function buildConfig(values: Record<string, string | boolean>): unknown {
  const frameworks: string[] = [];
  if (values.fw_must) frameworks.push("MUST");
  if (values.fw_mr) frameworks.push("MR");
  if (values.fw_je) frameworks.push("JE");
  const weights: Record<string, unknown> = { mode: values.weights_mode || "uniform" };
  if (values.weights_mode === "manual" && typeof values.weights_values === "string") {
    weights.values = values.weights_values
      .split(",")
      .map((part) => parseFloat(part.trim()))
      .filter((value) => !Number.isNaN(value));
  }
  if (values.weights_mode === "learned") weights.triplets = values.weights_triplets;
  const llm: Record<string, unknown> = {
    provider: values.llm_provider || "template",
    model: values.llm_model || "default",
    temperature: parseFloat(String(values.llm_temperature ?? "0.2")),
  };
  if (values.llm_provider === "external") llm.endpoint = values.llm_endpoint;
  return {
    knowledge_base: {
      name: values.kb_name || "demo",
      manifest: values.kb_manifest || null,
      ingest_enabled: Boolean(values.kb_ingest),
    },
    encoders: [
      { modality: "text", kind: values.text_kind || "hash-ngram",
        dimension: parseInt(String(values.text_dim ?? "64"), 10) },
      { modality: "image", kind: values.image_kind || "passthrough-vector",
        dimension: parseInt(String(values.image_dim ?? "48"), 10) },
    ],
    weights,
    index: {
      R: parseInt(String(values.index_R ?? "32"), 10),
      L_build: parseInt(String(values.index_L_build ?? "100"), 10),
      alpha: parseFloat(String(values.index_alpha ?? "1.2")),
      passes: parseInt(String(values.index_passes ?? "2"), 10),
      seed: parseInt(String(values.index_seed ?? "0"), 10),
      frameworks,
    },
    retrieval: {
      k: parseInt(String(values.retrieval_k ?? "10"), 10),
      L: parseInt(String(values.retrieval_L ?? "100"), 10),
      framework: values.retrieval_framework || "MUST",
    },
    llm,
  };
}

export function renderStatusPanel(status: MilestoneSnapshot | null): string {
  const rows = Object.entries(STAGE_LABELS)
    .map(([stage, label]) => {
      const value = status?.stages[stage] ?? "pending";
      const detail = status?.details[stage] ?? "";
      return `<li class="stage stage-${value}">
        <span class="tick">${TICKS[value] ?? "?"}</span>
        <span class="stage-name">${label}</span>
        <span class="stage-detail">${escapeHtml(detail)}</span>
      </li>`;
    })
    .join("");
  const badge = status?.llm_only ? `<p class="badge">LLM-only mode</p>` : "";
  return `<h2>② Status monitoring</h2>${badge}<ul class="stages">${rows}</ul>`;
}

export function renderMilestonePopup(outcome: MilestoneSnapshot): string {
  const lines = Object.entries(STAGE_LABELS)
    .map(([stage, label]) =>
      `<li>${TICKS[outcome.stages[stage]] ?? "?"} ${label}: ${outcome.stages[stage]}</li>`)
    .join("");
  return `<div class="popup" id="config-popup"><strong>Configuration applied</strong>
    <ul>${lines}</ul></div>`;
}

function renderCard(row: ResultRow, turnIndex: number, selectedId: string | null): string {
  const selected = row.id === selectedId ? " selected" : "";
  return `<div class="card${selected}" data-turn="${turnIndex}" data-id="${escapeHtml(row.id)}">
    <img src="/api/objects/${encodeURIComponent(row.id)}/payload/image"
         alt="" onerror="this.style.display='none'">
    <div class="card-id">${escapeHtml(row.id)}</div>
    <div class="card-distance">${row.distance.toFixed(4)}</div>
  </div>`;
}

export function renderTurn(turn: TurnView, index: number): string {
  const banner = turn.degraded
    ? `<div class="warning-banner">Answer generation degraded; results are unaffected.</div>`
    : "";
  const cards = turn.results.map((row) => renderCard(row, index, turn.selectedId)).join("");
  return `<div class="turn" data-turn="${index}">
    <div class="bubble user">${escapeHtml(turn.query)}</div>
    ${banner}
    <div class="bubble answer">${escapeHtml(turn.answer)}</div>
    <div class="cards">${cards}</div>
  </div>`;
}

export function renderQaPanel(state: AppState): string {
  const transcript = state.transcript.map((turn, index) => renderTurn(turn, index)).join("");
  const selection = state.transcript[state.transcript.length - 1]?.selectedId ?? null;
  const refineHint = selection
    ? `<p class="refine-hint">Refining from <strong>${escapeHtml(selection)}</strong></p>`
    : "";
  const error = state.lastError
    ? `<div class="warning-banner">${escapeHtml(state.lastError)}</div>`
    : "";
  return `<h2>③ Query answering</h2>
  <div id="transcript">${transcript}</div>
  ${error}
  ${refineHint}
  <form id="qa-form">
    <input name="text" placeholder="Describe what you are looking for" autocomplete="off">
    <input name="image" type="file" accept="image/*">
    <button type="submit" ${state.pending ? "disabled" : ""}>Send</button>
    <button type="button" id="compare-button" ${state.pending ? "disabled" : ""}>Compare frameworks</button>
  </form>`;
}

export function renderComparePanel(compare: CompareResponse | null, selectedId: string | null): string {
  if (!compare) return "";
  const columns = Object.entries(compare.frameworks)
    .map(([name, column]) => {
      if (column.error) {
        return `<div class="compare-column" data-framework="${name}">
          <h3>${name}</h3><p class="compare-error">${escapeHtml(column.error)}</p></div>`;
      }
      const rows = (column.results ?? [])
        .map((row) => {
          const hit = row.id === selectedId ? " selected" : "";
          return `<li class="compare-row${hit}">${escapeHtml(row.id)}
            <span>${row.distance.toFixed(4)}</span></li>`;
        })
        .join("");
      return `<div class="compare-column" data-framework="${name}">
        <h3>${name}</h3>
        <p class="latency">${column.latency_ms.toFixed(1)} ms</p>
        <ol>${rows}</ol>
      </div>`;
    })
    .join("");
  return `<h2>Framework comparison</h2><div class="compare-grid">${columns}</div>`;
}
