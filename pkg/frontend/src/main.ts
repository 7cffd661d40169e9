/**
 * Bootstrap: wires the three panels to the API client and keeps the status
 * panel polling once a second.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  activeSelection,
  applyCompare,
  applyConfigOutcome,
  applyStatus,
  applyTurn,
  beginQuery,
  failQuery,
  initialState,
  selectResult,
} from "./state.js";
import {
  buildConfig,
  renderComparePanel,
  renderConfigPanel,
  renderMilestonePopup,
  renderQaPanel,
  renderStatusPanel,
} from "./render.js";

const api = new ApiClient();
let state = initialState();

function panel(id: string): HTMLElement {
  return document.getElementById(id) as HTMLElement;
}

function redrawStatus(): void {
  panel("status-panel").innerHTML = renderStatusPanel(state.status);
}

function redrawQa(): void {
  panel("qa-panel").innerHTML = renderQaPanel(state);
  panel("compare-panel").innerHTML = renderComparePanel(state.compare, activeSelection(state));
  wireQaPanel();
}

function formValues(form: HTMLFormElement): Record<string, string | boolean> {
  const values: Record<string, string | boolean> = {};
  for (const element of Array.from(form.elements)) {
    const input = element as HTMLInputElement;
    if (!input.name) continue;
    values[input.name] = input.type === "checkbox" ? input.checked : input.value;
  }
  return values;
}

function showPopup(html: string): void {
  const holder = panel("popup-holder");
  holder.innerHTML = html;
  setTimeout(() => {
    holder.innerHTML = "";
  }, 6000);
}

function wireConfigPanel(): void {
  const form = document.getElementById("config-form") as HTMLFormElement;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const errorSpan = document.getElementById("config-error") as HTMLElement;
    errorSpan.textContent = "";
    try {
      const outcome = await api.postConfig(buildConfig(formValues(form)));
      state = applyConfigOutcome(state, outcome);
      redrawStatus();
      showPopup(renderMilestonePopup(outcome));
    } catch (error) {
      if (error instanceof ApiError) {
        errorSpan.textContent = error.field
          ? `${error.field}: ${error.message}`
          : error.message;
      } else {
        errorSpan.textContent = String(error);
      }
    }
  });
}

async function ensureSession(): Promise<string> {
  if (!state.sessionId) {
    state = { ...state, sessionId: await api.openSession() };
  }
  return state.sessionId as string;
}

function wireQaPanel(): void {
  const form = document.getElementById("qa-form") as HTMLFormElement | null;
  if (!form) return;

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const text = (form.elements.namedItem("text") as HTMLInputElement).value.trim();
    const imageInput = form.elements.namedItem("image") as HTMLInputElement;
    const image = imageInput.files && imageInput.files[0] ? imageInput.files[0] : null;
    const selectedId = activeSelection(state);
    if (!text && !image && !selectedId) return;
    try {
      state = beginQuery(state);
      redrawQa();
      const sessionId = await ensureSession();
      const response = await api.submitQuery({ sessionId, text, image, selectedId });
      state = applyTurn(state, text || "(image)", response);
    } catch (error) {
      state = failQuery(state, error instanceof Error ? error.message : String(error));
    }
    redrawQa();
  });

  const compareButton = document.getElementById("compare-button");
  compareButton?.addEventListener("click", async () => {
    const text = (form.elements.namedItem("text") as HTMLInputElement).value.trim();
    const selectedId = activeSelection(state);
    if (!text && !selectedId) return;
    try {
      const sessionId = await ensureSession();
      const compare = await api.compare({ sessionId, text, selectedId });
      state = applyCompare(state, compare);
    } catch (error) {
      state = failQuery(state, error instanceof Error ? error.message : String(error));
    }
    redrawQa();
  });

  panel("qa-panel").querySelectorAll(".card").forEach((card) => {
    card.addEventListener("click", () => {
      const turnIndex = parseInt(card.getAttribute("data-turn") ?? "-1", 10);
      const id = card.getAttribute("data-id") ?? "";
      state = selectResult(state, turnIndex, id);
      redrawQa();
    });
  });
}

async function pollStatus(): Promise<void> {
  try {
    state = applyStatus(state, await api.getStatus());
    panel("status-panel").classList.remove("stale");
  } catch {
    panel("status-panel").classList.add("stale");
  }
  redrawStatus();
}

document.addEventListener("DOMContentLoaded", () => {
  panel("config-panel").innerHTML = renderConfigPanel();
  wireConfigPanel();
  redrawQa();
  void pollStatus();
  setInterval(() => void pollStatus(), 1000);
});
