/**
 * UI state and its pure transitions.
 *
 * The transcript is append-only; selection lives on the latest turn only
 * and resets whenever new results arrive, so exactly one card per turn can
 * feed the next refinement.
 */

import type { CompareResponse, MilestoneSnapshot, QueryResponse, ResultRow } from "./api.js";

export interface TurnView {
  query: string;
  answer: string;
  degraded: boolean;
  results: ResultRow[];
  selectedId: string | null;
}

export interface AppState {
  sessionId: string | null;
  transcript: TurnView[];
  pending: boolean;
  status: MilestoneSnapshot | null;
  configOutcome: MilestoneSnapshot | null;
  compare: CompareResponse | null;
  lastError: string | null;
}

export function initialState(): AppState {
  return {
    sessionId: null,
    transcript: [],
    pending: false,
    status: null,
    configOutcome: null,
    compare: null,
    lastError: null,
  };
}

/** One in-flight query per session: begin fails while another is pending. */
export function beginQuery(state: AppState): AppState {
  if (state.pending) throw new Error("a query is already in flight");
  return { ...state, pending: true, lastError: null };
}

export function applyTurn(state: AppState, query: string, response: QueryResponse): AppState {
  const turn: TurnView = {
    query,
    answer: response.answer,
    degraded: response.degraded,
    results: response.results,
    selectedId: null,
  };
  return { ...state, pending: false, transcript: [...state.transcript, turn], compare: null };
}

export function failQuery(state: AppState, message: string): AppState {
  return { ...state, pending: false, lastError: message };
}

/** Click a card: selection applies to the latest turn only and replaces any
 * previous pick; clicking the selected card again clears it. */
export function selectResult(state: AppState, turnIndex: number, id: string): AppState {
  const last = state.transcript.length - 1;
  if (turnIndex !== last || last < 0) return state;
  const turn = state.transcript[last];
  if (!turn.results.some((row) => row.id === id)) return state;
  const selectedId = turn.selectedId === id ? null : id;
  const transcript = [...state.transcript];
  transcript[last] = { ...turn, selectedId };
  return { ...state, transcript };
}

export function activeSelection(state: AppState): string | null {
  const last = state.transcript[state.transcript.length - 1];
  return last ? last.selectedId : null;
}

export function applyStatus(state: AppState, status: MilestoneSnapshot): AppState {
  return { ...state, status };
}

export function applyConfigOutcome(state: AppState, outcome: MilestoneSnapshot): AppState {
  return { ...state, configOutcome: outcome, status: outcome };
}

export function applyCompare(state: AppState, compare: CompareResponse): AppState {
  return { ...state, compare };
}
