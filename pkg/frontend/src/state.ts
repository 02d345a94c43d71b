/** View models and client-side state transitions.
 *
 * Everything here is a pure function of API payloads plus the operator's
 * own in-flight actions, so the whole UI is reconstructible from the API
 * after a refresh.
 */

import type { EscalationDto, EventDto, OutcomeDto, SubtaskDto } from "./api.js";
import { describeObservation, formatAge, sigFigs } from "./format.js";

/** Per-card resolve lifecycle. A conflict means someone else answered first;
 * the card keeps showing their outcome until the next poll drops it. */
export type ResolveUiState =
  | { kind: "idle" }
  | { kind: "inflight"; outcome: OutcomeDto }
  | { kind: "already_resolved"; winner: OutcomeDto }
  | { kind: "error"; message: string };

export interface CardViewModel {
  id: string;
  episodeId: string;
  instruction: string;
  subtaskDescription: string;
  subtaskIndex: number;
  expectedState: string;
  observationLines: string[];
  observationImage: string | null;
  modelReply: string | null;
  /** null when the detector escalated without a usable estimate. */
  uncertainty: number | null;
  uncertaintyLabel: string;
  method: string;
  threshold: number;
  ageLabel: string;
  resolveState: ResolveUiState;
}

export function buildCard(
  escalation: EscalationDto,
  resolveState: ResolveUiState = { kind: "idle" },
): CardViewModel {
  const { query } = escalation;
  const value = escalation.estimate?.value ?? null;
  return {
    id: escalation.id,
    episodeId: escalation.episode_id,
    instruction: query.task.instruction,
    subtaskDescription: query.subtask.description,
    subtaskIndex: query.subtask.index,
    expectedState: query.subtask.expected_state,
    observationLines: describeObservation(query.observation),
    observationImage:
      query.observation.kind === "image" ? (query.observation.image_ref ?? null) : null,
    modelReply: escalation.model_reply,
    uncertainty: value,
    uncertaintyLabel: value === null ? "n/a" : sigFigs(value),
    method: escalation.method,
    threshold: escalation.threshold,
    ageLabel: formatAge(escalation.age_ms),
    resolveState,
  };
}

/** Rebuild the card list from a fresh poll, keeping any local resolve state
 * for cards that are still pending. Cards render newest-last. */
export function mergeCards(
  previous: CardViewModel[],
  fresh: EscalationDto[],
): CardViewModel[] {
  const states = new Map(previous.map((card) => [card.id, card.resolveState]));
  const sorted = [...fresh].sort((a, b) => a.created_at - b.created_at);
  return sorted.map((escalation) =>
    buildCard(escalation, states.get(escalation.id) ?? { kind: "idle" }),
  );
}

export function setResolveState(
  cards: CardViewModel[],
  id: string,
  resolveState: ResolveUiState,
): CardViewModel[] {
  return cards.map((card) => (card.id === id ? { ...card, resolveState } : card));
}

export interface TimelineEntry {
  seq: number;
  kind: "meta" | "step" | "final";
  label: string;
  detail: string;
  /** Present on steps with a numeric estimate; drawn as a bar. */
  uncertainty: number | null;
  /** Gating threshold from the episode meta, marked on the bar. */
  threshold: number | null;
  source: "model" | "human" | null;
  outcome: OutcomeDto | null;
  subtaskIndex: number | null;
  /** True when this step restarted the plan after a failure. */
  retryMarker: boolean;
}

/** Project an event log onto timeline rows, preserving trace order. */
export function timelineEntries(
  events: EventDto[],
  subtasks: SubtaskDto[] = [],
): TimelineEntry[] {
  const descriptions = new Map(subtasks.map((s) => [s.index, s.description]));
  const entries: TimelineEntry[] = [];
  let lastRetry = 0;
  let threshold: number | null = null;
  for (const event of events) {
    if (event.type === "meta") {
      threshold = event.planner.detector.threshold;
      entries.push({
        seq: event.seq,
        kind: "meta",
        label: `episode started: ${event.task_id}`,
        detail: `threshold ${event.planner.detector.threshold}, retries ${event.planner.max_retries}, seed ${event.seed}`,
        uncertainty: null,
        threshold,
        source: null,
        outcome: null,
        subtaskIndex: null,
        retryMarker: false,
      });
    } else if (event.type === "step") {
      const step = event.step;
      const restarted = step.retry_count_at_step > lastRetry;
      lastRetry = step.retry_count_at_step;
      const description =
        descriptions.get(step.subtask_index) ?? `subtask ${step.subtask_index}`;
      const estimate = step.verdict.estimate ?? null;
      entries.push({
        seq: event.seq,
        kind: "step",
        label: `#${step.subtask_index} ${description}`,
        detail:
          step.verdict.source === "human"
            ? `human said ${step.verdict.outcome}`
            : `model said ${step.verdict.outcome} (u=${estimate ? sigFigs(estimate.value) : "n/a"})`,
        uncertainty: estimate?.value ?? null,
        threshold,
        source: step.verdict.source,
        outcome: step.verdict.outcome,
        subtaskIndex: step.subtask_index,
        retryMarker: restarted,
      });
    } else {
      entries.push({
        seq: event.seq,
        kind: "final",
        label: `finished: ${event.status}`,
        detail:
          event.error !== undefined
            ? event.error
            : `${event.human_queries ?? 0} human / ${event.model_queries ?? 0} model queries`,
        uncertainty: null,
        threshold,
        source: null,
        outcome: null,
        subtaskIndex: null,
        retryMarker: false,
      });
    }
  }
  return entries;
}

/** Cursor-merged event log for one episode. `apply` ignores overlap from
 * re-polls and returns whether anything new arrived. */
export class EventLog {
  events: EventDto[] = [];
  status: string | null = null;

  get cursor(): number {
    return this.events.length;
  }

  apply(batch: { events: EventDto[]; status: string }): boolean {
    let changed = false;
    for (const event of batch.events) {
      if (event.seq === this.events.length) {
        this.events.push(event);
        changed = true;
      }
    }
    if (batch.status !== this.status) {
      this.status = batch.status;
      changed = true;
    }
    return changed;
  }
}

export const POLL_INTERVAL_MS = 1000;
export const MAX_BACKOFF_MS = 15000;

/** Doubling backoff from the poll interval up to a cap. */
export function nextBackoff(previous: number | null, base = POLL_INTERVAL_MS): number {
  if (previous === null) return base;
  return Math.min(previous * 2, MAX_BACKOFF_MS);
}
