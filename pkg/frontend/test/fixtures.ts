/** Hand-built API payloads matching the service's wire format. */

import type {
  EscalationDto,
  EventDto,
  ObservationDto,
  StepDto,
  VerdictDto,
} from "../src/api.js";

export function simObservation(capturedAt = 1): ObservationDto {
  return {
    kind: "sim_state",
    captured_at: capturedAt,
    sim_state: {
      objects: { sponge: { position: "table", held: false } },
      fixtures: { drawer: "closed" },
      gripper: { holding: null },
    },
  };
}

export function makeEscalation(overrides: Partial<EscalationDto> = {}): EscalationDto {
  return {
    id: "esc-1",
    query: {
      task: {
        id: "sponge_in_drawer",
        instruction: "Put the sponge into the drawer",
        subtasks: [
          { index: 0, description: "open the drawer", expected_state: "drawer opened" },
          { index: 1, description: "pick up the sponge", expected_state: "sponge picked up" },
          {
            index: 2,
            description: "put the sponge into the drawer",
            expected_state: "sponge in the drawer",
          },
        ],
      },
      subtask: { index: 1, description: "pick up the sponge", expected_state: "sponge picked up" },
      observation: simObservation(),
      step_index: 1,
    },
    created_at: 1000,
    model_reply: "Yes.",
    estimate: { value: 0.7933400837, method: "token_probability" },
    status: "pending",
    resolution: null,
    episode_id: "ep-1",
    age_ms: 4200,
    threshold: 0.6,
    method: "token_probability",
    ...overrides,
  };
}

export function makeVerdict(overrides: Partial<VerdictDto> = {}): VerdictDto {
  return {
    outcome: "success",
    source: "model",
    estimate: { value: 0.25, method: "token_probability" },
    raw_response: "Yes.",
    ...overrides,
  };
}

export function makeStep(overrides: Partial<StepDto> = {}): StepDto {
  return {
    subtask_index: 0,
    execution_result: simObservation(),
    verdict: makeVerdict(),
    retry_count_at_step: 0,
    ground_truth: null,
    ...overrides,
  };
}

export function metaEvent(seq = 0): EventDto {
  return {
    seq,
    type: "meta",
    episode_id: "ep-1",
    task_id: "sponge_in_drawer",
    created_at: 1000,
    planner: {
      max_retries: 3,
      detector: { strategy: "ssc", method: "token_probability", threshold: 0.6 },
    },
    seed: 7,
  };
}

export function stepEvent(seq: number, step: Partial<StepDto> = {}): EventDto {
  return { seq, type: "step", step: makeStep(step) };
}

export function finalEvent(seq: number, status = "success"): EventDto {
  return { seq, type: "final", status, human_queries: 1, model_queries: 2 };
}
