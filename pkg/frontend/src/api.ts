/** Typed client for the loopgate HTTP API. The console never computes
 * verdicts or uncertainty; everything shown comes from these endpoints. */

export interface SubtaskDto {
  index: number;
  description: string;
  expected_state: string;
}

export interface TaskDto {
  id: string;
  instruction: string;
  subtasks: SubtaskDto[];
}

export interface SimObjectDto {
  position: string;
  held: boolean;
}

export interface SimStateDto {
  objects: Record<string, SimObjectDto>;
  fixtures: Record<string, string>;
  gripper: { holding: string | null };
}

export interface ObservationDto {
  kind: string;
  captured_at: number;
  sim_state?: SimStateDto;
  image_ref?: string;
}

export interface QueryDto {
  task: TaskDto;
  subtask: SubtaskDto;
  observation: ObservationDto;
  step_index: number;
}

export interface EstimateDto {
  value: number;
  method: string;
}

export type OutcomeDto = "success" | "failure";

export interface ResolutionDto {
  outcome: OutcomeDto;
  resolved_at: number;
  operator_note: string | null;
}

export interface EscalationDto {
  id: string;
  query: QueryDto;
  created_at: number;
  model_reply: string | null;
  estimate: EstimateDto | null;
  status: string;
  resolution: ResolutionDto | null;
  episode_id: string;
  age_ms: number;
  threshold: number;
  method: string;
}

export interface VerdictDto {
  outcome: OutcomeDto;
  source: "model" | "human";
  estimate?: EstimateDto;
  raw_response?: string;
}

export interface StepDto {
  subtask_index: number;
  execution_result: ObservationDto;
  verdict: VerdictDto;
  retry_count_at_step: number;
  ground_truth: OutcomeDto | null;
}

export interface DetectorConfigDto {
  strategy: string;
  method: string;
  threshold: number;
}

export interface PlannerDto {
  max_retries: number;
  detector: DetectorConfigDto;
}

export interface EpisodeDto {
  id: string;
  task_id: string;
  status: string;
  created_at: number;
  planner: PlannerDto;
  step_count: number;
  pending_escalation: string | null;
  events_cursor: number;
  error?: string;
  steps?: StepDto[];
}

export type EventDto =
  | {
      seq: number;
      type: "meta";
      episode_id: string;
      task_id: string;
      created_at: number;
      planner: PlannerDto;
      seed: number;
    }
  | { seq: number; type: "step"; step: StepDto }
  | {
      seq: number;
      type: "final";
      status: string;
      human_queries?: number;
      model_queries?: number;
      error?: string;
    };

export interface EventBatchDto {
  episode_id: string;
  cursor: number;
  events: EventDto[];
  status: string;
}

export interface HealthDto {
  status: string;
  episodes: number;
}

export interface EpisodeCreateDto {
  task_id: string;
  threshold?: number;
  max_retries?: number;
  strategy?: string;
  method?: string;
  seed?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`api error ${status}: ${typeof detail === "string" ? detail : JSON.stringify(detail)}`);
    this.name = "ApiError";
  }
}

/** Outcome of a resolve attempt, with races made explicit: someone else may
 * have answered first (conflict carries their resolution) or the escalation
 * may be gone entirely. */
export type ResolveResult =
  | { kind: "resolved"; escalation: EscalationDto }
  | { kind: "conflict"; escalation: EscalationDto }
  | { kind: "gone" };

async function parseBody(response: Response): Promise<unknown> {
  const text = await response.text();
  if (!text) return null;
  try {
    return JSON.parse(text);
  } catch {
    return text;
  }
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    const body = await parseBody(response);
    if (!response.ok) {
      const detail =
        body !== null && typeof body === "object" && "detail" in body
          ? (body as { detail: unknown }).detail
          : body;
      throw new ApiError(response.status, detail);
    }
    return body;
  }

  async health(): Promise<HealthDto> {
    return (await this.request("/healthz")) as HealthDto;
  }

  async listEpisodes(): Promise<EpisodeDto[]> {
    const body = (await this.request("/episodes")) as { episodes: EpisodeDto[] };
    return body.episodes;
  }

  async getEpisode(id: string): Promise<EpisodeDto> {
    return (await this.request(`/episodes/${id}`)) as EpisodeDto;
  }

  async getEvents(id: string, cursor: number, timeoutSec = 0): Promise<EventBatchDto> {
    const params = new URLSearchParams({
      cursor: String(cursor),
      timeout: String(timeoutSec),
    });
    return (await this.request(`/episodes/${id}/events?${params}`)) as EventBatchDto;
  }

  async pending(): Promise<EscalationDto[]> {
    const body = (await this.request("/escalations/pending")) as {
      pending: EscalationDto[];
    };
    return body.pending;
  }

  async createEpisode(body: EpisodeCreateDto): Promise<{ episode_id: string; status: string }> {
    return (await this.request("/episodes", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    })) as { episode_id: string; status: string };
  }

  async resolve(id: string, outcome: OutcomeDto, note?: string): Promise<ResolveResult> {
    try {
      const body = (await this.request(`/escalations/${id}/resolve`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(note === undefined ? { outcome } : { outcome, note }),
      })) as { escalation: EscalationDto };
      return { kind: "resolved", escalation: body.escalation };
    } catch (error) {
      if (error instanceof ApiError) {
        if (error.status === 409) {
          const detail = error.detail as { escalation: EscalationDto };
          return { kind: "conflict", escalation: detail.escalation };
        }
        if (error.status === 404) {
          return { kind: "gone" };
        }
      }
      throw error;
    }
  }
}
