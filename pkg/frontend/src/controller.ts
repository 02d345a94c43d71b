/** Wiring between the API client, the pollers, and a rendering surface.
 *
 * The controller owns all client state. The view is a dumb sink, so tests
 * drive the exact code paths the buttons do and assert on what was
 * rendered.
 */

import type { ApiClient, EpisodeDto, OutcomeDto, SubtaskDto } from "./api.js";
import { Poller } from "./poller.js";
import {
  buildCard,
  EventLog,
  mergeCards,
  POLL_INTERVAL_MS,
  setResolveState,
  timelineEntries,
  type CardViewModel,
  type TimelineEntry,
} from "./state.js";

export interface ConsoleView {
  setConnected(connected: boolean): void;
  renderPending(cards: CardViewModel[]): void;
  renderEpisodes(episodes: EpisodeDto[], selectedId: string | null): void;
  renderTimeline(episodeId: string | null, entries: TimelineEntry[], status: string | null): void;
}

export interface ControllerOptions {
  pollIntervalMs?: number;
  /** How long a "already resolved" card lingers after losing a race. */
  conflictTtlMs?: number;
  now?: () => number;
}

export class ConsoleController {
  private cards: CardViewModel[] = [];
  private conflictGhosts = new Map<string, { card: CardViewModel; expiresAt: number }>();
  private subtasksByEpisode = new Map<string, SubtaskDto[]>();
  private selectedEpisode: string | null = null;
  private eventLog = new EventLog();
  private readonly intervalMs: number;
  private readonly conflictTtlMs: number;
  private readonly now: () => number;
  private readonly pendingPoller: Poller<void>;
  private readonly episodesPoller: Poller<void>;
  private eventsPoller: Poller<void> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly view: ConsoleView,
    options: ControllerOptions = {},
  ) {
    this.intervalMs = options.pollIntervalMs ?? POLL_INTERVAL_MS;
    this.conflictTtlMs = options.conflictTtlMs ?? 5000;
    this.now = options.now ?? Date.now;
    this.pendingPoller = new Poller({
      fetch: async () => this.refreshPending(),
      onData: () => {},
      onConnectionChange: (connected) => this.view.setConnected(connected),
      intervalMs: this.intervalMs,
    });
    this.episodesPoller = new Poller({
      fetch: async () => this.refreshEpisodes(),
      onData: () => {},
      intervalMs: this.intervalMs,
    });
  }

  start(): void {
    this.pendingPoller.start();
    this.episodesPoller.start();
  }

  stop(): void {
    this.pendingPoller.stop();
    this.episodesPoller.stop();
    this.eventsPoller?.stop();
  }

  /** Force one poll of everything; lets tests wait deterministically. */
  async pollNow(): Promise<void> {
    await this.pendingPoller.tick();
    await this.episodesPoller.tick();
    await this.eventsPoller?.tick();
  }

  get pendingCards(): CardViewModel[] {
    return this.cards;
  }

  private async refreshPending(): Promise<void> {
    const fresh = await this.api.pending();
    for (const escalation of fresh) {
      this.subtasksByEpisode.set(escalation.episode_id, escalation.query.task.subtasks);
    }
    const merged = mergeCards(this.cards, fresh);
    const seen = new Set(merged.map((card) => card.id));
    const cutoff = this.now();
    for (const [id, ghost] of this.conflictGhosts) {
      if (ghost.expiresAt <= cutoff) {
        this.conflictGhosts.delete(id);
      } else if (!seen.has(id)) {
        merged.push(ghost.card);
      }
    }
    this.cards = merged;
    this.view.renderPending(this.cards);
  }

  private async refreshEpisodes(): Promise<void> {
    const episodes = await this.api.listEpisodes();
    this.view.renderEpisodes(episodes, this.selectedEpisode);
  }

  selectEpisode(id: string | null): void {
    this.eventsPoller?.stop();
    this.eventsPoller = null;
    this.selectedEpisode = id;
    this.eventLog = new EventLog();
    if (id === null) {
      this.view.renderTimeline(null, [], null);
      return;
    }
    this.view.renderTimeline(id, [], null);
    this.eventsPoller = new Poller({
      fetch: async () => this.refreshEvents(id),
      onData: () => {},
      intervalMs: this.intervalMs,
    });
    this.eventsPoller.start();
  }

  private async refreshEvents(id: string): Promise<void> {
    const batch = await this.api.getEvents(id, this.eventLog.cursor);
    if (this.selectedEpisode !== id) return;
    if (this.eventLog.apply(batch)) {
      const subtasks = this.subtasksByEpisode.get(id) ?? [];
      this.view.renderTimeline(
        id,
        timelineEntries(this.eventLog.events, subtasks),
        this.eventLog.status,
      );
    }
    if (batch.status !== "running") {
      this.eventsPoller?.stop();
    }
  }

  /** What the Success / Failure buttons call. One in-flight resolve per
   * card; races surface as the winner's outcome on the card. */
  async resolve(id: string, outcome: OutcomeDto): Promise<void> {
    const card = this.cards.find((c) => c.id === id);
    if (!card || card.resolveState.kind === "inflight") return;
    if (card.resolveState.kind === "already_resolved") return;
    this.cards = setResolveState(this.cards, id, { kind: "inflight", outcome });
    this.view.renderPending(this.cards);
    try {
      const result = await this.api.resolve(id, outcome);
      if (result.kind === "resolved" || result.kind === "gone") {
        this.cards = this.cards.filter((c) => c.id !== id);
      } else {
        const winner = result.escalation.resolution?.outcome ?? outcome;
        const ghost = buildCard(result.escalation, {
          kind: "already_resolved",
          winner,
        });
        // A concurrent poll may have already dropped the card; keep the
        // ghost visible either way.
        this.cards = this.cards.some((c) => c.id === id)
          ? this.cards.map((c) => (c.id === id ? ghost : c))
          : [...this.cards, ghost];
        this.conflictGhosts.set(id, {
          card: ghost,
          expiresAt: this.now() + this.conflictTtlMs,
        });
      }
      this.view.renderPending(this.cards);
      await this.eventsPoller?.tick();
    } catch (error) {
      const message = error instanceof Error ? error.message : String(error);
      this.cards = setResolveState(this.cards, id, { kind: "error", message });
      this.view.renderPending(this.cards);
    }
  }
}
