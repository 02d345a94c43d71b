/** Browser entry point: bind the controller to the static page. */

import { ApiClient, type EpisodeDto } from "./api.js";
import { ConsoleController, type ConsoleView } from "./controller.js";
import {
  renderCards,
  renderConnection,
  renderEpisodeList,
  renderTimelineView,
} from "./render.js";
import type { CardViewModel, TimelineEntry } from "./state.js";

function mustFind(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in index.html`);
  return node;
}

const banner = mustFind("connection-banner");
const escalations = mustFind("escalations");
const episodes = mustFind("episodes");
const timeline = mustFind("timeline");
const timelineTitle = mustFind("timeline-title");

const api = new ApiClient("");

const view: ConsoleView = {
  setConnected(connected: boolean): void {
    renderConnection(banner, connected);
  },
  renderPending(cards: CardViewModel[]): void {
    renderCards(escalations, cards, (id, outcome) => void controller.resolve(id, outcome));
  },
  renderEpisodes(list: EpisodeDto[], selectedId: string | null): void {
    renderEpisodeList(episodes, list, selectedId, (id) => controller.selectEpisode(id));
  },
  renderTimeline(episodeId: string | null, entries: TimelineEntry[], status: string | null): void {
    timelineTitle.textContent =
      episodeId === null ? "Timeline" : `Timeline ${episodeId.slice(0, 8)} (${status ?? "loading"})`;
    renderTimelineView(timeline, entries);
  },
};

const controller = new ConsoleController(api, view);
controller.start();
