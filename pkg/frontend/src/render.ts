/** DOM builders. Data goes in through textContent only, never markup. */

import type { EpisodeDto, OutcomeDto } from "./api.js";
import type { CardViewModel, TimelineEntry } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Horizontal uncertainty bar with the gating threshold marked, so the
 * operator sees how far past the gate this verdict landed. */
export function uncertaintyBar(value: number | null, threshold: number): HTMLElement {
  const bar = el("div", "ubar");
  bar.title =
    value === null
      ? "no numeric estimate; escalated unconditionally"
      : `uncertainty ${value}, threshold ${threshold}`;
  const fill = el("span", "ubar-fill");
  fill.style.width = value === null ? "100%" : `${Math.min(value, 1) * 100}%`;
  if (value === null) fill.classList.add("ubar-fill-forced");
  const tick = el("span", "ubar-tick");
  tick.style.left = `${Math.min(Math.max(threshold, 0), 1) * 100}%`;
  bar.append(fill, tick);
  return bar;
}

export function renderConnection(banner: HTMLElement, connected: boolean): void {
  banner.hidden = connected;
  banner.textContent = connected ? "" : "connection lost; retrying…";
}

export function renderCards(
  container: HTMLElement,
  cards: CardViewModel[],
  onResolve: (id: string, outcome: OutcomeDto) => void,
): void {
  container.replaceChildren();
  if (cards.length === 0) {
    container.append(el("p", "empty", "No pending escalations."));
    return;
  }
  for (const card of cards) {
    container.append(renderCard(card, onResolve));
  }
}

function renderCard(
  card: CardViewModel,
  onResolve: (id: string, outcome: OutcomeDto) => void,
): HTMLElement {
  const root = el("article", "card");
  root.dataset.escalationId = card.id;

  const head = el("header", "card-head");
  head.append(
    el("span", "card-task", card.instruction),
    el("span", "card-age", card.ageLabel),
  );
  root.append(head);

  root.append(
    el("p", "card-subtask", `#${card.subtaskIndex} ${card.subtaskDescription}`),
    el("p", "card-expected", `expected: ${card.expectedState}`),
  );

  const obs = el("div", "card-observation");
  if (card.observationImage !== null) {
    const img = el("img", "card-image");
    img.src = card.observationImage;
    img.alt = "observation";
    obs.append(img);
  } else {
    for (const line of card.observationLines) {
      obs.append(el("div", "obs-line", line));
    }
  }
  root.append(obs);

  if (card.modelReply !== null) {
    root.append(el("p", "card-reply", `model: ${card.modelReply}`));
  }

  const meta = el("div", "card-meta");
  meta.append(
    el("span", "badge", card.method),
    el("span", "card-uncertainty", `u = ${card.uncertaintyLabel}`),
  );
  root.append(meta, uncertaintyBar(card.uncertainty, card.threshold));

  root.append(renderResolveRow(card, onResolve));
  return root;
}

function renderResolveRow(
  card: CardViewModel,
  onResolve: (id: string, outcome: OutcomeDto) => void,
): HTMLElement {
  const row = el("div", "card-actions");
  const state = card.resolveState;
  if (state.kind === "already_resolved") {
    row.append(el("span", "resolved-note", `already resolved: ${state.winner}`));
    return row;
  }
  const success = el("button", "btn btn-success", "Success");
  const failure = el("button", "btn btn-failure", "Failure");
  if (state.kind === "inflight") {
    success.disabled = true;
    failure.disabled = true;
    row.append(success, failure, el("span", "pending-note", `sending ${state.outcome}…`));
  } else {
    success.addEventListener("click", () => onResolve(card.id, "success"));
    failure.addEventListener("click", () => onResolve(card.id, "failure"));
    row.append(success, failure);
    if (state.kind === "error") {
      row.append(el("span", "error-note", state.message));
    }
  }
  return row;
}

export function renderEpisodeList(
  container: HTMLElement,
  episodes: EpisodeDto[],
  selectedId: string | null,
  onSelect: (id: string) => void,
): void {
  container.replaceChildren();
  if (episodes.length === 0) {
    container.append(el("p", "empty", "No episodes yet."));
    return;
  }
  for (const episode of episodes) {
    const row = el("button", "episode-row");
    if (episode.id === selectedId) row.classList.add("selected");
    row.dataset.episodeId = episode.id;
    row.append(
      el("span", `status status-${episode.status}`, episode.status),
      el("span", "episode-task", episode.task_id),
      el("span", "episode-steps", `${episode.step_count} steps`),
    );
    row.addEventListener("click", () => onSelect(episode.id));
    container.append(row);
  }
}

export function renderTimelineView(container: HTMLElement, entries: TimelineEntry[]): void {
  container.replaceChildren();
  if (entries.length === 0) {
    container.append(el("p", "empty", "Select an episode to follow it."));
    return;
  }
  const list = el("ol", "timeline");
  for (const entry of entries) {
    if (entry.retryMarker) {
      list.append(el("li", "retry-marker", "plan restarted"));
    }
    const item = el("li", `tl-entry tl-${entry.kind}`);
    const line = el("div", "tl-line");
    line.append(el("span", "tl-label", entry.label));
    if (entry.source !== null) {
      line.append(el("span", `badge badge-${entry.source}`, entry.source));
    }
    item.append(line, el("div", "tl-detail", entry.detail));
    if (entry.uncertainty !== null && entry.threshold !== null) {
      item.append(uncertaintyBar(entry.uncertainty, entry.threshold));
    }
    list.append(item);
  }
  container.append(list);
}
