/** Pure formatting helpers shared by the card and timeline views. */

import type { ObservationDto } from "./api.js";

/** Three significant digits by default: operators are calibrating trust in
 * the gate, so "0.793" reads better than either "0.8" or full precision. */
export function sigFigs(value: number, digits = 3): string {
  if (!Number.isFinite(value)) return String(value);
  return value.toPrecision(digits);
}

export function formatAge(ms: number): string {
  const total = Math.max(0, Math.floor(ms / 1000));
  if (total < 60) return `${total}s`;
  const minutes = Math.floor(total / 60);
  const seconds = total % 60;
  if (minutes < 60) return `${minutes}m ${String(seconds).padStart(2, "0")}s`;
  const hours = Math.floor(minutes / 60);
  return `${hours}h ${String(minutes % 60).padStart(2, "0")}m`;
}

/** Render an observation as plain lines: one per object, fixture, and the
 * gripper, or the image reference when the observation is a picture. */
export function describeObservation(obs: ObservationDto): string[] {
  if (obs.kind === "image") {
    return [`image: ${obs.image_ref ?? "(missing reference)"}`];
  }
  const state = obs.sim_state;
  if (!state) return ["(no state payload)"];
  const lines: string[] = [];
  for (const [name, object] of Object.entries(state.objects)) {
    lines.push(`${name}: ${object.position}${object.held ? " (held)" : ""}`);
  }
  for (const [name, fixtureState] of Object.entries(state.fixtures)) {
    lines.push(`${name}: ${fixtureState}`);
  }
  lines.push(state.gripper.holding ? `gripper: holding ${state.gripper.holding}` : "gripper: empty");
  return lines;
}
