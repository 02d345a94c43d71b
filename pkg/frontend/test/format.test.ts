import { describe, expect, test } from "vitest";

import { describeObservation, formatAge, sigFigs } from "../src/format.js";
import { simObservation } from "./fixtures.js";

describe("sigFigs", () => {
  test("three significant digits by default", () => {
    expect(sigFigs(0.7933400837)).toBe("0.793");
    expect(sigFigs(0.0523459)).toBe("0.0523");
    expect(sigFigs(1)).toBe("1.00");
    expect(sigFigs(0)).toBe("0.00");
  });

  test("digit count is adjustable", () => {
    expect(sigFigs(0.123456, 5)).toBe("0.12346");
  });

  test("non-finite values pass through", () => {
    expect(sigFigs(Number.NaN)).toBe("NaN");
  });
});

describe("formatAge", () => {
  test("seconds, minutes, hours", () => {
    expect(formatAge(0)).toBe("0s");
    expect(formatAge(4200)).toBe("4s");
    expect(formatAge(59_999)).toBe("59s");
    expect(formatAge(60_000)).toBe("1m 00s");
    expect(formatAge(125_000)).toBe("2m 05s");
    expect(formatAge(3_600_000)).toBe("1h 00m");
    expect(formatAge(3_840_000)).toBe("1h 04m");
  });

  test("negative ages clamp to zero", () => {
    expect(formatAge(-50)).toBe("0s");
  });
});

describe("describeObservation", () => {
  test("simulated state renders one line per thing", () => {
    expect(describeObservation(simObservation())).toEqual([
      "sponge: table",
      "drawer: closed",
      "gripper: empty",
    ]);
  });

  test("held objects and a busy gripper are marked", () => {
    const obs = simObservation();
    obs.sim_state!.objects.sponge = { position: "gripper", held: true };
    obs.sim_state!.gripper.holding = "sponge";
    expect(describeObservation(obs)).toEqual([
      "sponge: gripper (held)",
      "drawer: closed",
      "gripper: holding sponge",
    ]);
  });

  test("image observations show the reference", () => {
    expect(
      describeObservation({ kind: "image", captured_at: 3, image_ref: "frames/0003.png" }),
    ).toEqual(["image: frames/0003.png"]);
  });
});
