import http from "node:http";
import type { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, test } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { makeEscalation } from "./fixtures.js";

let server: http.Server;
let api: ApiClient;

const resolved = makeEscalation({
  id: "lose",
  status: "resolved",
  resolution: { outcome: "success", resolved_at: 2000, operator_note: null },
});

beforeAll(async () => {
  server = http.createServer((req, res) => {
    const send = (status: number, body: unknown) => {
      res.writeHead(status, { "content-type": "application/json" });
      res.end(JSON.stringify(body));
    };
    const url = req.url ?? "";
    if (url === "/healthz") {
      send(200, { status: "ok", episodes: 2 });
    } else if (url === "/escalations/pending") {
      send(200, { pending: [makeEscalation()] });
    } else if (url === "/escalations/win/resolve") {
      let raw = "";
      req.on("data", (chunk) => (raw += chunk));
      req.on("end", () => {
        const body = JSON.parse(raw);
        send(200, {
          escalation: makeEscalation({
            id: "win",
            status: "resolved",
            resolution: { outcome: body.outcome, resolved_at: 2000, operator_note: body.note ?? null },
          }),
        });
      });
    } else if (url === "/escalations/lose/resolve") {
      send(409, { detail: { message: "escalation already resolved", escalation: resolved } });
    } else if (url === "/escalations/ghost/resolve") {
      send(404, { detail: "no escalation ghost" });
    } else if (url.startsWith("/episodes/e1/events")) {
      send(200, { episode_id: "e1", cursor: 1, events: [], status: "running" });
    } else if (url === "/episodes" && req.method === "POST") {
      send(202, { episode_id: "e9", status: "running" });
    } else if (url === "/episodes") {
      send(200, { episodes: [] });
    } else {
      send(422, { detail: "teapot mode not supported" });
    }
  });
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const { port } = server.address() as AddressInfo;
  api = new ApiClient(`http://127.0.0.1:${port}`);
});

afterAll(async () => {
  await new Promise((resolve) => server.close(resolve));
});

describe("ApiClient", () => {
  test("parses plain payloads", async () => {
    expect(await api.health()).toEqual({ status: "ok", episodes: 2 });
    expect(await api.listEpisodes()).toEqual([]);
    const pending = await api.pending();
    expect(pending).toHaveLength(1);
    expect(pending[0].id).toBe("esc-1");
  });

  test("createEpisode returns the accepted id", async () => {
    expect(await api.createEpisode({ task_id: "open_drawer", seed: 1 })).toEqual({
      episode_id: "e9",
      status: "running",
    });
  });

  test("getEvents passes cursor and timeout as query params", async () => {
    const batch = await api.getEvents("e1", 1, 2);
    expect(batch.cursor).toBe(1);
    expect(batch.status).toBe("running");
  });

  test("a winning resolve reports resolved with the new record", async () => {
    const result = await api.resolve("win", "failure", "looked wrong");
    expect(result.kind).toBe("resolved");
    if (result.kind === "resolved") {
      expect(result.escalation.resolution?.outcome).toBe("failure");
      expect(result.escalation.resolution?.operator_note).toBe("looked wrong");
    }
  });

  test("a lost race reports conflict with the winner attached", async () => {
    const result = await api.resolve("lose", "failure");
    expect(result.kind).toBe("conflict");
    if (result.kind === "conflict") {
      expect(result.escalation.resolution?.outcome).toBe("success");
    }
  });

  test("a vanished escalation reports gone", async () => {
    expect(await api.resolve("ghost", "success")).toEqual({ kind: "gone" });
  });

  test("other failures raise ApiError with the service detail", async () => {
    const failure = api.getEpisode("nope");
    await expect(failure).rejects.toBeInstanceOf(ApiError);
    await expect(failure).rejects.toMatchObject({
      status: 422,
      detail: "teapot mode not supported",
    });
  });
});
