import json
import time

import pytest
from fastapi.testclient import TestClient

from loopgate.backend import BackendRequest, TransportError
from loopgate.core import Observation, Outcome, Subtask, TaskSpec, Verdict, VerdictSource
from loopgate.detector import DetectorConfig
from loopgate.planner import PlannerConfig, TaskBundle
from loopgate.prompting import StrategyKind
from loopgate.service import ServiceConfig, create_app, default_service_config
from loopgate.uncertainty import Method


@pytest.fixture
def make_client(tmp_path):
    clients = []

    def _make(**overrides):
        config = default_service_config(data_dir=tmp_path / "data", **overrides)
        client = TestClient(create_app(config))
        clients.append(client)
        return client

    yield _make
    for client in clients:
        client.close()


@pytest.fixture
def client(make_client):
    return make_client()


def start_episode(client, task_id="open_drawer", **overrides):
    body = {"task_id": task_id, "seed": 7, **overrides}
    response = client.post("/episodes", json=body)
    assert response.status_code == 202
    return response.json()["episode_id"]


def drain_events(client, episode_id, deadline=10.0):
    """Long-poll until the episode leaves the running state."""
    events = []
    cursor = 0
    end = time.monotonic() + deadline
    while time.monotonic() < end:
        response = client.get(
            f"/episodes/{episode_id}/events", params={"cursor": cursor, "timeout": 1.0}
        )
        assert response.status_code == 200
        payload = response.json()
        events.extend(payload["events"])
        cursor = payload["cursor"]
        if payload["status"] != "running":
            return events, payload["status"]
    raise AssertionError("episode did not finish in time")


def wait_pending(client, deadline=5.0):
    end = time.monotonic() + deadline
    while time.monotonic() < end:
        cards = client.get("/escalations/pending").json()["pending"]
        if cards:
            return cards
        time.sleep(0.02)
    raise AssertionError("no escalation appeared in time")


def resolve(client, escalation_id, outcome, note=None):
    return client.post(
        f"/escalations/{escalation_id}/resolve", json={"outcome": outcome, "note": note}
    )


def wait_done_or_card(client, episode_id, deadline=5.0):
    """Wait until the episode finishes or its next escalation shows up."""
    end = time.monotonic() + deadline
    while time.monotonic() < end:
        status = client.get(f"/episodes/{episode_id}").json()["status"]
        if status != "running":
            return status, None
        pending = client.get("/escalations/pending").json()["pending"]
        if pending:
            return status, pending[0]
        time.sleep(0.02)
    raise AssertionError("episode neither finished nor escalated in time")


class TestBasics:
    def test_healthz(self, client):
        response = client.get("/healthz")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "episodes": 0}

    def test_unknown_task(self, client):
        response = client.post("/episodes", json={"task_id": "fold_laundry"})
        assert response.status_code == 404

    def test_bad_threshold_override(self, client):
        response = client.post("/episodes", json={"task_id": "open_drawer", "threshold": 2.0})
        assert response.status_code == 422
        response = client.post("/episodes", json={"task_id": "open_drawer", "strategy": "bogus"})
        assert response.status_code == 422

    def test_task_without_simulation(self, tmp_path):
        task = TaskSpec(
            id="ghost",
            instruction="Do the thing.",
            subtasks=(Subtask(index=0, description="do it", expected_state="done"),),
        )
        config = ServiceConfig(
            data_dir=tmp_path / "data",
            tasks={"ghost": TaskBundle(task=task)},
            detector=DetectorConfig(
                strategy=StrategyKind.SSC, method=Method.TOKEN_PROBABILITY, threshold=0.6
            ),
        )
        with TestClient(create_app(config)) as client:
            response = client.post("/episodes", json={"task_id": "ghost"})
            assert response.status_code == 422
            assert "simulated environment" in response.json()["detail"]

    def test_unreachable_backend_refuses_episodes(self, make_client):
        def probe():
            raise TransportError("endpoint unreachable: boom")

        client = make_client(probe=probe)
        response = client.post("/episodes", json={"task_id": "open_drawer"})
        assert response.status_code == 503
        assert "unreachable" in response.json()["detail"]

    def test_unknown_episode(self, client):
        assert client.get("/episodes/deadbeef").status_code == 404
        assert client.get("/episodes/deadbeef/events").status_code == 404


class TestEpisodeLifecycle:
    def test_autonomous_episode_streams_and_persists(self, tmp_path, make_client):
        client = make_client()
        episode_id = start_episode(client, threshold=1.0)
        events, status = drain_events(client, episode_id)

        assert [e["seq"] for e in events] == list(range(len(events)))
        assert events[0]["type"] == "meta"
        assert events[0]["seed"] == 7
        assert events[-1]["type"] == "final"
        assert events[-1]["status"] == status
        assert status in ("success", "aborted_retries_exhausted")
        step_events = [e for e in events if e["type"] == "step"]
        assert step_events
        # Threshold 1.0 keeps every verdict on the model side.
        assert events[-1]["human_queries"] == 0
        assert all(s["step"]["verdict"]["source"] == "model" for s in step_events)

        snapshot = client.get(f"/episodes/{episode_id}").json()
        assert snapshot["status"] == status
        assert snapshot["step_count"] == len(step_events)
        assert snapshot["steps"] == [e["step"] for e in step_events]
        assert snapshot["events_cursor"] == len(events)

        listing = client.get("/episodes").json()["episodes"]
        assert [e["id"] for e in listing] == [episode_id]
        assert "steps" not in listing[0]

        persisted = [
            json.loads(line)
            for line in (tmp_path / "data" / f"{episode_id}.jsonl").read_text().splitlines()
        ]
        assert persisted == events

    def test_event_cursor_semantics(self, client):
        episode_id = start_episode(client, threshold=1.0)
        events, status = drain_events(client, episode_id)

        tail = client.get(f"/episodes/{episode_id}/events", params={"cursor": 2}).json()
        assert tail["events"] == events[2:]
        assert tail["cursor"] == len(events)

        done = client.get(
            f"/episodes/{episode_id}/events", params={"cursor": len(events)}
        ).json()
        assert done["events"] == []
        assert done["status"] == status

        bad = client.get(f"/episodes/{episode_id}/events", params={"cursor": -1})
        assert bad.status_code == 422

    def test_backend_errors_surface_as_error_status(self, tmp_path):
        class Exploding:
            def complete(self, request: BackendRequest):
                raise TransportError("judge melted")

        config = default_service_config(data_dir=tmp_path / "data", backend=Exploding())
        with TestClient(create_app(config)) as client:
            episode_id = start_episode(client, threshold=1.0)
            events, status = drain_events(client, episode_id)
            assert status == "error"
            assert events[-1] == {
                "seq": len(events) - 1,
                "type": "final",
                "status": "error",
                "error": "judge melted",
            }
            assert client.get(f"/episodes/{episode_id}").json()["error"] == "judge melted"
            metrics = client.get("/metrics").json()
            assert metrics["errored"] == 1
            assert metrics["finished"] is None


class TestEscalationFlow:
    def test_operator_drives_the_plan(self, client):
        episode_id = start_episode(client, task_id="sponge_in_drawer", threshold=0.0)

        cards = wait_pending(client)
        assert len(cards) == 1
        card = cards[0]
        assert card["episode_id"] == episode_id
        assert card["status"] == "pending"
        assert card["threshold"] == 0.0
        assert card["method"] == "token_probability"
        assert card["age_ms"] >= 0
        assert card["model_reply"] in ("Yes.", "No.")
        assert card["estimate"]["method"] == "token_probability"
        assert card["query"]["subtask"]["index"] == 0
        assert card["query"]["observation"]["kind"] == "sim_state"

        first = resolve(client, card["id"], "success", note="looks open")
        assert first.status_code == 200
        resolved = first.json()["escalation"]
        assert resolved["status"] == "resolved"
        assert resolved["resolution"]["outcome"] == "success"
        assert resolved["resolution"]["operator_note"] == "looks open"

        # The verdict advanced the plan to the second subtask.
        card = wait_pending(client)[0]
        assert card["query"]["subtask"]["index"] == 1

        # A failure verdict restarts from the top.
        assert resolve(client, card["id"], "failure").status_code == 200
        card = wait_pending(client)[0]
        assert card["query"]["subtask"]["index"] == 0

        snapshot = client.get(f"/episodes/{episode_id}").json()
        assert snapshot["status"] == "running"
        assert snapshot["pending_escalation"] == card["id"]

        # Drive the episode home with success answers.
        status = "running"
        for _ in range(20):
            assert resolve(client, card["id"], "success").status_code == 200
            status, card = wait_done_or_card(client, episode_id)
            if status != "running":
                break
        assert status == "success"

        events, _ = drain_events(client, episode_id)
        final = events[-1]
        assert final["human_queries"] == len([e for e in events if e["type"] == "step"])
        assert final["model_queries"] == 0

    def test_duplicate_resolution_conflicts(self, client):
        episode_id = start_episode(client, threshold=0.0)
        card = wait_pending(client)[0]
        assert resolve(client, card["id"], "failure").status_code == 200

        again = resolve(client, card["id"], "success")
        assert again.status_code == 409
        detail = again.json()["detail"]
        assert "already" in detail["message"]
        assert detail["escalation"]["resolution"]["outcome"] == "failure"

        # Let the retried plan finish so no thread stays parked.
        status, card = wait_done_or_card(client, episode_id)
        assert status == "running"
        resolve(client, card["id"], "success")
        drain_events(client, episode_id)

    def test_resolution_errors(self, client):
        assert resolve(client, "nope", "success").status_code == 404
        episode_id = start_episode(client, threshold=0.0)
        card = wait_pending(client)[0]
        bad = client.post(f"/escalations/{card['id']}/resolve", json={"outcome": "maybe"})
        assert bad.status_code == 422
        # Unblock the parked episode thread so teardown is clean.
        resolve(client, card["id"], "success")
        drain_events(client, episode_id)


class TestMetrics:
    def test_aggregates_finished_episodes(self, client):
        episode_id = start_episode(client, threshold=1.0)
        drain_events(client, episode_id)
        metrics = client.get("/metrics").json()
        assert metrics["episodes"] == 1
        assert metrics["running"] == 0
        assert metrics["errored"] == 0
        assert metrics["pending_escalations"] == 0
        finished = metrics["finished"]
        assert finished["episodes"] == 1
        assert 0.0 <= finished["success_rate"] <= 1.0
        assert finished["human_involve_rate"] == 0.0


class TestPersistence:
    def detector(self):
        return DetectorConfig(
            strategy=StrategyKind.SSC, method=Method.TOKEN_PROBABILITY, threshold=1.0
        )

    def test_restart_recovers_finished_episodes(self, tmp_path):
        config = default_service_config(data_dir=tmp_path / "data")
        with TestClient(create_app(config)) as client:
            episode_id = start_episode(client, threshold=1.0)
            events, status = drain_events(client, episode_id)
            before = client.get(f"/episodes/{episode_id}").json()

        with TestClient(create_app(config)) as reborn:
            assert reborn.get("/healthz").json()["episodes"] == 1
            after = reborn.get(f"/episodes/{episode_id}").json()
            assert after == before
            replayed = reborn.get(f"/episodes/{episode_id}/events").json()
            assert replayed["events"] == events
            assert replayed["status"] == status

    def test_interrupted_episode_marked_aborted(self, tmp_path):
        data_dir = tmp_path / "data"
        data_dir.mkdir()
        planner = PlannerConfig(max_retries=3, detector=self.detector())
        step = {
            "subtask_index": 0,
            "execution_result": {"kind": "sim_state", "captured_at": 1, "sim_state": {"t": 1}},
            "verdict": {"outcome": "success", "source": "human"},
            "retry_count_at_step": 0,
        }
        lines = [
            {
                "seq": 0,
                "type": "meta",
                "episode_id": "abc123",
                "task_id": "open_drawer",
                "created_at": 5,
                "planner": planner.to_dict(),
                "seed": 1,
            },
            {"seq": 1, "type": "step", "step": step},
        ]
        path = data_dir / "abc123.jsonl"
        path.write_text("".join(json.dumps(l, sort_keys=True) + "\n" for l in lines))

        config = default_service_config(data_dir=data_dir)
        with TestClient(create_app(config)) as client:
            snapshot = client.get("/episodes/abc123").json()
            assert snapshot["status"] == "aborted_operator"
            assert snapshot["step_count"] == 1
            events = client.get("/episodes/abc123/events").json()["events"]
            assert events[-1] == {
                "seq": 2,
                "type": "final",
                "status": "aborted_operator",
                "human_queries": 1,
                "model_queries": 0,
            }
        # The synthesized final is persisted, so the next restart agrees.
        persisted = [json.loads(l) for l in path.read_text().splitlines()]
        assert persisted[-1]["type"] == "final"

    def test_unreadable_files_skipped(self, tmp_path):
        data_dir = tmp_path / "data"
        data_dir.mkdir()
        (data_dir / "junk.jsonl").write_text("not json at all\n")
        config = default_service_config(data_dir=data_dir)
        with TestClient(create_app(config)) as client:
            assert client.get("/healthz").json() == {"status": "ok", "episodes": 0}


class TestConsoleMount:
    def test_serves_static_console(self, tmp_path):
        console = tmp_path / "dist"
        console.mkdir()
        (console / "index.html").write_text("<html><body>console</body></html>")
        config = default_service_config(data_dir=tmp_path / "data", console_dir=console)
        with TestClient(create_app(config)) as client:
            response = client.get("/console/")
            assert response.status_code == 200
            assert "console" in response.text

    def test_absent_console_leaves_api_up(self, client):
        assert client.get("/console/").status_code == 404
        assert client.get("/healthz").status_code == 200
