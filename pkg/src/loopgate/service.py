"""HTTP face of the loop: episode control, escalations, metrics.

Episodes run on background threads; each detection that the gate refuses to
trust parks its thread on the shared escalation queue until an operator
posts a resolution. Every episode appends its trace to a JSON-lines file as
it goes, so a restart finds complete records for finished episodes and
marks any episode that was mid-flight as aborted by the operator.

Event streams are the persisted lines in order; clients long-poll with a
monotone cursor and never see an event twice or out of order.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Literal, Mapping, Optional

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .backend import Backend, BackendError, TransportError
from .core import (
    EpisodeTrace,
    FinalStatus,
    Outcome,
    StepRecord,
    VerdictSource,
    now_ms,
)
from .detector import (
    AlreadyResolvedError,
    BlockingEscalationQueue,
    DetectorConfig,
    EscalationNotFoundError,
    EscalationRequest,
)
from .evaluation import episode_metrics
from .planner import (
    PlannerConfig,
    SimEnv,
    SimulatedDetectorBackend,
    TaskBundle,
    bundled_task,
    list_bundled_tasks,
    make_detector,
    run_episode_with,
)
from .prompting import StrategyKind
from .uncertainty import Method

logger = logging.getLogger(__name__)

RUNNING = "running"
ERROR = "error"

SIM_CONFIDENT_ACCURACY = 0.9
SIM_UNCERTAIN_ACCURACY = 0.55


@dataclass(frozen=True)
class ServiceConfig:
    """Everything the app factory needs, resolved ahead of time.

    backend None means each episode gets its own simulated judge. probe, when
    set, is called before accepting an episode and signals an unreachable
    backend by raising TransportError.
    """

    data_dir: Path
    tasks: Mapping[str, TaskBundle]
    detector: DetectorConfig
    max_retries: int = 3
    backend: Optional[Backend] = None
    probe: Optional[Callable[[], None]] = None
    console_dir: Optional[Path] = None
    long_poll_cap: float = 30.0


def default_service_config(
    data_dir: str | Path,
    detector: Optional[DetectorConfig] = None,
    max_retries: int = 3,
    backend: Optional[Backend] = None,
    probe: Optional[Callable[[], None]] = None,
    console_dir: Optional[str | Path] = None,
) -> ServiceConfig:
    """Config over the bundled tasks, defaulting to the simulated judge."""
    if detector is None:
        detector = DetectorConfig(
            strategy=StrategyKind.SSC, method=Method.TOKEN_PROBABILITY, threshold=0.6
        )
    return ServiceConfig(
        data_dir=Path(data_dir),
        tasks={name: bundled_task(name) for name in list_bundled_tasks()},
        detector=detector,
        max_retries=max_retries,
        backend=backend,
        probe=probe,
        console_dir=Path(console_dir) if console_dir is not None else None,
    )


class _Episode:
    """Mutable server-side episode record; cond guards events and status."""

    def __init__(
        self,
        episode_id: str,
        task_id: str,
        planner: PlannerConfig,
        path: Path,
        created_at: Optional[int] = None,
    ):
        self.id = episode_id
        self.task_id = task_id
        self.planner = planner
        self.path = path
        self.created_at = now_ms() if created_at is None else created_at
        self.cond = threading.Condition()
        self.events: list[dict] = []
        self.status: str = RUNNING
        self.error: Optional[str] = None
        self.trace: Optional[EpisodeTrace] = None
        self.pending_escalation: Optional[str] = None

    def append_event(self, event: dict, persist: bool = True) -> None:
        with self.cond:
            event = {"seq": len(self.events), **event}
            self.events.append(event)
            if persist:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(event, sort_keys=True) + "\n")
            self.cond.notify_all()

    def finish(self, status: str, error: Optional[str] = None) -> None:
        with self.cond:
            self.status = status
            self.error = error
            self.cond.notify_all()

    def snapshot(self, include_steps: bool = True) -> dict:
        with self.cond:
            steps = [e["step"] for e in self.events if e["type"] == "step"]
            data = {
                "id": self.id,
                "task_id": self.task_id,
                "status": self.status,
                "created_at": self.created_at,
                "planner": self.planner.to_dict(),
                "step_count": len(steps),
                "pending_escalation": self.pending_escalation,
                "events_cursor": len(self.events),
            }
            if self.error is not None:
                data["error"] = self.error
            if include_steps:
                data["steps"] = steps
            return data


class _Registry:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.lock = threading.Lock()
        self.episodes: dict[str, _Episode] = {}
        self.queue = BlockingEscalationQueue()
        self.escalation_episode: dict[str, str] = {}

    def get(self, episode_id: str) -> _Episode:
        with self.lock:
            episode = self.episodes.get(episode_id)
        if episode is None:
            raise HTTPException(status_code=404, detail=f"no episode {episode_id!r}")
        return episode


class _TaggedChannel:
    """Routes one episode's escalations through the shared queue.

    Registers ownership before parking so /escalations/pending can say which
    episode a card belongs to, and enforces one pending escalation per
    episode.
    """

    def __init__(self, registry: _Registry, episode: _Episode):
        self._registry = registry
        self._episode = episode

    def ask(self, request: EscalationRequest, timeout: Optional[float] = None) -> Outcome:
        with self._registry.lock:
            if self._episode.pending_escalation is not None:
                raise RuntimeError(f"episode {self._episode.id} already has a pending escalation")
            self._registry.escalation_episode[request.id] = self._episode.id
        with self._episode.cond:
            self._episode.pending_escalation = request.id
            self._episode.cond.notify_all()
        try:
            return self._registry.queue.ask(request, timeout)
        finally:
            with self._episode.cond:
                self._episode.pending_escalation = None
                self._episode.cond.notify_all()


def _run_episode_thread(registry: _Registry, episode: _Episode, bundle: TaskBundle, seed: int) -> None:
    config = registry.config
    assert bundle.sim_env is not None
    env = SimEnv(replace(bundle.sim_env, rng_seed=seed))
    backend = config.backend or SimulatedDetectorBackend(
        confident_accuracy=SIM_CONFIDENT_ACCURACY,
        uncertain_accuracy=SIM_UNCERTAIN_ACCURACY,
        seed=seed + 1,
    )
    detector = make_detector(backend, episode.planner.detector, _TaggedChannel(registry, episode))

    def on_step(step: StepRecord) -> None:
        episode.append_event({"type": "step", "step": step.to_dict()})

    try:
        trace = run_episode_with(
            bundle.task, env, detector, episode.planner.max_retries, on_step=on_step
        )
    except BackendError as exc:
        logger.error("episode %s failed: %s", episode.id, exc)
        episode.append_event({"type": "final", "status": ERROR, "error": str(exc)})
        episode.finish(ERROR, str(exc))
        return
    episode.append_event(
        {
            "type": "final",
            "status": trace.final_status.value,
            "human_queries": trace.human_queries,
            "model_queries": trace.model_queries,
        }
    )
    with episode.cond:
        episode.trace = trace
    episode.finish(trace.final_status.value)


def _load_persisted(registry: _Registry) -> None:
    """Rebuild finished episodes from disk; mark interrupted ones aborted."""
    for path in sorted(registry.config.data_dir.glob("*.jsonl")):
        try:
            lines = [
                json.loads(line)
                for line in path.read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
            if not lines or lines[0].get("type") != "meta":
                raise ValueError("first line is not a meta record")
            meta = lines[0]
            episode = _Episode(
                episode_id=meta["episode_id"],
                task_id=meta["task_id"],
                planner=PlannerConfig.from_dict(meta["planner"]),
                path=path,
                created_at=meta["created_at"],
            )
            steps = [StepRecord.from_dict(l["step"]) for l in lines if l.get("type") == "step"]
            final = lines[-1] if lines[-1].get("type") == "final" else None
            for line in lines:
                episode.append_event(dict(line), persist=False)
            if final is None:
                # The process died mid-episode; the waiting thread is gone,
                # so the only honest status is an operator abort.
                episode.append_event(
                    {
                        "type": "final",
                        "status": FinalStatus.ABORTED_OPERATOR.value,
                        "human_queries": sum(
                            1 for s in steps if s.verdict.source is VerdictSource.HUMAN
                        ),
                        "model_queries": sum(
                            1 for s in steps if s.verdict.source is VerdictSource.MODEL
                        ),
                    }
                )
                final = episode.events[-1]
            status = final["status"]
            if status != ERROR:
                episode.trace = EpisodeTrace(
                    task_id=episode.task_id,
                    steps=tuple(steps),
                    final_status=FinalStatus(status),
                    human_queries=final["human_queries"],
                    model_queries=final["model_queries"],
                )
            episode.finish(status, final.get("error"))
        except (ValueError, KeyError) as exc:
            logger.warning("skipping unreadable trace file %s: %s", path, exc)
            continue
        registry.episodes[episode.id] = episode


class EpisodeCreate(BaseModel):
    task_id: str
    threshold: Optional[float] = None
    max_retries: Optional[int] = None
    strategy: Optional[str] = None
    method: Optional[str] = None
    seed: Optional[int] = None


class ResolveBody(BaseModel):
    outcome: Literal["success", "failure"]
    note: Optional[str] = None


def _episode_planner(config: ServiceConfig, body: EpisodeCreate) -> PlannerConfig:
    detector = config.detector
    try:
        if body.strategy is not None:
            detector = replace(detector, strategy=StrategyKind(body.strategy))
        if body.method is not None:
            detector = replace(detector, method=Method(body.method))
        if body.threshold is not None:
            detector = replace(detector, threshold=body.threshold)
        max_retries = config.max_retries if body.max_retries is None else body.max_retries
        return PlannerConfig(max_retries=max_retries, detector=detector)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _escalation_card(registry: _Registry, request: EscalationRequest) -> dict:
    card = request.to_dict()
    episode_id = registry.escalation_episode.get(request.id)
    card["episode_id"] = episode_id
    card["age_ms"] = max(now_ms() - request.created_at, 0)
    if episode_id is not None:
        with registry.lock:
            episode = registry.episodes.get(episode_id)
        if episode is not None:
            card["threshold"] = episode.planner.detector.threshold
            card["method"] = episode.planner.detector.method.value
    return card


def create_app(config: ServiceConfig) -> FastAPI:
    config.data_dir.mkdir(parents=True, exist_ok=True)
    registry = _Registry(config)
    _load_persisted(registry)
    app = FastAPI(title="loopgate")
    app.state.registry = registry

    @app.get("/healthz")
    def healthz() -> dict:
        with registry.lock:
            count = len(registry.episodes)
        return {"status": "ok", "episodes": count}

    @app.post("/episodes", status_code=202)
    def create_episode(body: EpisodeCreate) -> dict:
        bundle = config.tasks.get(body.task_id)
        if bundle is None:
            raise HTTPException(status_code=404, detail=f"no task {body.task_id!r}")
        if bundle.sim_env is None:
            raise HTTPException(
                status_code=422, detail=f"task {body.task_id!r} has no simulated environment"
            )
        if config.probe is not None:
            try:
                config.probe()
            except TransportError as exc:
                raise HTTPException(status_code=503, detail=str(exc)) from exc
        planner = _episode_planner(config, body)
        episode_id = uuid.uuid4().hex
        seed = body.seed if body.seed is not None else now_ms() & 0x7FFFFFFF
        episode = _Episode(
            episode_id=episode_id,
            task_id=body.task_id,
            planner=planner,
            path=config.data_dir / f"{episode_id}.jsonl",
        )
        episode.append_event(
            {
                "type": "meta",
                "episode_id": episode_id,
                "task_id": body.task_id,
                "created_at": episode.created_at,
                "planner": planner.to_dict(),
                "seed": seed,
            }
        )
        with registry.lock:
            registry.episodes[episode_id] = episode
        thread = threading.Thread(
            target=_run_episode_thread,
            args=(registry, episode, bundle, seed),
            name=f"episode-{episode_id[:8]}",
            daemon=True,
        )
        thread.start()
        return {"episode_id": episode_id, "status": episode.status}

    @app.get("/episodes")
    def list_episodes() -> dict:
        with registry.lock:
            episodes = list(registry.episodes.values())
        episodes.sort(key=lambda e: (e.created_at, e.id))
        return {"episodes": [e.snapshot(include_steps=False) for e in episodes]}

    @app.get("/episodes/{episode_id}")
    def get_episode(episode_id: str) -> dict:
        return registry.get(episode_id).snapshot()

    @app.get("/episodes/{episode_id}/events")
    def get_events(episode_id: str, cursor: int = 0, timeout: float = 0.0) -> dict:
        if cursor < 0:
            raise HTTPException(status_code=422, detail="cursor must be >= 0")
        episode = registry.get(episode_id)
        deadline = time.monotonic() + min(max(timeout, 0.0), config.long_poll_cap)
        with episode.cond:
            while len(episode.events) <= cursor and episode.status == RUNNING:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                episode.cond.wait(remaining)
            events = list(episode.events[cursor:])
            status = episode.status
        return {
            "episode_id": episode_id,
            "cursor": cursor + len(events),
            "events": events,
            "status": status,
        }

    @app.get("/escalations/pending")
    def pending_escalations() -> dict:
        cards = [_escalation_card(registry, r) for r in registry.queue.pending()]
        return {"pending": cards}

    @app.post("/escalations/{escalation_id}/resolve")
    def resolve_escalation(escalation_id: str, body: ResolveBody) -> dict:
        try:
            updated = registry.queue.resolve(escalation_id, Outcome(body.outcome), body.note)
        except EscalationNotFoundError:
            raise HTTPException(status_code=404, detail=f"no escalation {escalation_id!r}")
        except AlreadyResolvedError as exc:
            current = registry.queue.get(escalation_id)
            raise HTTPException(
                status_code=409,
                detail={"message": str(exc), "escalation": _escalation_card(registry, current)},
            ) from exc
        return {"escalation": _escalation_card(registry, updated)}

    @app.get("/metrics")
    def metrics() -> dict:
        with registry.lock:
            episodes = list(registry.episodes.values())
        running = sum(1 for e in episodes if e.status == RUNNING)
        errored = sum(1 for e in episodes if e.status == ERROR)
        traces = [e.trace for e in episodes if e.trace is not None]
        finished = episode_metrics(traces).to_dict() if traces else None
        return {
            "episodes": len(episodes),
            "running": running,
            "errored": errored,
            "pending_escalations": len(registry.queue.pending()),
            "finished": finished,
        }

    if config.console_dir is not None and config.console_dir.is_dir():
        app.mount("/console", StaticFiles(directory=config.console_dir, html=True), name="console")

    return app
