"""Shared domain types for tasks, plans, observations, and verdicts.

All types here are immutable after construction and carry a canonical JSON
form (snake_case field names) used by the dataset format, the HTTP API, and
trace logs.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Optional

from .uncertainty import UncertaintyEstimate


class Outcome(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"

    def flipped(self) -> "Outcome":
        return Outcome.FAILURE if self is Outcome.SUCCESS else Outcome.SUCCESS


class VerdictSource(str, Enum):
    MODEL = "model"
    HUMAN = "human"


class ObservationKind(str, Enum):
    IMAGE = "image"
    SIM_STATE = "sim_state"


class FinalStatus(str, Enum):
    SUCCESS = "success"
    ABORTED_RETRIES_EXHAUSTED = "aborted_retries_exhausted"
    ABORTED_OPERATOR = "aborted_operator"


def now_ms() -> int:
    """Wall-clock timestamp with millisecond resolution. Informational only."""
    return int(time.time() * 1000)


def canonical_json(data: Any) -> str:
    """Stable JSON encoding: sorted keys, compact separators."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Subtask:
    """One step of the decomposed plan, with its expected post-condition."""

    index: int
    description: str
    expected_state: str

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "description": self.description,
            "expected_state": self.expected_state,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Subtask":
        return cls(data["index"], data["description"], data["expected_state"])


@dataclass(frozen=True)
class TaskSpec:
    """A task instruction together with its ordered subtask plan."""

    id: str
    instruction: str
    subtasks: tuple[Subtask, ...]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "subtasks": [s.to_dict() for s in self.subtasks],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TaskSpec":
        return cls(
            id=data["id"],
            instruction=data["instruction"],
            subtasks=tuple(Subtask.from_dict(s) for s in data["subtasks"]),
        )


def validate_task_spec(spec: TaskSpec) -> list[str]:
    """Check TaskSpec invariants; one entry per violation, empty when valid."""
    violations: list[str] = []
    if not spec.id:
        violations.append("task id empty")
    if not spec.instruction:
        violations.append("instruction empty")
    if not spec.subtasks:
        violations.append("subtasks empty")
        return violations
    indices = [s.index for s in spec.subtasks]
    if indices != list(range(len(spec.subtasks))):
        violations.append("indices not contiguous")
    for s in spec.subtasks:
        if not s.description:
            violations.append(f"subtask {s.index} description empty")
        if not s.expected_state:
            violations.append(f"subtask {s.index} expected_state empty")
    return violations


@dataclass(frozen=True)
class Observation:
    """What the detector sees after a subtask executes.

    Exactly one of image_ref / sim_state is present, matching kind. A
    simulated snapshot is stored in its JSON form so this module stays
    independent of the simulator's state type.
    """

    kind: ObservationKind
    captured_at: int
    image_ref: Optional[str] = None
    sim_state: Optional[Mapping[str, Any]] = None

    def __post_init__(self) -> None:
        if self.kind is ObservationKind.IMAGE:
            if self.image_ref is None or self.sim_state is not None:
                raise ValueError("image observation must carry image_ref only")
        else:
            if self.sim_state is None or self.image_ref is not None:
                raise ValueError("sim_state observation must carry sim_state only")

    @classmethod
    def image(cls, image_ref: str, captured_at: Optional[int] = None) -> "Observation":
        return cls(
            kind=ObservationKind.IMAGE,
            captured_at=now_ms() if captured_at is None else captured_at,
            image_ref=image_ref,
        )

    @classmethod
    def sim(cls, sim_state: Mapping[str, Any], captured_at: Optional[int] = None) -> "Observation":
        return cls(
            kind=ObservationKind.SIM_STATE,
            captured_at=now_ms() if captured_at is None else captured_at,
            sim_state=sim_state,
        )

    def to_dict(self) -> dict:
        data: dict = {"kind": self.kind.value, "captured_at": self.captured_at}
        if self.kind is ObservationKind.IMAGE:
            data["image_ref"] = self.image_ref
        else:
            data["sim_state"] = self.sim_state
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "Observation":
        return cls(
            kind=ObservationKind(data["kind"]),
            captured_at=data["captured_at"],
            image_ref=data.get("image_ref"),
            sim_state=data.get("sim_state"),
        )


@dataclass(frozen=True)
class Verdict:
    """The detector's final success/failure judgment and where it came from.

    The source/estimate coupling is enforced at construction: a model verdict
    always carries the estimate that gated it, a human verdict never does.
    """

    outcome: Outcome
    source: VerdictSource
    estimate: Optional[UncertaintyEstimate] = None
    raw_response: Optional[str] = None

    def __post_init__(self) -> None:
        if self.source is VerdictSource.MODEL:
            if self.estimate is None:
                raise ValueError("model verdict requires an estimate")
        else:
            if self.estimate is not None:
                raise ValueError("human verdict must not carry an estimate")
            if self.raw_response is not None:
                raise ValueError("human verdict must not carry a raw response")

    def to_dict(self) -> dict:
        data: dict = {"outcome": self.outcome.value, "source": self.source.value}
        if self.estimate is not None:
            data["estimate"] = self.estimate.to_dict()
        if self.raw_response is not None:
            data["raw_response"] = self.raw_response
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "Verdict":
        estimate = data.get("estimate")
        return cls(
            outcome=Outcome(data["outcome"]),
            source=VerdictSource(data["source"]),
            estimate=UncertaintyEstimate.from_dict(estimate) if estimate else None,
            raw_response=data.get("raw_response"),
        )


@dataclass(frozen=True)
class StepRecord:
    """One execute-then-detect cycle inside an episode.

    ground_truth is only available from simulated environments and feeds the
    detection-accuracy bookkeeping; it is None for live runs.
    """

    subtask_index: int
    execution_result: Observation
    verdict: Verdict
    retry_count_at_step: int
    ground_truth: Optional[Outcome] = None

    def to_dict(self) -> dict:
        return {
            "subtask_index": self.subtask_index,
            "execution_result": self.execution_result.to_dict(),
            "verdict": self.verdict.to_dict(),
            "retry_count_at_step": self.retry_count_at_step,
            "ground_truth": self.ground_truth.value if self.ground_truth else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "StepRecord":
        gt = data.get("ground_truth")
        return cls(
            subtask_index=data["subtask_index"],
            execution_result=Observation.from_dict(data["execution_result"]),
            verdict=Verdict.from_dict(data["verdict"]),
            retry_count_at_step=data["retry_count_at_step"],
            ground_truth=Outcome(gt) if gt else None,
        )


@dataclass(frozen=True)
class EpisodeTrace:
    """Ordered record of every subtask execution, detection, and retry."""

    task_id: str
    steps: tuple[StepRecord, ...]
    final_status: FinalStatus
    human_queries: int = 0
    model_queries: int = 0

    def __post_init__(self) -> None:
        if self.human_queries + self.model_queries != len(self.steps):
            raise ValueError("query counts must add up to the number of steps")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "steps": [s.to_dict() for s in self.steps],
            "final_status": self.final_status.value,
            "human_queries": self.human_queries,
            "model_queries": self.model_queries,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EpisodeTrace":
        return cls(
            task_id=data["task_id"],
            steps=tuple(StepRecord.from_dict(s) for s in data["steps"]),
            final_status=FinalStatus(data["final_status"]),
            human_queries=data["human_queries"],
            model_queries=data["model_queries"],
        )
