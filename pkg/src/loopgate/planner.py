"""Closed-loop plan execution over a simulated tabletop environment.

The loop executes subtasks in order, asks the failure detector after each
one, advances on a success verdict and restarts the plan from the first
subtask on a failure verdict, up to a retry budget. The environment is never
reset on retry; already-satisfied subtasks re-execute as no-op successes,
which is what makes restarting from the top cheap.

The simulator models pick/place/open/close over named objects and fixtures
with per-attempt success probabilities, and reports ground truth for every
executed subtask, so detector quality is measurable end to end.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Protocol

from .backend import Backend, BackendReply, BackendRequest, LogprobEntry, TokenLogprob
from .core import (
    EpisodeTrace,
    FinalStatus,
    Observation,
    ObservationKind,
    Outcome,
    StepRecord,
    Subtask,
    TaskSpec,
    Verdict,
    VerdictSource,
    validate_task_spec,
)
from .detector import (
    CallbackEscalationChannel,
    DetectionQuery,
    DetectorConfig,
    EscalationChannel,
    EscalationExpiredError,
    failure_detect,
)

GRIPPER_LOCATION = "gripper"
FIXTURE_OPEN = "open"
FIXTURE_CLOSED = "closed"


class UnknownActionError(ValueError):
    """A subtask description could not be grounded in the environment."""


class InvalidTaskError(ValueError):
    def __init__(self, problems: Iterable[str]):
        problems = list(problems)
        super().__init__("; ".join(problems))
        self.problems = tuple(problems)


class ActionKind(str, Enum):
    PICK = "pick"
    PLACE = "place"
    OPEN = "open"
    CLOSE = "close"


@dataclass(frozen=True)
class Action:
    """A grounded motor command: what to move and where."""

    kind: ActionKind
    object_id: Optional[str] = None
    target_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind is ActionKind.PICK:
            ok = self.object_id is not None and self.target_id is None
        elif self.kind is ActionKind.PLACE:
            ok = self.object_id is not None and self.target_id is not None
        else:
            ok = self.object_id is None and self.target_id is not None
        if not ok:
            raise ValueError(f"malformed {self.kind.value} action")


@dataclass(frozen=True)
class EnvState:
    """Snapshot of the tabletop: object positions, fixture states, gripper.

    Positions are symbolic: another object's id, a fixture's id, or any
    free-form location name. A held object sits at the reserved "gripper"
    position and is mirrored by holding.
    """

    objects: Mapping[str, str]
    fixtures: Mapping[str, str] = field(default_factory=dict)
    holding: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", dict(self.objects))
        object.__setattr__(self, "fixtures", dict(self.fixtures))
        for fixture, value in self.fixtures.items():
            if value not in (FIXTURE_OPEN, FIXTURE_CLOSED):
                raise ValueError(f"fixture {fixture!r} has invalid state {value!r}")
        held = [o for o, pos in self.objects.items() if pos == GRIPPER_LOCATION]
        if self.holding is None:
            if held:
                raise ValueError(f"objects at gripper with nothing held: {held}")
        else:
            if self.holding not in self.objects:
                raise ValueError(f"held object {self.holding!r} unknown")
            if held != [self.holding]:
                raise ValueError("holding does not match object positions")

    def to_dict(self) -> dict:
        return {
            "objects": {
                oid: {"position": pos, "held": pos == GRIPPER_LOCATION}
                for oid, pos in self.objects.items()
            },
            "fixtures": dict(self.fixtures),
            "gripper": {"holding": self.holding},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EnvState":
        objects: dict[str, str] = {}
        for oid, entry in data["objects"].items():
            position = entry["position"]
            if entry.get("held", False) != (position == GRIPPER_LOCATION):
                raise ValueError(f"object {oid!r} held flag contradicts its position")
            objects[oid] = position
        return cls(
            objects=objects,
            fixtures=data.get("fixtures", {}),
            holding=data.get("gripper", {}).get("holding"),
        )


_VERB_PATTERNS = (
    (ActionKind.PICK, re.compile(r"\b(pick|grasp|grab)\b")),
    (ActionKind.PLACE, re.compile(r"\b(place|put|drop)\b")),
    (ActionKind.OPEN, re.compile(r"\bopen\b")),
    (ActionKind.CLOSE, re.compile(r"\b(close|shut)\b")),
)


def _find_id(text: str, ids: Iterable[str]) -> Optional[str]:
    # Earliest mention wins so "put the mouse on the notebook" grounds to
    # the mouse; at the same position the longer phrase wins so "cube tray"
    # is not shadowed by "cube".
    best: Optional[tuple[int, int, str]] = None
    for ident in ids:
        phrase = ident.replace("_", " ").lower()
        match = re.search(rf"(?<![a-z0-9]){re.escape(phrase)}(?![a-z0-9])", text)
        if match is None:
            continue
        rank = (match.start(), -len(phrase), ident)
        if best is None or rank < best:
            best = rank
    return best[2] if best else None


def parse_action(description: str, state: EnvState) -> Action:
    """Ground a natural-language subtask in the environment's vocabulary.

    The earliest verb decides the action kind; object and target slots are
    filled by matching known identifiers (underscores read as spaces).
    Placement targets may be fixtures or other objects.
    """
    text = description.lower()
    found: Optional[tuple[int, ActionKind]] = None
    for kind, pattern in _VERB_PATTERNS:
        match = pattern.search(text)
        if match and (found is None or match.start() < found[0]):
            found = (match.start(), kind)
    if found is None:
        raise UnknownActionError(f"no actionable verb in {description!r}")
    kind = found[1]
    if kind in (ActionKind.OPEN, ActionKind.CLOSE):
        fixture = _find_id(text, state.fixtures)
        if fixture is None:
            raise UnknownActionError(f"no known fixture in {description!r}")
        return Action(kind=kind, target_id=fixture)
    obj = _find_id(text, state.objects)
    if obj is None:
        raise UnknownActionError(f"no known object in {description!r}")
    if kind is ActionKind.PICK:
        return Action(kind=kind, object_id=obj)
    remainder = text.replace(obj.replace("_", " ").lower(), "", 1)
    targets = (set(state.fixtures) | set(state.objects)) - {obj}
    target = _find_id(remainder, targets)
    if target is None:
        raise UnknownActionError(f"no placement target in {description!r}")
    return Action(kind=kind, object_id=obj, target_id=target)


class _Attempt(Enum):
    NOOP_SUCCESS = "noop_success"  # goal already holds, nothing to do
    BLOCKED = "blocked"  # precondition violated, fails outright
    CHANCE = "chance"  # outcome decided by the success-probability coin


def _classify(state: EnvState, action: Action) -> _Attempt:
    if action.kind is ActionKind.PICK:
        if state.holding == action.object_id:
            return _Attempt.NOOP_SUCCESS
        if state.holding is not None:
            return _Attempt.BLOCKED
        position = state.objects[action.object_id]  # type: ignore[index]
        if state.fixtures.get(position) == FIXTURE_CLOSED:
            return _Attempt.BLOCKED
        return _Attempt.CHANCE
    if action.kind is ActionKind.PLACE:
        if (
            state.objects.get(action.object_id) == action.target_id  # type: ignore[arg-type]
            and state.holding != action.object_id
        ):
            return _Attempt.NOOP_SUCCESS
        if state.holding != action.object_id:
            return _Attempt.BLOCKED
        if state.fixtures.get(action.target_id) == FIXTURE_CLOSED:  # type: ignore[arg-type]
            return _Attempt.BLOCKED
        return _Attempt.CHANCE
    current = state.fixtures[action.target_id]  # type: ignore[index]
    wanted = FIXTURE_OPEN if action.kind is ActionKind.OPEN else FIXTURE_CLOSED
    return _Attempt.NOOP_SUCCESS if current == wanted else _Attempt.CHANCE


def _apply(state: EnvState, action: Action) -> EnvState:
    objects = dict(state.objects)
    fixtures = dict(state.fixtures)
    holding = state.holding
    if action.kind is ActionKind.PICK:
        objects[action.object_id] = GRIPPER_LOCATION  # type: ignore[index]
        holding = action.object_id
    elif action.kind is ActionKind.PLACE:
        objects[action.object_id] = action.target_id  # type: ignore[index,assignment]
        holding = None
    elif action.kind is ActionKind.OPEN:
        fixtures[action.target_id] = FIXTURE_OPEN  # type: ignore[index]
    else:
        fixtures[action.target_id] = FIXTURE_CLOSED  # type: ignore[index]
    return EnvState(objects=objects, fixtures=fixtures, holding=holding)


def sim_execute(
    state: EnvState, subtask: Subtask, rng: random.Random, success_prob: float
) -> tuple[EnvState, bool]:
    """Attempt one subtask; returns the new state and whether it succeeded.

    Only genuinely chancy attempts consume randomness: a goal that already
    holds is a free success and a violated precondition a free failure, so
    retries that re-run satisfied subtasks do not perturb the RNG stream.
    """
    action = parse_action(subtask.description, state)
    attempt = _classify(state, action)
    if attempt is _Attempt.NOOP_SUCCESS:
        return state, True
    if attempt is _Attempt.BLOCKED:
        return state, False
    if rng.random() < success_prob:
        return _apply(state, action), True
    return state, False


def _goal_holds(state: EnvState, action: Action) -> bool:
    if action.kind is ActionKind.PICK:
        return state.holding == action.object_id
    if action.kind is ActionKind.PLACE:
        return (
            state.objects.get(action.object_id) == action.target_id  # type: ignore[arg-type]
            and state.holding != action.object_id
        )
    wanted = FIXTURE_OPEN if action.kind is ActionKind.OPEN else FIXTURE_CLOSED
    return state.fixtures.get(action.target_id) == wanted  # type: ignore[arg-type]


def ground_truth_check(state: EnvState, subtask: Subtask) -> Outcome:
    """Does the state satisfy the subtask's goal condition right now?"""
    action = parse_action(subtask.description, state)
    return Outcome.SUCCESS if _goal_holds(state, action) else Outcome.FAILURE


@dataclass(frozen=True)
class SimEnvConfig:
    """Initial world plus the stochastic execution model.

    per_subtask_success_prob maps a subtask index to its attempt success
    probability; indices not in the map fall back to default_success_prob.
    """

    initial_state: EnvState
    per_subtask_success_prob: Mapping[int, float] = field(default_factory=dict)
    default_success_prob: float = 0.7
    rng_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "per_subtask_success_prob", dict(self.per_subtask_success_prob)
        )
        for index, prob in self.per_subtask_success_prob.items():
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"success probability for subtask {index} out of range: {prob}")
        if not 0.0 <= self.default_success_prob <= 1.0:
            raise ValueError(f"default_success_prob out of range: {self.default_success_prob}")

    def success_prob_for(self, index: int) -> float:
        return self.per_subtask_success_prob.get(index, self.default_success_prob)

    def to_dict(self) -> dict:
        return {
            "initial_state": self.initial_state.to_dict(),
            "per_subtask_success_prob": {
                str(i): p for i, p in sorted(self.per_subtask_success_prob.items())
            },
            "default_success_prob": self.default_success_prob,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SimEnvConfig":
        raw = data.get("per_subtask_success_prob", {})
        if isinstance(raw, (int, float)):
            # Scalar shorthand: one probability for every subtask.
            per_subtask: dict[int, float] = {}
            default = float(raw)
        else:
            per_subtask = {int(k): float(v) for k, v in raw.items()}
            default = data.get("default_success_prob", 0.7)
        return cls(
            initial_state=EnvState.from_dict(data["initial_state"]),
            per_subtask_success_prob=per_subtask,
            default_success_prob=default,
            rng_seed=data.get("rng_seed", 0),
        )


class TaskEnvironment(Protocol):
    def execute(self, subtask: Subtask) -> Observation: ...

    def reset(self) -> Observation: ...

    def ground_truth(self, subtask: Subtask) -> Optional[Outcome]: ...


PerturbHook = Callable[[EnvState, Subtask], EnvState]


class SimEnv:
    """Stateful simulator wrapper around the pure transition functions.

    Time is a logical tick counter rather than the wall clock, so two runs
    with the same seed produce byte-identical traces. An optional perturb
    hook rewrites the state right before each execution, for injecting
    disturbances (displaced objects, re-closed drawers) in tests.
    """

    def __init__(self, config: SimEnvConfig, perturb: Optional[PerturbHook] = None):
        self._config = config
        self._state = config.initial_state
        self._rng = random.Random(config.rng_seed)
        self._perturb = perturb
        self._tick = 0
        self._last_truth: Optional[Outcome] = None
        self._last_index: Optional[int] = None

    @property
    def state(self) -> EnvState:
        return self._state

    def reset(self) -> Observation:
        """Restore the initial world; the RNG stream continues uninterrupted."""
        self._state = self._config.initial_state
        self._tick = 0
        self._last_truth = None
        self._last_index = None
        return Observation.sim(self._state.to_dict(), captured_at=self._tick)

    def execute(self, subtask: Subtask) -> Observation:
        if self._perturb is not None:
            self._state = self._perturb(self._state, subtask)
        self._state, _ = sim_execute(
            self._state, subtask, self._rng, self._config.success_prob_for(subtask.index)
        )
        self._tick += 1
        self._last_truth = ground_truth_check(self._state, subtask)
        self._last_index = subtask.index
        return Observation.sim(self._state.to_dict(), captured_at=self._tick)

    def ground_truth(self, subtask: Subtask) -> Optional[Outcome]:
        if subtask.index != self._last_index:
            raise ValueError("ground truth is only available for the last executed subtask")
        return self._last_truth


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlannerConfig:
    max_retries: int
    detector: DetectorConfig

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")

    def to_dict(self) -> dict:
        return {"max_retries": self.max_retries, "detector": self.detector.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "PlannerConfig":
        return cls(
            max_retries=data["max_retries"],
            detector=DetectorConfig.from_dict(data["detector"]),
        )


Detector = Callable[[DetectionQuery], Verdict]
StepCallback = Callable[[StepRecord], None]


def make_detector(backend: Backend, cfg: DetectorConfig, channel: EscalationChannel) -> Detector:
    def _detect(query: DetectionQuery) -> Verdict:
        return failure_detect(query, cfg, backend, channel)

    return _detect


def oracle_escalation_channel() -> CallbackEscalationChannel:
    """An operator stand-in that answers escalations with simulator truth.

    Only works for queries whose observation carries the structured
    simulator state; it bounds what perfect human answers would buy.
    """

    def _answer(request) -> Outcome:
        state = EnvState.from_dict(request.query.observation.sim_state)
        return ground_truth_check(state, request.query.subtask)

    return CallbackEscalationChannel(_answer)


def run_episode_with(
    task: TaskSpec,
    env: TaskEnvironment,
    detector: Detector,
    max_retries: int,
    on_step: Optional[StepCallback] = None,
) -> EpisodeTrace:
    """Execute the plan under verdict control until done or out of retries.

    Success verdicts advance to the next subtask; a failure verdict restarts
    the plan from subtask 0 and burns one retry. The retry budget is
    cumulative over the episode, so max_retries 0 forbids even the first
    pass. An expired escalation aborts the episode on the spot; the step
    whose verdict never arrived is not recorded.
    """
    problems = validate_task_spec(task)
    if problems:
        raise InvalidTaskError(problems)
    if max_retries < 0:
        raise ValueError(f"max_retries must be >= 0, got {max_retries}")

    steps: list[StepRecord] = []
    human_queries = 0
    model_queries = 0
    retry = 0
    index = 0
    aborted_by_operator = False
    while index < len(task.subtasks) and retry < max_retries:
        subtask = task.subtasks[index]
        observation = env.execute(subtask)
        query = DetectionQuery(
            task=task, subtask=subtask, observation=observation, step_index=len(steps)
        )
        try:
            verdict = detector(query)
        except EscalationExpiredError:
            aborted_by_operator = True
            break
        record = StepRecord(
            subtask_index=index,
            execution_result=observation,
            verdict=verdict,
            retry_count_at_step=retry,
            ground_truth=env.ground_truth(subtask),
        )
        steps.append(record)
        if verdict.source is VerdictSource.HUMAN:
            human_queries += 1
        else:
            model_queries += 1
        if on_step is not None:
            on_step(record)
        if verdict.outcome is Outcome.SUCCESS:
            index += 1
        else:
            index = 0
            retry += 1

    if aborted_by_operator:
        final = FinalStatus.ABORTED_OPERATOR
    elif index >= len(task.subtasks):
        final = FinalStatus.SUCCESS
    else:
        final = FinalStatus.ABORTED_RETRIES_EXHAUSTED
    return EpisodeTrace(
        task_id=task.id,
        steps=tuple(steps),
        final_status=final,
        human_queries=human_queries,
        model_queries=model_queries,
    )


def run_episode(
    task: TaskSpec,
    env: TaskEnvironment,
    cfg: PlannerConfig,
    backend: Backend,
    escalation_channel: EscalationChannel,
    on_step: Optional[StepCallback] = None,
) -> EpisodeTrace:
    detector = make_detector(backend, cfg.detector, escalation_channel)
    return run_episode_with(task, env, detector, cfg.max_retries, on_step)


def true_episode_success(trace: EpisodeTrace, task: TaskSpec) -> bool:
    """Whether the episode ended with the plan actually carried out.

    The detector can be fooled; this checks the ground truth of the final
    pass (the last full run through the plan) instead of trusting verdicts.
    Only defined for traces with ground truth on every step of that pass.
    """
    if trace.final_status is not FinalStatus.SUCCESS:
        return False
    n = len(task.subtasks)
    tail = trace.steps[-n:]
    if [s.subtask_index for s in tail] != list(range(n)):
        raise ValueError("trace does not end with a full pass over the plan")
    if any(s.ground_truth is None for s in tail):
        raise ValueError("ground truth missing from the final pass")
    return all(s.ground_truth is Outcome.SUCCESS for s in tail)


def validate_trace(
    trace: EpisodeTrace, task: TaskSpec, max_retries: Optional[int] = None
) -> list[str]:
    """Replay the loop's bookkeeping over a trace; one entry per violation."""
    problems: list[str] = []
    index = 0
    retry = 0
    n = len(task.subtasks)
    for pos, step in enumerate(trace.steps):
        if step.subtask_index != index:
            problems.append(
                f"step {pos}: subtask_index {step.subtask_index}, expected {index}"
            )
        if step.retry_count_at_step != retry:
            problems.append(
                f"step {pos}: retry_count_at_step {step.retry_count_at_step}, expected {retry}"
            )
        if step.verdict.outcome is Outcome.SUCCESS:
            index += 1
        else:
            index = 0
            retry += 1
        last = pos == len(trace.steps) - 1
        if index >= n and not last:
            problems.append(f"step {pos}: steps continue past plan completion")
        if max_retries is not None and retry >= max_retries and not last and index < n:
            problems.append(f"step {pos}: steps continue past the retry budget")

    completed = n > 0 and index >= n
    if completed and trace.final_status is not FinalStatus.SUCCESS:
        problems.append(f"plan completed but final_status is {trace.final_status.value}")
    if not completed and trace.final_status is FinalStatus.SUCCESS:
        problems.append("final_status is success but the plan never completed")
    if (
        trace.final_status is FinalStatus.ABORTED_RETRIES_EXHAUSTED
        and max_retries is not None
        and retry < max_retries
    ):
        problems.append("aborted for retries with budget remaining")

    human = sum(1 for s in trace.steps if s.verdict.source is VerdictSource.HUMAN)
    if trace.human_queries != human:
        problems.append(f"human_queries {trace.human_queries}, counted {human}")
    if trace.model_queries != len(trace.steps) - human:
        problems.append(f"model_queries {trace.model_queries}, counted {len(trace.steps) - human}")
    return problems


# ---------------------------------------------------------------------------
# Simulated judge
# ---------------------------------------------------------------------------

_SUBTASK_RE = re.compile(r"just tried to execute (.+?)\.(?:\n|$)")
_ANSWER_MARKER = "A: Yes / No."


def _log(p: float) -> float:
    return math.log(p) if p > 0.0 else float("-inf")


class SimulatedDetectorBackend:
    """A backend whose competence is a dial instead of a model.

    It reads the simulator state out of the observation, recovers the
    executed subtask from the prompt, computes ground truth, and answers
    correctly with a bucket-dependent probability: confident_accuracy when
    the drawn uncertainty lands below bucket_threshold, uncertain_accuracy
    at or above it. The uncertainty is a uniform draw exposed through the
    option-token probabilities, so token-probability scoring recovers it (up
    to float rounding) and threshold sweeps behave predictably. Yes/No
    strategies only; two RNG draws per answered question, uncertainty first.
    """

    def __init__(
        self,
        confident_accuracy: float,
        uncertain_accuracy: Optional[float] = None,
        bucket_threshold: float = 0.6,
        seed: int = 0,
        model_name: str = "sim-judge",
    ):
        if uncertain_accuracy is None:
            uncertain_accuracy = confident_accuracy
        for name, value in (
            ("confident_accuracy", confident_accuracy),
            ("uncertain_accuracy", uncertain_accuracy),
            ("bucket_threshold", bucket_threshold),
        ):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of range: {value}")
        self._confident_accuracy = confident_accuracy
        self._uncertain_accuracy = uncertain_accuracy
        self._bucket_threshold = bucket_threshold
        self._rng = random.Random(seed)
        self._model_name = model_name

    def complete(self, req: BackendRequest) -> BackendReply:
        user_text = "\n".join(t.text for t in req.turns if t.role == "user")
        if "which subtask should be the next step" in user_text:
            raise ValueError("the simulated judge answers yes/no questions only")
        last_user = next((t.text for t in reversed(req.turns) if t.role == "user"), "")
        if _ANSWER_MARKER not in last_user:
            return BackendReply(
                text="I inspected the workspace and noted the object positions.",
                model_name=self._model_name,
            )
        match = _SUBTASK_RE.search(user_text)
        if match is None:
            raise ValueError("no executed-subtask phrase found in the prompt")
        if req.observation.kind is not ObservationKind.SIM_STATE:
            raise ValueError("the simulated judge needs a sim_state observation")
        state = EnvState.from_dict(req.observation.sim_state)
        subtask = Subtask(index=0, description=match.group(1), expected_state="-")
        truth = ground_truth_check(state, subtask)

        uncertainty = self._rng.random()
        accuracy = (
            self._confident_accuracy
            if uncertainty < self._bucket_threshold
            else self._uncertain_accuracy
        )
        correct = self._rng.random() < accuracy
        predicted = truth if correct else truth.flipped()
        chosen = "Yes" if predicted is Outcome.SUCCESS else "No"
        other = "No" if chosen == "Yes" else "Yes"
        logprobs = None
        if req.want_logprobs:
            entries = (
                LogprobEntry(chosen, _log(1.0 - uncertainty)),
                LogprobEntry(other, _log(uncertainty)),
            )
            logprobs = (
                TokenLogprob(token=chosen, logprob=entries[0].logprob, alternatives=entries),
            )
        return BackendReply(text=f"{chosen}.", token_logprobs=logprobs, model_name=self._model_name)


# ---------------------------------------------------------------------------
# Task bundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskBundle:
    """A task plus, when simulatable, its environment setup."""

    task: TaskSpec
    sim_env: Optional[SimEnvConfig] = None

    def to_dict(self) -> dict:
        data: dict = {"task": self.task.to_dict()}
        if self.sim_env is not None:
            data["sim_env"] = self.sim_env.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "TaskBundle":
        sim = data.get("sim_env")
        return cls(
            task=TaskSpec.from_dict(data["task"]),
            sim_env=SimEnvConfig.from_dict(sim) if sim else None,
        )


def _checked_bundle(data: Mapping) -> TaskBundle:
    bundle = TaskBundle.from_dict(data)
    problems = validate_task_spec(bundle.task)
    if problems:
        raise InvalidTaskError(problems)
    return bundle


def load_task_bundle(path: str | Path) -> TaskBundle:
    return _checked_bundle(json.loads(Path(path).read_text(encoding="utf-8")))


def list_bundled_tasks() -> list[str]:
    names = [
        entry.name.removesuffix(".json")
        for entry in resources.files("loopgate.tasks").iterdir()
        if entry.name.endswith(".json")
    ]
    return sorted(names)


def bundled_task(name: str) -> TaskBundle:
    ref = resources.files("loopgate.tasks").joinpath(f"{name}.json")
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled task named {name!r}; have {list_bundled_tasks()}")
    return _checked_bundle(json.loads(ref.read_text(encoding="utf-8")))
