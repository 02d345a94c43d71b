"""Uncertainty-gated failure detection with human escalation.

One detection is: render the strategy prompt, query the backend, parse a
success/failure prediction, score its uncertainty, then gate. Strictly below
the threshold the model's own verdict stands; at or above it (and whenever
the reply is unusable) the question goes to a human, whose answer is final.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Mapping, Optional, Protocol

from .backend import (
    Backend,
    BackendReply,
    BackendRequest,
    ChatMessage,
    NoAnswerPositionError,
    extract_option_distribution,
)
from .core import (
    Observation,
    Outcome,
    Subtask,
    TaskSpec,
    Verdict,
    VerdictSource,
    now_ms,
)
from .prompting import (
    RenderedPrompt,
    StrategyKind,
    TurnRole,
    UnparseableReplyError,
    canonical_option,
    load_template,
    outcome_from_option,
    parse_reply,
    render,
)
from .uncertainty import (
    GenerationFailure,
    Method,
    UncertaintyEstimate,
    ZeroMassError,
    entropy_uncertainty,
    parse_self_explained,
    renormalize,
    self_explained_uncertainty,
    token_probability_uncertainty,
)

# Verbatim operator prompt; tests and the console UI both rely on it.
CONSOLE_PROMPT = "I am not sure! The current subtask is successful or failed? "

_SUCCESS_WORDS = frozenset({"successful", "success", "succeeded", "s"})
_FAILURE_WORDS = frozenset({"failed", "failure", "fail", "f"})


class EscalationExpiredError(Exception):
    """Nobody resolved the escalation before its deadline."""


class EscalationNotFoundError(KeyError):
    pass


class AlreadyResolvedError(Exception):
    """The escalation already reached a terminal status; first answer wins."""


class EscalationStatus(str, Enum):
    PENDING = "pending"
    RESOLVED = "resolved"
    EXPIRED = "expired"


@dataclass(frozen=True)
class DetectorConfig:
    """How to ask, how to score, and when to stop trusting the model.

    escalation_timeout is in seconds; 0 means wait forever, matching a
    terminal operator who answers eventually.
    """

    strategy: StrategyKind
    method: Method
    threshold: float
    escalation_timeout: float = 0.0
    top_logprobs: int = 8
    max_tokens: int = 256
    model_name: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold out of range: {self.threshold}")
        if self.escalation_timeout < 0.0:
            raise ValueError(f"escalation_timeout must be >= 0, got {self.escalation_timeout}")
        if self.top_logprobs < 2:
            raise ValueError("top_logprobs must be at least 2")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "method": self.method.value,
            "threshold": self.threshold,
            "escalation_timeout": self.escalation_timeout,
            "top_logprobs": self.top_logprobs,
            "max_tokens": self.max_tokens,
            "model_name": self.model_name,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DetectorConfig":
        return cls(
            strategy=StrategyKind(data["strategy"]),
            method=Method(data["method"]),
            threshold=data["threshold"],
            escalation_timeout=data.get("escalation_timeout", 0.0),
            top_logprobs=data.get("top_logprobs", 8),
            max_tokens=data.get("max_tokens", 256),
            model_name=data.get("model_name", ""),
        )


@dataclass(frozen=True)
class DetectionQuery:
    """One question for the detector: did this subtask leave this state?

    step_index is the detection's ordinal within its episode; it differs
    from subtask.index once retries re-execute earlier subtasks.
    """

    task: TaskSpec
    subtask: Subtask
    observation: Observation
    step_index: int = 0

    def __post_init__(self) -> None:
        if self.subtask not in self.task.subtasks:
            raise ValueError(f"subtask {self.subtask.index} does not belong to task {self.task.id!r}")
        if self.step_index < 0:
            raise ValueError(f"step_index must be >= 0, got {self.step_index}")

    def to_dict(self) -> dict:
        return {
            "task": self.task.to_dict(),
            "subtask": self.subtask.to_dict(),
            "observation": self.observation.to_dict(),
            "step_index": self.step_index,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DetectionQuery":
        return cls(
            task=TaskSpec.from_dict(data["task"]),
            subtask=Subtask.from_dict(data["subtask"]),
            observation=Observation.from_dict(data["observation"]),
            step_index=data.get("step_index", 0),
        )


@dataclass(frozen=True)
class ModelJudgment:
    """What one backend round-trip yielded, before gating.

    fault is set when the reply could not be turned into an outcome plus
    estimate; such judgments always escalate, gating as if maximally
    uncertain, and carry no fabricated estimate.
    """

    raw_response: str
    outcome: Optional[Outcome] = None
    estimate: Optional[UncertaintyEstimate] = None
    analysis_text: Optional[str] = None
    fault: Optional[str] = None

    def __post_init__(self) -> None:
        if self.fault is None and (self.outcome is None or self.estimate is None):
            raise ValueError("faultless judgment requires outcome and estimate")

    @property
    def gating_value(self) -> float:
        if self.fault is not None:
            return 1.0
        assert self.estimate is not None
        return self.estimate.value


@dataclass(frozen=True)
class Resolution:
    outcome: Outcome
    resolved_at: int
    operator_note: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "resolved_at": self.resolved_at,
            "operator_note": self.operator_note,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Resolution":
        return cls(
            outcome=Outcome(data["outcome"]),
            resolved_at=data["resolved_at"],
            operator_note=data.get("operator_note"),
        )


@dataclass(frozen=True)
class EscalationRequest:
    """A deferred detection awaiting a human answer.

    Carries the full query so an operator surface can show the task, the
    subtask, and the observation without a second lookup. Status transitions
    are modeled by replacing the record (pending -> resolved | expired).
    """

    id: str
    query: DetectionQuery
    created_at: int
    model_reply: Optional[str] = None
    estimate: Optional[UncertaintyEstimate] = None
    status: EscalationStatus = EscalationStatus.PENDING
    resolution: Optional[Resolution] = None

    def __post_init__(self) -> None:
        if (self.status is EscalationStatus.RESOLVED) != (self.resolution is not None):
            raise ValueError("resolution present iff status is resolved")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "query": self.query.to_dict(),
            "created_at": self.created_at,
            "model_reply": self.model_reply,
            "estimate": self.estimate.to_dict() if self.estimate else None,
            "status": self.status.value,
            "resolution": self.resolution.to_dict() if self.resolution else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EscalationRequest":
        estimate = data.get("estimate")
        resolution = data.get("resolution")
        return cls(
            id=data["id"],
            query=DetectionQuery.from_dict(data["query"]),
            created_at=data["created_at"],
            model_reply=data.get("model_reply"),
            estimate=UncertaintyEstimate.from_dict(estimate) if estimate else None,
            status=EscalationStatus(data.get("status", "pending")),
            resolution=Resolution.from_dict(resolution) if resolution else None,
        )


def new_escalation_id() -> str:
    return uuid.uuid4().hex


class EscalationChannel(Protocol):
    def ask(self, request: EscalationRequest, timeout: Optional[float] = None) -> Outcome: ...


class ConsoleEscalationChannel:
    """Interactive stdin/stdout operator channel; reprompts until parseable.

    Terminal input has no deadline, so the timeout argument is ignored.
    """

    def __init__(
        self,
        input_fn: Callable[[str], str] = input,
        output_fn: Callable[[str], None] = print,
    ):
        self._input_fn = input_fn
        self._output_fn = output_fn

    def ask(self, request: EscalationRequest, timeout: Optional[float] = None) -> Outcome:
        sub = request.query.subtask
        self._output_fn(
            f"[{request.query.task.id}] subtask {sub.index}: "
            f"{sub.description} (expected: {sub.expected_state})"
        )
        while True:
            raw = self._input_fn(CONSOLE_PROMPT).strip().lower()
            if raw in _SUCCESS_WORDS:
                return Outcome.SUCCESS
            if raw in _FAILURE_WORDS:
                return Outcome.FAILURE
            self._output_fn("Please answer 'successful' or 'failed'.")


class CallbackEscalationChannel:
    """Adapts any request -> outcome function to the channel contract."""

    def __init__(self, fn: Callable[[EscalationRequest], Outcome]):
        self._fn = fn

    def ask(self, request: EscalationRequest, timeout: Optional[float] = None) -> Outcome:
        return self._fn(request)


class BlockingEscalationQueue:
    """Escalation channel whose answers arrive from another thread.

    ask() parks the calling episode thread; resolve() (driven by an operator
    over HTTP) wakes it. The first resolution wins; later ones raise. Past
    the deadline the entry turns expired and the asker gets
    EscalationExpiredError.
    """

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._entries: dict[str, EscalationRequest] = {}
        self._order: list[str] = []

    def ask(self, request: EscalationRequest, timeout: Optional[float] = None) -> Outcome:
        with self._cond:
            if request.id in self._entries:
                raise ValueError(f"duplicate escalation id {request.id!r}")
            if request.status is not EscalationStatus.PENDING:
                raise ValueError("only pending requests can be asked")
            self._entries[request.id] = request
            self._order.append(request.id)
            self._cond.notify_all()
            deadline = None if timeout is None else time.monotonic() + timeout
            while self._entries[request.id].status is EscalationStatus.PENDING:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0.0:
                    self._entries[request.id] = replace(
                        request, status=EscalationStatus.EXPIRED
                    )
                    self._cond.notify_all()
                    raise EscalationExpiredError(request.id)
                self._cond.wait(remaining)
            current = self._entries[request.id]
            if current.status is EscalationStatus.EXPIRED:
                raise EscalationExpiredError(request.id)
            assert current.resolution is not None
            return current.resolution.outcome

    def resolve(
        self, request_id: str, outcome: Outcome, operator_note: Optional[str] = None
    ) -> EscalationRequest:
        with self._cond:
            current = self._entries.get(request_id)
            if current is None:
                raise EscalationNotFoundError(request_id)
            if current.status is not EscalationStatus.PENDING:
                raise AlreadyResolvedError(
                    f"escalation {request_id!r} already {current.status.value}"
                )
            updated = replace(
                current,
                status=EscalationStatus.RESOLVED,
                resolution=Resolution(
                    outcome=outcome, resolved_at=now_ms(), operator_note=operator_note
                ),
            )
            self._entries[request_id] = updated
            self._cond.notify_all()
            return updated

    def expire(self, request_id: str) -> EscalationRequest:
        """Mark a pending escalation expired; its asker aborts on wake."""
        with self._cond:
            current = self._entries.get(request_id)
            if current is None:
                raise EscalationNotFoundError(request_id)
            if current.status is not EscalationStatus.PENDING:
                raise AlreadyResolvedError(
                    f"escalation {request_id!r} already {current.status.value}"
                )
            updated = replace(current, status=EscalationStatus.EXPIRED)
            self._entries[request_id] = updated
            self._cond.notify_all()
            return updated

    def get(self, request_id: str) -> EscalationRequest:
        with self._cond:
            current = self._entries.get(request_id)
            if current is None:
                raise EscalationNotFoundError(request_id)
            return current

    def pending(self) -> list[EscalationRequest]:
        with self._cond:
            return [
                self._entries[rid]
                for rid in self._order
                if self._entries[rid].status is EscalationStatus.PENDING
            ]

    def wait_for_pending(self, timeout: float) -> list[EscalationRequest]:
        """Block until at least one escalation is pending or timeout elapses."""
        deadline = time.monotonic() + timeout
        with self._cond:
            while True:
                current = [
                    self._entries[rid]
                    for rid in self._order
                    if self._entries[rid].status is EscalationStatus.PENDING
                ]
                if current:
                    return current
                remaining = deadline - time.monotonic()
                if remaining <= 0.0:
                    return []
                self._cond.wait(remaining)


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------


def _chat_turns(prompt: RenderedPrompt) -> list[ChatMessage]:
    return [
        ChatMessage(
            role="user" if t.role is TurnRole.USER else "assistant",
            text=t.text,
            attach_observation=t.attach_observation,
        )
        for t in prompt.turns
    ]


def _with_suffix(turns: list[ChatMessage], method: Method) -> list[ChatMessage]:
    if method is not Method.SELF_EXPLAINED:
        return turns
    suffix = load_template("self_explained_suffix").rstrip("\n")
    last = turns[-1]
    amended = ChatMessage(
        role=last.role,
        text=f"{last.text.rstrip()}\n{suffix}\n",
        attach_observation=last.attach_observation,
    )
    return [*turns[:-1], amended]


def _request(
    cfg: DetectorConfig,
    prompt: RenderedPrompt,
    turns: list[ChatMessage],
    observation: Observation,
    want_logprobs: bool,
) -> BackendRequest:
    return BackendRequest(
        turns=tuple(turns),
        observation=observation,
        want_logprobs=want_logprobs,
        top_logprobs=max(cfg.top_logprobs, len(prompt.answer_options)) if want_logprobs else 0,
        model_name=cfg.model_name,
        max_tokens=cfg.max_tokens,
    )


def _logprob_estimate(
    cfg: DetectorConfig,
    prompt: RenderedPrompt,
    reply: BackendReply,
    chosen_option: str,
) -> UncertaintyEstimate:
    raw = extract_option_distribution(reply, prompt.answer_options)
    dist = renormalize(raw)
    if cfg.method is Method.TOKEN_PROBABILITY:
        return token_probability_uncertainty(dist, chosen_option)
    return entropy_uncertainty(dist)


def detect_once(query: DetectionQuery, cfg: DetectorConfig, backend: Backend) -> ModelJudgment:
    """One full model round-trip: prompt, reply, outcome, uncertainty.

    Never raises for unusable replies; those come back as fault judgments.
    Transport and capability errors from the backend do propagate, since
    they indicate a broken setup rather than a hard sample.
    """
    prompt = render(cfg.strategy, query.task, query.subtask)
    want_logprobs = cfg.method is not Method.SELF_EXPLAINED
    executed_index = query.subtask.index

    analysis_text: Optional[str] = None
    if cfg.strategy is StrategyKind.SRA:
        turns = _chat_turns(prompt)
        first = backend.complete(
            _request(cfg, prompt, turns[:1], query.observation, want_logprobs=False)
        )
        analysis_text = first.text
        followup = [turns[0], ChatMessage(role="assistant", text=first.text), turns[1]]
        final_turns = _with_suffix(followup, cfg.method)
    else:
        final_turns = _with_suffix(_chat_turns(prompt), cfg.method)

    reply = backend.complete(
        _request(cfg, prompt, final_turns, query.observation, want_logprobs)
    )

    if cfg.method is Method.SELF_EXPLAINED:
        parsed = parse_self_explained(reply.text)
        if isinstance(parsed, GenerationFailure):
            return ModelJudgment(
                raw_response=reply.text, analysis_text=analysis_text, fault=parsed.reason
            )
        option = canonical_option(prompt, parsed.answer)
        if option is None:
            return ModelJudgment(
                raw_response=reply.text,
                analysis_text=analysis_text,
                fault=f"stated answer {parsed.answer!r} is not an option",
            )
        return ModelJudgment(
            raw_response=reply.text,
            outcome=outcome_from_option(prompt, cfg.strategy, option, executed_index),
            estimate=self_explained_uncertainty(parsed),
            analysis_text=analysis_text,
        )

    try:
        parsed_reply = parse_reply(prompt, cfg.strategy, reply.text, executed_index, analysis_text)
    except UnparseableReplyError as exc:
        return ModelJudgment(raw_response=reply.text, analysis_text=analysis_text, fault=str(exc))
    try:
        estimate = _logprob_estimate(cfg, prompt, reply, parsed_reply.chosen_option)
    except (NoAnswerPositionError, ZeroMassError) as exc:
        return ModelJudgment(raw_response=reply.text, analysis_text=analysis_text, fault=str(exc))
    return ModelJudgment(
        raw_response=reply.text,
        outcome=parsed_reply.predicted_outcome,
        estimate=estimate,
        analysis_text=analysis_text,
    )


def failure_detect(
    query: DetectionQuery,
    cfg: DetectorConfig,
    backend: Backend,
    escalation_channel: EscalationChannel,
) -> Verdict:
    """Gate a model judgment by its uncertainty, deferring to a human above.

    The comparison is strict: a judgment exactly at the threshold escalates,
    so threshold 0 always asks while threshold 1 only escalates judgments
    that are maximally uncertain or unusable.
    """
    judgment = detect_once(query, cfg, backend)
    if judgment.fault is None and judgment.gating_value < cfg.threshold:
        return Verdict(
            outcome=judgment.outcome,  # type: ignore[arg-type]
            source=VerdictSource.MODEL,
            estimate=judgment.estimate,
            raw_response=judgment.raw_response,
        )
    request = EscalationRequest(
        id=new_escalation_id(),
        query=query,
        created_at=now_ms(),
        model_reply=judgment.raw_response,
        estimate=judgment.estimate,
    )
    timeout = None if cfg.escalation_timeout == 0.0 else cfg.escalation_timeout
    outcome = escalation_channel.ask(request, timeout=timeout)
    return Verdict(outcome=outcome, source=VerdictSource.HUMAN)
