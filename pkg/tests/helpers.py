"""Builders shared across test modules."""

from __future__ import annotations

from loopgate.core import Observation, Outcome, VerdictSource, now_ms
from loopgate.detector import DetectionQuery, EscalationRequest, new_escalation_id
from loopgate.evaluation import ScoredSample
from loopgate.planner import TaskBundle
from loopgate.uncertainty import (
    GenerationFailure,
    Method,
    UncertaintyEstimate,
    renormalize,
)


def exact_estimate(u: float) -> UncertaintyEstimate:
    """A token-probability estimate whose value is exactly u.

    The evidence distribution is consistent with u up to float rounding; the
    value itself is set directly so threshold and curve tests can place
    samples on exact boundaries.
    """
    dist = renormalize([("Yes", 1.0 - u), ("No", u)])
    return UncertaintyEstimate(value=u, method=Method.TOKEN_PROBABILITY, evidence=dist)


def scored(
    sample_id: str,
    u: float,
    correct: bool,
    label: Outcome = Outcome.SUCCESS,
    source: VerdictSource = VerdictSource.MODEL,
) -> ScoredSample:
    predicted = label if correct else label.flipped()
    return ScoredSample(
        sample_id=sample_id,
        label=label,
        predicted_outcome=predicted,
        estimate=exact_estimate(u),
        correct=correct,
        source=source,
    )


def unparsed_scored(sample_id: str, label: Outcome = Outcome.SUCCESS) -> ScoredSample:
    return ScoredSample(
        sample_id=sample_id,
        label=label,
        predicted_outcome=None,
        estimate=GenerationFailure(),
        correct=False,
    )


def query_for(bundle: TaskBundle, subtask_index: int = 0) -> DetectionQuery:
    assert bundle.sim_env is not None
    return DetectionQuery(
        task=bundle.task,
        subtask=bundle.task.subtasks[subtask_index],
        observation=Observation.sim(bundle.sim_env.initial_state.to_dict(), captured_at=0),
    )


def escalation_for(bundle: TaskBundle, subtask_index: int = 0) -> EscalationRequest:
    return EscalationRequest(
        id=new_escalation_id(),
        query=query_for(bundle, subtask_index),
        created_at=now_ms(),
    )
