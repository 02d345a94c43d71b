"""Uncertainty quantification for constrained answers from a multimodal model.

Three interchangeable methods produce a scalar in [0, 1] (higher = less
confident): the complement of the chosen option's token probability, the
normalized entropy of the option-token distribution, and a self-stated
confidence phrase parsed out of the reply text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

PROBABILITY_SUM_TOLERANCE = 1e-9


class Method(str, Enum):
    """How an uncertainty value was obtained."""

    TOKEN_PROBABILITY = "token_probability"
    ENTROPY = "entropy"
    SELF_EXPLAINED = "self_explained"


class ZeroMassError(ValueError):
    """Raised when a raw option distribution carries no probability mass."""


class UnknownTokenError(KeyError):
    """Raised when the chosen token is not present in the distribution."""


@dataclass(frozen=True)
class TokenProbability:
    token: str
    probability: float


@dataclass(frozen=True)
class TokenDistribution:
    """Probabilities over the designated answer-option tokens only.

    Entries keep the option order of the prompt that produced them. When
    ``renormalized`` is true the probabilities sum to 1 within 1e-9.
    """

    entries: tuple[TokenProbability, ...]
    renormalized: bool

    def __post_init__(self) -> None:
        if len(self.entries) < 2:
            raise ValueError("token distribution needs at least 2 entries")
        tokens = [e.token for e in self.entries]
        if len(set(tokens)) != len(tokens):
            raise ValueError("token distribution tokens must be distinct")
        for e in self.entries:
            if not 0.0 <= e.probability <= 1.0:
                raise ValueError(f"probability out of range for {e.token!r}: {e.probability}")
        if self.renormalized:
            total = math.fsum(e.probability for e in self.entries)
            if abs(total - 1.0) > PROBABILITY_SUM_TOLERANCE:
                raise ValueError(f"renormalized distribution sums to {total}, not 1")

    def probability_of(self, token: str) -> float:
        for e in self.entries:
            if e.token == token:
                return e.probability
        raise UnknownTokenError(token)

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(e.token for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "entries": [{"token": e.token, "probability": e.probability} for e in self.entries],
            "renormalized": self.renormalized,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TokenDistribution":
        entries = tuple(TokenProbability(e["token"], e["probability"]) for e in data["entries"])
        return cls(entries=entries, renormalized=data["renormalized"])


@dataclass(frozen=True)
class ParsedConfidence:
    """A self-stated confidence phrase: 'I am X% certain that the answer is Y'."""

    stated_percent: float
    answer: str
    matched_text: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.stated_percent <= 100.0:
            raise ValueError(f"stated percent out of range: {self.stated_percent}")

    def to_dict(self) -> dict:
        return {
            "stated_percent": self.stated_percent,
            "answer": self.answer,
            "matched_text": self.matched_text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParsedConfidence":
        return cls(data["stated_percent"], data["answer"], data["matched_text"])


@dataclass(frozen=True)
class GenerationFailure:
    """Marker value: the reply did not contain a usable confidence phrase.

    This is data, not an error; it feeds the generation-rate metric.
    """

    reason: str = "no confidence phrase found"


Evidence = Union[TokenDistribution, ParsedConfidence]


@dataclass(frozen=True)
class UncertaintyEstimate:
    """A scalar uncertainty in [0, 1] with the evidence that produced it."""

    value: float
    method: Method
    evidence: Evidence

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"uncertainty out of range: {self.value}")
        if self.method is Method.SELF_EXPLAINED:
            if not isinstance(self.evidence, ParsedConfidence):
                raise ValueError("self_explained evidence must be a ParsedConfidence")
        elif not isinstance(self.evidence, TokenDistribution):
            raise ValueError(f"{self.method.value} evidence must be a TokenDistribution")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method.value,
            "evidence": self.evidence.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UncertaintyEstimate":
        method = Method(data["method"])
        if method is Method.SELF_EXPLAINED:
            evidence: Evidence = ParsedConfidence.from_dict(data["evidence"])
        else:
            evidence = TokenDistribution.from_dict(data["evidence"])
        return cls(value=data["value"], method=method, evidence=evidence)


RawEntry = Union[TokenProbability, "tuple[str, float]"]


def renormalize(raw: Sequence[RawEntry]) -> TokenDistribution:
    """Rescale raw option-token masses so they sum to 1, preserving order.

    Backends report probabilities over the full vocabulary; only the mass
    landing on the answer-option tokens is kept, so it must be rescaled.

    Raises ZeroMassError when the total mass is 0, which signals that the
    backend never produced any of the option tokens.
    """
    if not raw:
        raise ValueError("raw distribution is empty")
    entries = [e if isinstance(e, TokenProbability) else TokenProbability(e[0], e[1]) for e in raw]
    for e in entries:
        if not 0.0 <= e.probability <= 1.0:
            raise ValueError(f"raw probability out of range for {e.token!r}: {e.probability}")
    total = math.fsum(e.probability for e in entries)
    if total == 0.0:
        raise ZeroMassError("total option-token mass is zero")
    scaled = tuple(TokenProbability(e.token, e.probability / total) for e in entries)
    return TokenDistribution(entries=scaled, renormalized=True)


def token_probability_uncertainty(dist: TokenDistribution, chosen: str) -> UncertaintyEstimate:
    """Uncertainty as the complement of the chosen option's probability."""
    if not dist.renormalized:
        raise ValueError("distribution must be renormalized")
    value = 1.0 - dist.probability_of(chosen)
    value = min(max(value, 0.0), 1.0)
    return UncertaintyEstimate(value=value, method=Method.TOKEN_PROBABILITY, evidence=dist)


def entropy_uncertainty(dist: TokenDistribution) -> UncertaintyEstimate:
    """Shannon entropy of the option distribution, normalized to [0, 1].

    Dividing by log2(n) makes binary and multi-option questions share one
    scale, so a single gating threshold applies to both.
    """
    if not dist.renormalized:
        raise ValueError("distribution must be renormalized")
    n = len(dist.entries)
    raw = -sum(p * math.log2(p) for p in (e.probability for e in dist.entries) if p > 0.0)
    value = raw / math.log2(n)
    value = min(max(value, 0.0), 1.0)
    return UncertaintyEstimate(value=value, method=Method.ENTROPY, evidence=dist)


def choose_option(dist: TokenDistribution) -> str:
    """Highest-probability option token; ties broken by prompt option order."""
    best = dist.entries[0]
    for e in dist.entries[1:]:
        if e.probability > best.probability:
            best = e
    return best.token


_CONFIDENCE_RE = re.compile(
    r"I\s+am\s+(\d+(?:\.\d+)?)\s*(?:%|percent)\s+certain\s+that\s+the\s+answer\s+is\s+([A-Za-z0-9]+)",
    re.IGNORECASE,
)


def parse_self_explained(text: str) -> Union[ParsedConfidence, GenerationFailure]:
    """Extract the first 'I am X% certain that the answer is Y' phrase.

    Total over all inputs: anything that does not match (including an X
    outside [0, 100]) comes back as a GenerationFailure value.
    """
    match = _CONFIDENCE_RE.search(text)
    if match is None:
        return GenerationFailure()
    percent = float(match.group(1))
    if percent > 100.0:
        return GenerationFailure(reason=f"stated percent out of range: {percent}")
    return ParsedConfidence(
        stated_percent=percent,
        answer=match.group(2),
        matched_text=match.group(0),
    )


def self_explained_uncertainty(parsed: ParsedConfidence) -> UncertaintyEstimate:
    """Uncertainty as the complement of the self-stated confidence."""
    value = 1.0 - parsed.stated_percent / 100.0
    value = min(max(value, 0.0), 1.0)
    return UncertaintyEstimate(value=value, method=Method.SELF_EXPLAINED, evidence=parsed)
