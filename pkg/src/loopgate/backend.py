"""Pluggable MLLM access.

Two implementations of one narrow contract: a live client speaking the
OpenAI-compatible chat-completions protocol with token log-probabilities,
and a scripted backend that replays canned rules for deterministic tests.
Images travel as base64 data URLs; simulated environment snapshots travel
as fenced JSON text in the same content slot, so there is one code path for
both observation kinds.
"""

from __future__ import annotations

import base64
import json
import logging
import math
import mimetypes
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import httpx

from .core import Observation, ObservationKind, canonical_json

logger = logging.getLogger(__name__)


class BackendError(Exception):
    """Base for transport/protocol failures talking to a model backend."""


class TransportError(BackendError):
    pass


class RateLimitedError(BackendError):
    pass


class ProtocolMismatchError(BackendError):
    """The response body does not match the chat-completions shape."""


class NoRuleMatchedError(BackendError):
    """Scripted backend had no rule for the request."""


class LogprobsUnsupportedError(BackendError):
    """The endpoint cannot return token log-probabilities.

    Signals that the uncertainty method must be self_explained.
    """


class NoAnswerPositionError(ValueError):
    """No token position in the reply intersects the answer options."""


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "user" or "assistant"
    text: str
    attach_observation: bool = False


@dataclass(frozen=True)
class BackendRequest:
    turns: tuple[ChatMessage, ...]
    observation: Observation
    want_logprobs: bool = False
    top_logprobs: int = 0
    model_name: str = ""
    max_tokens: int = 256
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.want_logprobs and self.top_logprobs < 2:
            raise ValueError("top_logprobs must cover the answer options")


@dataclass(frozen=True)
class LogprobEntry:
    token: str
    logprob: float


@dataclass(frozen=True)
class TokenLogprob:
    token: str
    logprob: float
    alternatives: tuple[LogprobEntry, ...] = ()


@dataclass(frozen=True)
class BackendReply:
    text: str
    token_logprobs: Optional[tuple[TokenLogprob, ...]] = None
    model_name: str = ""
    latency: float = 0.0


class Backend(Protocol):
    def complete(self, req: BackendRequest) -> BackendReply: ...


def observation_text(obs: Observation) -> str:
    """Text form of an observation, as sent to (or matched by) a backend."""
    if obs.kind is ObservationKind.IMAGE:
        return obs.image_ref or ""
    return canonical_json(obs.sim_state)


def fenced_state(obs: Observation) -> str:
    return f"```json\n{canonical_json(obs.sim_state)}\n```"


# ---------------------------------------------------------------------------
# Scripted backend
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScriptedRule:
    """Reply to use when a request matches.

    match_text is a substring of the last user turn's text; match_observation
    a substring of the observation's text form (image ref or state JSON).
    A None matcher matches anything; both present must both match.
    """

    reply: str
    match_text: Optional[str] = None
    match_observation: Optional[str] = None
    option_probs: Optional[dict[str, float]] = None

    def matches(self, req: BackendRequest) -> bool:
        if self.match_text is not None:
            last_user = next((t.text for t in reversed(req.turns) if t.role == "user"), "")
            if self.match_text not in last_user:
                return False
        if self.match_observation is not None:
            if self.match_observation not in observation_text(req.observation):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "reply": self.reply,
            "match_text": self.match_text,
            "match_observation": self.match_observation,
            "option_probs": self.option_probs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScriptedRule":
        return cls(
            reply=data["reply"],
            match_text=data.get("match_text"),
            match_observation=data.get("match_observation"),
            option_probs=data.get("option_probs"),
        )


def _logprobs_from_option_probs(option_probs: dict[str, float]) -> tuple[TokenLogprob, ...]:
    alternatives = tuple(
        LogprobEntry(token, math.log(p) if p > 0.0 else float("-inf"))
        for token, p in option_probs.items()
    )
    top = max(alternatives, key=lambda e: e.logprob)
    return (TokenLogprob(token=top.token, logprob=top.logprob, alternatives=alternatives),)


class ScriptedBackend:
    """First matching rule wins; immutable after load, fully deterministic."""

    def __init__(self, rules: Sequence[ScriptedRule], model_name: str = "scripted"):
        self._rules = tuple(rules)
        self._model_name = model_name

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([ScriptedRule.from_dict(r) for r in data["rules"]])

    def complete(self, req: BackendRequest) -> BackendReply:
        for rule in self._rules:
            if rule.matches(req):
                logprobs = None
                if req.want_logprobs and rule.option_probs:
                    logprobs = _logprobs_from_option_probs(rule.option_probs)
                return BackendReply(
                    text=rule.reply,
                    token_logprobs=logprobs,
                    model_name=self._model_name,
                )
        raise NoRuleMatchedError("no scripted rule matched the request")


# ---------------------------------------------------------------------------
# Live client
# ---------------------------------------------------------------------------

API_KEY_ENV = "LOOPGATE_API_KEY"


@dataclass(frozen=True)
class LiveBackendConfig:
    endpoint: str  # base URL, e.g. http://localhost:8000/v1
    model_name: str
    api_key_env: str = API_KEY_ENV
    timeout: float = 60.0
    retries: int = 3
    max_in_flight: int = 4


class LiveBackend:
    """Stateless chat-completions client; no memory beyond the turns given."""

    def __init__(self, config: LiveBackendConfig):
        self._config = config
        self._semaphore = threading.Semaphore(config.max_in_flight)
        self._client = httpx.Client(timeout=config.timeout)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self._config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _content_parts(self, msg: ChatMessage, obs: Observation) -> object:
        if not msg.attach_observation:
            return msg.text
        if obs.kind is ObservationKind.SIM_STATE:
            return f"{msg.text}\n{fenced_state(obs)}"
        ref = obs.image_ref or ""
        if ref.startswith("data:"):
            url = ref
        else:
            media_type = mimetypes.guess_type(ref)[0] or "image/jpeg"
            payload = base64.b64encode(Path(ref).read_bytes()).decode("ascii")
            url = f"data:{media_type};base64,{payload}"
        return [
            {"type": "text", "text": msg.text},
            {"type": "image_url", "image_url": {"url": url}},
        ]

    def _body(self, req: BackendRequest) -> dict:
        messages = [
            {"role": t.role, "content": self._content_parts(t, req.observation)}
            for t in req.turns
        ]
        body: dict = {
            "model": req.model_name or self._config.model_name,
            "messages": messages,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        }
        if req.want_logprobs:
            body["logprobs"] = True
            body["top_logprobs"] = req.top_logprobs
        return body

    def complete(self, req: BackendRequest) -> BackendReply:
        body = self._body(req)
        url = self._config.endpoint.rstrip("/") + "/chat/completions"
        delay = 0.5
        last_error: Optional[BackendError] = None
        for attempt in range(self._config.retries + 1):
            if attempt:
                time.sleep(delay)
                delay *= 2
            started = time.monotonic()
            try:
                with self._semaphore:
                    response = self._client.post(url, json=body, headers=self._headers())
            except httpx.HTTPError as exc:
                last_error = TransportError(str(exc))
                logger.warning("transport failure (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code == 429:
                last_error = RateLimitedError(response.text[:200])
                continue
            if response.status_code >= 500:
                last_error = TransportError(f"server error {response.status_code}")
                continue
            if response.status_code != 200:
                raise ProtocolMismatchError(f"unexpected status {response.status_code}: {response.text[:200]}")
            return self._parse(response, req, time.monotonic() - started)
        assert last_error is not None
        raise last_error

    def _parse(self, response: httpx.Response, req: BackendRequest, latency: float) -> BackendReply:
        try:
            data = response.json()
            choice = data["choices"][0]
            text = choice["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolMismatchError(f"malformed response body: {exc}") from exc
        logprobs = None
        if req.want_logprobs:
            content = (choice.get("logprobs") or {}).get("content")
            if not content:
                raise LogprobsUnsupportedError(
                    "endpoint returned no token log-probabilities; use the self_explained method"
                )
            logprobs = tuple(
                TokenLogprob(
                    token=item["token"],
                    logprob=item["logprob"],
                    alternatives=tuple(
                        LogprobEntry(alt["token"], alt["logprob"])
                        for alt in item.get("top_logprobs", [])
                    ),
                )
                for item in content
            )
        return BackendReply(
            text=text,
            token_logprobs=logprobs,
            model_name=data.get("model", self._config.model_name),
            latency=latency,
        )

    def probe(self) -> None:
        """Raise TransportError unless the endpoint host answers at all.

        Any HTTP status counts as reachable; only connection-level failures
        matter here.
        """
        try:
            self._client.get(self._config.endpoint, headers=self._headers())
        except httpx.HTTPError as exc:
            raise TransportError(f"endpoint unreachable: {exc}") from exc

    def close(self) -> None:
        self._client.close()


# ---------------------------------------------------------------------------
# Option-token distribution extraction
# ---------------------------------------------------------------------------


def _normalize_token(token: str) -> str:
    return token.strip().strip(".,:;!?()[]'\"").lower()


def _token_matches_option(token: str, option: str) -> bool:
    # Tokenizers split option words unpredictably, so a leading subword
    # prefix of an option counts as that option.
    norm = _normalize_token(token)
    if not norm:
        return False
    return norm == option.lower() or option.lower().startswith(norm)


def extract_option_distribution(
    reply: BackendReply, options: Sequence[str]
) -> list[tuple[str, float]]:
    """Raw (token, probability) pairs for the answer options, prompt order.

    The answer position is the first token position whose token or
    alternatives intersect the option set; option probabilities are the
    exponentiated logprobs there, with missing options getting 0.
    """
    if reply.token_logprobs is None:
        raise ValueError("reply carries no token log-probabilities")
    for position in reply.token_logprobs:
        candidates: dict[str, float] = {}
        for entry in (LogprobEntry(position.token, position.logprob), *position.alternatives):
            if entry.token not in candidates or entry.logprob > candidates[entry.token]:
                candidates[entry.token] = entry.logprob
        matched: dict[str, float] = {}
        for option in options:
            masses = [
                math.exp(lp) if lp != float("-inf") else 0.0
                for token, lp in candidates.items()
                if _token_matches_option(token, option)
            ]
            if masses:
                matched[option] = max(masses)
        if any(mass > 0.0 for mass in matched.values()):
            return [(option, matched.get(option, 0.0)) for option in options]
    raise NoAnswerPositionError("no token position intersects the answer options")
