"""Render the three detection prompting strategies and parse the replies.

Strategies:
  SSC - one direct question comparing the expected post-state to the image.
  SRA - a spatial-analysis turn first, then the same kind of direct question.
  NAP - indirect multiple choice: which subtask should come next?

Templates live as editable text resources (templates/*.txt) with named
placeholders, so prompt wording can be tuned without code changes.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional

from .core import Outcome, Subtask, TaskSpec

TERMINAL_OPTION_TEXT = "task complete"


class StrategyKind(str, Enum):
    SSC = "ssc"
    SRA = "sra"
    NAP = "nap"


class TurnRole(str, Enum):
    USER = "user"
    ASSISTANT_EXPECTED = "assistant_expected"


class UnparseableReplyError(ValueError):
    """The reply contains none of the prompt's answer-option tokens."""


@dataclass(frozen=True)
class PromptTurn:
    role: TurnRole
    text: str
    attach_observation: bool = False


@dataclass(frozen=True)
class RenderedPrompt:
    """Message turns ready for a backend, plus the tokens a reply may use."""

    turns: tuple[PromptTurn, ...]
    answer_options: tuple[str, ...]

    def __post_init__(self) -> None:
        attached = sum(1 for t in self.turns if t.attach_observation)
        if attached != 1:
            raise ValueError(f"exactly one turn must attach the observation, got {attached}")
        if len(self.answer_options) < 2:
            raise ValueError("need at least 2 answer options")


@dataclass(frozen=True)
class ParsedReply:
    chosen_option: str
    predicted_outcome: Outcome
    analysis_text: Optional[str] = None


def load_template(name: str) -> str:
    return resources.files("loopgate.templates").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def _require_member(task: TaskSpec, sub: Subtask) -> None:
    if sub not in task.subtasks:
        raise ValueError(f"subtask {sub.index} does not belong to task {task.id!r}")


def render_ssc(task: TaskSpec, sub: Subtask) -> RenderedPrompt:
    """Single user turn asking whether the expected state is satisfied."""
    _require_member(task, sub)
    text = load_template("ssc").format(
        task_instruction=task.instruction,
        subtask=sub.description,
        expected_state=sub.expected_state,
    )
    return RenderedPrompt(
        turns=(PromptTurn(TurnRole.USER, text, attach_observation=True),),
        answer_options=("Yes", "No"),
    )


def render_sra(task: TaskSpec, sub: Subtask) -> RenderedPrompt:
    """Two user turns: spatial analysis first, then the Yes/No question.

    The backend's reply to turn 1 is fed back as conversational context
    before turn 2 is asked.
    """
    _require_member(task, sub)
    analysis = load_template("sra_analysis").format(
        task_instruction=task.instruction,
        subtask=sub.description,
        expected_state=sub.expected_state,
    )
    question = load_template("sra_question").format(expected_state=sub.expected_state)
    return RenderedPrompt(
        turns=(
            PromptTurn(TurnRole.USER, analysis, attach_observation=True),
            PromptTurn(TurnRole.USER, question),
        ),
        answer_options=("Yes", "No"),
    )


def option_letters(count: int) -> tuple[str, ...]:
    if count > len(string.ascii_uppercase):
        raise ValueError(f"cannot letter {count} options")
    return tuple(string.ascii_uppercase[:count])


def render_nap(task: TaskSpec, executed_index: int) -> RenderedPrompt:
    """One user turn listing the plan as lettered options, asking for the next step.

    A terminal "task complete" option is appended as the final letter so the
    question stays answerable after the last subtask.
    """
    if not 0 <= executed_index < len(task.subtasks):
        raise ValueError(f"executed_index {executed_index} out of range")
    descriptions = [s.description for s in task.subtasks] + [TERMINAL_OPTION_TEXT]
    letters = option_letters(len(descriptions))
    plan = "; ".join(f"{letter}. {desc}" for letter, desc in zip(letters, descriptions))
    text = load_template("nap").format(
        task_instruction=task.instruction,
        plan_options=plan,
        subtask=task.subtasks[executed_index].description,
    )
    return RenderedPrompt(
        turns=(PromptTurn(TurnRole.USER, text, attach_observation=True),),
        answer_options=letters,
    )


def render(strategy: StrategyKind, task: TaskSpec, sub: Subtask) -> RenderedPrompt:
    if strategy is StrategyKind.SSC:
        return render_ssc(task, sub)
    if strategy is StrategyKind.SRA:
        return render_sra(task, sub)
    return render_nap(task, sub.index)


def _first_standalone(raw: str, options: tuple[str, ...]) -> Optional[str]:
    """First option token appearing bounded by non-alphanumerics, in text order."""
    best: Optional[tuple[int, str]] = None
    for option in options:
        match = re.search(rf"(?<![A-Za-z0-9]){re.escape(option)}(?![A-Za-z0-9])", raw, re.IGNORECASE)
        if match and (best is None or match.start() < best[0]):
            best = (match.start(), option)
    return None if best is None else best[1]


def parse_reply(
    prompt: RenderedPrompt,
    strategy: StrategyKind,
    raw: str,
    executed_index: int,
    analysis_text: Optional[str] = None,
) -> ParsedReply:
    """Map a raw reply onto an answer option and a success/failure prediction.

    SSC/SRA: the first standalone Yes/No decides; Yes means success. NAP: the
    first standalone option letter; success only when it denotes the subtask
    after executed_index (the terminal option after the last one).
    """
    if not raw:
        raise UnparseableReplyError("empty reply")
    chosen = _first_standalone(raw, prompt.answer_options)
    if chosen is None:
        raise UnparseableReplyError(f"no answer option found in {raw!r}")
    if strategy in (StrategyKind.SSC, StrategyKind.SRA):
        outcome = Outcome.SUCCESS if chosen == "Yes" else Outcome.FAILURE
    else:
        expected = prompt.answer_options[executed_index + 1]
        outcome = Outcome.SUCCESS if chosen == expected else Outcome.FAILURE
    return ParsedReply(chosen_option=chosen, predicted_outcome=outcome, analysis_text=analysis_text)


def canonical_option(prompt: RenderedPrompt, token: str) -> Optional[str]:
    """Match a bare token against the answer options, case-insensitively."""
    lowered = token.strip().lower()
    for option in prompt.answer_options:
        if option.lower() == lowered:
            return option
    return None


def outcome_from_option(prompt: RenderedPrompt, strategy: StrategyKind, option: str, executed_index: int) -> Outcome:
    """Outcome implied by a bare option token (used for self-stated answers)."""
    if strategy in (StrategyKind.SSC, StrategyKind.SRA):
        return Outcome.SUCCESS if option == "Yes" else Outcome.FAILURE
    expected = prompt.answer_options[executed_index + 1]
    return Outcome.SUCCESS if option == expected else Outcome.FAILURE
