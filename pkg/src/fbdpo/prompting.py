"""Prompt templates for the two reasoning directions.

The forward template asks the model to solve a problem step by step;
the backward template asks it to verify a candidate answer by reasoning
backwards, concluding with "Verification: PASS" or "Verification: FAIL".
Both are pure string substitutions: identical inputs yield byte-identical
prompts. Templates can be overridden from plain-text files; overrides
must use the same {question} / {answer} placeholders.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import FbdpoError


class EmptyQuestion(FbdpoError):
    """A prompt was requested for an empty question string."""


class BadTemplate(FbdpoError):
    """An override template is missing a required placeholder."""


class PromptKind(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


FORWARD_TEMPLATE = (
    "You are an expert problem solver. Solve the following problem step by step. "
    "Show your reasoning clearly, then provide the final answer.\n"
    "\n"
    "Problem: {question}\n"
    "\n"
    "Solution:"
)

BACKWARD_TEMPLATE = (
    "You are a careful verifier. Given a problem and a candidate answer, verify "
    "whether the answer is correct by reasoning backwards from the answer.\n"
    "\n"
    "Problem: {question}\n"
    "\n"
    "Candidate Answer: {answer}\n"
    "\n"
    "Verify the solution step by step, then conclude with either Verification: PASS "
    "if the answer is correct, or Verification: FAIL if the answer is incorrect.\n"
    "\n"
    "Verification:"
)

_REQUIRED_PLACEHOLDERS = {
    PromptKind.FORWARD: ("{question}",),
    PromptKind.BACKWARD: ("{question}", "{answer}"),
}


def canonical_number(value: float) -> str:
    """Render a numeric answer the way a person would write it.

    Integral values drop the trailing ".0" (42, not 42.0); everything
    else uses the shortest round-tripping decimal form.
    """
    if float(value) == int(value):
        return str(int(value))
    return repr(float(value))


@dataclass(frozen=True)
class PromptTemplates:
    """A forward/backward template pair, defaulting to the built-ins."""

    forward: str = FORWARD_TEMPLATE
    backward: str = BACKWARD_TEMPLATE

    def __post_init__(self) -> None:
        for kind, body in ((PromptKind.FORWARD, self.forward), (PromptKind.BACKWARD, self.backward)):
            for placeholder in _REQUIRED_PLACEHOLDERS[kind]:
                if placeholder not in body:
                    raise BadTemplate(f"{kind.value} template lacks {placeholder}")

    def render_forward(self, question: str) -> str:
        if not question.strip():
            raise EmptyQuestion("question must be nonempty")
        # str.replace, not str.format: questions may contain braces.
        return self.forward.replace("{question}", question)

    def render_backward(self, question: str, candidate_answer: float) -> str:
        if not question.strip():
            raise EmptyQuestion("question must be nonempty")
        rendered = self.backward.replace("{question}", question)
        return rendered.replace("{answer}", canonical_number(candidate_answer))


DEFAULT_TEMPLATES = PromptTemplates()


def render_forward(question: str) -> str:
    return DEFAULT_TEMPLATES.render_forward(question)


def render_backward(question: str, candidate_answer: float) -> str:
    return DEFAULT_TEMPLATES.render_backward(question, candidate_answer)


def load_templates(forward_path: str | Path | None = None,
                   backward_path: str | Path | None = None) -> PromptTemplates:
    """Build a template pair from plain-text override files.

    Either path may be None to keep the built-in default for that kind.
    Placeholder presence is validated on construction.
    """
    forward = Path(forward_path).read_text(encoding="utf-8") if forward_path else FORWARD_TEMPLATE
    backward = Path(backward_path).read_text(encoding="utf-8") if backward_path else BACKWARD_TEMPLATE
    return PromptTemplates(forward=forward, backward=backward)
