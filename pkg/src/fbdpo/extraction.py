"""Answer and verdict extraction from free-form model text.

Handles the usual final-answer formats (checked in priority order):

  1. "#### 42"            (grade-school math marker)
  2. "\\boxed{42}"        (LaTeX boxed notation)
  3. "The answer is 42" / "Final Answer: 42"
  4. last standalone number in the text

Within each rule the LAST parseable occurrence wins: models restate the
problem's numbers early and conclude late. Thousands-separator commas,
leading currency symbols, and trailing percent signs are stripped;
fractions like "3/4" are converted to decimal. Scientific notation is
not recognized.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

from .errors import FbdpoError

# Tolerance for numeric answer comparison.
EPSILON = 1e-6


class NoAnswerFound(FbdpoError):
    """No extraction rule yielded a parseable number."""


class NoVerdictFound(FbdpoError):
    """Neither PASS nor FAIL occurs in the text."""


class SourceFormat(str, Enum):
    GSM8K_MARKER = "gsm8k_marker"
    BOXED = "boxed"
    NATURAL_LANGUAGE = "natural_language"
    BARE_TRAILING_NUMBER = "bare_trailing_number"


class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"

    def flipped(self) -> "Verdict":
        return Verdict.FAIL if self is Verdict.PASS else Verdict.PASS


@dataclass(frozen=True)
class ExtractedAnswer:
    value: float
    source_format: SourceFormat
    raw_span: str


# Number token: optional sign, optional currency symbol, digits with
# optional comma grouping and decimal part, optional "/q" fraction tail,
# optional trailing percent sign.
_NUM = r"[-+]?[$\u20ac\u00a3]?\d[\d,]*(?:\.\d+)?(?:\s*/\s*[-+]?\d[\d,]*(?:\.\d+)?)?%?"

_MARKER_RE = re.compile(rf"####\s*({_NUM})")
_BOXED_RE = re.compile(r"\\boxed\{([^{}]*)\}")
_CUE_RE = re.compile(rf"(?:the\s+answer\s+is|final\s+answer)\s*:?\s*({_NUM})", re.IGNORECASE)
_BARE_RE = re.compile(_NUM)

_VERDICT_RE = re.compile(r"\b(pass|fail)\b", re.IGNORECASE)


def parse_number(span: str) -> float | None:
    """Parse one numeric span; None when it is not a clean number.

    Strips commas, leading currency symbols, and a trailing percent
    sign. "p/q" fractions are converted to decimal.
    """
    s = span.strip()
    if s.endswith("%"):
        s = s[:-1].rstrip()
    for sym in "$\u20ac\u00a3":
        s = s.replace(sym, "")
    s = s.replace(",", "")
    if not s:
        return None
    try:
        if "/" in s:
            num, den = s.split("/", 1)
            denominator = float(den)
            if denominator == 0:
                return None
            value = float(num) / denominator
        else:
            value = float(s)
    except ValueError:
        return None
    if not math.isfinite(value):
        return None
    return value


def _last_parseable(matches: list[re.Match], group: int) -> tuple[float, str] | None:
    for m in reversed(matches):
        value = parse_number(m.group(group))
        if value is not None:
            return value, m.group(0)
    return None


def extract_answer(text: str) -> ExtractedAnswer:
    """Extract the final numeric answer from a completion.

    Raises NoAnswerFound when no rule yields a parseable number; the
    caller treats such traces as incorrect and never uses them as a
    chosen pair member.
    """
    rules = (
        (_MARKER_RE, 1, SourceFormat.GSM8K_MARKER),
        (_BOXED_RE, 1, SourceFormat.BOXED),
        (_CUE_RE, 1, SourceFormat.NATURAL_LANGUAGE),
        (_BARE_RE, 0, SourceFormat.BARE_TRAILING_NUMBER),
    )
    for pattern, group, fmt in rules:
        hit = _last_parseable(list(pattern.finditer(text)), group)
        if hit is not None:
            value, span = hit
            return ExtractedAnswer(value=value, source_format=fmt, raw_span=span)
    raise NoAnswerFound(f"no parseable answer in text of length {len(text)}")


def extract_verdict(text: str) -> Verdict:
    """Extract the PASS/FAIL conclusion of a verification completion.

    The last occurrence wins: verdicts are conclusions, and later
    statements supersede earlier restatements of the rubric.
    """
    matches = list(_VERDICT_RE.finditer(text))
    if not matches:
        raise NoVerdictFound("neither PASS nor FAIL occurs in the text")
    return Verdict.PASS if matches[-1].group(1).lower() == "pass" else Verdict.FAIL


def flip_last_verdict(text: str) -> str:
    """Replace the final verdict token with its opposite.

    Used to synthesize the missing side of a verification preference
    pair while preserving the rest of the trace.
    """
    matches = list(_VERDICT_RE.finditer(text))
    if not matches:
        raise NoVerdictFound("cannot flip: no verdict token in the text")
    m = matches[-1]
    opposite = "FAIL" if m.group(1).lower() == "pass" else "PASS"
    return text[: m.start()] + opposite + text[m.end() :]


def numeric_equal(a: float, b: float) -> bool:
    """Tolerant numeric comparison: |a - b| <= 1e-6."""
    return abs(a - b) <= EPSILON
