"""Deterministic test corpus: extraction cases, scripted mock scenarios,
the separable preference dataset, and randomized metric-oracle sets.

Every suite ships as committed JSONL/JSON under fixtures/data, and the
generators in fixtures.build reproduce those files byte for byte, so
regeneration is a check rather than a dependency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Any

from ..errors import FbdpoError
from ..evaluation import EvalRecord
from ..extraction import Verdict


class UnknownSuite(FbdpoError):
    """No fixture suite with the requested name exists."""


@dataclass(frozen=True)
class FixtureCase:
    name: str
    input: Any
    expected: Any
    note: str


_SUITE_FILES = {
    "extraction-formats": "extraction_formats.jsonl",
    "verdicts": "verdicts.jsonl",
    "metric-oracle": "metric_oracle.jsonl",
    "separable-dpo": "separable_dpo.jsonl",
    "mixed-pairs": "mixed_pairs.jsonl",
}

_MOCK_FILES = {
    "gen-data": ("mock_gen_data_problems.jsonl", "mock_gen_data_script.json"),
    "eval": ("mock_eval_problems.jsonl", "mock_eval_script.json"),
}


def _data_text(filename: str) -> str:
    return (resources.files(__package__) / "data" / filename).read_text(encoding="utf-8")


def _read_jsonl_text(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def load_fixture_suite(name: str) -> list[FixtureCase]:
    """Load one named suite as a list of cases.

    Suites: "extraction-formats", "verdicts", "metric-oracle",
    "separable-dpo", "mixed-pairs", and "mock-scripts" (whose cases
    bundle a problems table with a scripted response table).
    """
    if name == "mock-scripts":
        cases = []
        for scenario, (problems_file, script_file) in _MOCK_FILES.items():
            cases.append(FixtureCase(
                name=scenario,
                input={
                    "problems": _read_jsonl_text(_data_text(problems_file)),
                    "script": json.loads(_data_text(script_file)),
                },
                expected=None,
                note="constructed end-to-end scenario with hand-checked outcomes",
            ))
        return cases
    if name not in _SUITE_FILES:
        raise UnknownSuite(f"no fixture suite named {name!r}")
    rows = _read_jsonl_text(_data_text(_SUITE_FILES[name]))
    return [FixtureCase(name=row["name"], input=row["input"],
                        expected=row.get("expected"), note=row["note"])
            for row in rows]


def decode_metric_records(encoded: str) -> list[EvalRecord]:
    """Expand a compact record string into eval records.

    Two characters per record: correctness C/W, then verdict P/F/N
    (N meaning no verdict was extracted).
    """
    if len(encoded) % 2 != 0:
        raise ValueError("encoded record string must have even length")
    verdict_table = {"P": Verdict.PASS, "F": Verdict.FAIL, "N": None}
    records = []
    for i in range(0, len(encoded), 2):
        correct_char = encoded[i]
        verdict_char = encoded[i + 1]
        if correct_char not in "CW" or verdict_char not in verdict_table:
            raise ValueError(
                f"bad record encoding {correct_char}{verdict_char!r} at offset {i}")
        correct = correct_char == "C"
        verdict = verdict_table[verdict_char]
        records.append(EvalRecord(
            problem_id=f"r{i // 2:04d}", gold=1.0,
            predicted=1.0 if correct else 2.0,
            correct=correct, verdict=verdict))
    return records
