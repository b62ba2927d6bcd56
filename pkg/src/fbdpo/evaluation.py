"""Two-stage inference, self-consistency voting, and calibration metrics.

Inference runs in one of two modes: generate-then-verify (a solution
trace followed by a verification of its extracted answer) or k-sample
majority vote with tolerance-based answer clustering. The metric suite
reports answer accuracy plus three verifier-calibration quantities:

  * acknowledgement rate: among wrong answers, how often the verifier
    says FAIL;
  * false positive rate: among right answers, how often it says FAIL;
  * calibration F1: F1 of "verdict is PASS" against actual correctness.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from .backend import Generator, SamplingParams
from .datagen import Problem
from .errors import FbdpoError
from .extraction import (
    NoAnswerFound,
    NoVerdictFound,
    Verdict,
    extract_answer,
    extract_verdict,
    numeric_equal,
)
from .prompting import PromptTemplates
from .seeding import derive_seed


class EmptyInput(FbdpoError):
    """Metrics were requested for an empty record list."""


class AllExtractionsFailed(FbdpoError):
    """No sample in a majority-vote round produced a parseable answer."""


@dataclass(frozen=True)
class EvalRecord:
    problem_id: str
    gold: float
    predicted: float | None
    correct: bool
    verdict: Verdict | None
    votes: list[float] | None = None


@dataclass(frozen=True)
class TwoStageResult:
    """An eval record together with the raw completions behind it."""

    record: EvalRecord
    forward_completion: str
    backward_completion: str | None


@dataclass(frozen=True)
class MetricReport:
    n: int
    accuracy: float
    ack_rate: float | None
    fpr: float | None
    calib_f1: float | None
    n_wrong: int
    n_right: int
    n_no_verdict: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "ack_rate": self.ack_rate,
            "fpr": self.fpr,
            "calib_f1": self.calib_f1,
            "n_wrong": self.n_wrong,
            "n_right": self.n_right,
            "n_no_verdict": self.n_no_verdict,
        }


@dataclass(frozen=True)
class EvalConfig:
    mode: str = "two_stage"  # "two_stage" | "self_consistency"
    k: int = 5
    seed: int = 0
    sample_limit: int | None = None
    concurrency: int = 4
    no_verdict_policy: str = "exclude"  # "exclude" | "count_as_pass"
    forward_params: SamplingParams = field(
        default_factory=lambda: SamplingParams(temperature=0.7))
    backward_params: SamplingParams = field(
        default_factory=lambda: SamplingParams(temperature=0.3))
    templates: PromptTemplates = field(default_factory=PromptTemplates)

    def __post_init__(self) -> None:
        if self.mode not in ("two_stage", "self_consistency"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.no_verdict_policy not in ("exclude", "count_as_pass"):
            raise ValueError(f"unknown no_verdict_policy {self.no_verdict_policy!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


# ---------------------------------------------------------------------------
# inference


def two_stage_infer(problem: Problem, generator: Generator,
                    config: EvalConfig) -> TwoStageResult:
    """Generate a solution, then verify its extracted answer.

    When answer extraction fails there is no candidate to verify, so
    no backward call is made: the record counts as incorrect with the
    verdict absent.
    """
    forward_prompt = config.templates.render_forward(problem.question)
    forward_params = replace(config.forward_params,
                             seed=derive_seed(config.seed, "eval-forward", problem.id))
    forward_completion = generator.generate(forward_prompt, forward_params)
    try:
        predicted = extract_answer(forward_completion).value
    except NoAnswerFound:
        record = EvalRecord(problem_id=problem.id, gold=problem.gold_answer,
                            predicted=None, correct=False, verdict=None)
        return TwoStageResult(record=record, forward_completion=forward_completion,
                              backward_completion=None)
    backward_prompt = config.templates.render_backward(problem.question, predicted)
    backward_params = replace(config.backward_params,
                              seed=derive_seed(config.seed, "eval-backward", problem.id))
    backward_completion = generator.generate(backward_prompt, backward_params)
    try:
        verdict = extract_verdict(backward_completion)
    except NoVerdictFound:
        verdict = None
    record = EvalRecord(problem_id=problem.id, gold=problem.gold_answer,
                        predicted=predicted,
                        correct=numeric_equal(predicted, problem.gold_answer),
                        verdict=verdict)
    return TwoStageResult(record=record, forward_completion=forward_completion,
                          backward_completion=backward_completion)


def cluster_votes(votes: Sequence[float]) -> tuple[float, list[list[int]]]:
    """Modal value under tolerant clustering with earliest-sample tie-break.

    Clusters are the transitive closure of pairwise tolerant equality.
    Returns the representative (the earliest member of the winning
    cluster) and the clusters as index lists.
    """
    if not votes:
        raise ValueError("votes must be nonempty")
    parent = list(range(len(votes)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(votes)):
        for j in range(i + 1, len(votes)):
            if numeric_equal(votes[i], votes[j]):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(len(votes)):
        groups.setdefault(find(i), []).append(i)
    clusters = sorted(groups.values(), key=lambda members: members[0])
    best = max(clusters, key=lambda members: (len(members), -members[0]))
    return votes[best[0]], clusters


def self_consistency_infer(problem: Problem, generator: Generator,
                           config: EvalConfig) -> EvalRecord:
    """k-sample majority vote over extracted answers."""
    prompt = config.templates.render_forward(problem.question)
    votes: list[float] = []
    for sample_index in range(config.k):
        params = replace(config.forward_params,
                         seed=derive_seed(config.seed, "eval-forward", problem.id, sample_index))
        completion = generator.generate(prompt, params)
        try:
            votes.append(extract_answer(completion).value)
        except NoAnswerFound:
            continue
    if not votes:
        raise AllExtractionsFailed(
            f"problem {problem.id}: none of {config.k} samples parsed")
    predicted, _ = cluster_votes(votes)
    return EvalRecord(problem_id=problem.id, gold=problem.gold_answer,
                      predicted=predicted,
                      correct=numeric_equal(predicted, problem.gold_answer),
                      verdict=None, votes=votes)


# ---------------------------------------------------------------------------
# metrics


def compute_metrics(records: Sequence[EvalRecord],
                    no_verdict_policy: str = "exclude") -> MetricReport:
    """Count-based metric suite over finished eval records.

    n_wrong and n_right partition all records by answer correctness.
    The verdict-based rates are computed over verdict-bearing records:
    with policy "exclude" a missing verdict drops the record from those
    denominators, with "count_as_pass" it is scored as PASS. A rate
    whose denominator is empty is reported as absent.
    """
    if not records:
        raise EmptyInput("cannot compute metrics over zero records")
    if no_verdict_policy not in ("exclude", "count_as_pass"):
        raise ValueError(f"unknown no_verdict_policy {no_verdict_policy!r}")
    n = len(records)
    n_right = sum(1 for r in records if r.correct)
    n_wrong = n - n_right
    n_no_verdict = sum(1 for r in records if r.verdict is None)

    scored: list[tuple[bool, Verdict]] = []
    for r in records:
        if r.verdict is not None:
            scored.append((r.correct, r.verdict))
        elif no_verdict_policy == "count_as_pass":
            scored.append((r.correct, Verdict.PASS))

    wrong_with_verdict = sum(1 for correct, _ in scored if not correct)
    right_with_verdict = sum(1 for correct, _ in scored if correct)
    acknowledged = sum(1 for correct, v in scored if not correct and v is Verdict.FAIL)
    false_flags = sum(1 for correct, v in scored if correct and v is Verdict.FAIL)

    ack_rate = acknowledged / wrong_with_verdict if wrong_with_verdict else None
    fpr = false_flags / right_with_verdict if right_with_verdict else None

    if scored:
        tp = sum(1 for correct, v in scored if correct and v is Verdict.PASS)
        fp = sum(1 for correct, v in scored if not correct and v is Verdict.PASS)
        fn = false_flags  # correct but flagged FAIL
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        calib_f1 = (2 * precision * recall / (precision + recall)
                    if precision + recall else 0.0)
    else:
        calib_f1 = None

    return MetricReport(n=n, accuracy=n_right / n, ack_rate=ack_rate, fpr=fpr,
                        calib_f1=calib_f1, n_wrong=n_wrong, n_right=n_right,
                        n_no_verdict=n_no_verdict)


# ---------------------------------------------------------------------------
# batch evaluation


@dataclass
class EvalRun:
    records: list[EvalRecord]
    report: MetricReport
    n_generation_failures: int


def record_to_row(record: EvalRecord) -> dict:
    return {
        "problem_id": record.problem_id,
        "gold": record.gold,
        "predicted": record.predicted,
        "correct": record.correct,
        "verdict": record.verdict.value if record.verdict is not None else None,
        "votes": record.votes,
    }


def record_from_row(row: dict) -> EvalRecord:
    verdict = row.get("verdict")
    predicted = row.get("predicted")
    votes = row.get("votes")
    return EvalRecord(problem_id=row["problem_id"], gold=float(row["gold"]),
                      predicted=None if predicted is None else float(predicted),
                      correct=bool(row["correct"]),
                      verdict=Verdict(verdict) if verdict else None,
                      votes=None if votes is None else [float(v) for v in votes])


def evaluate(problems: Sequence[Problem], generator: Generator,
             config: EvalConfig) -> EvalRun:
    """Run inference over (a prefix of) the problems and score the results.

    Per-problem generation failures are recorded as incorrect records
    with nothing extracted, and surfaced in the failure count rather
    than dropped.
    """
    ordered = sorted(problems, key=lambda p: p.id)
    if config.sample_limit is not None:
        ordered = ordered[: config.sample_limit]
    if not ordered:
        raise EmptyInput("no problems to evaluate")

    def run_one(problem: Problem) -> tuple[EvalRecord, bool]:
        try:
            if config.mode == "two_stage":
                return two_stage_infer(problem, generator, config).record, False
            return self_consistency_infer(problem, generator, config), False
        except AllExtractionsFailed:
            return EvalRecord(problem_id=problem.id, gold=problem.gold_answer,
                              predicted=None, correct=False, verdict=None,
                              votes=[]), False
        except FbdpoError:
            return EvalRecord(problem_id=problem.id, gold=problem.gold_answer,
                              predicted=None, correct=False, verdict=None), True

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        outcomes = list(pool.map(run_one, ordered))
    records = [record for record, _ in outcomes]
    n_failures = sum(1 for _, failed in outcomes if failed)
    report = compute_metrics(records, no_verdict_policy=config.no_verdict_policy)
    return EvalRun(records=records, report=report, n_generation_failures=n_failures)


def format_report_table(report: MetricReport) -> str:
    """Fixed-width text table for terminal display."""
    def fmt(value: float | None) -> str:
        return "absent" if value is None else f"{value:.4f}"

    rows = [
        ("records", str(report.n)),
        ("accuracy", fmt(report.accuracy)),
        ("ack_rate", fmt(report.ack_rate)),
        ("fpr", fmt(report.fpr)),
        ("calib_f1", fmt(report.calib_f1)),
        ("n_right", str(report.n_right)),
        ("n_wrong", str(report.n_wrong)),
        ("n_no_verdict", str(report.n_no_verdict)),
    ]
    width = max(len(name) for name, _ in rows)
    lines = [f"{name.ljust(width)}  {value}" for name, value in rows]
    return "\n".join(lines)
