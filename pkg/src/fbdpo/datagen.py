"""Preference-pair dataset construction.

Forward side: sample solutions per problem with rejection sampling
(stop early once at least one correct and one incorrect solution
exist), label each against the gold answer, and pair the first correct
with the first incorrect. Backward side: for each distinct candidate
answer seen in the forward traces, sample verification completions and
pair a verdict that matches the ground truth against one that
contradicts it, synthesizing the missing side by flipping the final
verdict token when sampling never produces it. Rejected sides that are
real sampled traces carry a boosted weight; synthesized ones do not.
"""

from __future__ import annotations

import itertools
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .backend import Generator, SamplingParams
from .errors import FbdpoError
from .extraction import (
    NoAnswerFound,
    NoVerdictFound,
    Verdict,
    extract_answer,
    extract_verdict,
    flip_last_verdict,
    numeric_equal,
    parse_number,
)
from .jsonio import read_jsonl, write_jsonl
from .prompting import PromptTemplates, canonical_number
from .seeding import derive_seed

REAL_NEGATIVE_BOOST = 1.2


class BadProblemFile(FbdpoError):
    """A problems file row is malformed or duplicates an id."""


@dataclass(frozen=True)
class Problem:
    id: str
    question: str
    gold_answer: float


@dataclass(frozen=True)
class Trace:
    problem_id: str
    kind: str  # "forward" | "backward"
    prompt: str
    completion: str
    extracted: float | Verdict | None
    correct: bool | None
    attempt: int


@dataclass(frozen=True)
class PreferencePair:
    id: str
    kind: str  # "forward" | "backward"
    prompt: str
    chosen: str
    rejected: str
    weight: float
    real_negative: bool


def validate_pair(pair: PreferencePair) -> None:
    if pair.chosen == pair.rejected:
        raise ValueError(f"pair {pair.id}: chosen and rejected are identical")
    if pair.weight <= 0:
        raise ValueError(f"pair {pair.id}: weight must be positive")
    if pair.kind not in ("forward", "backward"):
        raise ValueError(f"pair {pair.id}: unknown kind {pair.kind!r}")


@dataclass(frozen=True)
class DatagenConfig:
    seed: int = 0
    max_attempts: int = 5
    backward_budget: int = 3
    pair_cap: int = 1
    base_weight: float = 1.0
    boost: float = REAL_NEGATIVE_BOOST
    concurrency: int = 4
    forward_params: SamplingParams = field(
        default_factory=lambda: SamplingParams(temperature=0.7))
    backward_params: SamplingParams = field(
        default_factory=lambda: SamplingParams(temperature=0.3))
    templates: PromptTemplates = field(default_factory=PromptTemplates)


@dataclass
class DatagenStats:
    n_problems: int = 0
    n_forward_traces: int = 0
    n_backward_traces: int = 0
    n_forward_pairs: int = 0
    n_backward_pairs: int = 0
    n_boosted: int = 0
    n_synthesized: int = 0
    n_skipped_no_verdict: int = 0

    def to_dict(self) -> dict:
        return dict(vars(self))


# ---------------------------------------------------------------------------
# problems


def load_problems(path: str | Path) -> list[Problem]:
    """Read a problems file: one {"id","question","answer"} object per line.

    The answer may be a bare number or a string in any extractable
    format (for instance a "#### 42" tail).
    """
    problems: list[Problem] = []
    seen: set[str] = set()
    for row in read_jsonl(path):
        try:
            pid, question, answer = str(row["id"]), row["question"], row["answer"]
        except KeyError as exc:
            raise BadProblemFile(f"{path}: row missing field {exc}") from exc
        if pid in seen:
            raise BadProblemFile(f"{path}: duplicate problem id {pid!r}")
        seen.add(pid)
        if isinstance(answer, (int, float)) and not isinstance(answer, bool):
            gold = float(answer)
        elif isinstance(answer, str):
            parsed = parse_number(answer)
            if parsed is None:
                try:
                    parsed = extract_answer(answer).value
                except NoAnswerFound as exc:
                    raise BadProblemFile(
                        f"{path}: problem {pid!r} has unparseable answer {answer!r}") from exc
            gold = parsed
        else:
            raise BadProblemFile(f"{path}: problem {pid!r} answer has unsupported type")
        if not question:
            raise BadProblemFile(f"{path}: problem {pid!r} has an empty question")
        problems.append(Problem(id=pid, question=str(question), gold_answer=gold))
    return problems


def save_problems(path: str | Path, problems: Iterable[Problem]) -> int:
    return write_jsonl(path, (
        {"id": p.id, "question": p.question, "answer": p.gold_answer} for p in problems))


# ---------------------------------------------------------------------------
# synthetic problems

_NAMES = ("Ava", "Ben", "Cara", "Dan", "Eli", "Fay", "Gus", "Ida", "Kim", "Lee",
          "Mia", "Ned", "Ora", "Pam", "Quinn", "Rex", "Sam", "Tess", "Uma", "Vic")
_ITEMS = ("pens", "cups", "books", "coins", "seeds", "stars", "shells", "blocks",
          "cards", "beads")


def _one_step(rng: random.Random) -> tuple[str, float]:
    name, item = rng.choice(_NAMES), rng.choice(_ITEMS)
    kind = rng.randrange(3)
    if kind == 0:
        a, b = rng.randint(2, 60), rng.randint(2, 30)
        return (f"{name} has {a} {item} and buys {b} more. "
                f"How many {item} does {name} have now?", float(a + b))
    if kind == 1:
        a = rng.randint(5, 60)
        b = rng.randint(1, a - 1)
        return (f"{name} has {a} {item} and gives away {b}. "
                f"How many {item} are left?", float(a - b))
    a, b = rng.randint(2, 12), rng.randint(2, 9)
    return (f"One box holds {a} {item}. How many {item} are in {b} boxes?",
            float(a * b))


def _two_step(rng: random.Random) -> tuple[str, float]:
    name, item = rng.choice(_NAMES), rng.choice(_ITEMS)
    if rng.randrange(2) == 0:
        a, b = rng.randint(5, 40), rng.randint(2, 20)
        c = rng.randint(1, a + b - 1)
        return (f"{name} has {a} {item}, buys {b} more, and then gives away {c}. "
                f"How many {item} does {name} have now?", float(a + b - c))
    a, b, c = rng.randint(2, 9), rng.randint(2, 9), rng.randint(1, 9)
    return (f"One box holds {a} {item}. {name} buys {b} boxes and {c} more {item}. "
            f"How many {item} in total?", float(a * b + c))


def generate_synthetic_problems(count: int, seed: int,
                                difficulty: str = "one_step") -> list[Problem]:
    """Templated arithmetic word problems with exactly computed golds."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if difficulty not in ("one_step", "two_step"):
        raise ValueError(f"unknown difficulty {difficulty!r}")
    rng = random.Random(seed)
    make = _one_step if difficulty == "one_step" else _two_step
    problems = []
    for index in range(count):
        question, gold = make(rng)
        problems.append(Problem(id=f"syn-{index:04d}", question=question, gold_answer=gold))
    return problems


# ---------------------------------------------------------------------------
# trace sampling


def sample_forward_traces(problem: Problem, generator: Generator, config: DatagenConfig) -> list[Trace]:
    """Rejection-sample solutions until both labels exist or attempts run out.

    A trace with failed extraction carries correct=None; it does not
    satisfy the incorrect side of the stopping rule.
    """
    prompt = config.templates.render_forward(problem.question)
    traces: list[Trace] = []
    have_correct = have_incorrect = False
    for attempt in range(1, config.max_attempts + 1):
        seed = derive_seed(config.seed, "forward", problem.id, attempt)
        params = replace(config.forward_params, seed=seed)
        completion = generator.generate(prompt, params)
        extracted: float | None
        correct: bool | None
        try:
            extracted = extract_answer(completion).value
            correct = numeric_equal(extracted, problem.gold_answer)
        except NoAnswerFound:
            extracted = None
            correct = None
        traces.append(Trace(problem_id=problem.id, kind="forward", prompt=prompt,
                            completion=completion, extracted=extracted,
                            correct=correct, attempt=attempt))
        have_correct = have_correct or correct is True
        have_incorrect = have_incorrect or correct is False
        if have_correct and have_incorrect:
            break
    return traces


def sample_backward_trace(problem: Problem, candidate: float, generator: Generator,
                          config: DatagenConfig, attempt: int) -> Trace:
    """Sample one verification completion for (problem, candidate)."""
    prompt = config.templates.render_backward(problem.question, candidate)
    seed = derive_seed(config.seed, "backward", problem.id, canonical_number(candidate), attempt)
    params = replace(config.backward_params, seed=seed)
    completion = generator.generate(prompt, params)
    ground_truth = Verdict.PASS if numeric_equal(candidate, problem.gold_answer) else Verdict.FAIL
    verdict: Verdict | None
    correct: bool | None
    try:
        verdict = extract_verdict(completion)
        correct = verdict is ground_truth
    except NoVerdictFound:
        verdict = None
        correct = None
    return Trace(problem_id=problem.id, kind="backward", prompt=prompt,
                 completion=completion, extracted=verdict, correct=correct,
                 attempt=attempt)


# ---------------------------------------------------------------------------
# pair construction


def build_forward_pairs(traces: list[Trace], config: DatagenConfig) -> list[PreferencePair]:
    """Pair correct against incorrect solutions, capped per problem.

    Labeled-incorrect traces are preferred as rejected members; traces
    whose extraction failed serve as a fallback (an unparseable
    solution is still a real bad solution, so the boost applies).
    """
    by_problem: dict[str, list[Trace]] = {}
    for trace in traces:
        if trace.kind != "forward":
            continue
        by_problem.setdefault(trace.problem_id, []).append(trace)
    pairs: list[PreferencePair] = []
    for problem_id, group in by_problem.items():
        group = sorted(group, key=lambda t: t.attempt)
        correct = [t for t in group if t.correct is True]
        incorrect = [t for t in group if t.correct is False]
        if not incorrect:
            incorrect = [t for t in group if t.correct is None]
        if not correct or not incorrect:
            continue
        emitted = 0
        for chosen, rejected in itertools.product(correct, incorrect):
            if emitted >= config.pair_cap:
                break
            if chosen.completion == rejected.completion:
                continue
            pair = PreferencePair(
                id=f"{problem_id}-f{emitted}",
                kind="forward",
                prompt=chosen.prompt,
                chosen=chosen.completion,
                rejected=rejected.completion,
                weight=config.base_weight * config.boost,
                real_negative=True,
            )
            validate_pair(pair)
            pairs.append(pair)
            emitted += 1
    return pairs


def _candidate_answers(traces: list[Trace]) -> list[float]:
    """Distinct extracted answers in first-seen order (tolerant dedup)."""
    candidates: list[float] = []
    for trace in sorted(traces, key=lambda t: t.attempt):
        if trace.extracted is None:
            continue
        value = float(trace.extracted)
        if not any(numeric_equal(value, seen) for seen in candidates):
            candidates.append(value)
    return candidates


def _backward_pairs_for_problem(problem: Problem, forward_traces: list[Trace],
                                generator: Generator, config: DatagenConfig,
                                ) -> tuple[list[Trace], list[PreferencePair], DatagenStats]:
    stats = DatagenStats()
    traces: list[Trace] = []
    pairs: list[PreferencePair] = []
    for candidate in _candidate_answers(forward_traces):
        ground_truth = (Verdict.PASS if numeric_equal(candidate, problem.gold_answer)
                        else Verdict.FAIL)
        sampled: list[Trace] = []
        matching: list[Trace] = []
        contradicting: list[Trace] = []
        for attempt in range(1, config.backward_budget + 1):
            trace = sample_backward_trace(problem, candidate, generator, config, attempt)
            sampled.append(trace)
            if trace.extracted is ground_truth:
                matching.append(trace)
            elif trace.extracted is not None:
                contradicting.append(trace)
            if matching and contradicting:
                break
        traces.extend(sampled)
        index = len(pairs)
        if matching and contradicting:
            chosen_text = matching[0].completion
            rejected_text = contradicting[0].completion
            real_negative = True
        elif matching:
            chosen_text = matching[0].completion
            rejected_text = flip_last_verdict(chosen_text)
            real_negative = False
        elif contradicting:
            rejected_text = contradicting[0].completion
            chosen_text = flip_last_verdict(rejected_text)
            real_negative = True
        else:
            stats.n_skipped_no_verdict += 1
            continue
        boost = config.boost if real_negative else 1.0
        pair = PreferencePair(
            id=f"{problem.id}-b{index}",
            kind="backward",
            prompt=sampled[0].prompt,
            chosen=chosen_text,
            rejected=rejected_text,
            weight=config.base_weight * boost,
            real_negative=real_negative,
        )
        validate_pair(pair)
        pairs.append(pair)
        if real_negative:
            stats.n_boosted += 1
        else:
            stats.n_synthesized += 1
    stats.n_backward_traces = len(traces)
    stats.n_backward_pairs = len(pairs)
    return traces, pairs, stats


def build_backward_pairs(problems: list[Problem], forward_traces: list[Trace],
                         generator: Generator, config: DatagenConfig,
                         ) -> tuple[list[Trace], list[PreferencePair], DatagenStats]:
    """Verification pairs for every distinct candidate answer per problem."""
    traces_by_problem: dict[str, list[Trace]] = {}
    for trace in forward_traces:
        if trace.kind == "forward":
            traces_by_problem.setdefault(trace.problem_id, []).append(trace)
    stats = DatagenStats()
    all_traces: list[Trace] = []
    all_pairs: list[PreferencePair] = []
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        jobs = [(problem, pool.submit(_backward_pairs_for_problem, problem,
                                      traces_by_problem.get(problem.id, []),
                                      generator, config))
                for problem in sorted(problems, key=lambda p: p.id)]
        for _, job in jobs:
            traces, pairs, partial = job.result()
            all_traces.extend(traces)
            all_pairs.extend(pairs)
            stats.n_backward_traces += partial.n_backward_traces
            stats.n_backward_pairs += partial.n_backward_pairs
            stats.n_boosted += partial.n_boosted
            stats.n_synthesized += partial.n_synthesized
            stats.n_skipped_no_verdict += partial.n_skipped_no_verdict
    return all_traces, all_pairs, stats


def generate_dataset(problems: list[Problem], generator: Generator,
                     config: DatagenConfig) -> tuple[list[Trace], list[PreferencePair], DatagenStats]:
    """Full bootstrap: forward traces, forward pairs, backward traces and pairs.

    Work is spread over a bounded worker pool; results are ordered by
    problem id so scheduling never changes the output bytes.
    """
    ordered = sorted(problems, key=lambda p: p.id)
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        forward_jobs = [pool.submit(sample_forward_traces, problem, generator, config)
                        for problem in ordered]
        forward_traces = [trace for job in forward_jobs for trace in job.result()]
    forward_pairs = build_forward_pairs(forward_traces, config)
    backward_traces, backward_pairs, stats = build_backward_pairs(
        ordered, forward_traces, generator, config)
    stats.n_problems = len(ordered)
    stats.n_forward_traces = len(forward_traces)
    stats.n_forward_pairs = len(forward_pairs)
    # forward boosts also count toward the boosted total
    stats.n_boosted += len(forward_pairs)
    traces = sorted(forward_traces + backward_traces,
                    key=lambda t: (t.problem_id, t.kind != "forward", t.prompt, t.attempt))
    pairs = sorted(forward_pairs + backward_pairs, key=lambda p: p.id)
    return traces, pairs, stats


# ---------------------------------------------------------------------------
# serialization


def trace_to_record(trace: Trace) -> dict:
    extracted = trace.extracted
    if isinstance(extracted, Verdict):
        extracted = extracted.value
    return {
        "problem_id": trace.problem_id,
        "kind": trace.kind,
        "prompt": trace.prompt,
        "completion": trace.completion,
        "extracted": extracted,
        "correct": trace.correct,
        "attempt": trace.attempt,
    }


def trace_from_record(row: dict) -> Trace:
    extracted = row.get("extracted")
    if row["kind"] == "backward" and isinstance(extracted, str):
        extracted = Verdict(extracted)
    return Trace(problem_id=row["problem_id"], kind=row["kind"], prompt=row["prompt"],
                 completion=row["completion"], extracted=extracted,
                 correct=row.get("correct"), attempt=row["attempt"])


def save_traces(path: str | Path, traces: Iterable[Trace]) -> int:
    return write_jsonl(path, (trace_to_record(t) for t in traces))


def load_traces(path: str | Path) -> list[Trace]:
    return [trace_from_record(row) for row in read_jsonl(path)]


def pair_to_record(pair: PreferencePair) -> dict:
    return {
        "id": pair.id,
        "kind": pair.kind,
        "prompt": pair.prompt,
        "chosen": pair.chosen,
        "rejected": pair.rejected,
        "weight": pair.weight,
        "real_negative": pair.real_negative,
    }


def pair_from_record(row: dict) -> PreferencePair:
    pair = PreferencePair(id=str(row["id"]), kind=row["kind"], prompt=row["prompt"],
                          chosen=row["chosen"], rejected=row["rejected"],
                          weight=float(row["weight"]), real_negative=bool(row["real_negative"]))
    validate_pair(pair)
    return pair


def save_pairs(path: str | Path, pairs: Iterable[PreferencePair]) -> int:
    return write_jsonl(path, (pair_to_record(p) for p in pairs))


def load_pairs(path: str | Path) -> list[PreferencePair]:
    return [pair_from_record(row) for row in read_jsonl(path)]
