"""Generators behind the committed fixture data files.

Run as a module (python -m fbdpo.fixtures.build) to rewrite the data
directory; tests call the same functions to verify the committed files
still match their generators byte for byte.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from ..jsonio import dump_line
from ..prompting import render_backward, render_forward

# ---------------------------------------------------------------------------
# answer extraction cases


def build_extraction_cases() -> list[dict]:
    def ok(name, text, value, fmt, note):
        return {"name": name, "input": text,
                "expected": {"value": value, "format": fmt}, "note": note}

    def err(name, text, note):
        return {"name": name, "input": text,
                "expected": {"error": "no_answer"}, "note": note}

    return [
        ok("marker-int", "She sells 9 and has 18 left.\n#### 18", 18.0,
           "gsm8k_marker", "format rule: marker followed by integer"),
        ok("marker-decimal", "Half of 25 is 12.5\n#### 12.5", 12.5,
           "gsm8k_marker", "format rule: marker with decimal"),
        ok("marker-negative", "The balance drops below zero. #### -7", -7.0,
           "gsm8k_marker", "format rule: negative number"),
        ok("marker-comma", "Total revenue: #### 1,250,000", 1250000.0,
           "gsm8k_marker", "format rule: thousands separators stripped"),
        ok("marker-currency", "#### $40", 40.0,
           "gsm8k_marker", "format rule: leading currency symbol stripped"),
        ok("marker-percent", "#### 35%", 35.0,
           "gsm8k_marker", "format rule: trailing percent stripped"),
        ok("marker-fraction", "#### 3/4", 0.75,
           "gsm8k_marker", "format rule: fraction converted to decimal"),
        ok("marker-last-wins", "#### 3 was a guess. Correcting: #### 5", 5.0,
           "gsm8k_marker", "format rule: last marker occurrence wins"),
        ok("marker-near-tolerance", "#### 12.0000004", 12.0000004,
           "gsm8k_marker", "constructed: value within comparison tolerance of 12"),
        ok("boxed-int", "Thus the total is \\boxed{42}.", 42.0,
           "boxed", "format rule: boxed notation"),
        ok("boxed-fraction", "Thus \\boxed{3/4} is the result.", 0.75,
           "boxed", "format rule: boxed fraction to decimal"),
        ok("boxed-comma", "We get \\boxed{2,048} units.", 2048.0,
           "boxed", "format rule: separators stripped inside boxed"),
        ok("boxed-negative", "So \\boxed{-16} overall.", -16.0,
           "boxed", "format rule: negative boxed value"),
        ok("cue-answer-is", "The answer is 42.", 42.0,
           "natural_language", "format rule: answer-is cue"),
        ok("cue-case-insensitive", "THE ANSWER IS 17", 17.0,
           "natural_language", "format rule: cue matching ignores case"),
        ok("cue-final-answer", "Final Answer: 1,250", 1250.0,
           "natural_language", "format rule: final-answer cue with separator"),
        ok("cue-currency-period", "The answer is $1,250.", 1250.0,
           "natural_language", "format rule: currency and separators stripped"),
        ok("cue-no-colon", "final answer 12", 12.0,
           "natural_language", "constructed: colon after the cue is optional"),
        ok("bare-trailing", "3 + 4 + 5 = 12", 12.0,
           "bare_trailing_number", "format rule: last standalone number"),
        ok("bare-negative-decimal", "temperature fell to -3.5 overnight", -3.5,
           "bare_trailing_number", "constructed: signed decimal as last number"),
        ok("priority-marker-over-boxed", "We find \\boxed{8} but #### 9", 9.0,
           "gsm8k_marker", "priority rule: marker outranks boxed"),
        ok("priority-boxed-over-cue", "The answer is 3. Later: \\boxed{4}", 4.0,
           "boxed", "priority rule: boxed outranks cue phrase"),
        ok("priority-cue-over-bare", "The answer is 2. Scratch work: 5 6 7.", 2.0,
           "natural_language", "priority rule: cue outranks later bare numbers"),
        ok("marker-unparseable-falls-through", "#### unclear, but 7 remains", 7.0,
           "bare_trailing_number", "constructed: marker without a number falls through"),
        ok("boxed-nested-falls-through", "So \\boxed{\\frac{3}{4}} here", 4.0,
           "bare_trailing_number",
           "constructed: nested braces defeat the boxed rule; bare rule sees digits"),
        err("empty", "", "degenerate: empty input"),
        err("no-numbers", "I am not sure how to solve this.",
            "degenerate: no numeric content"),
        err("words-only", "The answer is unclear.",
            "constructed: cue present but no number anywhere"),
    ]


def build_verdict_cases() -> list[dict]:
    def ok(name, text, verdict, note):
        return {"name": name, "input": text,
                "expected": {"verdict": verdict}, "note": note}

    def err(name, text, note):
        return {"name": name, "input": text,
                "expected": {"error": "no_verdict"}, "note": note}

    return [
        ok("pass-cue", "Each step checks out. Verification: PASS", "PASS",
           "format rule: direct cue match"),
        ok("fail-cue", "The sum is wrong. Verification: FAIL", "FAIL",
           "format rule: direct cue match"),
        ok("last-wins-rubric", "Verification: PASS if correct, FAIL if not. "
           "The sum is wrong. Verification: FAIL", "FAIL",
           "format rule: last occurrence supersedes rubric restatement"),
        ok("last-wins-reversal", "Initially I would say FAIL, but rechecking "
           "shows it holds. Verification: PASS", "PASS",
           "constructed: conclusion reverses an earlier token"),
        ok("lowercase-pass", "so i think this is a pass", "PASS",
           "format rule: case-insensitive token"),
        ok("lowercase-fail", "clearly a fail overall", "FAIL",
           "format rule: case-insensitive token"),
        ok("standalone-token", "PASS", "PASS", "degenerate: bare token"),
        ok("token-mid-sentence", "The check does not fail at any step.", "FAIL",
           "constructed: token need not follow the cue"),
        ok("multiple-tokens", "pass pass fail pass", "PASS",
           "constructed: strictly the last token wins"),
        err("no-token", "I am not sure.", "degenerate: no token present"),
        err("embedded-words", "The passenger failed to buy a passing grade... "
            "no, that sentence used no clean tokens: passed, failing, surpass.",
            "constructed: word-boundary rule rejects embedded tokens"),
        err("empty", "", "degenerate: empty input"),
    ]


# ---------------------------------------------------------------------------
# metric oracle sets


def make_oracle_case(index: int) -> tuple[str, str]:
    """Compact record string and verdict policy for case `index`.

    Fully determined by the index: record count, class balance, and
    no-verdict rate come from a seeded stream, with the first five
    indices pinned to degenerate corners.
    """
    policy = "exclude" if index % 2 == 0 else "count_as_pass"
    rng = random.Random(74000 + index)
    if index == 0:
        n, p_correct, p_no_verdict, p_pass = 40, 1.0, 0.0, 1.0
    elif index == 1:
        n, p_correct, p_no_verdict, p_pass = 40, 0.0, 0.0, 0.0
    elif index in (2, 3):
        n, p_correct, p_no_verdict, p_pass = 25, 0.5, 1.0, 0.5
    elif index == 4:
        n, p_correct, p_no_verdict, p_pass = 1, 0.5, 0.3, 0.5
    else:
        n = rng.randint(1, 1000)
        p_correct = rng.random()
        p_no_verdict = rng.random() * 0.3
        p_pass = rng.random()
    chars = []
    for _ in range(n):
        correct = rng.random() < p_correct
        if rng.random() < p_no_verdict:
            verdict = "N"
        else:
            verdict = "P" if rng.random() < p_pass else "F"
        chars.append(("C" if correct else "W") + verdict)
    return "".join(chars), policy


def build_metric_oracle_cases(count: int = 100) -> list[dict]:
    cases = []
    for index in range(count):
        records, policy = make_oracle_case(index)
        note = ("degenerate corner case" if index < 5
                else "seeded random record set")
        cases.append({
            "name": f"oracle-{index:03d}",
            "input": {"index": index, "policy": policy, "records": records},
            "expected": None,
            "note": note,
        })
    return cases


# ---------------------------------------------------------------------------
# preference-pair datasets


def build_separable_pairs() -> list[dict]:
    """64 one-direction pairs with a fixed good/bad completion contrast."""
    cases = []
    for i in range(64):
        boosted = i % 2 == 1
        pair = {
            "id": f"sep-{i:02d}",
            "kind": "forward",
            "prompt": f"item {i % 8}:",
            "chosen": " good",
            "rejected": " bad",
            "weight": 1.2 if boosted else 1.0,
            "real_negative": boosted,
        }
        cases.append({"name": pair["id"], "input": pair, "expected": None,
                      "note": "constructed separable contrast"})
    return cases


def build_mixed_pairs() -> list[dict]:
    """32 solution pairs plus 32 verification pairs on disjoint prompts."""
    cases = []
    for i in range(32):
        boosted = i % 2 == 1
        pair = {
            "id": f"mx-f{i:02d}",
            "kind": "forward",
            "prompt": f"fjob {i}:",
            "chosen": " yes",
            "rejected": " no",
            "weight": 1.2 if boosted else 1.0,
            "real_negative": boosted,
        }
        cases.append({"name": pair["id"], "input": pair, "expected": None,
                      "note": "constructed solution-direction pair"})
    for i in range(32):
        boosted = i % 3 == 0
        pair = {
            "id": f"mx-b{i:02d}",
            "kind": "backward",
            "prompt": f"bjob {i}:",
            "chosen": " right",
            "rejected": " wrong",
            "weight": 1.2 if boosted else 1.0,
            "real_negative": boosted,
        }
        cases.append({"name": pair["id"], "input": pair, "expected": None,
                      "note": "constructed verification-direction pair"})
    return cases


# ---------------------------------------------------------------------------
# scripted mock scenarios


def build_gen_data_scenario() -> tuple[list[dict], dict]:
    """Problems and scripted responses for the dataset-bootstrap scenario.

    Designed outcomes (hand-tallied, asserted by tests):
      p1: correct then incorrect, stops after 2 attempts;
      p2: five correct attempts, no incorrect side, no pair;
      p3: incorrect, incorrect, correct, stops after 3;
      p4: unparseable, correct, correct-within-tolerance, incorrect,
          stops after 4 (the fifth scripted attempt stays unused).
    Backward verification per distinct candidate answer (budget 3):
    both-sides cases stop after 2 draws; single-verdict cases use all
    3 and synthesize the missing side; p4's candidate 11 never yields
    a verdict and is skipped.
    """
    problems = [
        {"id": "p1", "question": "What is 3 + 4?", "answer": 7},
        {"id": "p2", "question": "What is 5 + 5?", "answer": 10},
        {"id": "p3", "question": "What is 2 + 2?", "answer": 4},
        {"id": "p4", "question": "What is 6 + 6?", "answer": 12},
    ]
    forward = {
        "p1": ["I think 3 + 4 = 7. #### 7",
               "Hmm. 3 + 4 = 9. #### 9"],
        "p2": ["5 + 5 = 10. #### 10",
               "Ten in total. #### 10",
               "#### 10",
               "Again 10. #### 10",
               "Still 10. #### 10"],
        "p3": ["2 + 2 = 5. #### 5",
               "Let me see: 2 + 2 = 6. #### 6",
               "2 + 2 = 4. #### 4"],
        "p4": ["The total is unclear.",
               "Adding gives 12. #### 12",
               "Close to twelve: #### 12.0000004",
               "6 + 6 = 11. #### 11",
               "Recounting: #### 12"],
    }
    backward = {
        ("p1", 7.0): ["3 + 4 = 7 and 7 - 4 = 3. Verification: PASS",
                      "Subtracting back gives 2, mismatch. Verification: FAIL"],
        ("p1", 9.0): ["9 - 4 = 5, not 3. Verification: FAIL",
                      "Checking: 3 + 4 = 7, not 9. Verification: FAIL",
                      "The sum should be 7. Verification: FAIL"],
        ("p2", 10.0): ["5 + 5 = 10 holds. Verification: PASS",
                       "10 - 5 = 4, mismatch. Verification: FAIL"],
        ("p3", 5.0): ["2 + 2 = 4, not 5. Verification: FAIL",
                      "5 - 2 = 3, not 2. Verification: FAIL",
                      "Four is the sum. Verification: FAIL"],
        ("p3", 6.0): ["6 - 2 = 4, not 2. Verification: FAIL",
                      "Looks fine to me. Verification: PASS"],
        ("p3", 4.0): ["2 + 2 = 4. Verification: PASS",
                      "Indeed 4. Verification: PASS",
                      "Correct. Verification: PASS"],
        ("p4", 12.0): ["6 + 6 = 12. Verification: PASS",
                       "12 - 6 = 5, mismatch. Verification: FAIL"],
        ("p4", 11.0): ["I cannot tell.",
                       "Unsure about this one.",
                       "The check is inconclusive."],
    }
    questions = {row["id"]: row["question"] for row in problems}
    responses = []
    for pid, completions in forward.items():
        responses.append({"prompt": render_forward(questions[pid]),
                          "completions": completions})
    for (pid, candidate), completions in backward.items():
        responses.append({"prompt": render_backward(questions[pid], candidate),
                          "completions": completions})
    return problems, {"responses": responses}


def build_eval_scenario() -> tuple[list[dict], dict]:
    """Problems and scripted responses for the generate-then-verify scenario.

    Ten problems: seven answered correctly with PASS verdicts, one
    correctly with a FAIL verdict, one incorrectly with PASS, one
    incorrectly with FAIL. The resulting counts give accuracy 0.8,
    acknowledgement rate 0.5, false positive rate 0.125, and
    calibration F1 0.875.
    """
    spec_rows = [
        ("e01", "What is 1 + 2?", 3, 3, "PASS"),
        ("e02", "What is 3 + 5?", 8, 8, "PASS"),
        ("e03", "What is 4 + 8?", 12, 12, "PASS"),
        ("e04", "What is 2 + 3?", 5, 5, "PASS"),
        ("e05", "What is 4 + 5?", 9, 9, "PASS"),
        ("e06", "What is 6 + 8?", 14, 14, "PASS"),
        ("e07", "What is 2 + 4?", 6, 6, "PASS"),
        ("e08", "What is 3 + 7?", 10, 10, "FAIL"),
        ("e09", "What is 1 + 3?", 4, 5, "PASS"),
        ("e10", "What is 3 + 4?", 7, 9, "FAIL"),
    ]
    problems = []
    responses = []
    for pid, question, gold, predicted, verdict in spec_rows:
        problems.append({"id": pid, "question": question, "answer": gold})
        responses.append({"prompt": render_forward(question),
                          "completions": [f"Step by step we get {predicted}. #### {predicted}"]})
        verdict_line = ("All steps check out. Verification: PASS" if verdict == "PASS"
                        else "This does not add up. Verification: FAIL")
        responses.append({"prompt": render_backward(question, float(predicted)),
                          "completions": [verdict_line]})
    return problems, {"responses": responses}


# ---------------------------------------------------------------------------
# writing


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    path.write_text("".join(dump_line(r) + "\n" for r in rows), encoding="utf-8")


def data_dir() -> Path:
    return Path(__file__).resolve().parent / "data"


def write_all(target: Path | None = None) -> list[Path]:
    target = target or data_dir()
    target.mkdir(parents=True, exist_ok=True)
    written = []

    def emit_jsonl(filename: str, rows: list[dict]) -> None:
        path = target / filename
        _write_jsonl(path, rows)
        written.append(path)

    def emit_json(filename: str, payload: dict) -> None:
        path = target / filename
        path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n",
                        encoding="utf-8")
        written.append(path)

    emit_jsonl("extraction_formats.jsonl", build_extraction_cases())
    emit_jsonl("verdicts.jsonl", build_verdict_cases())
    emit_jsonl("metric_oracle.jsonl", build_metric_oracle_cases())
    emit_jsonl("separable_dpo.jsonl", build_separable_pairs())
    emit_jsonl("mixed_pairs.jsonl", build_mixed_pairs())
    gen_problems, gen_script = build_gen_data_scenario()
    emit_jsonl("mock_gen_data_problems.jsonl", gen_problems)
    emit_json("mock_gen_data_script.json", gen_script)
    eval_problems, eval_script = build_eval_scenario()
    emit_jsonl("mock_eval_problems.jsonl", eval_problems)
    emit_json("mock_eval_script.json", eval_script)
    return written


if __name__ == "__main__":
    for path in write_all():
        print(path)
