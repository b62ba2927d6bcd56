from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbdpo.backend import MockGenerator
from fbdpo.datagen import Problem
from fbdpo.evaluation import (
    AllExtractionsFailed,
    EmptyInput,
    EvalConfig,
    EvalRecord,
    cluster_votes,
    compute_metrics,
    evaluate,
    format_report_table,
    record_from_row,
    record_to_row,
    self_consistency_infer,
    two_stage_infer,
)
from fbdpo.extraction import Verdict
from fbdpo.prompting import render_backward, render_forward


def rec(correct: bool, verdict: Verdict | None, index: int = 0) -> EvalRecord:
    return EvalRecord(problem_id=f"r{index}", gold=1.0,
                      predicted=1.0 if correct else 2.0,
                      correct=correct, verdict=verdict)


RECORD_STRATEGY = st.builds(
    rec,
    correct=st.booleans(),
    verdict=st.sampled_from([Verdict.PASS, Verdict.FAIL, None]),
    index=st.integers(min_value=0, max_value=10**6),
)


class TestComputeMetrics:
    def test_worked_example(self) -> None:
        # 10 records: 8 right (1 flagged FAIL), 2 wrong (1 flagged FAIL)
        records = (
            [rec(True, Verdict.PASS, i) for i in range(7)]
            + [rec(True, Verdict.FAIL, 7)]
            + [rec(False, Verdict.PASS, 8)]
            + [rec(False, Verdict.FAIL, 9)]
        )
        report = compute_metrics(records)
        assert report.n == 10
        assert report.accuracy == pytest.approx(0.8)
        assert report.ack_rate == pytest.approx(0.5)
        assert report.fpr == pytest.approx(0.125)
        assert report.calib_f1 == pytest.approx(0.875)
        assert report.n_right == 8
        assert report.n_wrong == 2
        assert report.n_no_verdict == 0

    def test_empty_raises(self) -> None:
        with pytest.raises(EmptyInput):
            compute_metrics([])

    def test_perfect_calibration_gives_f1_one(self) -> None:
        records = [rec(True, Verdict.PASS, 0), rec(False, Verdict.FAIL, 1)]
        assert compute_metrics(records).calib_f1 == pytest.approx(1.0)

    def test_all_wrong_all_pass_gives_f1_zero(self) -> None:
        records = [rec(False, Verdict.PASS, i) for i in range(4)]
        assert compute_metrics(records).calib_f1 == 0.0

    def test_no_verdict_bearing_records_gives_absent_metrics(self) -> None:
        records = [rec(True, None, 0), rec(False, None, 1)]
        report = compute_metrics(records)
        assert report.ack_rate is None
        assert report.fpr is None
        assert report.calib_f1 is None
        assert report.n_no_verdict == 2
        assert report.accuracy == pytest.approx(0.5)

    def test_ack_rate_none_when_no_wrong_records(self) -> None:
        records = [rec(True, Verdict.PASS, i) for i in range(3)]
        report = compute_metrics(records)
        assert report.ack_rate is None
        assert report.fpr == 0.0

    def test_fpr_none_when_no_right_records(self) -> None:
        records = [rec(False, Verdict.FAIL, i) for i in range(3)]
        report = compute_metrics(records)
        assert report.fpr is None
        assert report.ack_rate == 1.0

    def test_count_as_pass_policy(self) -> None:
        records = [rec(True, None, 0), rec(False, None, 1)]
        report = compute_metrics(records, no_verdict_policy="count_as_pass")
        # missing verdicts scored PASS: right one is a TP, wrong one an FP
        assert report.fpr == 0.0
        assert report.ack_rate == 0.0
        assert report.calib_f1 == pytest.approx(2 / 3)

    def test_bad_policy_rejected(self) -> None:
        with pytest.raises(ValueError):
            compute_metrics([rec(True, Verdict.PASS)], no_verdict_policy="imagine")

    @given(st.lists(RECORD_STRATEGY, min_size=1, max_size=60))
    @settings(max_examples=80)
    def test_partition_law(self, records: list[EvalRecord]) -> None:
        report = compute_metrics(records)
        assert report.n_wrong + report.n_right == report.n == len(records)

    @given(st.lists(RECORD_STRATEGY, min_size=1, max_size=40))
    @settings(max_examples=60)
    def test_accuracy_bounds(self, records: list[EvalRecord]) -> None:
        report = compute_metrics(records)
        assert 0.0 <= report.accuracy <= 1.0

    def test_ack_rate_monotone_under_flagging_one_more(self) -> None:
        base = [rec(False, Verdict.PASS, 0), rec(False, Verdict.PASS, 1),
                rec(True, Verdict.PASS, 2)]
        flipped = [rec(False, Verdict.FAIL, 0), rec(False, Verdict.PASS, 1),
                   rec(True, Verdict.PASS, 2)]
        before = compute_metrics(base).ack_rate
        after = compute_metrics(flipped).ack_rate
        assert after >= before


class TestClusterVotes:
    def test_majority_wins(self) -> None:
        value, clusters = cluster_votes([3.0, 5.0, 3.0])
        assert value == 3.0
        assert clusters == [[0, 2], [1]]

    def test_tolerant_merge(self) -> None:
        value, clusters = cluster_votes([2.0, 2.0000004, 9.0])
        assert value == 2.0
        assert clusters == [[0, 1], [2]]

    def test_tie_breaks_to_earliest_cluster(self) -> None:
        value, _ = cluster_votes([7.0, 4.0, 4.0, 7.0])
        assert value == 7.0

    def test_single_vote(self) -> None:
        value, clusters = cluster_votes([1.5])
        assert value == 1.5
        assert clusters == [[0]]

    def test_empty_rejected(self) -> None:
        with pytest.raises(ValueError):
            cluster_votes([])

    @given(st.lists(st.floats(min_value=-100, max_value=100,
                              allow_nan=False), min_size=1, max_size=12))
    @settings(max_examples=60)
    def test_clusters_partition_indices(self, votes: list[float]) -> None:
        _, clusters = cluster_votes(votes)
        flat = sorted(i for cluster in clusters for i in cluster)
        assert flat == list(range(len(votes)))


PROBLEM = Problem(id="q1", question="What is 2 + 5?", gold_answer=7.0)


class TestTwoStageInfer:
    def test_correct_flow(self) -> None:
        config = EvalConfig()
        script = {
            render_forward(PROBLEM.question): ["Sum is 7. #### 7"],
            render_backward(PROBLEM.question, 7.0): ["Looks right. Verification: PASS"],
        }
        result = two_stage_infer(PROBLEM, MockGenerator(script), config)
        assert result.record.correct is True
        assert result.record.predicted == 7.0
        assert result.record.verdict is Verdict.PASS

    def test_extraction_failure_short_circuits(self) -> None:
        # no backward entry scripted: reaching it would raise ScriptExhausted
        config = EvalConfig()
        script = {render_forward(PROBLEM.question): ["I give up."]}
        result = two_stage_infer(PROBLEM, MockGenerator(script), config)
        assert result.record.predicted is None
        assert result.record.correct is False
        assert result.record.verdict is None
        assert result.backward_completion is None

    def test_unparseable_verdict_recorded_as_none(self) -> None:
        config = EvalConfig()
        script = {
            render_forward(PROBLEM.question): ["#### 9"],
            render_backward(PROBLEM.question, 9.0): ["hard to say"],
        }
        result = two_stage_infer(PROBLEM, MockGenerator(script), config)
        assert result.record.correct is False
        assert result.record.verdict is None


class TestSelfConsistency:
    def test_majority_vote(self) -> None:
        config = EvalConfig(mode="self_consistency", k=3)
        script = {render_forward(PROBLEM.question): ["#### 7", "#### 9", "#### 7"]}
        record = self_consistency_infer(PROBLEM, MockGenerator(script), config)
        assert record.predicted == 7.0
        assert record.correct is True
        assert record.votes == [7.0, 9.0, 7.0]
        assert record.verdict is None

    def test_unparseable_votes_skipped(self) -> None:
        config = EvalConfig(mode="self_consistency", k=3)
        script = {render_forward(PROBLEM.question): ["??", "#### 9", "#### 9"]}
        record = self_consistency_infer(PROBLEM, MockGenerator(script), config)
        assert record.votes == [9.0, 9.0]
        assert record.correct is False

    def test_all_failures_raise(self) -> None:
        config = EvalConfig(mode="self_consistency", k=2)
        script = {render_forward(PROBLEM.question): ["??", "!!"]}
        with pytest.raises(AllExtractionsFailed):
            self_consistency_infer(PROBLEM, MockGenerator(script), config)


class TestEvaluate:
    def test_mock_scenario_metrics(self, eval_scenario) -> None:
        problems, script = eval_scenario
        run = evaluate(problems, MockGenerator(dict(script)), EvalConfig())
        assert run.report.accuracy == pytest.approx(0.8)
        assert run.report.ack_rate == pytest.approx(0.5)
        assert run.report.fpr == pytest.approx(0.125)
        assert run.report.calib_f1 == pytest.approx(0.875)
        assert run.n_generation_failures == 0

    def test_sample_limit(self, eval_scenario) -> None:
        problems, script = eval_scenario
        run = evaluate(problems, MockGenerator(dict(script)),
                       EvalConfig(sample_limit=3))
        assert run.report.n == 3
        assert [r.problem_id for r in run.records] == sorted(
            p.id for p in problems)[:3]

    def test_empty_problems_raise(self, eval_mock) -> None:
        with pytest.raises(EmptyInput):
            evaluate([], eval_mock, EvalConfig())

    def test_generation_failures_counted(self, eval_scenario) -> None:
        problems, script = eval_scenario
        partial = dict(script)
        missing = render_forward(problems[0].question)
        partial.pop(missing)
        run = evaluate(problems, MockGenerator(partial), EvalConfig())
        assert run.n_generation_failures == 1
        assert run.report.n == len(problems)
        failed = [r for r in run.records if r.problem_id == problems[0].id][0]
        assert failed.correct is False
        assert failed.predicted is None

    def test_records_sorted_by_problem_id(self, eval_scenario) -> None:
        problems, script = eval_scenario
        run = evaluate(list(reversed(problems)), MockGenerator(dict(script)),
                       EvalConfig())
        ids = [r.problem_id for r in run.records]
        assert ids == sorted(ids)


class TestRecordRows:
    def test_round_trip(self) -> None:
        record = EvalRecord(problem_id="a", gold=3.0, predicted=4.0, correct=False,
                            verdict=Verdict.FAIL, votes=None)
        assert record_from_row(record_to_row(record)) == record

    def test_votes_round_trip(self) -> None:
        record = EvalRecord(problem_id="a", gold=3.0, predicted=3.0, correct=True,
                            verdict=None, votes=[3.0, 3.0, 5.0])
        assert record_from_row(record_to_row(record)) == record

    def test_missing_predicted_round_trip(self) -> None:
        record = EvalRecord(problem_id="a", gold=3.0, predicted=None, correct=False,
                            verdict=None)
        assert record_from_row(record_to_row(record)) == record


class TestReportTable:
    def test_absent_metrics_rendered(self) -> None:
        records = [rec(True, None, 0)]
        table = format_report_table(compute_metrics(records))
        assert "absent" in table
        assert "accuracy" in table

    def test_all_rows_present(self) -> None:
        records = [rec(True, Verdict.PASS, 0), rec(False, Verdict.FAIL, 1)]
        table = format_report_table(compute_metrics(records))
        for label in ("records", "accuracy", "ack_rate", "fpr", "calib_f1",
                      "n_right", "n_wrong", "n_no_verdict"):
            assert label in table
