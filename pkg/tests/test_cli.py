from __future__ import annotations

import json

import pytest

from fbdpo import __version__
from fbdpo.cli import main
from fbdpo.fixtures.build import data_dir

GEN_PROBLEMS = str(data_dir() / "mock_gen_data_problems.jsonl")
GEN_SCRIPT = str(data_dir() / "mock_gen_data_script.json")
EVAL_PROBLEMS = str(data_dir() / "mock_eval_problems.jsonl")
EVAL_SCRIPT = str(data_dir() / "mock_eval_script.json")


def run_synth(out, extra: list[str] | None = None) -> int:
    return main(["synth", "--count", "6", "--seed", "2", "--out", str(out)]
                + (extra or []))


class TestSynth:
    def test_outputs_and_stamp(self, tmp_path, capsys) -> None:
        out = tmp_path / "problems"
        assert run_synth(out) == 0
        assert (out / "problems.jsonl").exists()
        resolved = json.loads((out / "resolved-config.json").read_text())
        assert resolved["tool_version"] == __version__
        assert resolved["command"] == "synth"
        assert resolved["resolved"]["count"] == 6
        assert "6 problems" in capsys.readouterr().out

    def test_deterministic_across_runs(self, tmp_path) -> None:
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_synth(a)
        run_synth(b)
        assert (a / "problems.jsonl").read_bytes() == (b / "problems.jsonl").read_bytes()

    def test_refuses_overwrite_without_force(self, tmp_path, capsys) -> None:
        out = tmp_path / "problems"
        assert run_synth(out) == 0
        assert run_synth(out) == 1
        assert "--force" in capsys.readouterr().err

    def test_force_overwrites(self, tmp_path) -> None:
        out = tmp_path / "problems"
        assert run_synth(out) == 0
        assert run_synth(out, ["--force"]) == 0

    def test_zero_count_is_usage_error(self, tmp_path) -> None:
        with pytest.raises(SystemExit) as excinfo:
            main(["synth", "--count", "0", "--out", str(tmp_path / "x")])
        assert excinfo.value.code == 2


class TestGenData:
    def run(self, out) -> int:
        return main(["gen-data", "--problems", GEN_PROBLEMS,
                     "--mock-script", GEN_SCRIPT, "--out", str(out)])

    def test_outputs(self, tmp_path, capsys) -> None:
        out = tmp_path / "data"
        assert self.run(out) == 0
        for name in ("traces.jsonl", "pairs.jsonl", "summary.json",
                     "resolved-config.json"):
            assert (out / name).exists(), name
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_forward_pairs"] == 3
        assert summary["n_backward_pairs"] == 7
        stdout = capsys.readouterr().out
        assert "forward pairs" in stdout
        assert "boosted" in stdout

    def test_missing_script_flag_fails(self, tmp_path, capsys) -> None:
        code = main(["gen-data", "--problems", GEN_PROBLEMS,
                     "--out", str(tmp_path / "d")])
        assert code == 1
        assert "mock-script" in capsys.readouterr().err

    def test_missing_problems_file_fails(self, tmp_path, capsys) -> None:
        code = main(["gen-data", "--problems", str(tmp_path / "nope.jsonl"),
                     "--mock-script", GEN_SCRIPT, "--out", str(tmp_path / "d")])
        assert code == 1
        assert "not found" in capsys.readouterr().err


@pytest.fixture(scope="module")
def pairs_file(tmp_path_factory) -> str:
    out = tmp_path_factory.mktemp("gen") / "data"
    assert main(["gen-data", "--problems", GEN_PROBLEMS,
                 "--mock-script", GEN_SCRIPT, "--out", str(out)]) == 0
    return str(out / "pairs.jsonl")


# context 512: backward prompts run well past 256 tokens
TINY_MODEL_FLAGS = ["--context-len", "512", "--d-model", "16", "--n-heads", "2",
                    "--n-layers", "1", "--lora-rank", "2", "--lora-dropout", "0.0"]


class TestTrain:
    def test_outputs(self, tmp_path, pairs_file, capsys) -> None:
        out = tmp_path / "run"
        code = main(["train", "--pairs", pairs_file, "--out", str(out),
                     "--accumulation", "4", "--epochs", "1"] + TINY_MODEL_FLAGS)
        assert code == 0
        for name in ("checkpoint.bin", "train_log.csv", "training.png",
                     "resolved-config.json"):
            assert (out / name).exists(), name
        csv_text = (out / "train_log.csv").read_text()
        assert csv_text.startswith("step,loss,margin,")
        captured = capsys.readouterr()
        assert "optimizer steps" in captured.out
        assert "fresh initialization" in captured.err

    def test_paper_profile_warns_and_applies(self, tmp_path, pairs_file, capsys) -> None:
        out = tmp_path / "run"
        code = main(["train", "--pairs", pairs_file, "--out", str(out),
                     "--paper-profile"] + TINY_MODEL_FLAGS)
        assert code == 0
        assert "8-billion" in capsys.readouterr().err
        resolved = json.loads((out / "resolved-config.json").read_text())
        assert resolved["resolved"]["train"]["learning_rate"] == 1e-5
        assert resolved["resolved"]["train"]["accumulation"] == 16
        assert resolved["resolved"]["paper_profile"] is True

    def test_explicit_flag_outranks_profile(self, tmp_path, pairs_file) -> None:
        out = tmp_path / "run"
        code = main(["train", "--pairs", pairs_file, "--out", str(out),
                     "--paper-profile", "--lr", "0.002"] + TINY_MODEL_FLAGS)
        assert code == 0
        resolved = json.loads((out / "resolved-config.json").read_text())
        assert resolved["resolved"]["train"]["learning_rate"] == 0.002

    def test_preset_sets_direction_weights(self, tmp_path, pairs_file) -> None:
        out = tmp_path / "run"
        code = main(["train", "--pairs", pairs_file, "--out", str(out),
                     "--preset", "forward-only", "--accumulation", "4"]
                    + TINY_MODEL_FLAGS)
        assert code == 0
        resolved = json.loads((out / "resolved-config.json").read_text())
        assert resolved["resolved"]["train"]["w_f"] == 1.0
        assert resolved["resolved"]["train"]["w_b"] == 0.0

    def test_both_weights_zero_is_usage_error(self, tmp_path, pairs_file) -> None:
        with pytest.raises(SystemExit) as excinfo:
            main(["train", "--pairs", pairs_file, "--out", str(tmp_path / "r"),
                  "--wf", "0", "--wb", "0"] + TINY_MODEL_FLAGS)
        assert excinfo.value.code == 2

    def test_checkpoint_round_trips_through_cli(self, tmp_path, pairs_file) -> None:
        first = tmp_path / "first"
        second = tmp_path / "second"
        assert main(["train", "--pairs", pairs_file, "--out", str(first),
                     "--accumulation", "4"] + TINY_MODEL_FLAGS) == 0
        assert main(["train", "--pairs", pairs_file, "--out", str(second),
                     "--checkpoint-in", str(first / "checkpoint.bin"),
                     "--accumulation", "4"]) == 0
        assert (second / "checkpoint.bin").exists()


class TestEval:
    def run(self, out, extra: list[str] | None = None) -> int:
        return main(["eval", "--problems", EVAL_PROBLEMS,
                     "--mock-script", EVAL_SCRIPT, "--out", str(out)]
                    + (extra or []))

    def test_outputs_and_metrics(self, tmp_path, capsys) -> None:
        out = tmp_path / "eval"
        assert self.run(out) == 0
        for name in ("records.jsonl", "report.json", "metrics.png",
                     "resolved-config.json"):
            assert (out / name).exists(), name
        report = json.loads((out / "report.json").read_text())
        assert report["metrics"]["accuracy"] == pytest.approx(0.8)
        assert report["metrics"]["calib_f1"] == pytest.approx(0.875)
        stdout = capsys.readouterr().out
        assert "accuracy" in stdout
        assert "0.8000" in stdout

    def test_limit(self, tmp_path) -> None:
        out = tmp_path / "eval"
        assert self.run(out, ["--limit", "4"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["metrics"]["n"] == 4

    def test_bad_k_is_usage_error(self, tmp_path) -> None:
        with pytest.raises(SystemExit) as excinfo:
            self.run(tmp_path / "e", ["--mode", "self-consistency", "--k", "0"])
        assert excinfo.value.code == 2


class TestInfer:
    def test_prints_solution_and_verdict(self, capsys) -> None:
        code = main(["infer", "--question", "What is 1 + 2?",
                     "--mock-script", EVAL_SCRIPT])
        assert code == 0
        out = capsys.readouterr().out
        assert "=== solution ===" in out
        assert "answer: 3" in out
        assert "=== verification ===" in out
        assert "verdict: PASS" in out

    def test_unparseable_answer_notice_exits_zero(self, tmp_path, capsys) -> None:
        script = tmp_path / "script.json"
        script.write_text(json.dumps({"responses": [
            {"prompt_key": "", "completions": []}]}), encoding="utf-8")
        # build a script for the exact rendered prompt
        from fbdpo.prompting import render_forward

        script.write_text(json.dumps({"responses": [
            {"prompt": render_forward("mystery?"), "completions": ["no idea at all"]}]}),
            encoding="utf-8")
        code = main(["infer", "--question", "mystery?", "--mock-script", str(script)])
        assert code == 0
        out = capsys.readouterr().out
        assert "no parseable answer" in out
        assert "verification" not in out


class TestConfigPrecedence:
    def test_file_overrides_default_flag_overrides_file(self, tmp_path) -> None:
        config = tmp_path / "config.yaml"
        config.write_text("synth:\n  count: 3\nseed: 11\n", encoding="utf-8")
        out_file = tmp_path / "from-file"
        assert main(["synth", "--config", str(config), "--out", str(out_file)]) == 0
        resolved = json.loads((out_file / "resolved-config.json").read_text())
        assert resolved["resolved"]["count"] == 3
        assert resolved["resolved"]["seed"] == 11
        out_flag = tmp_path / "from-flag"
        assert main(["synth", "--config", str(config), "--count", "5",
                     "--out", str(out_flag)]) == 0
        resolved = json.loads((out_flag / "resolved-config.json").read_text())
        assert resolved["resolved"]["count"] == 5
        assert resolved["resolved"]["seed"] == 11

    def test_json_config_accepted(self, tmp_path) -> None:
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"synth": {"count": 2}}), encoding="utf-8")
        out = tmp_path / "o"
        assert main(["synth", "--config", str(config), "--out", str(out)]) == 0
        assert len((out / "problems.jsonl").read_text().strip().split("\n")) == 2

    def test_missing_config_file_fails(self, tmp_path, capsys) -> None:
        code = main(["synth", "--config", str(tmp_path / "nope.yaml"),
                     "--out", str(tmp_path / "o")])
        assert code == 1
        assert "config file" in capsys.readouterr().err


class TestParser:
    def test_unknown_subcommand_exits_two(self) -> None:
        with pytest.raises(SystemExit) as excinfo:
            main(["warp"])
        assert excinfo.value.code == 2

    def test_version_flag(self, capsys) -> None:
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_missing_required_flag_exits_two(self, tmp_path) -> None:
        with pytest.raises(SystemExit) as excinfo:
            main(["gen-data", "--out", str(tmp_path / "o")])
        assert excinfo.value.code == 2
