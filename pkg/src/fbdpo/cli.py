"""Command-line pipeline driver.

Subcommands: synth (templated problems), pretrain (base-model warm
start), gen-data (preference-pair bootstrap), train (weighted DPO),
eval (two-stage or majority-vote scoring), infer (single-question
demo). Every file-writing run drops resolved-config.json with the tool
version and the fully merged configuration next to its outputs, and
refuses to overwrite existing outputs unless --force is given.
Configuration precedence: built-in defaults, then the --config file,
then explicit flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import __version__
from .backend import Generator, LocalGenerator, MockGenerator, RemoteGenerator, SamplingParams
from .datagen import (
    DatagenConfig,
    generate_dataset,
    generate_synthetic_problems,
    load_pairs,
    load_problems,
    save_pairs,
    save_problems,
    save_traces,
)
from .errors import FbdpoError
from .evaluation import EvalConfig, evaluate, format_report_table, record_to_row, two_stage_infer
from .extraction import NoAnswerFound, extract_answer
from .jsonio import write_json, write_jsonl
from .policy import ModelConfig, init_checkpoint, load_checkpoint, pretrain_base, save_checkpoint
from .prompting import load_templates
from .trainer import TrainConfig, steplog_to_csv, train

PAPER_PROFILE = {
    "beta": 0.1,
    "learning_rate": 1e-5,
    "warmup_ratio": 0.05,
    "weight_decay": 0.01,
    "micro_batch": 1,
    "accumulation": 16,
    "epochs": 1,
}


class CliError(FbdpoError):
    """Runtime failure surfaced to the user with exit code 1."""


# ---------------------------------------------------------------------------
# configuration plumbing


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CliError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        tree = yaml.safe_load(text)
    else:
        tree = json.loads(text)
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise CliError(f"config file must hold a mapping at top level: {path}")
    return tree


class Resolver:
    """defaults < config file < explicit flag, queried one key at a time."""

    def __init__(self, tree: dict):
        self.tree = tree

    def value(self, flag: Any, path: str, default: Any) -> Any:
        if flag is not None:
            return flag
        node: Any = self.tree
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node


def make_resolver(args: argparse.Namespace) -> Resolver:
    tree = load_config_file(args.config) if getattr(args, "config", None) else {}
    return Resolver(tree)


def prepare_out_dir(out: str, filenames: Sequence[str], force: bool) -> Path:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not force:
        existing = [name for name in filenames if (out_dir / name).exists()]
        if existing:
            raise CliError(
                f"refusing to overwrite {', '.join(existing)} in {out_dir} (use --force)")
    return out_dir


def write_resolved_config(out_dir: Path, command: str, resolved: dict) -> None:
    write_json(out_dir / "resolved-config.json", {
        "tool_version": __version__,
        "command": command,
        "resolved": resolved,
    })


def resolve_sampling(args: argparse.Namespace, res: Resolver, stage: str) -> SamplingParams:
    if stage == "forward":
        temperature = res.value(getattr(args, "temp_forward", None),
                                "sampling.forward_temperature", 0.7)
    else:
        temperature = res.value(getattr(args, "temp_backward", None),
                                "sampling.backward_temperature", 0.3)
    return SamplingParams(
        temperature=float(temperature),
        top_p=float(res.value(getattr(args, "top_p", None), "sampling.top_p", 0.9)),
        max_new_tokens=int(res.value(getattr(args, "max_new_tokens", None),
                                     "sampling.max_new_tokens", 512)),
        seed=0,
    )


def resolve_model_config(args: argparse.Namespace, res: Resolver) -> ModelConfig:
    targets_flag = getattr(args, "lora_targets", None)
    if targets_flag is not None:
        targets = tuple(t.strip() for t in targets_flag.split(",") if t.strip())
    else:
        targets = tuple(res.value(None, "model.lora_targets", ("Wq", "Wk", "Wv", "Wo")))
    return ModelConfig(
        context_len=int(res.value(getattr(args, "context_len", None), "model.context_len", 256)),
        d_model=int(res.value(getattr(args, "d_model", None), "model.d_model", 64)),
        n_heads=int(res.value(getattr(args, "n_heads", None), "model.n_heads", 4)),
        n_layers=int(res.value(getattr(args, "n_layers", None), "model.n_layers", 2)),
        lora_rank=int(res.value(getattr(args, "lora_rank", None), "model.lora_rank", 16)),
        lora_alpha=float(res.value(getattr(args, "lora_alpha", None), "model.lora_alpha", 32.0)),
        lora_dropout=float(res.value(getattr(args, "lora_dropout", None),
                                     "model.lora_dropout", 0.05)),
        lora_targets=targets,
    )


def resolve_templates(args: argparse.Namespace, res: Resolver):
    forward = res.value(getattr(args, "forward_template", None), "templates.forward_file", None)
    backward = res.value(getattr(args, "backward_template", None), "templates.backward_file", None)
    return load_templates(forward, backward)


def build_generator(args: argparse.Namespace, res: Resolver) -> tuple[Generator, dict]:
    kind = res.value(getattr(args, "backend", None), "backend.kind", "mock")
    if kind == "mock":
        script = res.value(getattr(args, "mock_script", None), "backend.script", None)
        if script is None:
            raise CliError("mock backend needs --mock-script")
        if not Path(script).exists():
            raise CliError(f"mock script not found: {script}")
        return MockGenerator.from_file(script), {"kind": "mock", "script": str(script)}
    if kind == "remote":
        endpoint = res.value(getattr(args, "endpoint", None), "backend.endpoint", None)
        model_name = res.value(getattr(args, "model_name", None), "backend.model_name", None)
        if endpoint is None or model_name is None:
            raise CliError("remote backend needs --endpoint and --model-name")
        return (RemoteGenerator(endpoint=endpoint, model_name=model_name),
                {"kind": "remote", "endpoint": endpoint, "model_name": model_name})
    if kind == "local":
        ckpt_path = res.value(getattr(args, "checkpoint", None), "backend.checkpoint", None)
        if ckpt_path is None:
            raise CliError("local backend needs --checkpoint")
        if not Path(ckpt_path).exists():
            raise CliError(f"checkpoint not found: {ckpt_path}")
        checkpoint = load_checkpoint(ckpt_path)
        model = checkpoint.build()
        from .policy import ByteTokenizer

        return (LocalGenerator(model, ByteTokenizer()),
                {"kind": "local", "checkpoint": str(ckpt_path)})
    raise CliError(f"unknown backend kind {kind!r}")


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} not found: {p}")
    return p


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args: argparse.Namespace) -> int:
    res = make_resolver(args)
    count = int(res.value(args.count, "synth.count", 100))
    if count < 1:
        raise UsageError("--count must be at least 1")
    seed = int(res.value(args.seed, "seed", 0))
    difficulty = res.value(args.difficulty, "synth.difficulty", "one_step")
    if difficulty not in ("one_step", "two_step"):
        raise UsageError(f"unknown difficulty {difficulty!r}")
    problems = generate_synthetic_problems(count, seed, difficulty)
    out_dir = prepare_out_dir(args.out, ["problems.jsonl"], args.force)
    save_problems(out_dir / "problems.jsonl", problems)
    write_resolved_config(out_dir, "synth",
                          {"count": count, "seed": seed, "difficulty": difficulty})
    print(f"wrote {len(problems)} problems to {out_dir / 'problems.jsonl'}")
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    res = make_resolver(args)
    problems = load_problems(_require_file(args.problems, "problems file"))
    seed = int(res.value(args.seed, "seed", 0))
    steps = int(res.value(args.steps, "pretrain.steps", 300))
    lr = float(res.value(args.lr, "pretrain.learning_rate", 3e-3))
    batch_size = int(res.value(args.batch_size, "pretrain.batch_size", 8))
    model_config = resolve_model_config(args, res)
    corpus = [f"Problem: {p.question}\nAnswer: {p.gold_answer:g}" for p in problems]
    out_dir = prepare_out_dir(args.out, ["checkpoint.bin", "pretrain_log.csv"], args.force)
    checkpoint = pretrain_base(model_config, corpus, steps=steps, lr=lr,
                               seed=seed, batch_size=batch_size)
    save_checkpoint(checkpoint, out_dir / "checkpoint.bin")
    losses = checkpoint.metadata["pretrain"]["loss"]
    lines = ["step,loss"] + [f"{i},{loss:.10g}" for i, loss in enumerate(losses)]
    (out_dir / "pretrain_log.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_resolved_config(out_dir, "pretrain", {
        "problems": str(args.problems), "steps": steps, "learning_rate": lr,
        "batch_size": batch_size, "seed": seed, "model": model_config.to_dict(),
    })
    if losses:
        print(f"pretrained {steps} steps, loss {losses[0]:.4f} -> {losses[-1]:.4f}")
    print(f"wrote {out_dir / 'checkpoint.bin'}")
    return 0


def cmd_gen_data(args: argparse.Namespace) -> int:
    res = make_resolver(args)
    problems = load_problems(_require_file(args.problems, "problems file"))
    generator, backend_info = build_generator(args, res)
    seed = int(res.value(args.seed, "seed", 0))
    config = DatagenConfig(
        seed=seed,
        max_attempts=int(res.value(args.max_attempts, "datagen.max_attempts", 5)),
        backward_budget=int(res.value(args.backward_budget, "datagen.backward_budget", 3)),
        pair_cap=int(res.value(args.pair_cap, "datagen.pair_cap", 1)),
        base_weight=float(res.value(args.base_weight, "datagen.base_weight", 1.0)),
        concurrency=int(res.value(args.concurrency, "concurrency", 4)),
        forward_params=resolve_sampling(args, res, "forward"),
        backward_params=resolve_sampling(args, res, "backward"),
        templates=resolve_templates(args, res),
    )
    out_dir = prepare_out_dir(args.out, ["traces.jsonl", "pairs.jsonl", "summary.json"],
                              args.force)
    traces, pairs, stats = generate_dataset(problems, generator, config)
    save_traces(out_dir / "traces.jsonl", traces)
    save_pairs(out_dir / "pairs.jsonl", pairs)
    write_json(out_dir / "summary.json", stats.to_dict())
    write_resolved_config(out_dir, "gen-data", {
        "problems": str(args.problems),
        "backend": backend_info,
        "seed": seed,
        "max_attempts": config.max_attempts,
        "backward_budget": config.backward_budget,
        "pair_cap": config.pair_cap,
        "base_weight": config.base_weight,
        "boost": config.boost,
        "concurrency": config.concurrency,
        "forward_sampling": vars(config.forward_params),
        "backward_sampling": vars(config.backward_params),
    })
    for label, value in [
        ("problems", stats.n_problems),
        ("forward traces", stats.n_forward_traces),
        ("backward traces", stats.n_backward_traces),
        ("forward pairs", stats.n_forward_pairs),
        ("backward pairs", stats.n_backward_pairs),
        ("boosted pairs", stats.n_boosted),
        ("synthesized pairs", stats.n_synthesized),
        ("skipped (no verdict)", stats.n_skipped_no_verdict),
    ]:
        print(f"{label:<22}{value}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    res = make_resolver(args)
    pairs = load_pairs(_require_file(args.pairs, "pairs file"))

    profile = dict(PAPER_PROFILE) if args.paper_profile else {}
    if args.paper_profile:
        print("note: applying the published full-scale training profile; "
              "its values target an 8-billion-parameter model, not the desk-scale one",
              file=sys.stderr)

    def train_value(flag: Any, key: str, default: Any) -> Any:
        # precedence: defaults < config file < profile < explicit flag
        if flag is not None:
            return flag
        if key in profile:
            return profile[key]
        return res.value(None, f"train.{key}", default)

    if args.preset == "forward-only":
        preset_wf, preset_wb = 1.0, 0.0
    elif args.preset == "backward-only":
        preset_wf, preset_wb = 0.0, 1.0
    else:
        preset_wf = preset_wb = None
    w_f = float(res.value(args.wf if args.wf is not None else preset_wf, "train.w_f", 1.0))
    w_b = float(res.value(args.wb if args.wb is not None else preset_wb, "train.w_b", 1.0))
    if w_f == 0 and w_b == 0:
        raise UsageError("both direction weights are zero; nothing would train")
    normalize = not args.unnormalized_weights if args.unnormalized_weights else bool(
        res.value(None, "train.normalize_weights", True))
    config = TrainConfig(
        beta=float(train_value(args.beta, "beta", 0.1)),
        learning_rate=float(train_value(args.lr, "learning_rate", 3e-4)),
        warmup_ratio=float(train_value(args.warmup_ratio, "warmup_ratio", 0.05)),
        weight_decay=float(train_value(args.weight_decay, "weight_decay", 0.01)),
        micro_batch=int(train_value(args.micro_batch, "micro_batch", 1)),
        accumulation=int(train_value(args.accumulation, "accumulation", 16)),
        epochs=int(train_value(args.epochs, "epochs", 1)),
        w_f=w_f,
        w_b=w_b,
        seed=int(res.value(args.seed, "seed", 0)),
        normalize_weights=normalize,
    )
    if args.checkpoint_in:
        checkpoint = load_checkpoint(_require_file(args.checkpoint_in, "input checkpoint"))
    else:
        model_config = resolve_model_config(args, res)
        checkpoint = init_checkpoint(model_config, seed=config.seed)
        print("note: no input checkpoint given; training from a fresh initialization",
              file=sys.stderr)
    out_dir = prepare_out_dir(args.out, ["checkpoint.bin", "train_log.csv", "training.png"],
                              args.force)
    trained, logs = train(checkpoint, pairs, config)
    save_checkpoint(trained, out_dir / "checkpoint.bin")
    (out_dir / "train_log.csv").write_text(steplog_to_csv(logs), encoding="utf-8")
    if logs:
        from .report import render_training_figure

        render_training_figure(logs, out_dir / "training.png")
    write_resolved_config(out_dir, "train", {
        "pairs": str(args.pairs),
        "checkpoint_in": str(args.checkpoint_in) if args.checkpoint_in else None,
        "paper_profile": bool(args.paper_profile),
        "preset": args.preset,
        "model": trained.config.to_dict(),
        "train": {
            "beta": config.beta, "learning_rate": config.learning_rate,
            "warmup_ratio": config.warmup_ratio, "weight_decay": config.weight_decay,
            "micro_batch": config.micro_batch, "accumulation": config.accumulation,
            "epochs": config.epochs, "w_f": config.w_f, "w_b": config.w_b,
            "seed": config.seed, "normalize_weights": config.normalize_weights,
        },
    })
    if logs:
        print(f"{len(logs)} optimizer steps, loss {logs[0].loss:.4f} -> {logs[-1].loss:.4f}, "
              f"final margin {logs[-1].mean_reward_margin:.4f}")
    else:
        print("no active pairs; checkpoint passed through unchanged")
    print(f"wrote {out_dir / 'checkpoint.bin'}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    res = make_resolver(args)
    problems = load_problems(_require_file(args.problems, "problems file"))
    generator, backend_info = build_generator(args, res)
    mode = res.value(args.mode, "eval.mode", "two-stage").replace("-", "_")
    k = res.value(args.k, "eval.k", 5)
    limit = res.value(args.limit, "eval.sample_limit", None)
    if k is not None and int(k) < 1:
        raise UsageError("--k must be at least 1")
    if limit is not None and int(limit) < 1:
        raise UsageError("--limit must be at least 1")
    policy_flag = args.no_verdict_policy.replace("-", "_") if args.no_verdict_policy else None
    config = EvalConfig(
        mode=mode,
        k=int(k),
        seed=int(res.value(args.seed, "seed", 0)),
        sample_limit=int(limit) if limit is not None else None,
        concurrency=int(res.value(args.concurrency, "concurrency", 4)),
        no_verdict_policy=res.value(policy_flag, "eval.no_verdict_policy", "exclude"),
        forward_params=resolve_sampling(args, res, "forward"),
        backward_params=resolve_sampling(args, res, "backward"),
        templates=resolve_templates(args, res),
    )
    out_dir = prepare_out_dir(args.out, ["records.jsonl", "report.json", "metrics.png"],
                              args.force)
    run = evaluate(problems, generator, config)
    write_jsonl(out_dir / "records.jsonl", (record_to_row(r) for r in run.records))
    write_json(out_dir / "report.json", {
        "metrics": run.report.to_dict(),
        "mode": config.mode,
        "k": config.k if config.mode == "self_consistency" else None,
        "no_verdict_policy": config.no_verdict_policy,
        "n_generation_failures": run.n_generation_failures,
        "sample_limit": config.sample_limit,
    })
    from .report import render_metric_figure

    render_metric_figure(run.report, out_dir / "metrics.png")
    write_resolved_config(out_dir, "eval", {
        "problems": str(args.problems),
        "backend": backend_info,
        "mode": config.mode,
        "k": config.k,
        "seed": config.seed,
        "sample_limit": config.sample_limit,
        "concurrency": config.concurrency,
        "no_verdict_policy": config.no_verdict_policy,
        "forward_sampling": vars(config.forward_params),
        "backward_sampling": vars(config.backward_params),
    })
    print(format_report_table(run.report))
    if run.n_generation_failures:
        print(f"generation failures    {run.n_generation_failures}")
    print(f"wrote {out_dir / 'records.jsonl'}, report.json, metrics.png")
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    res = make_resolver(args)
    generator, _ = build_generator(args, res)
    from .datagen import Problem

    problem = Problem(id="adhoc", question=args.question, gold_answer=0.0)
    config = EvalConfig(
        mode="two_stage",
        seed=int(res.value(args.seed, "seed", 0)),
        forward_params=resolve_sampling(args, res, "forward"),
        backward_params=resolve_sampling(args, res, "backward"),
        templates=resolve_templates(args, res),
    )
    result = two_stage_infer(problem, generator, config)
    print("=== solution ===")
    print(result.forward_completion)
    try:
        answer = extract_answer(result.forward_completion).value
        print(f"answer: {answer:g}")
    except NoAnswerFound:
        print("answer: none (no parseable answer in the completion)")
        return 0
    print("=== verification ===")
    print(result.backward_completion)
    verdict = result.record.verdict
    print(f"verdict: {verdict.value if verdict is not None else 'none'}")
    return 0


class UsageError(Exception):
    """Invalid flag combination detected after parsing."""


# ---------------------------------------------------------------------------
# parser


def _add_common(parser: argparse.ArgumentParser, with_out: bool = True) -> None:
    parser.add_argument("--config", help="YAML or JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="base random seed")
    if with_out:
        parser.add_argument("--out", required=True, help="output directory")
        parser.add_argument("--force", action="store_true",
                            help="overwrite existing outputs")


def _add_backend(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=["mock", "remote", "local"], default=None,
                        help="generation backend (default mock)")
    parser.add_argument("--mock-script", default=None, help="scripted responses JSON")
    parser.add_argument("--endpoint", default=None, help="remote API base URL")
    parser.add_argument("--model-name", default=None, help="remote model identifier")
    parser.add_argument("--checkpoint", default=None, help="local policy checkpoint")
    parser.add_argument("--concurrency", type=int, default=None,
                        help="worker pool width (default 4)")
    parser.add_argument("--temp-forward", type=float, default=None,
                        help="solution sampling temperature (default 0.7)")
    parser.add_argument("--temp-backward", type=float, default=None,
                        help="verification sampling temperature (default 0.3)")
    parser.add_argument("--top-p", type=float, default=None,
                        help="nucleus mass (default 0.9)")
    parser.add_argument("--max-new-tokens", type=int, default=None,
                        help="completion length cap (default 512)")
    parser.add_argument("--forward-template", default=None,
                        help="override file for the solution prompt template")
    parser.add_argument("--backward-template", default=None,
                        help="override file for the verification prompt template")


def _add_model(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--context-len", type=int, default=None)
    parser.add_argument("--d-model", type=int, default=None)
    parser.add_argument("--n-heads", type=int, default=None)
    parser.add_argument("--n-layers", type=int, default=None)
    parser.add_argument("--lora-rank", type=int, default=None)
    parser.add_argument("--lora-alpha", type=float, default=None)
    parser.add_argument("--lora-dropout", type=float, default=None)
    parser.add_argument("--lora-targets", default=None,
                        help="comma-separated subset of Wq,Wk,Wv,Wo")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbdpo",
        description="Forward/backward reasoning preference pipeline: "
                    "data generation, weighted preference training, and "
                    "verification-calibrated evaluation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate templated arithmetic problems")
    _add_common(p)
    p.add_argument("--count", type=int, default=None, help="number of problems (default 100)")
    p.add_argument("--difficulty", choices=["one_step", "two_step"], default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="warm-start the base model on a problems file")
    _add_common(p)
    _add_model(p)
    p.add_argument("--problems", required=True, help="problems JSONL for the corpus")
    p.add_argument("--steps", type=int, default=None, help="optimizer steps (default 300)")
    p.add_argument("--lr", type=float, default=None, help="learning rate (default 3e-3)")
    p.add_argument("--batch-size", type=int, default=None, help="window batch (default 8)")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("gen-data", help="bootstrap preference pairs from a problems file")
    _add_common(p)
    _add_backend(p)
    p.add_argument("--problems", required=True, help="problems JSONL")
    p.add_argument("--max-attempts", type=int, default=None,
                   help="forward attempts per problem (default 5)")
    p.add_argument("--backward-budget", type=int, default=None,
                   help="verification draws per candidate (default 3)")
    p.add_argument("--pair-cap", type=int, default=None,
                   help="forward pairs per problem (default 1)")
    p.add_argument("--base-weight", type=float, default=None,
                   help="base pair weight before boosting (default 1.0)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="weighted preference optimization over a pairs file")
    _add_common(p)
    _add_model(p)
    p.add_argument("--pairs", required=True, help="pairs JSONL")
    p.add_argument("--checkpoint-in", default=None, help="starting checkpoint")
    p.add_argument("--preset", choices=["forward-only", "backward-only"], default=None,
                   help="direction-weight preset")
    p.add_argument("--paper-profile", action="store_true",
                   help="apply the published full-scale hyperparameter profile")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lr", type=float, default=None, dest="lr")
    p.add_argument("--warmup-ratio", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--micro-batch", type=int, default=None)
    p.add_argument("--accumulation", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--wf", type=float, default=None, help="solution-direction weight")
    p.add_argument("--wb", type=float, default=None, help="verification-direction weight")
    p.add_argument("--unnormalized-weights", action="store_true",
                   help="optimize the plain weighted sum instead of the weighted mean")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run inference over problems and score calibration")
    _add_common(p)
    _add_backend(p)
    p.add_argument("--problems", required=True, help="problems JSONL")
    p.add_argument("--mode", choices=["two-stage", "self-consistency"], default=None)
    p.add_argument("--k", type=int, default=None, help="samples per problem for voting")
    p.add_argument("--limit", type=int, default=None, help="evaluate only the first N problems")
    p.add_argument("--no-verdict-policy", choices=["exclude", "count-as-pass"], default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="answer and verify one question")
    _add_common(p, with_out=False)
    _add_backend(p)
    p.add_argument("--question", required=True, help="question text")
    p.set_defaults(func=cmd_infer)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with code 2
        return 2  # unreachable; keeps type checkers happy
    except FbdpoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
