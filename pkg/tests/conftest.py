from __future__ import annotations

import pytest

from fbdpo.backend import MockGenerator
from fbdpo.datagen import PreferencePair, Problem, pair_from_record
from fbdpo.fixtures import load_fixture_suite
from fbdpo.policy import ModelConfig, build_model, init_checkpoint


def problems_from_rows(rows: list[dict]) -> list[Problem]:
    return [Problem(id=r["id"], question=r["question"], gold_answer=float(r["answer"]))
            for r in rows]


def script_to_mapping(script: dict) -> dict[str, list[str]]:
    return {entry["prompt"]: list(entry["completions"]) for entry in script["responses"]}


@pytest.fixture(scope="session")
def gen_data_scenario() -> tuple[list[Problem], dict[str, list[str]]]:
    case = {c.name: c for c in load_fixture_suite("mock-scripts")}["gen-data"]
    return problems_from_rows(case.input["problems"]), script_to_mapping(case.input["script"])


@pytest.fixture(scope="session")
def eval_scenario() -> tuple[list[Problem], dict[str, list[str]]]:
    case = {c.name: c for c in load_fixture_suite("mock-scripts")}["eval"]
    return problems_from_rows(case.input["problems"]), script_to_mapping(case.input["script"])


@pytest.fixture()
def gen_data_mock(gen_data_scenario) -> MockGenerator:
    _, script = gen_data_scenario
    return MockGenerator(dict(script))


@pytest.fixture()
def eval_mock(eval_scenario) -> MockGenerator:
    _, script = eval_scenario
    return MockGenerator(dict(script))


@pytest.fixture(scope="session")
def separable_pairs() -> list[PreferencePair]:
    return [pair_from_record(c.input) for c in load_fixture_suite("separable-dpo")]


@pytest.fixture(scope="session")
def mixed_pairs() -> list[PreferencePair]:
    return [pair_from_record(c.input) for c in load_fixture_suite("mixed-pairs")]


@pytest.fixture(scope="session")
def tiny_config() -> ModelConfig:
    # small enough for subsecond forward passes, dropout off for determinism
    return ModelConfig(context_len=64, d_model=16, n_heads=2, n_layers=1,
                       lora_rank=2, lora_alpha=4.0, lora_dropout=0.0)


@pytest.fixture()
def tiny_model(tiny_config):
    return build_model(tiny_config, seed=5)


@pytest.fixture()
def tiny_checkpoint(tiny_config):
    return init_checkpoint(tiny_config, seed=5)
