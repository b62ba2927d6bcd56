from __future__ import annotations

import json
import threading

import pytest
import requests

from fbdpo.backend import (
    AuthError,
    MalformedResponse,
    MockGenerator,
    RemoteGenerator,
    SamplingParams,
    ScriptExhausted,
    TransportError,
    prompt_key,
)

PARAMS = SamplingParams(temperature=0.7)


class TestSamplingParams:
    def test_defaults(self) -> None:
        p = SamplingParams(temperature=0.7)
        assert p.top_p == 0.9
        assert p.max_new_tokens == 512
        assert p.seed == 0

    @pytest.mark.parametrize("kwargs", [
        {"temperature": -0.1},
        {"temperature": 0.7, "top_p": 0.0},
        {"temperature": 0.7, "top_p": 1.5},
        {"temperature": 0.7, "max_new_tokens": 0},
        {"temperature": 0.7, "seed": -1},
    ])
    def test_validation(self, kwargs: dict) -> None:
        with pytest.raises(ValueError):
            SamplingParams(**kwargs)


class TestMockGenerator:
    def test_completions_consumed_in_order(self) -> None:
        gen = MockGenerator({"q": ["first", "second"]})
        assert gen.generate("q", PARAMS) == "first"
        assert gen.generate("q", PARAMS) == "second"

    def test_exhaustion_raises(self) -> None:
        gen = MockGenerator({"q": ["only"]})
        gen.generate("q", PARAMS)
        with pytest.raises(ScriptExhausted):
            gen.generate("q", PARAMS)

    def test_unknown_prompt_raises(self) -> None:
        gen = MockGenerator({"q": ["x"]})
        with pytest.raises(ScriptExhausted):
            gen.generate("unscripted", PARAMS)

    def test_cursors_are_per_prompt(self) -> None:
        gen = MockGenerator({"a": ["a0", "a1"], "b": ["b0"]})
        assert gen.generate("a", PARAMS) == "a0"
        assert gen.generate("b", PARAMS) == "b0"
        assert gen.generate("a", PARAMS) == "a1"

    def test_hashed_keys_accepted(self) -> None:
        gen = MockGenerator({prompt_key("long prompt text"): ["reply"]})
        assert gen.generate("long prompt text", PARAMS) == "reply"

    def test_from_file(self, tmp_path) -> None:
        path = tmp_path / "script.json"
        path.write_text(json.dumps({"responses": [
            {"prompt": "p1", "completions": ["c1", "c2"]},
            {"prompt_key": prompt_key("p2"), "completions": ["c3"]},
        ]}), encoding="utf-8")
        gen = MockGenerator.from_file(path)
        assert gen.generate("p1", PARAMS) == "c1"
        assert gen.generate("p2", PARAMS) == "c3"

    def test_thread_safety_each_completion_served_once(self) -> None:
        n = 32
        gen = MockGenerator({"q": [f"c{i}" for i in range(n)]})
        seen: list[str] = []
        lock = threading.Lock()

        def worker() -> None:
            out = gen.generate("q", PARAMS)
            with lock:
                seen.append(out)

        threads = [threading.Thread(target=worker) for _ in range(n)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(seen) == sorted(f"c{i}" for i in range(n))


class FakeResponse:
    def __init__(self, status_code: int, body: dict | None = None):
        self.status_code = status_code
        self._body = body or {}
        self.text = json.dumps(self._body)

    def json(self) -> dict:
        return self._body


class FakeSession:
    """Records post() calls and plays back a queue of responses."""

    def __init__(self, outcomes: list):
        self.outcomes = list(outcomes)
        self.calls: list[dict] = []

    def post(self, url: str, json: dict, headers: dict, timeout: float):
        self.calls.append({"url": url, "json": json, "headers": headers})
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def ok_body(text: str) -> dict:
    return {"choices": [{"message": {"content": text}}]}


def make_remote(session: FakeSession, **kwargs) -> tuple[RemoteGenerator, list[float]]:
    sleeps: list[float] = []
    gen = RemoteGenerator(endpoint="https://api.test", model_name="m",
                          session=session, sleep=sleeps.append, **kwargs)
    return gen, sleeps


class TestRemoteGenerator:
    def test_success_path_and_payload(self, monkeypatch) -> None:
        monkeypatch.setenv("FBDPO_API_KEY", "sk-test")
        session = FakeSession([FakeResponse(200, ok_body("hello"))])
        gen, _ = make_remote(session)
        out = gen.generate("the prompt", SamplingParams(temperature=0.7, top_p=0.8,
                                                        max_new_tokens=64, seed=3))
        assert out == "hello"
        call = session.calls[0]
        assert call["url"] == "https://api.test/v1/chat/completions"
        assert call["headers"]["Authorization"] == "Bearer sk-test"
        payload = call["json"]
        assert payload["model"] == "m"
        assert payload["messages"] == [{"role": "user", "content": "the prompt"}]
        assert payload["temperature"] == 0.7
        assert payload["top_p"] == 0.8
        assert payload["max_tokens"] == 64
        assert payload["seed"] == 3

    def test_greedy_omits_top_p(self, monkeypatch) -> None:
        monkeypatch.delenv("FBDPO_API_KEY", raising=False)
        monkeypatch.delenv("OPENAI_API_KEY", raising=False)
        session = FakeSession([FakeResponse(200, ok_body("x"))])
        gen, _ = make_remote(session)
        gen.generate("p", SamplingParams(temperature=0.0))
        payload = session.calls[0]["json"]
        assert "top_p" not in payload
        assert "Authorization" not in session.calls[0]["headers"]

    def test_retry_on_server_error_with_backoff(self) -> None:
        session = FakeSession([
            FakeResponse(500),
            FakeResponse(429),
            FakeResponse(200, ok_body("done")),
        ])
        gen, sleeps = make_remote(session, backoff_base=0.5)
        assert gen.generate("p", PARAMS) == "done"
        assert sleeps == [0.5, 1.0]

    def test_exhausted_retries_raise_transport_error(self) -> None:
        session = FakeSession([FakeResponse(503)] * 3)
        gen, sleeps = make_remote(session, max_attempts=3, backoff_base=0.1)
        with pytest.raises(TransportError):
            gen.generate("p", PARAMS)
        assert len(session.calls) == 3
        assert sleeps == [0.1, 0.2]

    def test_connection_errors_retried(self) -> None:
        session = FakeSession([
            requests.ConnectionError("down"),
            FakeResponse(200, ok_body("up")),
        ])
        gen, _ = make_remote(session)
        assert gen.generate("p", PARAMS) == "up"

    def test_auth_error_not_retried(self) -> None:
        session = FakeSession([FakeResponse(401)])
        gen, sleeps = make_remote(session)
        with pytest.raises(AuthError):
            gen.generate("p", PARAMS)
        assert len(session.calls) == 1
        assert sleeps == []

    def test_malformed_body_raises(self) -> None:
        session = FakeSession([FakeResponse(200, {"choices": []})])
        gen, _ = make_remote(session)
        with pytest.raises(MalformedResponse):
            gen.generate("p", PARAMS)

    def test_client_error_not_retried(self) -> None:
        session = FakeSession([FakeResponse(400, {"error": "bad request"})])
        gen, _ = make_remote(session)
        with pytest.raises(TransportError):
            gen.generate("p", PARAMS)
        assert len(session.calls) == 1


class TestLocalGenerator:
    def test_generates_text_from_policy(self, tiny_model) -> None:
        from fbdpo.backend import LocalGenerator
        from fbdpo.policy import ByteTokenizer

        gen = LocalGenerator(tiny_model, ByteTokenizer())
        out = gen.generate("ab", SamplingParams(temperature=0.0, max_new_tokens=4))
        assert isinstance(out, str)
        out2 = gen.generate("ab", SamplingParams(temperature=0.0, max_new_tokens=4))
        assert out == out2
