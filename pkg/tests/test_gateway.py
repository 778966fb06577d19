from __future__ import annotations

import hashlib
import json
import math
import os
import stat

import httpx
import numpy as np
import pytest

from labelloop.errors import (
    BackendError,
    CapabilityError,
    ConfigError,
    TrainingError,
)
from labelloop.gateway import (
    BackendDescriptor,
    CommandTrainer,
    DecodeParams,
    EmbeddingVector,
    GenerationResult,
    HttpTrainer,
    MockBackend,
    NoOpTrainer,
    RemoteBackend,
    build_backend,
    embed,
    fine_tune,
    generate,
    stable_hash,
)
from labelloop.pool import Instance


class TestStableHash:
    def test_matches_sha256_prefix(self):
        joined = "\x1f".join(["select", "7", "3"])
        digest = hashlib.sha256(joined.encode("utf-8")).digest()
        assert stable_hash("select", 7, 3) == int.from_bytes(digest[:8], "big")

    def test_part_boundaries_matter(self):
        assert stable_hash("ab", "c") != stable_hash("a", "bc")

    def test_repeatable(self):
        assert stable_hash("x", 1, 2.5) == stable_hash("x", 1, 2.5)


class TestDecodeParams:
    def test_defaults_valid(self):
        DecodeParams().validate()

    @pytest.mark.parametrize(
        "kwargs,field",
        [
            ({"temperature": -0.1}, "decode.temperature"),
            ({"top_p": 0.0}, "decode.top_p"),
            ({"top_p": 1.5}, "decode.top_p"),
            ({"max_tokens": 0}, "decode.max_tokens"),
            ({"num_samples": 0}, "decode.num_samples"),
            ({"num_samples": 3, "temperature": 0.0}, "decode.num_samples"),
        ],
    )
    def test_rejections(self, kwargs, field):
        with pytest.raises(ConfigError) as exc:
            DecodeParams(**kwargs).validate()
        assert exc.value.field_errors[0]["field"] == field

    def test_multi_sample_needs_heat(self):
        DecodeParams(num_samples=3, temperature=0.8).validate()


class TestGenerationResultValidate:
    def test_length_mismatch(self):
        bad = GenerationResult(text="a", tokens=["a"], token_logprobs=[])
        with pytest.raises(BackendError):
            bad.validate()

    def test_positive_logprob(self):
        bad = GenerationResult(text="a", tokens=["a"], token_logprobs=[0.2])
        with pytest.raises(BackendError):
            bad.validate()

    def test_alternative_mass_overflow(self):
        bad = GenerationResult(
            text="a",
            tokens=["a"],
            token_logprobs=[-0.1],
            top_alternatives=[[("a", -0.01), ("b", -0.02)]],
        )
        with pytest.raises(BackendError):
            bad.validate()

    def test_ok(self):
        GenerationResult(
            text="a b",
            tokens=["a", "b"],
            token_logprobs=[-0.5, 0.0],
            top_alternatives=[[("a", math.log(0.6)), ("c", math.log(0.3))], []],
        ).validate()


class TestBackendDescriptor:
    def test_unknown_kind(self):
        with pytest.raises(ConfigError) as exc:
            BackendDescriptor(kind="llama.cpp").validate()
        assert exc.value.field_errors[0]["field"] == "model.backend"

    def test_remote_requires_base_url(self):
        with pytest.raises(ConfigError) as exc:
            BackendDescriptor(kind="remote-openai-compatible").validate()
        assert exc.value.field_errors[0]["field"] == "model.base_url"


class TestMockBackend:
    def test_token_logprob_formula(self):
        backend = MockBackend(seed=11)
        token = "ruler"
        expected = -((stable_hash(token, 11) % 1000) / 1000 + 0.05)
        assert backend.token_logprob(token) == expected
        assert -1.05 <= backend.token_logprob(token) <= -0.05

    def test_generation_deterministic(self):
        decode = DecodeParams(max_tokens=8, logprobs_k=5)
        a = MockBackend(seed=3).generate("m", "what is up", decode)
        b = MockBackend(seed=3).generate("m", "what is up", decode)
        assert a[0].text == b[0].text
        assert a[0].token_logprobs == b[0].token_logprobs
        assert a[0].top_alternatives == b[0].top_alternatives

    def test_seed_changes_output(self):
        decode = DecodeParams(max_tokens=8)
        a = MockBackend(seed=3).generate("m", "what is up", decode)
        b = MockBackend(seed=4).generate("m", "what is up", decode)
        assert a[0].text != b[0].text

    def test_samples_differ_and_validate(self):
        decode = DecodeParams(temperature=1.0, num_samples=4, max_tokens=10,
                              logprobs_k=3)
        results = generate(MockBackend(seed=0), "m", "tell me something", decode)
        assert len(results) == 4
        assert len({r.text for r in results}) > 1
        assert results[0].usage.input_tokens == 3
        assert all(r.usage.input_tokens == 0 for r in results[1:])

    def test_no_alternatives_without_logprobs_k(self):
        results = MockBackend().generate("m", "hi there", DecodeParams())
        assert results[0].top_alternatives == []

    def test_call_counters(self):
        backend = MockBackend()
        backend.generate("m", "a", DecodeParams())
        backend.generate("m", "b", DecodeParams())
        backend.embed(["a"])
        assert backend.generate_calls == 2
        assert backend.embed_calls == 1

    def test_embeddings_unit_norm_and_deterministic(self):
        backend = MockBackend(seed=5, embed_dim=24)
        first = backend.embed(["alpha", "beta"])
        second = backend.embed(["alpha", "beta"])
        for vec in first:
            assert vec.values.shape == (24,)
            assert abs(np.linalg.norm(vec.values) - 1.0) < 1e-9
        assert np.array_equal(first[0].values, second[0].values)
        assert not np.array_equal(first[0].values, first[1].values)

    def test_embedding_override_is_normalized(self):
        backend = MockBackend(
            embedding_overrides={"pinned": np.array([3.0, 4.0])}
        )
        vec = backend.embed(["pinned"])[0]
        assert np.allclose(vec.values, [0.6, 0.8])

    def test_generate_wrapper_rejects_bad_decode(self):
        with pytest.raises(ConfigError):
            generate(MockBackend(), "m", "p", DecodeParams(num_samples=2))


class TestEmbedWrapper:
    def test_empty_input(self):
        assert embed(MockBackend(), []) == []

    def test_count_mismatch(self):
        class Short:
            def embed(self, texts):
                return [EmbeddingVector(values=np.array([1.0]))]

        with pytest.raises(BackendError):
            embed(Short(), ["a", "b"])

    def test_norm_enforced(self):
        class Unnormalized:
            def embed(self, texts):
                return [EmbeddingVector(values=np.array([2.0, 0.0]))]

        with pytest.raises(BackendError):
            embed(Unnormalized(), ["a"])


def _chat_response(texts, with_logprobs=True, prompt_tokens=7):
    choices = []
    for i, text in enumerate(texts):
        choice = {"index": i, "message": {"role": "assistant", "content": text}}
        if with_logprobs:
            choice["logprobs"] = {
                "content": [
                    {
                        "token": tok,
                        "logprob": -0.3,
                        "top_logprobs": [
                            {"token": tok, "logprob": -0.3},
                            {"token": "other", "logprob": -2.0},
                        ],
                    }
                    for tok in text.split()
                ]
            }
        choices.append(choice)
    return {
        "choices": choices,
        "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": 3},
    }


def _remote(handler, **kwargs) -> RemoteBackend:
    descriptor = BackendDescriptor(
        kind="remote-openai-compatible",
        base_url="http://llm.test/v1",
        model="base",
        **kwargs,
    )
    return RemoteBackend(descriptor, transport=httpx.MockTransport(handler))


class TestRemoteBackend:
    def test_generate_parses_choices(self):
        def handler(request):
            assert request.url.path == "/v1/chat/completions"
            body = json.loads(request.content)
            assert body["model"] == "ft-1"
            assert body["logprobs"] is True
            return httpx.Response(200, json=_chat_response(["hello world"]))

        backend = _remote(handler)
        results = generate(
            backend, "ft-1", "say hi", DecodeParams(logprobs_k=2)
        )
        assert results[0].text == "hello world"
        assert results[0].tokens == ["hello", "world"]
        assert results[0].token_logprobs == [-0.3, -0.3]
        assert results[0].usage.input_tokens == 7

    def test_missing_logprobs_raises_capability_error(self):
        def handler(request):
            return httpx.Response(
                200, json=_chat_response(["hi"], with_logprobs=False)
            )

        backend = _remote(handler)
        with pytest.raises(CapabilityError):
            backend.generate("m", "p", DecodeParams(logprobs_k=5))

    def test_text_only_fallback_without_logprob_request(self):
        def handler(request):
            return httpx.Response(
                200, json=_chat_response(["two words"], with_logprobs=False)
            )

        results = _remote(handler).generate("m", "p", DecodeParams())
        assert results[0].tokens == ["two", "words"]
        assert results[0].token_logprobs == [0.0, 0.0]

    def test_retries_on_429_then_succeeds(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] < 3:
                return httpx.Response(429, text="slow down")
            return httpx.Response(200, json=_chat_response(["ok"]))

        backend = _remote(handler, max_retries=3)
        results = backend.generate("m", "p", DecodeParams(logprobs_k=1))
        assert results[0].text == "ok"
        assert calls["n"] == 3

    def test_client_error_not_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(400, text="bad request")

        backend = _remote(handler, max_retries=3)
        with pytest.raises(BackendError):
            backend.generate("m", "p", DecodeParams())
        assert calls["n"] == 1

    def test_retries_exhausted(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(503, text="down")

        backend = _remote(handler, max_retries=1)
        with pytest.raises(BackendError):
            backend.generate("m", "p", DecodeParams())
        assert calls["n"] == 2

    def test_empty_choices(self):
        def handler(request):
            return httpx.Response(200, json={"choices": [], "usage": {}})

        with pytest.raises(BackendError):
            _remote(handler).generate("m", "p", DecodeParams())

    def test_api_key_header(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_KEY", "sk-abc")
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json=_chat_response(["ok"]))

        backend = _remote(handler, api_key_env="TEST_LLM_KEY")
        backend.generate("m", "p", DecodeParams())
        assert seen["auth"] == "Bearer sk-abc"

    def test_missing_api_key_env(self, monkeypatch):
        monkeypatch.delenv("TEST_LLM_KEY", raising=False)
        with pytest.raises(ConfigError) as exc:
            _remote(lambda request: httpx.Response(200), api_key_env="TEST_LLM_KEY")
        assert exc.value.field_errors[0]["field"] == "labeller.api_key"

    def test_embeddings_sorted_and_normalized(self):
        def handler(request):
            assert request.url.path == "/v1/embeddings"
            return httpx.Response(
                200,
                json={
                    "data": [
                        {"index": 1, "embedding": [0.0, 5.0]},
                        {"index": 0, "embedding": [2.0, 0.0]},
                    ]
                },
            )

        vectors = _remote(handler).embed(["first", "second"])
        assert np.allclose(vectors[0].values, [1.0, 0.0])
        assert np.allclose(vectors[1].values, [0.0, 1.0])

    def test_embeddings_count_mismatch(self):
        def handler(request):
            return httpx.Response(
                200, json={"data": [{"index": 0, "embedding": [1.0]}]}
            )

        with pytest.raises(BackendError):
            _remote(handler).embed(["a", "b"])

    def test_zero_embedding_rejected(self):
        def handler(request):
            return httpx.Response(
                200, json={"data": [{"index": 0, "embedding": [0.0, 0.0]}]}
            )

        with pytest.raises(BackendError):
            _remote(handler).embed(["a"])


class TestBuildBackend:
    def test_mock(self):
        backend = build_backend(BackendDescriptor(kind="mock", seed=9, embed_dim=8))
        assert isinstance(backend, MockBackend)
        assert backend.seed == 9
        assert backend.embed_dim == 8

    def test_remote(self):
        backend = build_backend(
            BackendDescriptor(
                kind="remote-openai-compatible", base_url="http://x.test"
            ),
            transport=httpx.MockTransport(lambda r: httpx.Response(200)),
        )
        assert isinstance(backend, RemoteBackend)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            build_backend(BackendDescriptor(kind="nope"))


def _labeled():
    return [
        Instance(id="000000", input="q1", annotation="a1"),
        Instance(id="000001", input="q2", annotation="a2"),
    ]


class TestTrainers:
    def test_noop(self):
        assert NoOpTrainer().fine_tune("base", _labeled(), {"lr": 1e-4}) == "base"

    def test_fine_tune_rejects_unannotated(self):
        bad = [Instance(id="000000", input="q", annotation=None)]
        with pytest.raises(TrainingError):
            fine_tune(NoOpTrainer(), "base", bad, {})

    def test_command_trainer_contract(self, tmp_path):
        capture = tmp_path / "seen.json"
        script = tmp_path / "train.py"
        script.write_text(
            "#!/usr/bin/env python3\n"
            "import json, sys\n"
            "rows = [json.loads(l) for l in open(sys.argv[1])]\n"
            "hp = json.load(open(sys.argv[2]))\n"
            f"json.dump({{'rows': rows, 'hp': hp}}, open({str(capture)!r}, 'w'))\n"
            "print('log: starting')\n"
            "print('ft-next')\n"
        )
        script.chmod(script.stat().st_mode | stat.S_IXUSR)

        trainer = CommandTrainer(str(script))
        ref = fine_tune(trainer, "base", _labeled(), {"epochs": 2})
        assert ref == "ft-next"
        seen = json.loads(capture.read_text())
        assert seen["rows"] == [
            {"annotation": "a1", "id": "000000", "input": "q1"},
            {"annotation": "a2", "id": "000001", "input": "q2"},
        ]
        assert seen["hp"] == {"base_model": "base", "epochs": 2}

    def test_command_trainer_failure(self, tmp_path):
        script = tmp_path / "boom.sh"
        script.write_text("#!/bin/sh\necho broken >&2\nexit 3\n")
        script.chmod(0o755)
        with pytest.raises(TrainingError, match="exited 3"):
            CommandTrainer(str(script)).fine_tune("base", _labeled(), {})

    def test_command_trainer_silent(self, tmp_path):
        script = tmp_path / "quiet.sh"
        script.write_text("#!/bin/sh\nexit 0\n")
        script.chmod(0o755)
        with pytest.raises(TrainingError, match="no output"):
            CommandTrainer(str(script)).fine_tune("base", _labeled(), {})

    def test_command_trainer_requires_command(self):
        with pytest.raises(ConfigError):
            CommandTrainer("")

    def test_http_trainer(self):
        def handler(request):
            body = json.loads(request.content)
            assert body["model_ref"] == "base"
            assert len(body["data"]) == 2
            return httpx.Response(200, json={"model": "ft-http-1"})

        trainer = HttpTrainer(
            "http://train.test/jobs", transport=httpx.MockTransport(handler)
        )
        assert trainer.fine_tune("base", _labeled(), {}) == "ft-http-1"

    def test_http_trainer_errors(self):
        boom = HttpTrainer(
            "http://train.test/jobs",
            transport=httpx.MockTransport(
                lambda r: httpx.Response(500, text="oops")
            ),
        )
        with pytest.raises(TrainingError):
            boom.fine_tune("base", _labeled(), {})

        empty = HttpTrainer(
            "http://train.test/jobs",
            transport=httpx.MockTransport(lambda r: httpx.Response(200, json={})),
        )
        with pytest.raises(TrainingError):
            empty.fine_tune("base", _labeled(), {})
