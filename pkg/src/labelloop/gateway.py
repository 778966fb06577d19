"""Model access layer: generation, embeddings, and fine-tune adapters.

Two backends are provided. The mock backend is fully deterministic (pure
functions of prompt, seed and decode parameters) and is what tests and
benchmarks run against. The remote backend speaks the OpenAI-compatible
chat-completions and embeddings protocol over HTTP.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol, Sequence

import httpx
import numpy as np

from .errors import BackendError, CapabilityError, ConfigError, TrainingError

LOGPROBS_K_DEFAULT = 20


@dataclass(frozen=True)
class DecodeParams:
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = 64
    num_samples: int = 1
    logprobs_k: int = 0

    def validate(self) -> None:
        if self.temperature < 0:
            raise ConfigError(
                [{"field": "decode.temperature", "message": "must be >= 0"}]
            )
        if not 0 < self.top_p <= 1:
            raise ConfigError(
                [{"field": "decode.top_p", "message": "must be in (0, 1]"}]
            )
        if self.max_tokens < 1:
            raise ConfigError(
                [{"field": "decode.max_tokens", "message": "must be >= 1"}]
            )
        if self.num_samples < 1:
            raise ConfigError(
                [{"field": "decode.num_samples", "message": "must be >= 1"}]
            )
        if self.num_samples > 1 and self.temperature <= 0:
            raise ConfigError(
                [
                    {
                        "field": "decode.num_samples",
                        "message": "multiple samples require temperature > 0",
                    }
                ]
            )


@dataclass
class Usage:
    input_tokens: int = 0
    output_tokens: int = 0


@dataclass
class GenerationResult:
    """One sampled generation with token-level log probabilities.

    ``top_alternatives`` holds, per output position, a list of
    (token, logprob) candidates whose probabilities sum to at most 1.
    """

    text: str
    tokens: list[str]
    token_logprobs: list[float]
    top_alternatives: list[list[tuple[str, float]]] = field(default_factory=list)
    usage: Usage = field(default_factory=Usage)

    def validate(self) -> None:
        if len(self.tokens) != len(self.token_logprobs):
            raise BackendError(
                f"token/logprob length mismatch: {len(self.tokens)} vs "
                f"{len(self.token_logprobs)}"
            )
        for lp in self.token_logprobs:
            if lp > 0:
                raise BackendError(f"positive token logprob {lp}")
        for pos, alts in enumerate(self.top_alternatives):
            total = sum(math.exp(lp) for _, lp in alts)
            if total > 1 + 1e-6:
                raise BackendError(
                    f"alternative probabilities at position {pos} sum to {total}"
                )


@dataclass
class EmbeddingVector:
    values: np.ndarray
    model_tag: str = ""

    def validate(self) -> None:
        norm = float(np.linalg.norm(self.values))
        if abs(norm - 1.0) > 1e-6:
            raise BackendError(f"embedding norm {norm} is not 1 within 1e-6")


@dataclass(frozen=True)
class BackendDescriptor:
    """Where a model lives and how to reach it."""

    kind: str = "mock"  # "mock" | "remote-openai-compatible"
    base_url: str = ""
    model: str = "base"
    api_key_env: str = ""
    embed_model: str = ""
    seed: int = 0
    embed_dim: int = 16
    max_concurrent: int = 4
    max_retries: int = 3
    timeout: float = 60.0

    def validate(self) -> None:
        if self.kind not in ("mock", "remote-openai-compatible"):
            raise ConfigError(
                [{"field": "model.backend", "message": f"unknown kind {self.kind!r}"}]
            )
        if self.kind == "remote-openai-compatible" and not self.base_url:
            raise ConfigError(
                [{"field": "model.base_url", "message": "required for remote backends"}]
            )


class Backend(Protocol):
    def generate(
        self, model_ref: str, prompt: str, decode: DecodeParams
    ) -> list[GenerationResult]: ...

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def stable_hash(*parts: Any) -> int:
    """Deterministic cross-process hash of the given parts."""
    joined = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(joined.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


_MOCK_VOCAB = (
    "the a of to and in for on with at by from about into over after "
    "model data text label token answer question result value number "
    "system method process output input state change point line part "
    "time work case fact group"
).split()


class MockBackend:
    """Deterministic stand-in for a language model.

    Tokenization is whitespace splitting. Token logprobs, embeddings and
    generated text are pure functions of (prompt, seed, decode params), so
    repeated calls and resumed runs observe identical values.
    """

    kind = "mock"

    def __init__(
        self,
        seed: int = 0,
        embed_dim: int = 16,
        embedding_overrides: dict[str, np.ndarray] | None = None,
    ):
        self.seed = seed
        self.embed_dim = embed_dim
        self.embedding_overrides = embedding_overrides or {}
        self.generate_calls = 0
        self.embed_calls = 0

    def token_logprob(self, token: str) -> float:
        return -((stable_hash(token, self.seed) % 1000) / 1000 + 0.05)

    def _sample_tokens(self, prompt: str, decode: DecodeParams, index: int) -> list[str]:
        rng = random.Random(
            stable_hash(
                "gen", prompt, self.seed, decode.temperature, decode.top_p,
                decode.max_tokens, index,
            )
        )
        count = rng.randint(3, max(3, min(12, decode.max_tokens)))
        return [rng.choice(_MOCK_VOCAB) for _ in range(count)]

    def _alternatives(
        self, prompt: str, token: str, position: int, k: int
    ) -> list[tuple[str, float]]:
        if k <= 0:
            return []
        offset = stable_hash("alt", prompt, self.seed, position) % len(_MOCK_VOCAB)
        candidates = [token]
        for j in range(len(_MOCK_VOCAB)):
            cand = _MOCK_VOCAB[(offset + j) % len(_MOCK_VOCAB)]
            if cand != token:
                candidates.append(cand)
            if len(candidates) == k:
                break
        weights = [
            (stable_hash("altw", prompt, self.seed, position, c) % 1000) / 1000 + 0.001
            for c in candidates
        ]
        coverage = 0.7 + 0.29 * (
            (stable_hash("cov", prompt, self.seed, position) % 1000) / 999
        )
        total = sum(weights)
        return [
            (c, math.log(coverage * w / total)) for c, w in zip(candidates, weights)
        ]

    def generate(
        self, model_ref: str, prompt: str, decode: DecodeParams
    ) -> list[GenerationResult]:
        self.generate_calls += 1
        prompt_tokens = len(prompt.split())
        results = []
        for index in range(decode.num_samples):
            tokens = self._sample_tokens(prompt, decode, index)
            logprobs = [self.token_logprob(t) for t in tokens]
            alts = [
                self._alternatives(prompt, t, pos, decode.logprobs_k)
                for pos, t in enumerate(tokens)
            ]
            result = GenerationResult(
                text=" ".join(tokens),
                tokens=tokens,
                token_logprobs=logprobs,
                top_alternatives=alts if decode.logprobs_k > 0 else [],
                usage=Usage(
                    input_tokens=prompt_tokens if index == 0 else 0,
                    output_tokens=len(tokens),
                ),
            )
            results.append(result)
        return results

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        self.embed_calls += 1
        vectors = []
        for text in texts:
            override = self.embedding_overrides.get(text)
            if override is not None:
                values = np.asarray(override, dtype=float)
                values = values / np.linalg.norm(values)
            else:
                rng = random.Random(stable_hash("embed", text, self.seed))
                raw = np.array(
                    [rng.gauss(0.0, 1.0) for _ in range(self.embed_dim)], dtype=float
                )
                values = raw / np.linalg.norm(raw)
            vectors.append(EmbeddingVector(values=values, model_tag="mock-embed"))
        return vectors


class RemoteBackend:
    """OpenAI-compatible chat completions and embeddings over HTTP."""

    kind = "remote-openai-compatible"

    def __init__(
        self,
        descriptor: BackendDescriptor,
        transport: httpx.BaseTransport | None = None,
    ):
        descriptor.validate()
        self.descriptor = descriptor
        headers = {}
        if descriptor.api_key_env:
            key = os.environ.get(descriptor.api_key_env, "")
            if not key:
                raise ConfigError(
                    [
                        {
                            "field": "labeller.api_key",
                            "message": f"environment variable "
                            f"{descriptor.api_key_env!r} is not set",
                        }
                    ]
                )
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            base_url=descriptor.base_url.rstrip("/"),
            headers=headers,
            timeout=descriptor.timeout,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.descriptor.max_retries + 1):
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = BackendError(f"request failed: {exc}", retriable=True)
            else:
                if response.status_code == 200:
                    return response.json()
                retriable = response.status_code in (429, 500, 502, 503, 504)
                last_error = BackendError(
                    f"{path} returned {response.status_code}: {response.text[:200]}",
                    retriable=retriable,
                )
                if not retriable:
                    raise last_error
            if attempt < self.descriptor.max_retries:
                time.sleep(min(2.0**attempt * 0.1, 5.0))
        raise last_error  # type: ignore[misc]

    def generate(
        self, model_ref: str, prompt: str, decode: DecodeParams
    ) -> list[GenerationResult]:
        payload: dict[str, Any] = {
            "model": model_ref,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": decode.temperature,
            "top_p": decode.top_p,
            "max_tokens": decode.max_tokens,
            "n": decode.num_samples,
        }
        if decode.logprobs_k > 0:
            payload["logprobs"] = True
            payload["top_logprobs"] = decode.logprobs_k
        doc = self._post("/chat/completions", payload)
        usage = doc.get("usage", {})
        prompt_tokens = int(usage.get("prompt_tokens", 0))
        results = []
        for index, choice in enumerate(doc.get("choices", [])):
            text = choice.get("message", {}).get("content", "") or ""
            logprob_content = (choice.get("logprobs") or {}).get("content")
            if decode.logprobs_k > 0 and logprob_content is None:
                raise CapabilityError(
                    f"backend at {self.descriptor.base_url} returned no logprobs"
                )
            tokens: list[str] = []
            token_logprobs: list[float] = []
            alternatives: list[list[tuple[str, float]]] = []
            for entry in logprob_content or []:
                tokens.append(entry["token"])
                token_logprobs.append(min(0.0, float(entry["logprob"])))
                alternatives.append(
                    [
                        (alt["token"], min(0.0, float(alt["logprob"])))
                        for alt in entry.get("top_logprobs", [])
                    ]
                )
            if not tokens and text:
                tokens = text.split()
                token_logprobs = [0.0] * len(tokens)
                alternatives = []
            results.append(
                GenerationResult(
                    text=text,
                    tokens=tokens,
                    token_logprobs=token_logprobs,
                    top_alternatives=alternatives,
                    usage=Usage(
                        input_tokens=prompt_tokens if index == 0 else 0,
                        output_tokens=len(tokens)
                        or int(usage.get("completion_tokens", 0)),
                    ),
                )
            )
        if not results:
            raise BackendError("backend returned no choices", retriable=True)
        return results

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        model = self.descriptor.embed_model or self.descriptor.model
        doc = self._post("/embeddings", {"model": model, "input": list(texts)})
        data = sorted(doc.get("data", []), key=lambda d: d.get("index", 0))
        if len(data) != len(texts):
            raise BackendError(
                f"embeddings response covered {len(data)} of {len(texts)} inputs"
            )
        vectors = []
        for entry in data:
            raw = np.asarray(entry["embedding"], dtype=float)
            norm = np.linalg.norm(raw)
            if norm == 0:
                raise BackendError("backend returned a zero embedding")
            vectors.append(EmbeddingVector(values=raw / norm, model_tag=model))
        return vectors


def build_backend(
    descriptor: BackendDescriptor,
    transport: httpx.BaseTransport | None = None,
) -> Backend:
    descriptor.validate()
    if descriptor.kind == "mock":
        return MockBackend(seed=descriptor.seed, embed_dim=descriptor.embed_dim)
    return RemoteBackend(descriptor, transport=transport)


def generate(
    backend: Backend, model_ref: str, prompt: str, decode: DecodeParams
) -> list[GenerationResult]:
    """Validated generation: checks decode preconditions and result invariants."""
    decode.validate()
    results = backend.generate(model_ref, prompt, decode)
    for result in results:
        result.validate()
    return results


def embed(backend: Backend, texts: Sequence[str]) -> list[EmbeddingVector]:
    """Validated embedding fetch; every vector must be unit length."""
    if not texts:
        return []
    vectors = backend.embed(texts)
    if len(vectors) != len(texts):
        raise BackendError(
            f"backend embedded {len(vectors)} of {len(texts)} texts"
        )
    for vector in vectors:
        vector.validate()
    return vectors


# --- fine-tune adapters ----------------------------------------------------


class Trainer(Protocol):
    def fine_tune(
        self, model_ref: str, labeled: Sequence, hyperparams: dict
    ) -> str: ...


class NoOpTrainer:
    """Keeps the model unchanged; useful for dry runs and selection-only studies."""

    def fine_tune(self, model_ref: str, labeled: Sequence, hyperparams: dict) -> str:
        return model_ref


class CommandTrainer:
    """Delegates training to an external command.

    The command is invoked as ``argv = [cmd, data_path, hyperparams_path]``
    where data_path is a JSONL file of {id, input, annotation} records. The
    last line of stdout names the new model ref.
    """

    def __init__(self, command: str, timeout: float = 3600.0):
        if not command:
            raise ConfigError([{"field": "trainer.cmd", "message": "required"}])
        self.command = command
        self.timeout = timeout

    def fine_tune(self, model_ref: str, labeled: Sequence, hyperparams: dict) -> str:
        with tempfile.TemporaryDirectory(prefix="labelloop-train-") as tmp:
            data_path = Path(tmp) / "train.jsonl"
            with open(data_path, "w", encoding="utf-8") as fh:
                for inst in labeled:
                    fh.write(
                        json.dumps(
                            {
                                "id": inst.id,
                                "input": inst.input,
                                "annotation": inst.annotation,
                            },
                            sort_keys=True,
                        )
                        + "\n"
                    )
            hp_path = Path(tmp) / "hyperparams.json"
            hp_doc = dict(hyperparams)
            hp_doc["base_model"] = model_ref
            hp_path.write_text(json.dumps(hp_doc, sort_keys=True), encoding="utf-8")
            try:
                proc = subprocess.run(
                    [self.command, str(data_path), str(hp_path)],
                    capture_output=True,
                    text=True,
                    timeout=self.timeout,
                )
            except subprocess.TimeoutExpired as exc:
                raise TrainingError(f"trainer timed out after {self.timeout}s") from exc
            if proc.returncode != 0:
                raise TrainingError(
                    f"trainer exited {proc.returncode}: {proc.stderr.strip()[:500]}"
                )
            lines = [ln for ln in proc.stdout.strip().splitlines() if ln.strip()]
            if not lines:
                raise TrainingError("trainer produced no output (expected a model ref)")
            return lines[-1].strip()


class HttpTrainer:
    """POSTs the labeled data to a training service and reads back the ref."""

    def __init__(self, url: str, timeout: float = 3600.0,
                 transport: httpx.BaseTransport | None = None):
        if not url:
            raise ConfigError([{"field": "trainer.url", "message": "required"}])
        self.url = url
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def fine_tune(self, model_ref: str, labeled: Sequence, hyperparams: dict) -> str:
        payload = {
            "model_ref": model_ref,
            "hyperparams": hyperparams,
            "data": [
                {"id": inst.id, "input": inst.input, "annotation": inst.annotation}
                for inst in labeled
            ],
        }
        try:
            response = self._client.post(self.url, json=payload)
        except httpx.HTTPError as exc:
            raise TrainingError(f"training request failed: {exc}") from exc
        if response.status_code != 200:
            raise TrainingError(
                f"training service returned {response.status_code}: "
                f"{response.text[:200]}"
            )
        doc = response.json()
        ref = doc.get("model")
        if not ref:
            raise TrainingError("training service response lacks a 'model' field")
        return str(ref)


def fine_tune(
    trainer: Trainer, model_ref: str, labeled: Sequence, hyperparams: dict
) -> str:
    """Run one fine-tune round and return the new model ref."""
    if any(inst.annotation is None for inst in labeled):
        raise TrainingError("all training instances must carry annotations")
    return trainer.fine_tune(model_ref, labeled, hyperparams)
