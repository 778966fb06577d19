"""Run configuration: dotted-key documents, validation, typed resolution.

Configs are flat mappings from dotted keys to scalar values, e.g.
``al=huds al.query_size=0.01 labeller=api_llm``. YAML files may nest
(``al: {query_size: 0.01}``) or use dotted keys directly; both flatten to
the same document. Validation reports per-field errors with the dotted key
as the field identifier, which the HTTP API and the annotation UI share.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .gateway import BackendDescriptor, DecodeParams
from .labeling import DEFAULT_LEASE_SECONDS, PriceSheet
from .metrics import KNOWN_METRICS
from . import strategies

LABELER_KINDS = ("oracle", "noisy_oracle", "human", "api_llm", "local_llm")
TRAINER_KINDS = ("noop", "command", "http")
MODEL_BACKENDS = ("mock", "remote-openai-compatible")

# Keys accepted at validation time. Prefixes listed in _OPEN_PREFIXES accept
# arbitrary sub-keys (opaque pass-through namespaces).
KNOWN_KEYS = {
    "al",
    "al.mode",
    "al.init_query_size",
    "al.query_size",
    "al.num_iterations",
    "al.budget",
    "al.seed",
    "al.test_fraction",
    "labeller",
    "labeller.parameters.model",
    "labeller.parameters.max_tokens",
    "labeller.parameters.noise_p",
    "labeller.prompt_template",
    "labeller.prompt_template_file",
    "labeller.price.input_per_1m",
    "labeller.price.output_per_1m",
    "labeller.price.batch_discount",
    "labeller.price.per_label",
    "labeller.batch_mode",
    "labeller.api_key",
    "labeller.base_url",
    "labeller.backend",
    "labeller.cost.per_task_estimate",
    "labeller.lease_seconds",
    "evaluation.metrics",
    "evaluation.additional_metrics",
    "decode.temperature",
    "decode.top_p",
    "decode.max_tokens",
    "decode.num_samples",
    "stopping.labeled_count",
    "stopping.metric",
    "stopping.metric_threshold",
    "model.backend",
    "model.base_url",
    "model.name",
    "model.api_key",
    "model.embed_model",
    "model.seed",
    "model.embed_dim",
    "model.max_concurrent",
    "trainer",
    "trainer.cmd",
    "trainer.url",
    "trainer.timeout",
    "data.path",
    "data.test_path",
    "data.input_field",
    "data.reference_field",
    "data.id_field",
    "run.name",
}

_OPEN_PREFIXES = ("train.", "al.params.")


def flatten(doc: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    """Collapse nested mappings into dotted keys; scalars pass through."""
    flat: dict[str, Any] = {}
    for key, value in doc.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, prefix=f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def parse_override(text: str) -> tuple[str, Any]:
    """Parse one ``key=value`` CLI override; values parse as YAML scalars."""
    if "=" not in text:
        raise ConfigError(
            [{"field": text, "message": "overrides must look like key=value"}]
        )
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError([{"field": text, "message": "empty override key"}])
    try:
        value = yaml.safe_load(raw) if raw != "" else ""
    except yaml.YAMLError:
        value = raw
    return key, value


def load_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(
            [{"field": "config", "message": f"config file not found: {path}"}]
        )
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(
                [{"field": "config", "message": f"invalid YAML: {exc}"}]
            ) from exc
    if not isinstance(doc, dict):
        raise ConfigError(
            [{"field": "config", "message": "config file must hold a mapping"}]
        )
    return flatten(doc)


def merge(*docs: dict[str, Any]) -> dict[str, Any]:
    """Later documents override earlier ones, key by key."""
    out: dict[str, Any] = {}
    for doc in docs:
        out.update(doc)
    return out


# --- validation ------------------------------------------------------------


def _err(errors: list, field_name: str, message: str) -> None:
    errors.append({"field": field_name, "message": message})


def _get_number(doc, key, errors) -> float | None:
    value = doc.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _err(errors, key, "must be a number")
        return None
    return float(value)


def _get_int(doc, key, errors) -> int | None:
    value = doc.get(key)
    if value is None:
        return None
    if isinstance(value, bool):
        _err(errors, key, "must be an integer")
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    _err(errors, key, "must be an integer")
    return None


def _get_str(doc, key, errors) -> str | None:
    value = doc.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        _err(errors, key, "must be a string")
        return None
    return value


def _get_bool(doc, key, errors) -> bool | None:
    value = doc.get(key)
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    _err(errors, key, "must be true or false")
    return None


def _get_list(doc, key, errors) -> list | None:
    value = doc.get(key)
    if value is None:
        return None
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    if not isinstance(value, list):
        _err(errors, key, "must be a list")
        return None
    return value


def _check_size_spec(doc, key, errors) -> None:
    value = _get_number(doc, key, errors)
    if value is None:
        return
    if value <= 0:
        _err(errors, key, "must be positive")
    elif value >= 1 and not float(value).is_integer():
        _err(errors, key, "sizes of 1 or more must be whole instance counts")


def validate_config(doc: dict[str, Any]) -> list[dict[str, str]]:
    """Check a flat config document; returns a list of field errors."""
    errors: list[dict[str, str]] = []

    for key in sorted(doc):
        if key in KNOWN_KEYS or any(key.startswith(p) for p in _OPEN_PREFIXES):
            continue
        _err(errors, key, "unknown configuration key")

    strategy = _get_str(doc, "al", errors)
    if strategy is not None and strategy not in strategies.strategy_names():
        _err(errors, "al", f"unknown strategy {strategy!r}")

    mode = _get_str(doc, "al.mode", errors)
    if mode is not None and mode not in ("al", "ed"):
        _err(errors, "al.mode", "must be 'al' or 'ed'")

    _check_size_spec(doc, "al.init_query_size", errors)
    _check_size_spec(doc, "al.query_size", errors)

    iterations = _get_int(doc, "al.num_iterations", errors)
    if iterations is not None and iterations < 1:
        _err(errors, "al.num_iterations", "must be >= 1")
    if mode == "ed" and iterations is not None and iterations != 1:
        _err(errors, "al.num_iterations", "ed mode runs exactly one iteration")

    budget = _get_number(doc, "al.budget", errors)
    if budget is not None and budget <= 0:
        _err(errors, "al.budget", "must be positive")

    _get_int(doc, "al.seed", errors)

    fraction = _get_number(doc, "al.test_fraction", errors)
    if fraction is not None and not 0 <= fraction < 1:
        _err(errors, "al.test_fraction", "must be in [0, 1)")

    labeler = _get_str(doc, "labeller", errors)
    if labeler is not None and labeler not in LABELER_KINDS:
        _err(
            errors,
            "labeller",
            f"unknown labeller {labeler!r} (known: {', '.join(LABELER_KINDS)})",
        )

    max_tokens = _get_int(doc, "labeller.parameters.max_tokens", errors)
    if max_tokens is not None and max_tokens < 1:
        _err(errors, "labeller.parameters.max_tokens", "must be >= 1")

    noise = _get_number(doc, "labeller.parameters.noise_p", errors)
    if noise is not None and not 0 <= noise <= 1:
        _err(errors, "labeller.parameters.noise_p", "must be in [0, 1]")

    template = _get_str(doc, "labeller.prompt_template", errors)
    if template is not None and "{input}" not in template:
        _err(
            errors,
            "labeller.prompt_template",
            "template must contain the {input} placeholder",
        )

    for key in ("labeller.price.input_per_1m", "labeller.price.output_per_1m"):
        price = _get_number(doc, key, errors)
        if price is not None and price < 0:
            _err(errors, key, "must be >= 0")
    discount = _get_number(doc, "labeller.price.batch_discount", errors)
    if discount is not None and not 0 < discount <= 1:
        _err(errors, "labeller.price.batch_discount", "must be in (0, 1]")
    per_label = _get_number(doc, "labeller.price.per_label", errors)
    if per_label is not None and per_label < 0:
        _err(errors, "labeller.price.per_label", "must be >= 0")
    _get_bool(doc, "labeller.batch_mode", errors)
    estimate = _get_number(doc, "labeller.cost.per_task_estimate", errors)
    if estimate is not None and estimate <= 0:
        _err(errors, "labeller.cost.per_task_estimate", "must be positive")
    lease = _get_number(doc, "labeller.lease_seconds", errors)
    if lease is not None and lease <= 0:
        _err(errors, "labeller.lease_seconds", "must be positive")

    metric_names: list[str] = []
    for key in ("evaluation.metrics", "evaluation.additional_metrics"):
        names = _get_list(doc, key, errors)
        if names is None:
            continue
        for name in names:
            if name not in KNOWN_METRICS:
                _err(errors, key, f"unknown metric {name!r}")
            else:
                metric_names.append(name)
    if "evaluation.metrics" not in doc:
        metric_names.extend(DEFAULT_METRICS)

    temperature = _get_number(doc, "decode.temperature", errors)
    if temperature is not None and temperature < 0:
        _err(errors, "decode.temperature", "must be >= 0")
    top_p = _get_number(doc, "decode.top_p", errors)
    if top_p is not None and not 0 < top_p <= 1:
        _err(errors, "decode.top_p", "must be in (0, 1]")
    decode_max = _get_int(doc, "decode.max_tokens", errors)
    if decode_max is not None and decode_max < 1:
        _err(errors, "decode.max_tokens", "must be >= 1")
    samples = _get_int(doc, "decode.num_samples", errors)
    if samples is not None:
        if samples < 1:
            _err(errors, "decode.num_samples", "must be >= 1")
        elif samples > 1 and (temperature or 0.0) <= 0:
            _err(
                errors,
                "decode.num_samples",
                "multiple samples require decode.temperature > 0",
            )

    stop_count = _get_int(doc, "stopping.labeled_count", errors)
    if stop_count is not None and stop_count < 1:
        _err(errors, "stopping.labeled_count", "must be >= 1")
    stop_metric = _get_str(doc, "stopping.metric", errors)
    threshold = _get_number(doc, "stopping.metric_threshold", errors)
    if threshold is not None and stop_metric is None:
        _err(errors, "stopping.metric", "required when metric_threshold is set")
    if stop_metric is not None:
        if threshold is None:
            _err(
                errors,
                "stopping.metric_threshold",
                "required when stopping.metric is set",
            )
        if stop_metric not in metric_names:
            _err(
                errors,
                "stopping.metric",
                f"metric {stop_metric!r} is not computed by this run",
            )

    backend = _get_str(doc, "model.backend", errors)
    if backend is not None and backend not in MODEL_BACKENDS:
        _err(errors, "model.backend", f"unknown backend {backend!r}")
    base_url = _get_str(doc, "model.base_url", errors)
    if backend == "remote-openai-compatible" and not base_url:
        _err(errors, "model.base_url", "required for remote backends")
    _get_str(doc, "model.name", errors)
    _get_int(doc, "model.seed", errors)
    dim = _get_int(doc, "model.embed_dim", errors)
    if dim is not None and dim < 2:
        _err(errors, "model.embed_dim", "must be >= 2")
    concurrent = _get_int(doc, "model.max_concurrent", errors)
    if concurrent is not None and concurrent < 1:
        _err(errors, "model.max_concurrent", "must be >= 1")

    labeler_backend = _get_str(doc, "labeller.backend", errors)
    if labeler_backend is not None and labeler_backend not in MODEL_BACKENDS:
        _err(errors, "labeller.backend", f"unknown backend {labeler_backend!r}")

    trainer = _get_str(doc, "trainer", errors)
    if trainer is not None and trainer not in TRAINER_KINDS:
        _err(errors, "trainer", f"unknown trainer {trainer!r}")
    if trainer == "command" and not _get_str(doc, "trainer.cmd", errors):
        _err(errors, "trainer.cmd", "required for the command trainer")
    if trainer == "http" and not _get_str(doc, "trainer.url", errors):
        _err(errors, "trainer.url", "required for the http trainer")

    params_errors: list[dict[str, str]] = []
    strata = _get_int(doc, "al.params.num_strata", params_errors)
    if strata is not None and strata < 1:
        _err(params_errors, "al.params.num_strata", "must be >= 1")
    k_samples = _get_int(doc, "al.params.k_samples", params_errors)
    if k_samples is not None and k_samples < 1:
        _err(params_errors, "al.params.k_samples", "must be >= 1")
    errors.extend(params_errors)

    return errors


DEFAULT_METRICS = ["relaxed_exact_match"]


# --- typed resolution ------------------------------------------------------


@dataclass
class LabelerSpec:
    kind: str = "oracle"
    model: str = ""
    max_tokens: int = 256
    noise_p: float = 0.0
    prompt_template: str = "{input}"
    batch_mode: bool = False
    api_key_env: str = ""
    base_url: str = ""
    backend: str = "mock"
    fixed_estimate: float | None = None
    lease_seconds: float = DEFAULT_LEASE_SECONDS


@dataclass
class TrainerSpec:
    kind: str = "noop"
    cmd: str = ""
    url: str = ""
    timeout: float = 3600.0


@dataclass
class DataSpec:
    path: str = ""
    test_path: str = ""
    input_field: str = "input"
    reference_field: str = "references"
    id_field: str | None = None


@dataclass
class RunConfig:
    """Fully resolved, validated run configuration."""

    strategy: str = "random"
    strategy_params: dict[str, Any] = field(default_factory=dict)
    mode: str = "al"
    init_query_size: float = 0.01
    query_size: float = 0.01
    num_iterations: int = 10
    budget: float | None = None
    seed: int = 0
    test_fraction: float = 0.2
    labeler: LabelerSpec = field(default_factory=LabelerSpec)
    prices: PriceSheet = field(default_factory=PriceSheet)
    metrics: list[str] = field(default_factory=lambda: list(DEFAULT_METRICS))
    decode: DecodeParams = field(default_factory=DecodeParams)
    stop_labeled_count: int | None = None
    stop_metric: str | None = None
    stop_metric_threshold: float | None = None
    model: BackendDescriptor = field(default_factory=BackendDescriptor)
    trainer: TrainerSpec = field(default_factory=TrainerSpec)
    train_params: dict[str, Any] = field(default_factory=dict)
    data: DataSpec = field(default_factory=DataSpec)
    raw: dict[str, Any] = field(default_factory=dict)

    def to_document(self) -> dict[str, Any]:
        return dict(self.raw)


def resolve_config(doc: dict[str, Any]) -> RunConfig:
    """Validate a flat config document and build the typed RunConfig."""
    errors = validate_config(doc)
    if errors:
        raise ConfigError(errors)

    def get(key: str, default: Any) -> Any:
        value = doc.get(key)
        return default if value is None else value

    template = str(get("labeller.prompt_template", "{input}"))
    template_file = doc.get("labeller.prompt_template_file")
    if template_file:
        path = Path(str(template_file))
        if not path.exists():
            raise ConfigError(
                [
                    {
                        "field": "labeller.prompt_template_file",
                        "message": f"file not found: {path}",
                    }
                ]
            )
        template = path.read_text(encoding="utf-8")
        if "{input}" not in template:
            raise ConfigError(
                [
                    {
                        "field": "labeller.prompt_template_file",
                        "message": "template must contain the {input} placeholder",
                    }
                ]
            )

    labeler_base_url = str(get("labeller.base_url", ""))
    labeler_backend = doc.get("labeller.backend") or (
        "remote-openai-compatible" if labeler_base_url else "mock"
    )

    metrics = [str(m) for m in _as_name_list(get("evaluation.metrics", DEFAULT_METRICS))]
    metrics += [
        str(m)
        for m in _as_name_list(get("evaluation.additional_metrics", []))
        if m not in metrics
    ]

    mode = str(get("al.mode", "al"))
    num_iterations = int(get("al.num_iterations", 10))
    if mode == "ed":
        num_iterations = 1

    strategy_params = {
        key[len("al.params.") :]: value
        for key, value in doc.items()
        if key.startswith("al.params.")
    }
    train_params = {
        key[len("train.") :]: value
        for key, value in doc.items()
        if key.startswith("train.")
    }

    budget = doc.get("al.budget")
    per_task = doc.get("labeller.cost.per_task_estimate")

    config = RunConfig(
        strategy=str(get("al", "random")),
        strategy_params=strategy_params,
        mode=mode,
        init_query_size=float(get("al.init_query_size", 0.01)),
        query_size=float(get("al.query_size", 0.01)),
        num_iterations=num_iterations,
        budget=float(budget) if budget is not None else None,
        seed=int(get("al.seed", 0)),
        test_fraction=float(get("al.test_fraction", 0.2)),
        labeler=LabelerSpec(
            kind=str(get("labeller", "oracle")),
            model=str(get("labeller.parameters.model", "")),
            max_tokens=int(get("labeller.parameters.max_tokens", 256)),
            noise_p=float(get("labeller.parameters.noise_p", 0.0)),
            prompt_template=template,
            batch_mode=bool(get("labeller.batch_mode", False)),
            api_key_env=str(get("labeller.api_key", "")),
            base_url=labeler_base_url,
            backend=str(labeler_backend),
            fixed_estimate=float(per_task) if per_task is not None else None,
            lease_seconds=float(get("labeller.lease_seconds", DEFAULT_LEASE_SECONDS)),
        ),
        prices=PriceSheet(
            input_per_1m=float(get("labeller.price.input_per_1m", 0.0)),
            output_per_1m=float(get("labeller.price.output_per_1m", 0.0)),
            batch_discount=float(get("labeller.price.batch_discount", 0.5)),
            per_label=(
                float(doc["labeller.price.per_label"])
                if doc.get("labeller.price.per_label") is not None
                else None
            ),
        ),
        metrics=metrics,
        decode=DecodeParams(
            temperature=float(get("decode.temperature", 0.0)),
            top_p=float(get("decode.top_p", 1.0)),
            max_tokens=int(get("decode.max_tokens", 64)),
            num_samples=int(get("decode.num_samples", 1)),
        ),
        stop_labeled_count=(
            int(doc["stopping.labeled_count"])
            if doc.get("stopping.labeled_count") is not None
            else None
        ),
        stop_metric=(
            str(doc["stopping.metric"])
            if doc.get("stopping.metric") is not None
            else None
        ),
        stop_metric_threshold=(
            float(doc["stopping.metric_threshold"])
            if doc.get("stopping.metric_threshold") is not None
            else None
        ),
        model=BackendDescriptor(
            kind=str(get("model.backend", "mock")),
            base_url=str(get("model.base_url", "")),
            model=str(get("model.name", "base")),
            api_key_env=str(get("model.api_key", "")),
            embed_model=str(get("model.embed_model", "")),
            seed=int(get("model.seed", 0)),
            embed_dim=int(get("model.embed_dim", 16)),
            max_concurrent=int(get("model.max_concurrent", 4)),
        ),
        trainer=TrainerSpec(
            kind=str(get("trainer", "noop")),
            cmd=str(get("trainer.cmd", "")),
            url=str(get("trainer.url", "")),
            timeout=float(get("trainer.timeout", 3600.0)),
        ),
        train_params=train_params,
        data=DataSpec(
            path=str(get("data.path", "")),
            test_path=str(get("data.test_path", "")),
            input_field=str(get("data.input_field", "input")),
            reference_field=str(get("data.reference_field", "references")),
            id_field=(
                str(doc["data.id_field"])
                if doc.get("data.id_field") is not None
                else None
            ),
        ),
        raw=dict(doc),
    )
    return config


def _as_name_list(value: Any) -> list:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def dump_config(config: RunConfig, path: str | Path) -> None:
    """Persist the resolved flat config document as sorted JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_document(), fh, sort_keys=True, indent=2)
        fh.write("\n")
