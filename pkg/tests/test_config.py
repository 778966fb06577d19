from __future__ import annotations

import json

import pytest

from labelloop.config import (
    DEFAULT_METRICS,
    RunConfig,
    dump_config,
    flatten,
    load_config_file,
    merge,
    parse_override,
    resolve_config,
    validate_config,
)
from labelloop.errors import ConfigError


def _fields(errors):
    return [e["field"] for e in errors]


class TestFlatten:
    def test_nested_to_dotted(self):
        doc = {"al": {"query_size": 0.05, "params": {"beta": 0.7}}, "seed": 1}
        assert flatten(doc) == {
            "al.query_size": 0.05,
            "al.params.beta": 0.7,
            "seed": 1,
        }

    def test_scalars_pass_through(self):
        assert flatten({"a": 1, "b": "x", "c": [1, 2]}) == {
            "a": 1,
            "b": "x",
            "c": [1, 2],
        }

    def test_empty(self):
        assert flatten({}) == {}


class TestParseOverride:
    def test_string_value(self):
        assert parse_override("al=huds") == ("al", "huds")

    def test_yaml_scalars(self):
        assert parse_override("al.query_size=0.05") == ("al.query_size", 0.05)
        assert parse_override("al.num_iterations=15") == ("al.num_iterations", 15)
        assert parse_override("labeller.batch_mode=true") == (
            "labeller.batch_mode",
            True,
        )

    def test_yaml_list(self):
        key, value = parse_override("evaluation.metrics=[bleu, rouge1]")
        assert key == "evaluation.metrics"
        assert value == ["bleu", "rouge1"]

    def test_value_may_contain_equals(self):
        assert parse_override("run.name=a=b") == ("run.name", "a=b")

    def test_empty_value(self):
        assert parse_override("run.name=") == ("run.name", "")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key=value"):
            parse_override("al.query_size")

    def test_empty_key(self):
        with pytest.raises(ConfigError, match="empty override key"):
            parse_override("=value")


class TestLoadConfigFile:
    def test_nested_yaml(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(
            "al: huds\n"
            "al.query_size: 0.02\n"
            "labeller:\n"
            "  parameters:\n"
            "    max_tokens: 128\n"
        )
        doc = load_config_file(path)
        assert doc == {
            "al": "huds",
            "al.query_size": 0.02,
            "labeller.parameters.max_tokens": 128,
        }

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config_file(path) == {}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config_file(tmp_path / "absent.yaml")

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("al: [unclosed\n")
        with pytest.raises(ConfigError, match="invalid YAML"):
            load_config_file(path)

    def test_non_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- a\n- b\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config_file(path)


class TestMerge:
    def test_later_wins(self):
        assert merge({"a": 1, "b": 2}, {"b": 3}, {"c": 4}) == {
            "a": 1,
            "b": 3,
            "c": 4,
        }


class TestValidateConfig:
    def test_empty_doc_is_valid(self):
        assert validate_config({}) == []

    def test_full_valid_doc(self):
        doc = {
            "al": "huds",
            "al.mode": "al",
            "al.init_query_size": 0.01,
            "al.query_size": 25,
            "al.num_iterations": 15,
            "al.budget": 100.0,
            "al.seed": 42,
            "al.test_fraction": 0.2,
            "al.params.beta": 0.7,
            "labeller": "api_llm",
            "labeller.parameters.model": "gpt-x",
            "labeller.parameters.max_tokens": 256,
            "labeller.prompt_template": "Answer: {input}",
            "labeller.price.input_per_1m": 0.6,
            "labeller.price.output_per_1m": 2.4,
            "labeller.batch_mode": True,
            "evaluation.metrics": ["relaxed_exact_match", "rouge1"],
            "decode.temperature": 0.7,
            "decode.num_samples": 3,
            "stopping.metric": "rouge1",
            "stopping.metric_threshold": 0.8,
            "trainer": "noop",
            "train.epochs": 5,
            "data.path": "pool.jsonl",
        }
        assert validate_config(doc) == []

    def test_unknown_key(self):
        errors = validate_config({"alx.foo": 1})
        assert errors == [
            {"field": "alx.foo", "message": "unknown configuration key"}
        ]

    def test_open_prefixes_accept_anything(self):
        assert validate_config({"train.made_up_flag": 3}) == []
        assert validate_config({"al.params.made_up": "x"}) == []

    def test_unknown_strategy(self):
        assert _fields(validate_config({"al": "gradient"})) == ["al"]

    def test_mode(self):
        assert _fields(validate_config({"al.mode": "offline"})) == ["al.mode"]
        errors = validate_config({"al.mode": "ed", "al.num_iterations": 3})
        assert "al.num_iterations" in _fields(errors)
        assert validate_config({"al.mode": "ed", "al.num_iterations": 1}) == []

    @pytest.mark.parametrize("value", [0, -1, 1.5, 2.5])
    def test_bad_size_specs(self, value):
        assert _fields(validate_config({"al.query_size": value})) == [
            "al.query_size"
        ]
        assert _fields(validate_config({"al.init_query_size": value})) == [
            "al.init_query_size"
        ]

    @pytest.mark.parametrize("value", [0.5, 1, 25, 25.0])
    def test_good_size_specs(self, value):
        assert validate_config({"al.query_size": value}) == []

    def test_iterations(self):
        assert _fields(validate_config({"al.num_iterations": 0})) == [
            "al.num_iterations"
        ]
        assert _fields(validate_config({"al.num_iterations": True})) == [
            "al.num_iterations"
        ]
        assert _fields(validate_config({"al.num_iterations": 2.5})) == [
            "al.num_iterations"
        ]

    def test_budget(self):
        assert _fields(validate_config({"al.budget": 0})) == ["al.budget"]
        assert _fields(validate_config({"al.budget": "lots"})) == ["al.budget"]

    def test_test_fraction(self):
        assert _fields(validate_config({"al.test_fraction": 1.0})) == [
            "al.test_fraction"
        ]
        assert validate_config({"al.test_fraction": 0}) == []

    def test_labeller_kind(self):
        assert _fields(validate_config({"labeller": "crowd"})) == ["labeller"]

    def test_labeller_parameters(self):
        doc = {
            "labeller.parameters.max_tokens": 0,
            "labeller.parameters.noise_p": 1.5,
        }
        assert sorted(_fields(validate_config(doc))) == [
            "labeller.parameters.max_tokens",
            "labeller.parameters.noise_p",
        ]

    def test_prompt_template_placeholder(self):
        errors = validate_config({"labeller.prompt_template": "no slot"})
        assert _fields(errors) == ["labeller.prompt_template"]

    def test_prices(self):
        doc = {
            "labeller.price.input_per_1m": -1,
            "labeller.price.batch_discount": 0,
            "labeller.price.per_label": -0.5,
        }
        assert sorted(_fields(validate_config(doc))) == [
            "labeller.price.batch_discount",
            "labeller.price.input_per_1m",
            "labeller.price.per_label",
        ]

    def test_batch_mode_type(self):
        assert _fields(validate_config({"labeller.batch_mode": "yes"})) == [
            "labeller.batch_mode"
        ]

    def test_cost_and_lease(self):
        assert _fields(
            validate_config({"labeller.cost.per_task_estimate": 0})
        ) == ["labeller.cost.per_task_estimate"]
        assert _fields(validate_config({"labeller.lease_seconds": -1})) == [
            "labeller.lease_seconds"
        ]

    def test_metrics(self):
        errors = validate_config({"evaluation.metrics": ["bleu", "made_up"]})
        assert _fields(errors) == ["evaluation.metrics"]
        assert validate_config({"evaluation.metrics": "bleu, rouge1"}) == []
        errors = validate_config({"evaluation.additional_metrics": ["wer"]})
        assert _fields(errors) == ["evaluation.additional_metrics"]

    def test_decode(self):
        doc = {
            "decode.temperature": -0.5,
            "decode.top_p": 0,
            "decode.max_tokens": 0,
        }
        assert sorted(_fields(validate_config(doc))) == [
            "decode.max_tokens",
            "decode.temperature",
            "decode.top_p",
        ]

    def test_samples_need_temperature(self):
        errors = validate_config({"decode.num_samples": 3})
        assert _fields(errors) == ["decode.num_samples"]
        assert validate_config(
            {"decode.num_samples": 3, "decode.temperature": 0.7}
        ) == []

    def test_stopping_pairs(self):
        errors = validate_config({"stopping.metric_threshold": 0.8})
        assert _fields(errors) == ["stopping.metric"]
        errors = validate_config({"stopping.metric": "relaxed_exact_match"})
        assert _fields(errors) == ["stopping.metric_threshold"]

    def test_stop_metric_must_be_computed(self):
        errors = validate_config(
            {"stopping.metric": "bleu", "stopping.metric_threshold": 0.5}
        )
        assert _fields(errors) == ["stopping.metric"]
        doc = {
            "stopping.metric": "bleu",
            "stopping.metric_threshold": 0.5,
            "evaluation.metrics": ["bleu"],
        }
        assert validate_config(doc) == []
        doc = {
            "stopping.metric": "bleu",
            "stopping.metric_threshold": 0.5,
            "evaluation.additional_metrics": ["bleu"],
        }
        assert validate_config(doc) == []

    def test_stop_metric_default_is_available(self):
        doc = {
            "stopping.metric": "relaxed_exact_match",
            "stopping.metric_threshold": 0.9,
        }
        assert validate_config(doc) == []

    def test_model(self):
        doc = {
            "model.backend": "tensorrt",
            "model.embed_dim": 1,
            "model.max_concurrent": 0,
        }
        assert sorted(_fields(validate_config(doc))) == [
            "model.backend",
            "model.embed_dim",
            "model.max_concurrent",
        ]
        errors = validate_config({"model.backend": "remote-openai-compatible"})
        assert _fields(errors) == ["model.base_url"]

    def test_labeller_backend(self):
        assert _fields(validate_config({"labeller.backend": "grpc"})) == [
            "labeller.backend"
        ]

    def test_trainer(self):
        assert _fields(validate_config({"trainer": "slurm"})) == ["trainer"]
        assert _fields(validate_config({"trainer": "command"})) == ["trainer.cmd"]
        assert _fields(validate_config({"trainer": "http"})) == ["trainer.url"]
        assert validate_config({"trainer": "command", "trainer.cmd": "./t"}) == []

    def test_strategy_params(self):
        doc = {"al.params.num_strata": 0, "al.params.k_samples": -2}
        assert sorted(_fields(validate_config(doc))) == [
            "al.params.k_samples",
            "al.params.num_strata",
        ]

    def test_errors_accumulate(self):
        doc = {"al": "nope", "al.budget": -1, "bogus": True}
        assert len(validate_config(doc)) == 3


class TestResolveConfig:
    def test_defaults(self):
        config = resolve_config({})
        assert config.strategy == "random"
        assert config.mode == "al"
        assert config.init_query_size == 0.01
        assert config.query_size == 0.01
        assert config.num_iterations == 10
        assert config.budget is None
        assert config.seed == 0
        assert config.test_fraction == 0.2
        assert config.metrics == DEFAULT_METRICS
        assert config.labeler.kind == "oracle"
        assert config.labeler.backend == "mock"
        assert config.trainer.kind == "noop"
        assert config.model.kind == "mock"
        assert config.strategy_params == {}
        assert config.train_params == {}

    def test_full_document(self):
        doc = {
            "al": "huds",
            "al.mode": "al",
            "al.init_query_size": 0.02,
            "al.query_size": 25,
            "al.num_iterations": 15,
            "al.budget": 50,
            "al.seed": 7,
            "al.params.beta": 0.7,
            "al.params.num_strata": 4,
            "labeller": "api_llm",
            "labeller.parameters.model": "remote-x",
            "labeller.parameters.max_tokens": 128,
            "labeller.base_url": "http://llm.test/v1",
            "labeller.price.input_per_1m": 0.6,
            "labeller.price.output_per_1m": 2.4,
            "labeller.price.per_label": 0.05,
            "labeller.cost.per_task_estimate": 0.002,
            "evaluation.metrics": ["relaxed_exact_match"],
            "evaluation.additional_metrics": ["rouge1", "relaxed_exact_match"],
            "decode.max_tokens": 32,
            "stopping.labeled_count": 500,
            "trainer": "command",
            "trainer.cmd": "./train.sh",
            "train.epochs": 5,
            "train.lr": 3e-5,
            "data.path": "pool.jsonl",
            "data.input_field": "question",
            "data.id_field": "qid",
        }
        config = resolve_config(doc)
        assert config.strategy == "huds"
        assert config.strategy_params == {"beta": 0.7, "num_strata": 4}
        assert config.query_size == 25
        assert config.budget == 50.0
        assert config.labeler.kind == "api_llm"
        assert config.labeler.model == "remote-x"
        assert config.labeler.max_tokens == 128
        # base_url implies a remote labeling backend unless stated otherwise
        assert config.labeler.backend == "remote-openai-compatible"
        assert config.labeler.fixed_estimate == 0.002
        assert config.prices.per_label == 0.05
        assert config.metrics == ["relaxed_exact_match", "rouge1"]
        assert config.decode.max_tokens == 32
        assert config.stop_labeled_count == 500
        assert config.trainer.kind == "command"
        assert config.train_params == {"epochs": 5, "lr": 3e-5}
        assert config.data.input_field == "question"
        assert config.data.id_field == "qid"
        assert config.to_document() == doc

    def test_ed_mode_forces_single_iteration(self):
        config = resolve_config({"al.mode": "ed"})
        assert config.num_iterations == 1

    def test_invalid_doc_raises(self):
        with pytest.raises(ConfigError) as exc:
            resolve_config({"al.budget": -3})
        assert exc.value.field_errors[0]["field"] == "al.budget"

    def test_prompt_template_file(self, tmp_path):
        path = tmp_path / "prompt.txt"
        path.write_text("Please answer:\n{input}\n")
        config = resolve_config({"labeller.prompt_template_file": str(path)})
        assert config.labeler.prompt_template == "Please answer:\n{input}\n"

    def test_prompt_template_file_missing(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            resolve_config(
                {"labeller.prompt_template_file": str(tmp_path / "nope.txt")}
            )
        assert exc.value.field_errors[0]["field"] == "labeller.prompt_template_file"

    def test_prompt_template_file_without_placeholder(self, tmp_path):
        path = tmp_path / "prompt.txt"
        path.write_text("no slot here")
        with pytest.raises(ConfigError):
            resolve_config({"labeller.prompt_template_file": str(path)})


class TestDumpConfig:
    def test_sorted_json_round_trip(self, tmp_path):
        config = resolve_config({"al": "random", "al.seed": 3})
        path = tmp_path / "config.json"
        dump_config(config, path)
        loaded = json.loads(path.read_text())
        assert loaded == {"al": "random", "al.seed": 3}
        assert list(loaded) == sorted(loaded)

    def test_document_is_a_copy(self):
        config = RunConfig(raw={"al": "random"})
        doc = config.to_document()
        doc["al"] = "changed"
        assert config.raw["al"] == "random"
