"""The annotation loop: select, label, train, evaluate, record, checkpoint.

Each round runs four phases and checkpoints after every one, so a killed
run resumes where it stopped without repeating paid annotation calls (the
annotation log is replayed instead). All seeded decisions derive from
(config seed, round index), which makes resumed runs byte-identical to
uninterrupted ones on the deterministic mock backend.
"""

from __future__ import annotations

import json
import logging
import math
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from . import pool as pool_mod
from .config import RunConfig, dump_config
from .errors import CheckpointError, ConfigError, LabelLoopError
from .gateway import (
    Backend,
    BackendDescriptor,
    CommandTrainer,
    DecodeParams,
    HttpTrainer,
    NoOpTrainer,
    Trainer,
    build_backend,
    embed as gateway_embed,
    fine_tune,
    generate as gateway_generate,
    stable_hash,
)
from .labeling import (
    AnnotationLog,
    AnnotationRecord,
    CostLedger,
    LlmTask,
    TaskQueue,
    annotate_batch_llm,
    oracle_annotate,
)
from .metrics import MetricReport, evaluate_model
from .pool import Dataset, FieldMap, PoolState, load_dataset
from .strategies import Strategy, StrategyContext, get_strategy

logger = logging.getLogger(__name__)

CURVE_SCHEMA_VERSION = 1

MIN_EVAL_SIZE = 5

# stop reasons
STOP_BUDGET = "budget"
STOP_LABELED_COUNT = "labeled_count"
STOP_METRIC = "metric_threshold"
STOP_ITERATIONS = "iteration_limit"
STOP_EXHAUSTED = "exhausted"
STOP_STARVED = "starved"


@dataclass
class RunResult:
    stop_reason: str
    iterations: int
    labeled_count: int
    model_ref: str
    curve: list[dict[str, Any]]
    run_dir: Path


@dataclass
class StoppingCriteria:
    budget: float | None = None
    labeled_count: int | None = None
    metric: str | None = None
    metric_threshold: float | None = None
    rounds_limit: int = 1


def check_stopping(
    state: PoolState,
    criteria: StoppingCriteria,
    ledger: CostLedger,
    latest_metrics: dict[str, float] | None,
    *,
    budget_blocked: bool = False,
    starved: bool = False,
) -> str | None:
    """Return a stop reason or None; criteria are a disjunction.

    Checked in order: budget, labeled_count, metric_threshold,
    iteration_limit, then the structural conditions (pool exhausted,
    labeler starved).
    """
    if ledger.exhausted or budget_blocked:
        return STOP_BUDGET
    if (
        criteria.labeled_count is not None
        and len(state.labeled_ids) >= criteria.labeled_count
    ):
        return STOP_LABELED_COUNT
    if criteria.metric is not None and latest_metrics is not None:
        value = latest_metrics.get(criteria.metric)
        if value is not None and value >= (criteria.metric_threshold or 0.0):
            return STOP_METRIC
    if state.iteration >= criteria.rounds_limit:
        return STOP_ITERATIONS
    if not state.unlabeled_ids:
        return STOP_EXHAUSTED
    if starved:
        return STOP_STARVED
    return None


def build_trainer(config: RunConfig) -> Trainer:
    kind = config.trainer.kind
    if kind == "noop":
        return NoOpTrainer()
    if kind == "command":
        return CommandTrainer(config.trainer.cmd, timeout=config.trainer.timeout)
    if kind == "http":
        return HttpTrainer(config.trainer.url, timeout=config.trainer.timeout)
    raise ConfigError([{"field": "trainer", "message": f"unknown trainer {kind!r}"}])


def build_dataset(config: RunConfig) -> tuple[Dataset, Dataset | None]:
    """Load the train pool and optional held-out test file."""
    if not config.data.path:
        raise ConfigError([{"field": "data.path", "message": "dataset path required"}])
    fields = FieldMap(
        input=config.data.input_field,
        references=config.data.reference_field,
        id=config.data.id_field,
    )
    main = load_dataset(config.data.path, fields)
    test: Dataset | None = None
    if config.data.test_path:
        test = load_dataset(config.data.test_path, fields)
        if config.data.id_field is None:
            # ordinal ids would collide with the main file
            test = Dataset(
                [
                    pool_mod.Instance(
                        id=f"test-{inst.id}",
                        input=inst.input,
                        references=inst.references,
                        meta=inst.meta,
                    )
                    for inst in test.instances()
                ]
            )
        merged = Dataset(main.instances() + test.instances())
        return merged, test
    return main, None


class ActiveLearningRun:
    """One orchestrated run over a dataset.

    Components (backend, trainer, evaluator, queue) are built from the
    config but can be injected, which is how the benchmark harness plugs in
    synthetic tasks and tests plug in fakes.
    """

    def __init__(
        self,
        config: RunConfig,
        run_dir: str | Path,
        *,
        dataset: Dataset | None = None,
        test_dataset: Dataset | None = None,
        backend: Backend | None = None,
        labeler_backend: Backend | None = None,
        trainer: Trainer | None = None,
        evaluator: Callable[..., MetricReport | None] | None = None,
        queue: TaskQueue | None = None,
        phase_callback: Callable[[int, str], None] | None = None,
        resume: bool = False,
    ):
        self.config = config
        self.run_dir = Path(run_dir)
        self._resume = resume
        self._phase_callback = phase_callback
        self._lock = threading.Lock()
        self._status = "created"
        self._stop_reason: str | None = None
        self._pending_stop: str | None = None
        self._latest_metrics: dict[str, float] | None = None
        self._current_phase: str | None = None

        if dataset is None:
            dataset, test_dataset = build_dataset(config)
        self.dataset = dataset
        self._test_dataset = test_dataset

        self.backend = backend if backend is not None else build_backend(config.model)
        self.labeler_backend = labeler_backend
        if self.labeler_backend is None and config.labeler.kind in (
            "api_llm",
            "local_llm",
        ):
            self.labeler_backend = build_backend(
                BackendDescriptor(
                    kind=config.labeler.backend,
                    base_url=config.labeler.base_url,
                    model=config.labeler.model or config.model.model,
                    api_key_env=config.labeler.api_key_env,
                    seed=config.model.seed,
                    embed_dim=config.model.embed_dim,
                )
            )
        self.trainer = trainer if trainer is not None else build_trainer(config)
        self._evaluator = evaluator
        self.queue = queue
        if self.queue is None and config.labeler.kind == "human":
            self.queue = TaskQueue(lease_seconds=config.labeler.lease_seconds)
        if self.queue is not None and self.queue._on_resolve is None:
            self.queue._on_resolve = self._on_human_resolve

        self.pool: PoolState | None = None
        self.ledger = CostLedger(budget=config.budget)
        self.log: AnnotationLog | None = None
        self.curve_points: list[dict[str, Any]] = []
        self._reference_pool_size = 0
        self._restored_phase: dict[str, Any] | None = None
        self._emb_cache: dict[tuple[str, str], Any] = {}
        self._gen_cache: dict[tuple[str, str, int], Any] = {}
        self._criteria = StoppingCriteria(
            budget=config.budget,
            labeled_count=config.stop_labeled_count,
            metric=config.stop_metric,
            metric_threshold=config.stop_metric_threshold,
            rounds_limit=1 if config.mode == "ed" else config.num_iterations + 1,
        )

    # --- public surface ----------------------------------------------------

    def execute(self) -> RunResult:
        try:
            self._prepare()
            with self._lock:
                self._status = "running"
            while True:
                # a restored half-finished round must complete before the
                # stopping rules run again, or a kill during the final round
                # would lose that round's curve row
                resuming_round = (
                    self._restored_phase is not None
                    and self._restored_phase.get("round") == self.pool.iteration
                )
                if not resuming_round:
                    reason = check_stopping(
                        self.pool,
                        self._criteria,
                        self.ledger,
                        self._latest_metrics,
                        budget_blocked=self._pending_stop == STOP_BUDGET,
                        starved=self._pending_stop == STOP_STARVED,
                    )
                    if reason is not None:
                        self._stop_reason = reason
                        break
                self._run_round()
            self._finish()
        except Exception:
            with self._lock:
                self._status = "failed"
            raise
        with self._lock:
            self._status = "done"
        return RunResult(
            stop_reason=self._stop_reason or "",
            iterations=self.pool.iteration,
            labeled_count=len(self.pool.labeled_ids),
            model_ref=self.pool.model_ref,
            curve=list(self.curve_points),
            run_dir=self.run_dir,
        )

    def status(self) -> dict[str, Any]:
        with self._lock:
            state = self.pool
            return {
                "status": self._status,
                "phase": self._current_phase,
                "iteration": state.iteration if state else 0,
                "labeled": len(state.labeled_ids) if state else 0,
                "unlabeled": len(state.unlabeled_ids) if state else 0,
                "test": len(state.test_ids) if state else 0,
                "model_ref": state.model_ref if state else self.config.model.model,
                "stop_reason": self._stop_reason,
                "strategy": self.config.strategy,
                "mode": self.config.mode,
                "ledger": self.ledger.snapshot(),
            }

    # --- preparation and persistence ----------------------------------------

    def _prepare(self) -> None:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        log_path = self.run_dir / "annotations.jsonl"
        if self._resume and pool_mod.has_checkpoint(self.run_dir):
            ckpt = pool_mod.restore(self.run_dir)
            self.pool = ckpt.pool_state
            if ckpt.ledger:
                self.ledger = CostLedger.from_snapshot(ckpt.ledger)
            self._restored_phase = ckpt.phase
            extra = ckpt.extra or {}
            self._reference_pool_size = int(
                extra.get("reference_pool_size", len(self.pool.unlabeled_ids))
            )
            self._pending_stop = extra.get("pending_stop")
            self.log = AnnotationLog(log_path)
            self._replay_annotations()
            self._load_curve()
            return

        self.pool = pool_mod.init_split(
            self.dataset,
            self.config.test_fraction,
            self.config.seed,
            test_dataset=self._test_dataset,
        )
        self.pool.model_ref = self.config.model.model
        self.pool.rng_seed = self.config.seed
        self._reference_pool_size = len(self.pool.unlabeled_ids)
        self.log = AnnotationLog(log_path)
        dump_config(self.config, self.run_dir / "config.json")
        self._checkpoint(phase=None)

    def _replay_annotations(self) -> None:
        for instance_id in self.pool.labeled_ids:
            record = self.log.get(instance_id)
            if record is None or record.skipped:
                raise CheckpointError(
                    f"labeled instance {instance_id!r} has no annotation record"
                )
            inst = self.dataset[instance_id]
            inst.annotation = record.annotation
            inst.annotator = record.annotator

    def _load_curve(self) -> None:
        curve_path = self.run_dir / "curve.jsonl"
        self.curve_points = []
        if curve_path.exists():
            with open(curve_path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        self.curve_points.append(json.loads(line))
        if self.curve_points:
            last = self.curve_points[-1]
            self._latest_metrics = dict(last.get("metrics") or {}) or None

    def _checkpoint(self, phase: dict[str, Any] | None) -> None:
        pool_mod.checkpoint(
            self.pool,
            self.run_dir,
            ledger=self.ledger.snapshot(),
            phase=phase,
            extra={
                "reference_pool_size": self._reference_pool_size,
                "pending_stop": self._pending_stop,
            },
        )

    def _write_curve(self) -> None:
        curve_path = self.run_dir / "curve.jsonl"
        tmp = curve_path.with_suffix(".jsonl.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for row in self.curve_points:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, curve_path)

    def _append_record(self, row: dict[str, Any], timings: dict[str, float]) -> None:
        full = dict(row)
        full["phase_seconds"] = timings
        with open(self.run_dir / "records.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(full, sort_keys=True) + "\n")

    def _notify(self, round_index: int, phase_name: str) -> None:
        with self._lock:
            self._current_phase = phase_name
        if self._phase_callback is not None:
            self._phase_callback(round_index, phase_name)

    # --- the round ----------------------------------------------------------

    def _run_round(self) -> None:
        round_index = self.pool.iteration
        timings: dict[str, float] = {}
        phase = None
        if (
            self._restored_phase is not None
            and self._restored_phase.get("round") == round_index
        ):
            phase = self._restored_phase
        self._restored_phase = None

        if phase is None:
            started = time.monotonic()
            selected, strategy_used = self._select(round_index)
            timings["select"] = time.monotonic() - started
            phase = {
                "round": round_index,
                "name": "selected",
                "selected_ids": selected,
                "strategy_used": strategy_used,
                # ids that already have a log record (from earlier rounds, so
                # their cost is in the checkpointed ledger); anything logged
                # after this point is partial work of this round and must be
                # re-charged when replayed
                "pre_logged": [i for i in selected if self.log.get(i) is not None],
            }
            self._checkpoint(phase=phase)
            self._notify(round_index, "selected")

        if phase["name"] == "selected":
            started = time.monotonic()
            moved, skipped, budget_blocked = self._label(
                phase["selected_ids"],
                set(phase.get("pre_logged", [])),
                round_index,
            )
            timings["label"] = time.monotonic() - started
            phase = {
                **phase,
                "name": "labeled",
                "moved": moved,
                "skipped": skipped,
                "budget_blocked": budget_blocked,
            }
            self._checkpoint(phase=phase)
            self._notify(round_index, "labeled")

        if phase["name"] == "labeled":
            started = time.monotonic()
            if phase["moved"]:
                labeled_instances = [self.dataset[i] for i in self.pool.labeled_ids]
                new_ref = fine_tune(
                    self.trainer,
                    self.pool.model_ref,
                    labeled_instances,
                    self.config.train_params,
                )
                self.pool.model_ref = new_ref
            timings["train"] = time.monotonic() - started
            phase = {**phase, "name": "trained"}
            self._checkpoint(phase=phase)
            self._notify(round_index, "trained")

        if phase["name"] == "trained":
            started = time.monotonic()
            self._record_round(phase, timings, started)
            self._notify(round_index, "recorded")

    def _record_round(
        self, phase: dict[str, Any], timings: dict[str, float], started: float
    ) -> None:
        report = self._evaluate()
        timings["evaluate"] = time.monotonic() - started
        row = {
            "schema_version": CURVE_SCHEMA_VERSION,
            "iteration": phase["round"],
            "labeled_count": len(self.pool.labeled_ids),
            "selected_ids": phase["selected_ids"],
            "moved_ids": phase["moved"],
            "skipped": phase["skipped"],
            "strategy_used": phase["strategy_used"],
            "metrics": report.values if report is not None else {},
            "eval_count": report.count if report is not None else 0,
            "skipped_eval": report is None,
            "ledger": {
                k: v
                for k, v in self.ledger.snapshot().items()
                if k in ("input_tokens", "output_tokens", "spent")
            },
        }
        self.curve_points.append(row)
        self._write_curve()
        self._append_record(row, timings)
        if report is not None:
            self._latest_metrics = dict(report.values)

        if phase.get("budget_blocked"):
            self._pending_stop = STOP_BUDGET
        elif not phase["moved"]:
            self._pending_stop = STOP_STARVED

        self.pool.iteration += 1
        self._checkpoint(phase=None)

    # --- selection ----------------------------------------------------------

    def _select(self, round_index: int) -> tuple[list[str], str]:
        strategy = get_strategy(self.config.strategy)
        strategy_used = strategy.name
        if round_index == 0 and strategy.needs_generations:
            strategy = get_strategy("random")
            strategy_used = "random_fallback"
            logger.info(
                "round 0: %s needs generations from an untrained model; "
                "falling back to random selection",
                self.config.strategy,
            )
        size_spec = (
            self.config.init_query_size if round_index == 0 else self.config.query_size
        )
        size = pool_mod.resolve_batch_size(
            size_spec, self._reference_pool_size, len(self.pool.unlabeled_ids)
        )
        ctx = self._prepare_context(strategy, round_index)
        selected = strategy.select(ctx, size)
        if len(selected) != size:
            raise LabelLoopError(
                f"strategy returned {len(selected)} ids, expected {size}"
            )
        return selected, strategy_used

    def _prepare_context(
        self, strategy: Strategy, round_index: int
    ) -> StrategyContext:
        state = self.pool
        inputs = self.dataset.inputs_for(state.unlabeled_ids + state.labeled_ids)
        embeddings: dict[str, Any] = {}
        generations: dict[str, Any] = {}

        if strategy.needs_embeddings:
            wanted = state.unlabeled_ids + state.labeled_ids
            missing = [
                i for i in wanted if (state.model_ref, i) not in self._emb_cache
            ]
            for chunk_start in range(0, len(missing), 256):
                chunk = missing[chunk_start : chunk_start + 256]
                vectors = gateway_embed(
                    self.backend, [self.dataset[i].input for i in chunk]
                )
                for instance_id, vector in zip(chunk, vectors):
                    self._emb_cache[(state.model_ref, instance_id)] = vector.values
            embeddings = {
                i: self._emb_cache[(state.model_ref, i)] for i in wanted
            }

        if strategy.needs_generations:
            plan = strategy.sampling_plan(self.config.strategy_params)
            decode = DecodeParams(
                temperature=(
                    plan.temperature
                    if plan.temperature is not None
                    else self.config.decode.temperature
                ),
                top_p=self.config.decode.top_p,
                max_tokens=self.config.decode.max_tokens,
                num_samples=plan.num_samples,
                logprobs_k=int(
                    self.config.strategy_params.get("logprobs_k", 20)
                ),
            )
            recipe = stable_hash(
                decode.temperature,
                decode.top_p,
                decode.max_tokens,
                decode.num_samples,
                decode.logprobs_k,
            )
            for instance_id in state.unlabeled_ids:
                key = (state.model_ref, instance_id, recipe)
                if key not in self._gen_cache:
                    self._gen_cache[key] = gateway_generate(
                        self.backend,
                        state.model_ref,
                        self.dataset[instance_id].input,
                        decode,
                    )
                generations[instance_id] = self._gen_cache[key]

        return StrategyContext(
            unlabeled_ids=list(state.unlabeled_ids),
            labeled_ids=list(state.labeled_ids),
            inputs=inputs,
            annotations={
                i: self.dataset[i].annotation or "" for i in state.labeled_ids
            },
            embeddings=embeddings,
            generations=generations,
            params=dict(self.config.strategy_params),
            seed=stable_hash("select", self.config.seed, round_index) % (2**31),
        )

    # --- labeling -----------------------------------------------------------

    def _label(
        self, selected: list[str], pre_logged: set[str], round_index: int
    ) -> tuple[list[str], list[dict[str, str]], bool]:
        kind = self.config.labeler.kind
        annotated: list[tuple[str, str, str]] = []
        skipped: list[dict[str, str]] = []
        budget_blocked = False

        # records present before this round started: reuse without charging,
        # their cost already sits in the ledger
        for instance_id in sorted(pre_logged):
            record = self.log.get(instance_id)
            if record is None:
                continue
            if record.skipped:
                skipped.append({"id": instance_id, "reason": "skipped"})
            else:
                annotated.append((instance_id, record.annotation, record.annotator))
        remaining = [i for i in selected if i not in pre_logged]

        if kind in ("oracle", "noisy_oracle"):
            fresh = [i for i in remaining if self.log.get(i) is None]
            for instance_id in remaining:
                record = self.log.get(instance_id)
                if record is not None:
                    annotated.append(
                        (instance_id, record.annotation, record.annotator)
                    )
            noise = (
                self.config.labeler.noise_p if kind == "noisy_oracle" else 0.0
            )
            results = oracle_annotate(
                [self.dataset[i] for i in fresh],
                noise_p=noise,
                seed=self.config.seed,
            )
            for instance_id, annotation, annotator in results:
                self.log.append(
                    AnnotationRecord(
                        instance_id=instance_id,
                        annotation=annotation,
                        annotator=annotator,
                        timestamp=time.time(),
                    )
                )
                annotated.append((instance_id, annotation, annotator))

        elif kind in ("api_llm", "local_llm"):
            tasks = [LlmTask(i, self.dataset[i].input) for i in remaining]
            result = annotate_batch_llm(
                tasks,
                self.labeler_backend,
                self.config.labeler.model or self.config.model.model,
                self.config.labeler.prompt_template,
                self.config.prices,
                self.ledger,
                batch_mode=self.config.labeler.batch_mode,
                max_tokens=self.config.labeler.max_tokens,
                fixed_estimate=self.config.labeler.fixed_estimate,
                log=self.log,
                annotator_name=kind,
            )
            for item in result.completed:
                annotated.append((item.instance_id, item.annotation, kind))
            for deferred in result.deferred:
                skipped.append({"id": deferred.instance_id, "reason": deferred.reason})
            budget_blocked = result.budget_blocked

        elif kind == "human":
            moved_fresh, human_skipped, human_blocked = self._label_human(
                remaining, round_index
            )
            annotated.extend(moved_fresh)
            skipped.extend(human_skipped)
            budget_blocked = human_blocked

        else:
            raise ConfigError(
                [{"field": "labeller", "message": f"unknown labeller {kind!r}"}]
            )

        # keep selection order regardless of replay/completion interleaving
        order = {instance_id: n for n, instance_id in enumerate(selected)}
        annotated.sort(key=lambda item: order[item[0]])

        new_state, move_skipped = pool_mod.move_to_labeled(
            self.pool, self.dataset, annotated
        )
        for item in move_skipped:
            skipped.append({"id": item.instance_id, "reason": item.reason})
        self.pool = new_state
        moved = [
            instance_id
            for instance_id, _, _ in annotated
            if instance_id in set(new_state.labeled_ids)
        ]
        return moved, skipped, budget_blocked

    def _label_human(
        self, remaining: list[str], round_index: int
    ) -> tuple[list[tuple[str, str, str]], list[dict[str, str]], bool]:
        annotated: list[tuple[str, str, str]] = []
        skipped: list[dict[str, str]] = []

        # logged records here are this round's partial work recovered after a
        # restart; the checkpointed ledger predates them, so charge again
        fresh = []
        for instance_id in remaining:
            record = self.log.get(instance_id)
            if record is None:
                fresh.append(instance_id)
                continue
            self.ledger.charge(
                record.input_tokens, record.output_tokens, record.cost
            )
            annotated.append((instance_id, record.annotation, record.annotator))

        per_label = self.config.prices.per_label
        to_enqueue = fresh
        blocked = False
        if self.ledger.budget is not None and per_label:
            affordable = int(
                (self.ledger.budget - self.ledger.spent) / per_label + 1e-9
            )
            affordable = max(affordable, 0)
            if affordable < len(fresh):
                blocked = True
                to_enqueue = fresh[:affordable]
                skipped.extend(
                    {"id": i, "reason": "budget"} for i in fresh[affordable:]
                )

        if to_enqueue:
            open_instances = {
                t.instance_id
                for t in self.queue.tasks()
                if t.status in ("pending", "claimed")
            }
            items = [
                (i, self.dataset[i].input)
                for i in to_enqueue
                if i not in open_instances
            ]
            if items:
                self.queue.enqueue(items, iteration=round_index)
            with self._lock:
                self._status = "waiting_human"
            self.queue.wait_resolved()
            with self._lock:
                self._status = "running"

        enqueue_set = set(to_enqueue)
        for task in self.queue.tasks():
            if task.instance_id not in enqueue_set:
                continue
            if task.created_iteration != round_index:
                continue
            if task.status == "done":
                annotated.append(
                    (task.instance_id, task.annotation or "", task.claimant or "human")
                )
            elif task.status == "skipped":
                skipped.append({"id": task.instance_id, "reason": "skipped"})
        return annotated, skipped, blocked

    def _on_human_resolve(self, task) -> None:
        """Queue callback: log completed annotations and charge per-label fees.

        Skips are not logged; a skipped instance stays in the pool and may be
        queued again in a later round.
        """
        if self.log is None or task.status != "done":
            return
        if self.log.get(task.instance_id) is not None:
            return
        cost = 0.0
        if self.config.prices.per_label:
            cost = float(self.config.prices.per_label)
            self.ledger.charge(0, 0, cost)
        self.log.append(
            AnnotationRecord(
                instance_id=task.instance_id,
                annotation=task.annotation or "",
                annotator=task.claimant or "human",
                timestamp=time.time(),
                cost=cost,
            )
        )

    # --- evaluation ----------------------------------------------------------

    def _evaluate(self) -> MetricReport | None:
        if self._evaluator is not None:
            return self._evaluator(self.pool.model_ref, self.dataset, self.pool)
        eval_ids = self.pool.test_ids
        if not eval_ids:
            labeled = sorted(self.pool.labeled_ids)
            if labeled:
                rng = random.Random(
                    stable_hash("evalsplit", self.config.seed, self.pool.iteration)
                )
                shuffled = list(labeled)
                rng.shuffle(shuffled)
                eval_ids = shuffled[: math.ceil(0.2 * len(shuffled))]
        if len(eval_ids) < MIN_EVAL_SIZE:
            return None
        instances = [self.dataset[i] for i in eval_ids]
        return evaluate_model(
            self.backend,
            self.pool.model_ref,
            instances,
            self.config.metrics,
            self.config.decode,
        )

    def _finish(self) -> None:
        self._checkpoint(phase=None)
        result = {
            "schema_version": CURVE_SCHEMA_VERSION,
            "stop_reason": self._stop_reason,
            "iterations": self.pool.iteration,
            "labeled_count": len(self.pool.labeled_ids),
            "model_ref": self.pool.model_ref,
            "ledger": {
                k: v
                for k, v in self.ledger.snapshot().items()
                if k in ("input_tokens", "output_tokens", "spent")
            },
        }
        with open(self.run_dir / "result.json", "w", encoding="utf-8") as fh:
            json.dump(result, fh, sort_keys=True, indent=2)
            fh.write("\n")


def run_active_learning(
    config: RunConfig, run_dir: str | Path, *, resume: bool = False, **components
) -> RunResult:
    """Convenience wrapper: build a run, execute it, return the result."""
    run = ActiveLearningRun(config, run_dir, resume=resume, **components)
    return run.execute()
