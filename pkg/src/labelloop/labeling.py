"""Annotation routing: LLM agents with budget accounting, human queues, oracles.

Budget enforcement is conservative by design. Before each paid call the
projected spend (current spend plus a per-task worst-case estimate) is
checked against the budget; the estimate is the rendered prompt's
whitespace-token count priced as input plus max_tokens priced as output,
so the actual call cost can never exceed it on the mock backend. A fixed
per-task estimate can be configured instead.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .errors import (
    AnnotationError,
    AuthorizationError,
    ConfigError,
    QueueError,
    SimulationError,
    StateError,
)
from .gateway import Backend, DecodeParams, Usage, generate

DEFAULT_LEASE_SECONDS = 1800.0


@dataclass(frozen=True)
class PriceSheet:
    """Per-million-token prices and the batch-mode discount factor."""

    input_per_1m: float = 0.0
    output_per_1m: float = 0.0
    batch_discount: float = 0.5
    per_label: float | None = None  # optional flat price for human labels

    def validate(self) -> None:
        errors = []
        if self.input_per_1m < 0:
            errors.append(
                {"field": "labeller.price.input_per_1m", "message": "must be >= 0"}
            )
        if self.output_per_1m < 0:
            errors.append(
                {"field": "labeller.price.output_per_1m", "message": "must be >= 0"}
            )
        if not 0 < self.batch_discount <= 1:
            errors.append(
                {
                    "field": "labeller.price.batch_discount",
                    "message": "must be in (0, 1]",
                }
            )
        if self.per_label is not None and self.per_label < 0:
            errors.append(
                {"field": "labeller.price.per_label", "message": "must be >= 0"}
            )
        if errors:
            raise ConfigError(errors)


def compute_cost(
    input_tokens: int, output_tokens: int, prices: PriceSheet, batch: bool = False
) -> float:
    """Price one call: token counts times per-million rates, batch discounted."""
    if input_tokens < 0 or output_tokens < 0:
        raise ValueError("token counts must be non-negative")
    cost = (
        input_tokens * prices.input_per_1m / 1e6
        + output_tokens * prices.output_per_1m / 1e6
    )
    if batch:
        cost *= prices.batch_discount
    return cost


class CostLedger:
    """Monotone token and spend totals, safe for concurrent charging."""

    def __init__(self, budget: float | None = None):
        if budget is not None and budget <= 0:
            raise ConfigError([{"field": "al.budget", "message": "must be positive"}])
        self.budget = budget
        self.input_tokens = 0
        self.output_tokens = 0
        self.spent = 0.0
        self._lock = threading.Lock()

    def charge(self, input_tokens: int, output_tokens: int, cost: float) -> None:
        if input_tokens < 0 or output_tokens < 0 or cost < 0:
            raise ValueError("ledger charges must be non-negative")
        with self._lock:
            self.input_tokens += input_tokens
            self.output_tokens += output_tokens
            self.spent += cost

    @property
    def exhausted(self) -> bool:
        return self.budget is not None and self.spent >= self.budget

    def snapshot(self) -> dict[str, Any]:
        with self._lock:
            return {
                "input_tokens": self.input_tokens,
                "output_tokens": self.output_tokens,
                "spent": self.spent,
                "budget": self.budget,
            }

    @classmethod
    def from_snapshot(cls, doc: dict[str, Any]) -> "CostLedger":
        ledger = cls(budget=doc.get("budget"))
        ledger.input_tokens = int(doc.get("input_tokens", 0))
        ledger.output_tokens = int(doc.get("output_tokens", 0))
        ledger.spent = float(doc.get("spent", 0.0))
        return ledger


# --- annotation log --------------------------------------------------------


@dataclass
class AnnotationRecord:
    instance_id: str
    annotation: str
    annotator: str
    timestamp: float
    input_tokens: int = 0
    output_tokens: int = 0
    cost: float = 0.0
    skipped: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.instance_id,
            "annotation": self.annotation,
            "annotator": self.annotator,
            "timestamp": self.timestamp,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "cost": self.cost,
            "skipped": self.skipped,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "AnnotationRecord":
        return cls(
            instance_id=str(doc["id"]),
            annotation=str(doc.get("annotation", "")),
            annotator=str(doc.get("annotator", "")),
            timestamp=float(doc.get("timestamp", 0.0)),
            input_tokens=int(doc.get("input_tokens", 0)),
            output_tokens=int(doc.get("output_tokens", 0)),
            cost=float(doc.get("cost", 0.0)),
            skipped=bool(doc.get("skipped", False)),
        )


class AnnotationLog:
    """Append-only JSONL log of annotation events, one record per instance.

    The log is the source of truth for replaying labeling work after a
    restart: recorded calls are never re-issued (and never re-paid).
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._records: list[AnnotationRecord] = []
        self._by_id: dict[str, AnnotationRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    record = AnnotationRecord.from_dict(json.loads(line))
                    self._records.append(record)
                    self._by_id[record.instance_id] = record

    def append(self, record: AnnotationRecord) -> None:
        with self._lock:
            if record.instance_id in self._by_id:
                raise StateError(
                    f"annotation log already has a record for "
                    f"{record.instance_id!r}"
                )
            self._records.append(record)
            self._by_id[record.instance_id] = record
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")

    def get(self, instance_id: str) -> AnnotationRecord | None:
        with self._lock:
            return self._by_id.get(instance_id)

    def records(self) -> list[AnnotationRecord]:
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def replay_spent(self) -> float:
        """Sum recorded costs in log order (must equal the ledger's spend)."""
        return sum(r.cost for r in self.records())


# --- LLM annotation agent --------------------------------------------------


@dataclass
class LlmTask:
    instance_id: str
    input_text: str


@dataclass
class CompletedAnnotation:
    instance_id: str
    annotation: str
    usage: Usage
    cost: float


@dataclass
class DeferredTask:
    instance_id: str
    reason: str


@dataclass
class BatchResult:
    completed: list[CompletedAnnotation]
    deferred: list[DeferredTask]

    @property
    def budget_blocked(self) -> bool:
        return any(d.reason == "budget" for d in self.deferred)


def render_prompt(template: str, input_text: str) -> str:
    if "{input}" not in template:
        raise ConfigError(
            [
                {
                    "field": "labeller.prompt_template",
                    "message": "template must contain the {input} placeholder",
                }
            ]
        )
    return template.replace("{input}", input_text)


def estimate_task_cost(
    prompt: str,
    max_tokens: int,
    prices: PriceSheet,
    batch: bool,
    fixed_estimate: float | None = None,
) -> float:
    """Worst-case cost bound for one annotation call.

    Whitespace-token count of the rendered prompt priced as input plus
    max_tokens priced as output. A configured fixed estimate wins outright.
    """
    if fixed_estimate is not None:
        return fixed_estimate
    return compute_cost(len(prompt.split()), max_tokens, prices, batch)


def annotate_batch_llm(
    tasks: Sequence[LlmTask],
    backend: Backend,
    model_ref: str,
    prompt_template: str,
    prices: PriceSheet,
    ledger: CostLedger,
    *,
    batch_mode: bool = False,
    max_tokens: int = 256,
    fixed_estimate: float | None = None,
    log: AnnotationLog | None = None,
    annotator_name: str = "llm",
) -> BatchResult:
    """Annotate tasks with an LLM, stopping before the budget would overflow.

    Tasks already present in the annotation log are replayed (annotation,
    usage and cost taken from the log) without a new call. Remaining tasks
    issue calls one at a time; the moment projected spend would exceed the
    budget, all leftover tasks come back deferred with reason "budget".
    """
    prices.validate()
    render_prompt(prompt_template, "")  # placeholder check up front
    decode = DecodeParams(
        temperature=0.0, top_p=1.0, max_tokens=max_tokens, num_samples=1
    )
    completed: list[CompletedAnnotation] = []
    deferred: list[DeferredTask] = []
    blocked = False
    for task in tasks:
        if blocked:
            deferred.append(DeferredTask(task.instance_id, "budget"))
            continue

        replayed = log.get(task.instance_id) if log is not None else None
        if replayed is not None:
            if replayed.skipped:
                deferred.append(DeferredTask(task.instance_id, "skipped"))
                continue
            ledger.charge(
                replayed.input_tokens, replayed.output_tokens, replayed.cost
            )
            completed.append(
                CompletedAnnotation(
                    instance_id=task.instance_id,
                    annotation=replayed.annotation,
                    usage=Usage(replayed.input_tokens, replayed.output_tokens),
                    cost=replayed.cost,
                )
            )
            continue

        prompt = render_prompt(prompt_template, task.input_text)
        if ledger.budget is not None:
            estimate = estimate_task_cost(
                prompt, max_tokens, prices, batch_mode, fixed_estimate
            )
            if ledger.spent + estimate > ledger.budget:
                blocked = True
                deferred.append(DeferredTask(task.instance_id, "budget"))
                continue

        results = generate(backend, model_ref, prompt, decode)
        result = results[0]
        cost = compute_cost(
            result.usage.input_tokens, result.usage.output_tokens, prices, batch_mode
        )
        ledger.charge(result.usage.input_tokens, result.usage.output_tokens, cost)
        record = AnnotationRecord(
            instance_id=task.instance_id,
            annotation=result.text,
            annotator=annotator_name,
            timestamp=time.time(),
            input_tokens=result.usage.input_tokens,
            output_tokens=result.usage.output_tokens,
            cost=cost,
        )
        if log is not None:
            log.append(record)
        completed.append(
            CompletedAnnotation(
                instance_id=task.instance_id,
                annotation=result.text,
                usage=result.usage,
                cost=cost,
            )
        )
    return BatchResult(completed=completed, deferred=deferred)


# --- simulated oracles -----------------------------------------------------


def oracle_annotate(instances: Iterable, *, noise_p: float = 0.0, seed: int = 0
                    ) -> list[tuple[str, str, str]]:
    """Answer with each instance's first reference, optionally corrupted.

    With probability ``noise_p`` (seeded per instance id) the returned label
    is a deterministic corruption of the truth. Instances without references
    raise SimulationError naming the offender.
    """
    out = []
    for inst in instances:
        if not inst.references:
            raise SimulationError(
                f"oracle has no reference for instance {inst.id!r}"
            )
        truth = inst.references[0]
        annotator = "oracle"
        if noise_p > 0:
            rng = random.Random(f"noisy|{seed}|{inst.id}")
            if rng.random() < noise_p:
                corrupted = truth[::-1]
                truth = corrupted if corrupted != truth else truth + " x"
                annotator = "noisy_oracle"
        out.append((inst.id, truth, annotator))
    return out


# --- human annotation queue ------------------------------------------------

PENDING = "pending"
CLAIMED = "claimed"
DONE = "done"
SKIPPED = "skipped"


@dataclass
class AnnotationTask:
    """One unit of human work."""

    task_id: str
    instance_id: str
    input_text: str
    created_iteration: int = 0
    status: str = PENDING
    claimant: str | None = None
    lease_expires_at: float | None = None
    annotation: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "instance_id": self.instance_id,
            "input_text": self.input_text,
            "created_iteration": self.created_iteration,
            "status": self.status,
            "claimant": self.claimant,
            "lease_expires_at": self.lease_expires_at,
        }


@dataclass
class SubmitAck:
    task_id: str
    status: str
    duplicate: bool = False


class TaskQueue:
    """FIFO human-annotation queue with atomic claims and lease expiry.

    Claims hand out the oldest pending task under a lease; expired leases
    return tasks to pending. Submits are idempotent: resubmitting the same
    text (or the same idempotency key) acknowledges without duplicating the
    log record.
    """

    def __init__(
        self,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        clock: Callable[[], float] = time.monotonic,
        on_resolve: Callable[[AnnotationTask], None] | None = None,
    ):
        self.lease_seconds = lease_seconds
        self._clock = clock
        self._tasks: dict[str, AnnotationTask] = {}
        self._order: list[str] = []
        self._lock = threading.Condition()
        self._on_resolve = on_resolve
        self._seen_keys: dict[tuple[str, str], SubmitAck] = {}
        self._counter = 0

    def enqueue(
        self, items: Sequence[tuple[str, str]], iteration: int = 0
    ) -> list[AnnotationTask]:
        """Add (instance_id, input_text) pairs in selection order."""
        with self._lock:
            open_instances = {
                t.instance_id
                for t in self._tasks.values()
                if t.status in (PENDING, CLAIMED)
            }
            for instance_id, _ in items:
                if instance_id in open_instances:
                    raise QueueError(
                        f"instance {instance_id!r} already has an open task"
                    )
            created = []
            for instance_id, input_text in items:
                self._counter += 1
                task = AnnotationTask(
                    task_id=f"task-{self._counter:06d}",
                    instance_id=instance_id,
                    input_text=input_text,
                    created_iteration=iteration,
                )
                self._tasks[task.task_id] = task
                self._order.append(task.task_id)
                created.append(task)
            self._lock.notify_all()
            return created

    def _expire_leases(self) -> None:
        now = self._clock()
        for task in self._tasks.values():
            if (
                task.status == CLAIMED
                and task.lease_expires_at is not None
                and task.lease_expires_at <= now
            ):
                task.status = PENDING
                task.claimant = None
                task.lease_expires_at = None

    def claim(self, annotator_id: str) -> AnnotationTask | None:
        """Atomically claim the oldest pending task, or None when empty."""
        if not annotator_id:
            raise AuthorizationError("annotator_id is required to claim")
        with self._lock:
            self._expire_leases()
            for task_id in self._order:
                task = self._tasks[task_id]
                if task.status == PENDING:
                    task.status = CLAIMED
                    task.claimant = annotator_id
                    task.lease_expires_at = self._clock() + self.lease_seconds
                    return task
            return None

    def submit(
        self,
        task_id: str,
        annotator_id: str,
        text: str | None = None,
        *,
        skip: bool = False,
        idempotency_key: str | None = None,
    ) -> SubmitAck:
        """Resolve a claimed task with an annotation or a skip."""
        with self._lock:
            if idempotency_key is not None:
                prior = self._seen_keys.get((task_id, idempotency_key))
                if prior is not None:
                    return SubmitAck(task_id, prior.status, duplicate=True)
            task = self._tasks.get(task_id)
            if task is None:
                raise QueueError(f"unknown task {task_id!r}")
            self._expire_leases()

            if task.status in (DONE, SKIPPED):
                same_skip = skip and task.status == SKIPPED
                same_text = (
                    not skip
                    and task.status == DONE
                    and task.annotation == (text or "")
                )
                if same_skip or same_text:
                    ack = SubmitAck(task.task_id, task.status, duplicate=True)
                    if idempotency_key is not None:
                        self._seen_keys[(task_id, idempotency_key)] = ack
                    return ack
                raise AnnotationError(
                    f"task {task_id!r} already resolved with different content"
                )

            if task.status != CLAIMED or task.claimant != annotator_id:
                raise AuthorizationError(
                    f"task {task_id!r} is not claimed by {annotator_id!r}"
                )
            if not skip and (text is None or text.strip() == ""):
                raise AnnotationError("empty annotation requires the skip flag")

            if skip:
                task.status = SKIPPED
                task.annotation = None
            else:
                task.status = DONE
                task.annotation = text
            task.claimant = annotator_id
            task.lease_expires_at = None
            ack = SubmitAck(task.task_id, task.status)
            if idempotency_key is not None:
                self._seen_keys[(task_id, idempotency_key)] = ack
            if self._on_resolve is not None:
                self._on_resolve(task)
            self._lock.notify_all()
            return ack

    def counts(self) -> dict[str, int]:
        with self._lock:
            self._expire_leases()
            out = {PENDING: 0, CLAIMED: 0, DONE: 0, SKIPPED: 0}
            for task in self._tasks.values():
                out[task.status] += 1
            return out

    def total(self) -> int:
        return len(self._tasks)

    def tasks(self, status: str | None = None) -> list[AnnotationTask]:
        with self._lock:
            self._expire_leases()
            out = [self._tasks[i] for i in self._order]
            if status is not None:
                out = [t for t in out if t.status == status]
            return out

    def all_resolved(self) -> bool:
        with self._lock:
            self._expire_leases()
            return all(
                t.status in (DONE, SKIPPED) for t in self._tasks.values()
            )

    def wait_resolved(self, timeout: float | None = None) -> bool:
        """Block until every task is done or skipped (or timeout)."""
        deadline = None if timeout is None else self._clock() + timeout
        with self._lock:
            while True:
                self._expire_leases()
                if all(t.status in (DONE, SKIPPED) for t in self._tasks.values()):
                    return True
                remaining = None
                if deadline is not None:
                    remaining = deadline - self._clock()
                    if remaining <= 0:
                        return False
                self._lock.wait(timeout=min(remaining, 0.5) if remaining else 0.5)
