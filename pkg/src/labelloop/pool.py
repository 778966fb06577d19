"""Data pool management: dataset loading, splits, and checkpointed state.

The pool is the bookkeeping heart of a run. Every instance lives in exactly
one of three ordered partitions (labeled / unlabeled / test) and an
annotation is attached to an instance precisely when it enters the labeled
partition.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    NoCheckpointError,
    SchemaError,
    StateError,
)

CHECKPOINT_SCHEMA_VERSION = 1


@dataclass
class Instance:
    """One annotatable unit: an input text plus optional ground truth."""

    id: str
    input: str
    references: list[str] = field(default_factory=list)
    annotation: str | None = None
    annotator: str | None = None
    meta: dict[str, str] = field(default_factory=dict)


@dataclass
class PoolState:
    """Ordered partition of instance ids plus loop progress markers.

    ``iteration`` counts completed query-label-train rounds. ``model_ref``
    names the current model checkpoint (updated after each fine-tune).
    """

    labeled_ids: list[str] = field(default_factory=list)
    unlabeled_ids: list[str] = field(default_factory=list)
    test_ids: list[str] = field(default_factory=list)
    iteration: int = 0
    model_ref: str = "base"
    rng_seed: int = 0

    def validate(self, known_ids: Iterable[str] | None = None) -> None:
        """Raise StateError if the partitions overlap or contain duplicates."""
        groups = {
            "labeled": self.labeled_ids,
            "unlabeled": self.unlabeled_ids,
            "test": self.test_ids,
        }
        seen: dict[str, str] = {}
        for name, ids in groups.items():
            for i in ids:
                if i in seen:
                    raise StateError(
                        f"instance {i!r} appears in both {seen[i]} and {name}"
                    )
                seen[i] = name
        if known_ids is not None:
            known = set(known_ids)
            unknown = [i for i in seen if i not in known]
            if unknown:
                raise StateError(f"state references unknown ids: {unknown[:5]}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "labeled_ids": list(self.labeled_ids),
            "unlabeled_ids": list(self.unlabeled_ids),
            "test_ids": list(self.test_ids),
            "iteration": self.iteration,
            "model_ref": self.model_ref,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "PoolState":
        try:
            return cls(
                labeled_ids=list(doc["labeled_ids"]),
                unlabeled_ids=list(doc["unlabeled_ids"]),
                test_ids=list(doc["test_ids"]),
                iteration=int(doc["iteration"]),
                model_ref=str(doc["model_ref"]),
                rng_seed=int(doc["rng_seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"malformed pool state: {exc}") from exc


class Dataset:
    """Instances keyed by id, preserving load order."""

    def __init__(self, instances: Iterable[Instance]):
        self._by_id: dict[str, Instance] = {}
        dups = []
        for inst in instances:
            if inst.id in self._by_id:
                dups.append(inst.id)
            self._by_id[inst.id] = inst
        if dups:
            raise DataError(f"duplicate instance ids: {sorted(set(dups))[:10]}")

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, instance_id: str) -> bool:
        return instance_id in self._by_id

    def __getitem__(self, instance_id: str) -> Instance:
        try:
            return self._by_id[instance_id]
        except KeyError:
            raise StateError(f"unknown instance id {instance_id!r}") from None

    @property
    def ids(self) -> list[str]:
        return list(self._by_id)

    def instances(self) -> list[Instance]:
        return list(self._by_id.values())

    def inputs_for(self, ids: Iterable[str]) -> dict[str, str]:
        return {i: self[i].input for i in ids}

    def add(self, instance: Instance) -> None:
        if instance.id in self._by_id:
            raise DataError(f"duplicate instance id {instance.id!r}")
        self._by_id[instance.id] = instance


@dataclass(frozen=True)
class FieldMap:
    """Names the dataset columns holding the input, references and id."""

    input: str = "input"
    references: str | None = "references"
    id: str | None = None


def _coerce_references(value: Any) -> list[str]:
    if value is None:
        return []
    if isinstance(value, list):
        return [str(v) for v in value]
    text = str(value)
    return [text] if text != "" else []


def _ordinal_ids(count: int) -> list[str]:
    return [f"{i:06d}" for i in range(count)]


def load_dataset(path: str | Path, fields: FieldMap | None = None) -> Dataset:
    """Load instances from a CSV or JSON file.

    JSON files hold an array of objects; the references field may be a list
    or a single value. CSV rows always yield singleton reference lists.
    Missing ids are assigned as zero-padded row ordinals.
    """
    fields = fields or FieldMap()
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".csv":
        rows = _read_csv(path, fields)
    elif suffix in (".json", ".jsonl"):
        rows = _read_json(path, fields)
    else:
        raise DataError(f"unsupported dataset format {suffix!r} (use .csv or .json)")

    ids: list[str]
    if fields.id:
        ids = [str(r.get(fields.id, "")) for r in rows]
        blank = [n for n, i in enumerate(ids) if not i]
        if blank:
            raise DataError(f"row {blank[0]}: empty value in id field {fields.id!r}")
    else:
        ids = _ordinal_ids(len(rows))

    instances = []
    for row_id, row in zip(ids, rows):
        instances.append(
            Instance(
                id=row_id,
                input=str(row[fields.input]),
                references=_coerce_references(
                    row.get(fields.references) if fields.references else None
                ),
            )
        )
    return Dataset(instances)


def _read_csv(path: Path, fields: FieldMap) -> list[dict[str, Any]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if fields.input not in header:
            raise SchemaError(
                f"dataset {path.name} has no input field {fields.input!r} "
                f"(columns: {header})"
            )
        rows = []
        for n, row in enumerate(reader):
            if row.get(fields.input) is None:
                raise DataError(f"row {n}: missing value for {fields.input!r}")
            rows.append(row)
    return rows


def _read_json(path: Path, fields: FieldMap) -> list[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        if path.suffix.lower() == ".jsonl":
            try:
                docs = [json.loads(line) for line in fh if line.strip()]
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON line in {path.name}: {exc}") from exc
        else:
            try:
                docs = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON in {path.name}: {exc}") from exc
    if not isinstance(docs, list):
        raise DataError(f"dataset {path.name} must hold an array of objects")
    for n, doc in enumerate(docs):
        if not isinstance(doc, dict):
            raise DataError(f"row {n}: expected an object, got {type(doc).__name__}")
        if fields.input not in doc:
            raise SchemaError(f"row {n}: missing input field {fields.input!r}")
    return docs


def init_split(
    dataset: Dataset,
    test_fraction: float,
    seed: int,
    test_dataset: Dataset | None = None,
) -> PoolState:
    """Create the initial pool partition with a seeded shuffle.

    When a separate test dataset is given, ``test_fraction`` is ignored and
    that dataset populates the test ids (its instances must already be in
    ``dataset``; see Orchestrator which merges them).
    """
    import random as _random

    if test_dataset is not None:
        test_ids = test_dataset.ids
        main_ids = [i for i in dataset.ids if i not in set(test_ids)]
        return PoolState(
            labeled_ids=[],
            unlabeled_ids=main_ids,
            test_ids=test_ids,
            iteration=0,
            rng_seed=seed,
        )

    if not 0 <= test_fraction < 1:
        raise ConfigError(
            [{"field": "al.test_fraction", "message": "must be in [0, 1)"}]
        )
    ids = dataset.ids
    rng = _random.Random(seed)
    rng.shuffle(ids)
    n_test = math.ceil(test_fraction * len(ids))
    return PoolState(
        labeled_ids=[],
        unlabeled_ids=ids[n_test:],
        test_ids=ids[:n_test],
        iteration=0,
        rng_seed=seed,
    )


def resolve_batch_size(
    spec: float, reference_pool_size: int, unlabeled_size: int | None = None
) -> int:
    """Turn a fractional or absolute batch spec into an instance count.

    Values below 1 are fractions of the reference pool (the initial train
    pool, so per-iteration batches stay constant); values of 1 and above are
    absolute counts. The result is clamped to the current unlabeled size.
    """
    if spec <= 0:
        raise ConfigError(
            [{"field": "al.query_size", "message": "must be positive"}]
        )
    if spec < 1:
        count = math.ceil(spec * reference_pool_size)
    else:
        count = int(round(spec))
    count = max(count, 1) if reference_pool_size > 0 else 0
    cap = reference_pool_size if unlabeled_size is None else unlabeled_size
    return min(count, cap)


@dataclass
class SkippedAnnotation:
    instance_id: str
    reason: str


def move_to_labeled(
    state: PoolState,
    dataset: Dataset,
    annotated: list[tuple[str, str, str]],
) -> tuple[PoolState, list[SkippedAnnotation]]:
    """Apply annotations and move their instances into the labeled partition.

    ``annotated`` is a list of (instance_id, annotation, annotator) in
    selection order, which is preserved in ``labeled_ids``. Instances with an
    empty annotation are skipped and reported rather than moved. Any id not
    currently unlabeled aborts the whole move with no partial mutation.
    """
    unlabeled = set(state.unlabeled_ids)
    seen: set[str] = set()
    for instance_id, _, _ in annotated:
        if instance_id not in unlabeled:
            raise StateError(
                f"cannot label {instance_id!r}: not in the unlabeled pool"
            )
        if instance_id in seen:
            raise StateError(f"duplicate annotation for {instance_id!r}")
        seen.add(instance_id)

    moved: list[str] = []
    skipped: list[SkippedAnnotation] = []
    for instance_id, annotation, annotator in annotated:
        if annotation is None or annotation.strip() == "":
            skipped.append(SkippedAnnotation(instance_id, "empty annotation"))
            continue
        inst = dataset[instance_id]
        inst.annotation = annotation
        inst.annotator = annotator
        moved.append(instance_id)

    moved_set = set(moved)
    new_state = replace(
        state,
        labeled_ids=state.labeled_ids + moved,
        unlabeled_ids=[i for i in state.unlabeled_ids if i not in moved_set],
    )
    return new_state, skipped


# --- checkpointing ---------------------------------------------------------

_STATE_FILE = "state.json"


@dataclass
class Checkpoint:
    """Everything needed to resume a run where it left off."""

    pool_state: PoolState
    ledger: dict[str, Any] | None = None
    phase: dict[str, Any] | None = None
    extra: dict[str, Any] | None = None


def _canonical(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def checkpoint(
    state: PoolState,
    run_dir: str | Path,
    *,
    ledger: dict[str, Any] | None = None,
    phase: dict[str, Any] | None = None,
    extra: dict[str, Any] | None = None,
) -> Path:
    """Atomically persist run state (write to a temp file, then rename)."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "pool": state.to_dict(),
        "ledger": ledger,
        "phase": phase,
        "extra": extra,
    }
    body = _canonical(payload)
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "payload": payload,
        "sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
    }
    target = run_dir / _STATE_FILE
    tmp = run_dir / (_STATE_FILE + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(_canonical(doc))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, target)
    return target


def restore(run_dir: str | Path) -> Checkpoint:
    """Load the last checkpoint, verifying its integrity."""
    target = Path(run_dir) / _STATE_FILE
    if not target.exists():
        raise NoCheckpointError(f"no checkpoint in {run_dir}")
    try:
        with open(target, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {target}: {exc}") from exc
    if not isinstance(doc, dict) or "payload" not in doc or "sha256" not in doc:
        raise CheckpointError(f"checkpoint {target} is missing required keys")
    body = _canonical(doc["payload"])
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if digest != doc["sha256"]:
        raise CheckpointError(f"checkpoint {target} failed its integrity check")
    payload = doc["payload"]
    state = PoolState.from_dict(payload.get("pool", {}))
    state.validate()
    return Checkpoint(
        pool_state=state,
        ledger=payload.get("ledger"),
        phase=payload.get("phase"),
        extra=payload.get("extra"),
    )


def has_checkpoint(run_dir: str | Path) -> bool:
    return (Path(run_dir) / _STATE_FILE).exists()
