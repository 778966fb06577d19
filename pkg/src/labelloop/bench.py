"""Benchmark harness: strategy comparisons under simulated annotation.

Runs the same dataset through several strategies over several seeds, with
identical splits for a given seed so curves are comparable, then averages
the curves and emits a CSV plus a summary JSON. The synthetic clustering
task gives strategies a controlled playground where diverse selection is
measurably better than chance.
"""

from __future__ import annotations

import csv
import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .config import merge, resolve_config
from .errors import SimulationError
from .gateway import MockBackend, NoOpTrainer
from .metrics import MetricReport
from .orchestrator import ActiveLearningRun
from .pool import Dataset, Instance

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2, 3, 4)


@dataclass
class LearningCurve:
    """One run's metric trajectory over labeled-set sizes."""

    strategy: str
    seed: int
    points: list[dict[str, Any]] = field(default_factory=list)
    complete: bool = True

    def series(self, metric: str) -> list[tuple[int, float]]:
        out = []
        for point in self.points:
            value = point.get("metrics", {}).get(metric)
            if value is not None:
                out.append((int(point["labeled_count"]), float(value)))
        return out

    def labeled_counts(self) -> list[int]:
        return [int(p["labeled_count"]) for p in self.points]


def average_curves(curves: Sequence[LearningCurve], metric: str) -> list[dict[str, float]]:
    """Pointwise mean (and min/max band) over curves with matching grids."""
    if not curves:
        raise SimulationError("no curves to average")
    grids = [c.labeled_counts() for c in curves]
    if any(g != grids[0] for g in grids[1:]):
        raise SimulationError(
            f"cannot average curves with different labeled-count grids: {grids}"
        )
    out = []
    for n, labeled_count in enumerate(grids[0]):
        values = []
        for curve in curves:
            value = curve.points[n].get("metrics", {}).get(metric)
            if value is None:
                raise SimulationError(
                    f"curve {curve.strategy}/{curve.seed} lacks metric {metric!r} "
                    f"at point {n}"
                )
            values.append(float(value))
        out.append(
            {
                "labeled_count": labeled_count,
                "mean": sum(values) / len(values),
                "min": min(values),
                "max": max(values),
            }
        )
    return out


# --- the synthetic clustering task ------------------------------------------


@dataclass
class SyntheticTask:
    """A pool of clustered texts where coverage is the quality signal.

    Embeddings come from seeded near-orthogonal cluster centers, so
    diversity-aware strategies can find all clusters while uniform random
    sampling predictably misses some. The evaluator scores the fraction of
    clusters with at least one labeled member; no model is actually trained.
    """

    dataset_template: list[Instance]
    embedding_overrides: dict[str, np.ndarray]
    cluster_of: dict[str, int]
    num_clusters: int
    embed_dim: int

    def dataset(self) -> Dataset:
        # fresh copies: runs attach annotations to instances
        return Dataset(
            [
                Instance(
                    id=inst.id,
                    input=inst.input,
                    references=list(inst.references),
                )
                for inst in self.dataset_template
            ]
        )

    def backend(self, seed: int = 0) -> MockBackend:
        return MockBackend(
            seed=seed,
            embed_dim=self.embed_dim,
            embedding_overrides=dict(self.embedding_overrides),
        )

    def evaluator(
        self,
    ) -> Callable[[str, Dataset, Any], MetricReport]:
        cluster_of = self.cluster_of
        total = self.num_clusters

        def evaluate(model_ref: str, dataset: Dataset, state) -> MetricReport:
            covered = {cluster_of[i] for i in state.labeled_ids}
            return MetricReport(
                values={"cluster_coverage": len(covered) / total},
                count=len(state.labeled_ids),
            )

        return evaluate


def make_synthetic_task(
    num_clusters: int = 20,
    per_cluster: int = 10,
    seed: int = 0,
    embed_dim: int = 16,
    center_noise: float = 0.05,
    member_noise: float = 0.15,
) -> SyntheticTask:
    """Build a clustered pool with deterministic unit embeddings.

    Cluster centers are standard-basis directions plus a little seeded noise
    (re-normalized), which keeps them near-orthogonal; members perturb their
    center and re-normalize, staying far closer to it than to any other
    center.
    """
    if num_clusters < 2 or per_cluster < 1:
        raise SimulationError("need at least 2 clusters with 1 member each")
    dim = max(embed_dim, num_clusters)
    rng = np.random.default_rng(seed)

    centers = []
    for c in range(num_clusters):
        center = np.zeros(dim)
        center[c] = 1.0
        center = center + center_noise * rng.standard_normal(dim)
        centers.append(center / np.linalg.norm(center))

    instances: list[Instance] = []
    overrides: dict[str, np.ndarray] = {}
    cluster_of: dict[str, int] = {}
    for c in range(num_clusters):
        for m in range(per_cluster):
            vector = centers[c] + member_noise * rng.standard_normal(dim)
            vector = vector / np.linalg.norm(vector)
            instance_id = f"c{c:02d}-m{m:02d}"
            text = f"synthetic topic {c:02d} sample {m:02d}"
            instances.append(
                Instance(id=instance_id, input=text, references=[f"topic-{c:02d}"])
            )
            overrides[text] = vector
            cluster_of[instance_id] = c

    return SyntheticTask(
        dataset_template=instances,
        embedding_overrides=overrides,
        cluster_of=cluster_of,
        num_clusters=num_clusters,
        embed_dim=dim,
    )


# --- running comparisons -----------------------------------------------------


def run_benchmark(
    base_doc: dict[str, Any],
    strategies: Sequence[str],
    seeds: Sequence[int] = DEFAULT_SEEDS,
    work_dir: str | Path = "bench-runs",
    task: SyntheticTask | None = None,
    keep_runs: bool = False,
) -> list[LearningCurve]:
    """Run every (strategy, seed) pair and collect learning curves.

    The split for a given seed is identical across strategies, so curve
    differences are attributable to selection alone. A failed run is kept as
    an incomplete curve with whatever points it produced.
    """
    work_dir = Path(work_dir)
    curves: list[LearningCurve] = []
    for strategy in strategies:
        for seed in seeds:
            run_dir = work_dir / f"{strategy}-seed{seed}"
            doc = merge(base_doc, {"al": strategy, "al.seed": seed})
            config = resolve_config(doc)
            components: dict[str, Any] = {}
            if task is not None:
                components = {
                    "dataset": task.dataset(),
                    "backend": task.backend(seed=config.model.seed),
                    "evaluator": task.evaluator(),
                    "trainer": NoOpTrainer(),
                }
            run = ActiveLearningRun(config, run_dir, **components)
            curve = LearningCurve(strategy=strategy, seed=seed)
            try:
                result = run.execute()
                curve.points = result.curve
            except Exception:
                logger.exception("benchmark run %s/seed %s failed", strategy, seed)
                curve.points = list(run.curve_points)
                curve.complete = False
            curves.append(curve)
            if not keep_runs:
                shutil.rmtree(run_dir, ignore_errors=True)
    return curves


def emit_report(
    curves: Sequence[LearningCurve],
    metrics: Sequence[str],
    csv_path: str | Path,
    summary_path: str | Path,
) -> None:
    """Write the per-run CSV and the per-strategy summary JSON."""
    csv_path = Path(csv_path)
    summary_path = Path(summary_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    summary_path.parent.mkdir(parents=True, exist_ok=True)

    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "seed", "labeled_count", "metric", "value"])
        for curve in curves:
            for point in curve.points:
                for metric in metrics:
                    value = point.get("metrics", {}).get(metric)
                    if value is None:
                        continue
                    writer.writerow(
                        [
                            curve.strategy,
                            curve.seed,
                            int(point["labeled_count"]),
                            metric,
                            f"{float(value):.6f}",
                        ]
                    )

    summary: dict[str, Any] = {}
    by_strategy: dict[str, list[LearningCurve]] = {}
    for curve in curves:
        if curve.complete:
            by_strategy.setdefault(curve.strategy, []).append(curve)
    for strategy, group in sorted(by_strategy.items()):
        summary[strategy] = {"seeds": [c.seed for c in group], "metrics": {}}
        for metric in metrics:
            summary[strategy]["metrics"][metric] = average_curves(group, metric)
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
