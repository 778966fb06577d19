"""Selection strategies for the annotation loop.

Scorers map every unlabeled instance to an informativeness score (higher
means "pick me"); selectors (greedy set algorithms) return an ordered list
of ids directly. All strategies are deterministic given their context: ties
break by ascending instance id, and any randomness is seeded.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import ConfigError, ContextError
from .gateway import GenerationResult
from .metrics import sentence_bleu

logger = logging.getLogger(__name__)

ScoreVector = list[tuple[str, float]]


@dataclass
class StrategyContext:
    """Everything a strategy may look at when scoring the pool."""

    unlabeled_ids: list[str]
    labeled_ids: list[str] = field(default_factory=list)
    inputs: dict[str, str] = field(default_factory=dict)
    annotations: dict[str, str] = field(default_factory=dict)
    embeddings: dict[str, np.ndarray] = field(default_factory=dict)
    generations: dict[str, list[GenerationResult]] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def generation(self, instance_id: str) -> GenerationResult:
        gens = self.generations.get(instance_id)
        if not gens:
            raise ContextError(f"no cached generation for {instance_id!r}")
        return gens[0]

    def embedding(self, instance_id: str) -> np.ndarray:
        vec = self.embeddings.get(instance_id)
        if vec is None:
            raise ContextError(f"no cached embedding for {instance_id!r}")
        return vec


def validate_scores(ctx: StrategyContext, scores: ScoreVector) -> None:
    """Check a score vector covers exactly the unlabeled ids with finite reals."""
    ids = [i for i, _ in scores]
    if len(set(ids)) != len(ids):
        raise ContextError("score vector contains duplicate ids")
    if set(ids) != set(ctx.unlabeled_ids):
        raise ContextError("score vector does not cover exactly the unlabeled pool")
    for i, s in scores:
        if not math.isfinite(s):
            raise ContextError(f"non-finite score {s} for {i!r}")


def select_top_k(scores: ScoreVector, k: int) -> list[str]:
    """Ids of the k largest scores; ties break by ascending id."""
    if k <= 0:
        return []
    if k > len(scores):
        k = len(scores)
    ranked = sorted(scores, key=lambda entry: (-entry[1], entry[0]))
    return [i for i, _ in ranked[:k]]


def _normrank(scores: dict[str, float]) -> dict[str, float]:
    """Map scores to [0, 1] by rank, 1 for the most informative; ties by id."""
    ids = sorted(scores, key=lambda i: (-scores[i], i))
    n = len(ids)
    if n == 1:
        return {ids[0]: 1.0}
    return {i: 1.0 - pos / (n - 1) for pos, i in enumerate(ids)}


# --- uncertainty scorers ---------------------------------------------------


def score_random(ctx: StrategyContext) -> ScoreVector:
    """Seeded random permutation rank. Deterministic per seed."""
    ids = sorted(ctx.unlabeled_ids)
    rng = random.Random(ctx.seed)
    rng.shuffle(ids)
    n = len(ids)
    ranks = {instance_id: float(n - pos) for pos, instance_id in enumerate(ids)}
    return [(i, ranks[i]) for i in ctx.unlabeled_ids]


def score_nsp(ctx: StrategyContext) -> ScoreVector:
    """One minus the length-normalized sequence probability.

    NSP(x) = 1 - exp(mean token logprob); an empty generation scores 0.
    """
    out: ScoreVector = []
    for instance_id in ctx.unlabeled_ids:
        gen = ctx.generation(instance_id)
        lps = gen.token_logprobs
        if not lps:
            out.append((instance_id, 0.0))
            continue
        out.append((instance_id, 1.0 - math.exp(sum(lps) / len(lps))))
    return out


def _position_entropy(alternatives: list[tuple[str, float]]) -> float:
    probs = [math.exp(lp) for _, lp in alternatives]
    entropy = -sum(p * math.log(p) for p in probs if p > 0)
    residual = 1.0 - sum(probs)
    if residual > 0:
        entropy -= residual * math.log(residual)
    return entropy


def score_mean_token_entropy(ctx: StrategyContext) -> ScoreVector:
    """Mean per-position entropy (nats) over the returned alternatives.

    Probability mass not covered by the alternatives is treated as one
    residual bucket. An empty generation scores 0.
    """
    out: ScoreVector = []
    for instance_id in ctx.unlabeled_ids:
        gen = ctx.generation(instance_id)
        if not gen.tokens:
            out.append((instance_id, 0.0))
            continue
        if not gen.top_alternatives:
            raise ContextError(
                f"generation for {instance_id!r} lacks token alternatives "
                "(fetch with logprobs_k > 0)"
            )
        entropies = [_position_entropy(alts) for alts in gen.top_alternatives]
        out.append((instance_id, sum(entropies) / len(entropies)))
    return out


def _delfy_scores(ctx: StrategyContext, decay: float) -> dict[str, float]:
    unlabeled_counts: dict[str, int] = {}
    for instance_id in ctx.unlabeled_ids:
        for token in ctx.inputs[instance_id].lower().split():
            unlabeled_counts[token] = unlabeled_counts.get(token, 0) + 1
    labeled_counts: dict[str, int] = {}
    for instance_id in ctx.labeled_ids:
        for token in ctx.inputs[instance_id].lower().split():
            labeled_counts[token] = labeled_counts.get(token, 0) + 1

    scores: dict[str, float] = {}
    for instance_id in ctx.unlabeled_ids:
        tokens = ctx.inputs[instance_id].lower().split()
        if not tokens:
            scores[instance_id] = 0.0
            continue
        total = 0.0
        for token in tokens:
            weight = math.log(1 + unlabeled_counts.get(token, 0)) * math.exp(
                -decay * labeled_counts.get(token, 0)
            )
            total += weight
        scores[instance_id] = total / len(tokens)
    return scores


def score_te_delfy(ctx: StrategyContext) -> ScoreVector:
    """Rank combination of token entropy and decaying lexical novelty.

    A token is novel when frequent among unlabeled inputs and rare among
    labeled ones; per-instance novelty is the mean token weight
    ln(1 + cnt_unlabeled) * exp(-lambda * cnt_labeled). The final score
    blends normalized ranks: alpha * rank(TE) + (1 - alpha) * rank(delfy).
    """
    alpha = float(ctx.params.get("alpha", 0.5))
    decay = float(ctx.params.get("lambda", 1.0))
    for instance_id in ctx.unlabeled_ids:
        if instance_id not in ctx.inputs:
            raise ContextError(f"no input text for {instance_id!r}")
    te = dict(score_mean_token_entropy(ctx))
    delfy = _delfy_scores(ctx, decay)
    te_rank = _normrank(te)
    delfy_rank = _normrank(delfy)
    return [
        (i, alpha * te_rank[i] + (1 - alpha) * delfy_rank[i])
        for i in ctx.unlabeled_ids
    ]


def score_bleuvar(ctx: StrategyContext) -> ScoreVector:
    """Pairwise BLEU disagreement across stochastic samples.

    BLEUVar(x) = sum over ordered sample pairs (i != j) of
    (1 - BLEU(y_i, y_j))^2. Higher disagreement means higher uncertainty.
    """
    k = int(ctx.params.get("k_samples", 5))
    if k < 1:
        raise ConfigError([{"field": "al.params.k_samples", "message": "must be >= 1"}])
    out: ScoreVector = []
    for instance_id in ctx.unlabeled_ids:
        gens = ctx.generations.get(instance_id)
        if gens is None or len(gens) < k:
            raise ContextError(
                f"bleuvar needs {k} samples for {instance_id!r}, "
                f"found {0 if gens is None else len(gens)}"
            )
        samples = [g.tokens for g in gens[:k]]
        total = 0.0
        for i in range(k):
            for j in range(k):
                if i == j:
                    continue
                bleu = sentence_bleu(samples[i], samples[j])
                total += (1.0 - bleu) ** 2
        out.append((instance_id, total))
    return out


def score_huds(ctx: StrategyContext) -> ScoreVector:
    """Hybrid uncertainty and diversity via stratified embeddings.

    Uncertainty is the min-max normalized negative mean token logprob. The
    pool is sorted by uncertainty and cut into contiguous strata; diversity
    is cosine distance to the stratum centroid. The final score is
    beta * uncertainty + (1 - beta) * diversity.
    """
    beta = float(ctx.params.get("beta", 0.5))
    num_strata = int(ctx.params.get("num_strata", 5))
    if num_strata < 1:
        raise ConfigError(
            [{"field": "al.params.num_strata", "message": "must be >= 1"}]
        )
    ids = list(ctx.unlabeled_ids)
    if not ids:
        return []

    raw: dict[str, float] = {}
    for instance_id in ids:
        gen = ctx.generation(instance_id)
        lps = gen.token_logprobs
        raw[instance_id] = 0.0 if not lps else -sum(lps) / len(lps)

    lo, hi = min(raw.values()), max(raw.values())
    span = hi - lo
    if span == 0:
        uncertainty = {i: 0.5 for i in ids}
    else:
        uncertainty = {i: (raw[i] - lo) / span for i in ids}

    ordered = sorted(ids, key=lambda i: (-uncertainty[i], i))
    strata_count = min(num_strata, len(ordered))
    base, remainder = divmod(len(ordered), strata_count)
    strata: list[list[str]] = []
    start = 0
    for s in range(strata_count):
        size = base + (1 if s < remainder else 0)
        strata.append(ordered[start : start + size])
        start += size

    diversity: dict[str, float] = {}
    for stratum in strata:
        members = np.vstack([ctx.embedding(i) for i in stratum])
        centroid = members.mean(axis=0)
        norm = float(np.linalg.norm(centroid))
        for instance_id in stratum:
            if norm == 0:
                diversity[instance_id] = 1.0
                continue
            cos = float(np.dot(ctx.embedding(instance_id), centroid) / norm)
            diversity[instance_id] = 1.0 - cos

    return [
        (i, beta * uncertainty[i] + (1 - beta) * diversity[i]) for i in ctx.unlabeled_ids
    ]


def score_idds(ctx: StrategyContext) -> ScoreVector:
    """In-distribution diversity: near the unlabeled mass, far from the labeled.

    score(x) = mean cos(x, unlabeled) - lambda * mean cos(x, labeled); the
    labeled term is 0 while no labels exist. Works from embeddings alone.
    """
    lam = float(ctx.params.get("lambda", 1.0))
    ids = list(ctx.unlabeled_ids)
    if not ids:
        return []
    unlabeled = np.vstack([ctx.embedding(i) for i in ids])
    unlabeled_sims = unlabeled @ unlabeled.T
    unlabeled_term = unlabeled_sims.mean(axis=1)
    if ctx.labeled_ids:
        labeled = np.vstack([ctx.embedding(i) for i in ctx.labeled_ids])
        labeled_term = (unlabeled @ labeled.T).mean(axis=1)
    else:
        labeled_term = np.zeros(len(ids))
    scores = unlabeled_term - lam * labeled_term
    return [(i, float(s)) for i, s in zip(ids, scores)]


# --- greedy selectors ------------------------------------------------------


def select_coreset(ctx: StrategyContext, k: int) -> list[str]:
    """Greedy k-center selection on Euclidean embedding distance.

    Each pick maximizes the minimum distance to the labeled set plus the
    picks so far. With no labeled instances the first pick is the smallest
    id. Ties break by ascending id.
    """
    candidates = sorted(ctx.unlabeled_ids)
    if k > len(candidates):
        logger.warning(
            "coreset: requested %d of %d unlabeled; clamping", k, len(candidates)
        )
        k = len(candidates)
    if k <= 0:
        return []
    points = np.vstack([ctx.embedding(i) for i in candidates])

    min_dist = np.full(len(candidates), np.inf)
    if ctx.labeled_ids:
        centers = np.vstack([ctx.embedding(i) for i in ctx.labeled_ids])
        for center in centers:
            dist = np.linalg.norm(points - center, axis=1)
            min_dist = np.minimum(min_dist, dist)

    selected: list[str] = []
    picked = np.zeros(len(candidates), dtype=bool)
    for step in range(k):
        if not ctx.labeled_ids and step == 0:
            best = 0
        else:
            best = -1
            best_dist = -np.inf
            for idx in range(len(candidates)):
                if picked[idx]:
                    continue
                if min_dist[idx] > best_dist:
                    best_dist = min_dist[idx]
                    best = idx
        picked[best] = True
        selected.append(candidates[best])
        dist = np.linalg.norm(points - points[best], axis=1)
        min_dist = np.minimum(min_dist, dist)
    return selected


def select_facility_location(ctx: StrategyContext, k: int) -> list[str]:
    """Greedy submodular maximization of pool coverage.

    f(S) = sum over unlabeled i of max over j in S of max(cos(e_i, e_j), 0);
    each step adds the candidate with the largest marginal gain. Ties break
    by ascending id; the returned order is the selection order.
    """
    candidates = sorted(ctx.unlabeled_ids)
    if k > len(candidates):
        logger.warning(
            "facility_location: requested %d of %d unlabeled; clamping",
            k,
            len(candidates),
        )
        k = len(candidates)
    if k <= 0:
        return []
    points = np.vstack([ctx.embedding(i) for i in candidates])
    sims = np.clip(points @ points.T, 0.0, None)

    coverage = np.zeros(len(candidates))
    picked = np.zeros(len(candidates), dtype=bool)
    selected: list[str] = []
    for _ in range(k):
        best = -1
        best_gain = -np.inf
        for idx in range(len(candidates)):
            if picked[idx]:
                continue
            gain = float(np.maximum(sims[:, idx] - coverage, 0.0).sum())
            if gain > best_gain:
                best_gain = gain
                best = idx
        picked[best] = True
        selected.append(candidates[best])
        coverage = np.maximum(coverage, sims[:, best])
    return selected


# --- registry --------------------------------------------------------------


@dataclass(frozen=True)
class SamplingPlan:
    """How many generations a strategy needs per instance, and how sampled."""

    num_samples: int = 1
    temperature: float | None = None  # None keeps the configured decode value
    needs_alternatives: bool = False


@dataclass(frozen=True)
class Strategy:
    name: str
    needs_embeddings: bool = False
    needs_generations: bool = False
    scorer: Callable[[StrategyContext], ScoreVector] | None = None
    selector: Callable[[StrategyContext, int], list[str]] | None = None
    sampler: Callable[[dict], SamplingPlan] | None = None

    @property
    def requirements(self) -> str:
        if self.needs_embeddings and self.needs_generations:
            return "both"
        if self.needs_embeddings:
            return "embeddings"
        if self.needs_generations:
            return "generations"
        return "none"

    def sampling_plan(self, params: dict) -> SamplingPlan | None:
        if not self.needs_generations:
            return None
        if self.sampler is not None:
            return self.sampler(params)
        return SamplingPlan()

    def select(self, ctx: StrategyContext, k: int) -> list[str]:
        if self.selector is not None:
            return self.selector(ctx, k)
        assert self.scorer is not None
        scores = self.scorer(ctx)
        validate_scores(ctx, scores)
        return select_top_k(scores, k)


def _bleuvar_plan(params: dict) -> SamplingPlan:
    return SamplingPlan(
        num_samples=int(params.get("k_samples", 5)),
        temperature=float(params.get("sampling_temperature", 1.0)),
    )


_REGISTRY: dict[str, Strategy] = {}


def register_strategy(strategy: Strategy, overwrite: bool = False) -> None:
    if strategy.name in _REGISTRY and not overwrite:
        raise ConfigError(
            [{"field": "al", "message": f"strategy {strategy.name!r} already exists"}]
        )
    if (strategy.scorer is None) == (strategy.selector is None):
        raise ConfigError(
            [
                {
                    "field": "al",
                    "message": "a strategy needs exactly one of scorer/selector",
                }
            ]
        )
    _REGISTRY[strategy.name] = strategy


def get_strategy(name: str) -> Strategy:
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ConfigError(
            [{"field": "al", "message": f"unknown strategy {name!r} (known: {known})"}]
        ) from None


def strategy_names() -> list[str]:
    return sorted(_REGISTRY)


for _strategy in (
    Strategy("random", scorer=score_random),
    Strategy("nsp", needs_generations=True, scorer=score_nsp),
    Strategy(
        "mean_token_entropy",
        needs_generations=True,
        scorer=score_mean_token_entropy,
        sampler=lambda p: SamplingPlan(needs_alternatives=True),
    ),
    Strategy(
        "te_delfy",
        needs_generations=True,
        scorer=score_te_delfy,
        sampler=lambda p: SamplingPlan(needs_alternatives=True),
    ),
    Strategy(
        "bleuvar", needs_generations=True, scorer=score_bleuvar, sampler=_bleuvar_plan
    ),
    Strategy("coreset", needs_embeddings=True, selector=select_coreset),
    Strategy("idds", needs_embeddings=True, scorer=score_idds),
    Strategy(
        "facility_location", needs_embeddings=True, selector=select_facility_location
    ),
    Strategy(
        "huds", needs_embeddings=True, needs_generations=True, scorer=score_huds
    ),
):
    register_strategy(_strategy)
