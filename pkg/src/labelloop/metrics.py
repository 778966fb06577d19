"""Text generation quality metrics.

All metrics work on whitespace tokens of lowercased text. The relaxed exact
match follows the QA convention of also stripping articles and punctuation,
so "The Eiffel Tower." matches "Eiffel Tower".
"""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import EvaluationError

_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_text(text: str) -> str:
    """Lowercase, strip, and collapse internal whitespace."""
    return " ".join(text.lower().split())


def normalize_relaxed(text: str) -> str:
    """QA-style normalization: also drop punctuation and articles."""
    lowered = text.lower()
    no_punct = lowered.translate(_PUNCT_TABLE)
    no_articles = _ARTICLE_RE.sub(" ", no_punct)
    return " ".join(no_articles.split())


def exact_match(prediction: str, references: Sequence[str]) -> float:
    """1.0 when the normalized prediction equals the first reference."""
    if not references:
        return 0.0
    return float(normalize_text(prediction) == normalize_text(references[0]))


def relaxed_exact_match(prediction: str, references: Sequence[str]) -> float:
    """1.0 when the relaxed-normalized prediction matches any reference."""
    pred = normalize_relaxed(prediction)
    return float(any(pred == normalize_relaxed(r) for r in references))


def _tokens(text: str) -> list[str]:
    return text.lower().split()


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(prediction: str, reference: str, n: int) -> float:
    """N-gram overlap F1 between prediction and reference.

    When neither side has any n-gram the score is 1.0 for identical token
    sequences and 0.0 otherwise.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pred_tokens = _tokens(prediction)
    ref_tokens = _tokens(reference)
    pred_grams = _ngrams(pred_tokens, n)
    ref_grams = _ngrams(ref_tokens, n)
    if not pred_grams and not ref_grams:
        return 1.0 if pred_tokens == ref_tokens else 0.0
    overlap = sum((pred_grams & ref_grams).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(pred_grams.values())
    recall = overlap / sum(ref_grams.values())
    return 2 * precision * recall / (precision + recall)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(prediction: str, reference: str) -> float:
    """Longest-common-subsequence F1 on whitespace tokens."""
    pred_tokens = _tokens(prediction)
    ref_tokens = _tokens(reference)
    if not pred_tokens and not ref_tokens:
        return 1.0
    lcs = _lcs_length(pred_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    precision = lcs / len(pred_tokens)
    recall = lcs / len(ref_tokens)
    return 2 * precision * recall / (precision + recall)


def sentence_bleu(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Unsmoothed sentence BLEU over token sequences.

    Uses n-gram orders 1..min(4, length of the shorter sequence) with the
    standard brevity penalty. Any zero precision yields 0.
    """
    if not candidate and not reference:
        return 1.0
    if not candidate or not reference:
        return 0.0
    max_order = min(4, len(candidate), len(reference))
    log_sum = 0.0
    for n in range(1, max_order + 1):
        cand = _ngrams(candidate, n)
        ref = _ngrams(reference, n)
        overlap = sum((cand & ref).values())
        total = sum(cand.values())
        if overlap == 0 or total == 0:
            return 0.0
        log_sum += math.log(overlap / total)
    geo_mean = math.exp(log_sum / max_order)
    c, r = len(candidate), len(reference)
    brevity = 1.0 if c > r else math.exp(1 - r / c)
    return geo_mean * brevity


def bleu_corpus(predictions: Sequence[str], references: Sequence[str]) -> float:
    """Corpus-level BLEU with counts pooled before the geometric mean.

    Orders 1..4; an order with no candidate n-grams anywhere in the corpus
    is dropped from the mean (so a corpus of one-token sentences can still
    score 1.0 when predictions equal references). Unsmoothed: any pooled
    zero precision yields 0.
    """
    if len(predictions) != len(references):
        raise EvaluationError(
            f"prediction/reference count mismatch: "
            f"{len(predictions)} vs {len(references)}"
        )
    if not predictions:
        raise EvaluationError("bleu_corpus needs at least one pair")
    pred_tok = [_tokens(p) for p in predictions]
    ref_tok = [_tokens(r) for r in references]
    cand_len = sum(len(t) for t in pred_tok)
    ref_len = sum(len(t) for t in ref_tok)
    if cand_len == 0:
        return 0.0

    log_sum = 0.0
    used_orders = 0
    for n in range(1, 5):
        clipped = 0
        total = 0
        for cand, ref in zip(pred_tok, ref_tok):
            cand_grams = _ngrams(cand, n)
            ref_grams = _ngrams(ref, n)
            clipped += sum((cand_grams & ref_grams).values())
            total += sum(cand_grams.values())
        if total == 0:
            continue
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total)
        used_orders += 1
    if used_orders == 0:
        return 0.0
    geo_mean = math.exp(log_sum / used_orders)
    brevity = 1.0 if cand_len > ref_len else math.exp(1 - ref_len / cand_len)
    return geo_mean * brevity


# --- metric registry -------------------------------------------------------

PairMetric = Callable[[str, Sequence[str]], float]


def _rouge1(pred: str, refs: Sequence[str]) -> float:
    return rouge_n(pred, refs[0], 1) if refs else 0.0


def _rouge2(pred: str, refs: Sequence[str]) -> float:
    return rouge_n(pred, refs[0], 2) if refs else 0.0


def _rougeL(pred: str, refs: Sequence[str]) -> float:
    return rouge_l(pred, refs[0]) if refs else 0.0


PAIR_METRICS: dict[str, PairMetric] = {
    "exact_match": exact_match,
    "relaxed_exact_match": relaxed_exact_match,
    "rouge1": _rouge1,
    "rouge2": _rouge2,
    "rougeL": _rougeL,
}

CORPUS_METRICS = {"bleu"}

KNOWN_METRICS = sorted(set(PAIR_METRICS) | CORPUS_METRICS)


@dataclass
class MetricReport:
    """Metric values averaged over an eval set."""

    values: dict[str, float] = field(default_factory=dict)
    count: int = 0

    def to_dict(self) -> dict:
        return {"values": dict(self.values), "count": self.count}


def score_pairs(
    predictions: Sequence[str],
    references: Sequence[Sequence[str]],
    metric_names: Sequence[str],
) -> MetricReport:
    """Compute the named metrics over aligned prediction/reference pairs.

    Per-instance metrics are averaged; ``bleu`` is computed corpus-level
    against first references.
    """
    if len(predictions) != len(references):
        raise EvaluationError("predictions and references must align")
    if not predictions:
        raise EvaluationError("cannot evaluate an empty set")
    unknown = [m for m in metric_names if m not in KNOWN_METRICS]
    if unknown:
        raise EvaluationError(f"unknown metrics: {unknown}")

    report = MetricReport(count=len(predictions))
    for name in metric_names:
        if name in PAIR_METRICS:
            fn = PAIR_METRICS[name]
            total = sum(fn(p, r) for p, r in zip(predictions, references))
            report.values[name] = total / len(predictions)
        elif name == "bleu":
            firsts = [r[0] if r else "" for r in references]
            report.values[name] = bleu_corpus(predictions, firsts)
    return report


def evaluate_model(
    backend,
    model_ref: str,
    instances,
    metric_names: Sequence[str],
    decode=None,
) -> MetricReport:
    """Generate greedily for each eval instance and score against references.

    Backend failures propagate: the report is all-or-nothing, never partial.
    """
    from .gateway import DecodeParams, generate

    if not instances:
        raise EvaluationError("cannot evaluate an empty set")
    decode = decode or DecodeParams()
    eval_decode = DecodeParams(
        temperature=0.0,
        top_p=decode.top_p,
        max_tokens=decode.max_tokens,
        num_samples=1,
        logprobs_k=0,
    )
    predictions = []
    references = []
    for inst in instances:
        results = generate(backend, model_ref, inst.input, eval_decode)
        predictions.append(results[0].text)
        references.append(inst.references)
    return score_pairs(predictions, references, metric_names)
