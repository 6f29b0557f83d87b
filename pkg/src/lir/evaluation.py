"""Evaluation harnesses: cosine retrieval with MAP, zero-shot transfer
classification with a from-scratch logistic classifier, and PCA score export.

Similarity is cosine throughout (rank metrics are then invariant to the norm
shrinkage removal causes), ties are broken by ascending candidate id so
rankings are permutation-invariant, and average precision is computed in
exact rational arithmetic before the final float conversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import linalg
from .core import (
    ComponentBasis,
    EmbeddingRecord,
    EvalReport,
    RetrievalDataset,
    TransferReport,
    check_collection,
    corpus_fingerprint,
)
from .errors import (
    ConfigError,
    DatasetError,
    DegenerateLabels,
    DimensionError,
    NoRelevantError,
    RankError,
)
from .removal import DEFAULT_MODE, RemovalMode, remove_batch


@dataclass(frozen=True)
class RankedList:
    """Candidate ids ordered by descending similarity, ties by ascending id."""

    query_id: str
    candidate_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidate_ids", tuple(self.candidate_ids))


def _rank_order(qvec: np.ndarray, cmat: np.ndarray, ids: np.ndarray) -> np.ndarray:
    sims = cmat @ qvec
    denom = np.linalg.norm(cmat, axis=1) * np.linalg.norm(qvec)
    scores = np.divide(sims, denom, out=np.zeros_like(sims), where=denom > 0.0)
    # lexsort: last key is primary, so descending score first, then id.
    return np.lexsort((ids, -scores))


def rank_candidates(
    query: EmbeddingRecord, candidates: Sequence[EmbeddingRecord]
) -> RankedList:
    """Rank all candidates against a query by cosine similarity.

    A zero-length vector on either side scores 0. The ranking is a total
    deterministic order: equal scores fall back to ascending candidate id.
    """
    recs = tuple(candidates)
    if not recs:
        return RankedList(query_id=query.id, candidate_ids=())
    dim = check_collection(recs)
    if dim != query.dim:
        raise DimensionError(
            f"query dimension {query.dim} != candidate dimension {dim}"
        )
    ids = np.array([r.id for r in recs])
    cmat = np.stack([r.vec for r in recs])
    order = _rank_order(query.vec, cmat, ids)
    return RankedList(query_id=query.id, candidate_ids=tuple(ids[order].tolist()))


def average_precision(ranking: RankedList, relevant: Iterable[str]) -> float:
    """AP = mean over relevant items of precision at that item's rank.

    Computed exactly in rational arithmetic and converted to float at the
    end. The relevant set must be non-empty and contained in the ranking.
    """
    rel = frozenset(relevant)
    if not rel:
        raise NoRelevantError(f"query {ranking.query_id!r}: empty relevant set")
    missing = rel.difference(ranking.candidate_ids)
    if missing:
        raise DatasetError(
            f"query {ranking.query_id!r}: relevant ids missing from ranking: "
            f"{sorted(missing)[:5]}"
        )
    hits = 0
    total = Fraction(0)
    for pos, cid in enumerate(ranking.candidate_ids, start=1):
        if cid in rel:
            hits += 1
            total += Fraction(hits, pos)
            if hits == len(rel):
                break
    return float(total / len(rel))


def _effective_rank(
    bases: Optional[Mapping[str, ComponentBasis]], rank: Optional[int]
) -> int:
    if rank is not None:
        if rank < 0:
            raise RankError(f"rank {rank} must be non-negative")
        return rank
    if not bases:
        return 0
    ranks = {b.rank for b in bases.values()}
    if len(ranks) != 1:
        raise ConfigError(
            f"bases carry mixed ranks {sorted(ranks)}; pass rank= explicitly"
        )
    return ranks.pop()


def evaluate_retrieval(
    dataset: RetrievalDataset,
    bases: Optional[Mapping[str, ComponentBasis]] = None,
    *,
    mode: RemovalMode = DEFAULT_MODE,
    rank: Optional[int] = None,
) -> EvalReport:
    """Cosine-retrieval MAP over a dataset, optionally after removal.

    When bases are supplied, every query and candidate is transformed with
    its own language's basis (strict: uncovered languages raise). The report
    groups per-language MAP by the query's language; overall_map is the mean
    of per-query AP values. The config block records mode, rank, similarity,
    and fingerprints of the raw inputs, so a run is reproducible and a rank-0
    run serializes identically to a no-removal run.
    """
    queries = dataset.queries
    candidates = dataset.candidates
    config = {
        "candidates_fingerprint": corpus_fingerprint(candidates),
        "mode": mode.value,
        "queries_fingerprint": corpus_fingerprint(queries),
        "rank": _effective_rank(bases, rank),
        "similarity": "cosine",
    }
    if bases is not None:
        queries = remove_batch(queries, bases, mode, strict=True).records
        candidates = remove_batch(candidates, bases, mode, strict=True).records

    ids = np.array([r.id for r in candidates])
    cmat = np.stack([r.vec for r in candidates])
    aps: list[float] = []
    by_lang: dict[str, list[float]] = {}
    for q in queries:
        order = _rank_order(q.vec, cmat, ids)
        ranking = RankedList(query_id=q.id, candidate_ids=tuple(ids[order].tolist()))
        ap = average_precision(ranking, dataset.qrels[q.id])
        aps.append(ap)
        by_lang.setdefault(q.lang, []).append(ap)
    return EvalReport(
        overall_map=math.fsum(aps) / len(aps),
        per_language_map={
            lang: math.fsum(vals) / len(vals) for lang, vals in sorted(by_lang.items())
        },
        query_count=len(queries),
        config=config,
    )


@dataclass(frozen=True)
class LogisticConfig:
    """Full-batch gradient-descent settings for the logistic classifier."""

    learning_rate: float = 0.5
    epochs: int = 300
    l2: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.l2 < 0.0:
            raise ConfigError("l2 must be non-negative")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_labels(labels, count: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim != 1 or y.size != count:
        raise DimensionError(f"expected {count} labels, got shape {y.shape}")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ConfigError("labels must be 0 or 1")
    return y


def train_logistic(
    features, labels, config: LogisticConfig = LogisticConfig()
) -> np.ndarray:
    """Train a binary logistic classifier by full-batch gradient descent.

    Zero initialization, exactly `config.epochs` iterations, mean-based
    gradients (duplicating every row leaves the result unchanged), optional
    L2 penalty on the weights but not the bias. Returns a (d+1)-vector with
    the bias last. Deterministic by construction.
    """
    x = linalg.as_matrix(features)
    n, d = x.shape
    y = _as_labels(labels, n)
    if n < 2 or np.unique(y).size < 2:
        raise DegenerateLabels("training labels must contain both classes")
    w = np.zeros(d + 1)
    for _ in range(config.epochs):
        z = x @ w[:d] + w[d]
        resid = _sigmoid(z) - y
        w[:d] -= config.learning_rate * (x.T @ resid / n + config.l2 * w[:d])
        w[d] -= config.learning_rate * float(resid.mean())
    return w


def predict_logistic(features, weights: np.ndarray) -> np.ndarray:
    """Predicted 0/1 labels: class 1 iff the logit is non-negative."""
    x = linalg.as_matrix(features)
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size != x.shape[1] + 1:
        raise DimensionError(
            f"weights must have length {x.shape[1] + 1}, got {w.size}"
        )
    z = x @ w[:-1] + w[-1]
    return (z >= 0.0).astype(np.int64)


def logistic_loss(features, labels, weights: np.ndarray, l2: float = 0.0) -> float:
    """Mean log-loss plus (l2/2)||w||^2 over the weights (bias unpenalized)."""
    x = linalg.as_matrix(features)
    y = _as_labels(labels, x.shape[0])
    w = np.asarray(weights, dtype=np.float64)
    z = x @ w[:-1] + w[-1]
    per_example = y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)
    return float(per_example.mean() + 0.5 * l2 * float(w[:-1] @ w[:-1]))


LabeledRecords = tuple[Sequence[EmbeddingRecord], Sequence[int]]


def evaluate_transfer(
    train_records: Sequence[EmbeddingRecord],
    train_labels: Sequence[int],
    tests: Mapping[str, LabeledRecords],
    bases: Optional[Mapping[str, ComponentBasis]] = None,
    *,
    mode: RemovalMode = DEFAULT_MODE,
    placement: str = "both",
    rank: Optional[int] = None,
    logistic: LogisticConfig = LogisticConfig(),
) -> TransferReport:
    """Zero-shot transfer: train on one language, evaluate accuracy per language.

    The classifier is trained once on the (optionally transformed) train set
    and applied unchanged everywhere. With bases supplied, test features are
    always transformed with their own language's basis; train features are
    transformed too when placement="both" and left raw when placement="eval".
    The report's average is the unweighted mean over evaluated languages.
    """
    if placement not in ("both", "eval"):
        raise ConfigError(f"placement must be 'both' or 'eval', got {placement!r}")
    train = tuple(train_records)
    if not train:
        raise DatasetError("transfer needs a non-empty training set")
    check_collection(train)
    langs = {r.lang for r in train}
    if len(langs) > 1:
        raise ConfigError(f"training set spans multiple languages: {sorted(langs)}")
    train_lang = train[0].lang
    if not tests:
        raise ConfigError("transfer needs at least one test language")
    y_train = _as_labels(train_labels, len(train))
    if np.unique(y_train).size < 2:
        raise DegenerateLabels("training labels must contain both classes")

    config = {
        "epochs": logistic.epochs,
        "l2": logistic.l2,
        "learning_rate": logistic.learning_rate,
        "mode": mode.value,
        "placement": placement,
        "rank": _effective_rank(bases, rank),
        "train_count": len(train),
        "train_fingerprint": corpus_fingerprint(train),
    }

    fit_records = train
    if bases is not None and placement == "both":
        fit_records = remove_batch(train, bases, mode, strict=True).records
    weights = train_logistic(np.stack([r.vec for r in fit_records]), y_train, logistic)

    per_lang: dict[str, float] = {}
    test_fps: dict[str, str] = {}
    for lang in sorted(tests):
        recs, labels = tests[lang]
        recs = tuple(recs)
        if not recs:
            raise DatasetError(f"test set for {lang!r} is empty")
        dim = check_collection(recs)
        if dim != train[0].dim:
            raise DimensionError(
                f"test set {lang!r} has dimension {dim}, train has {train[0].dim}"
            )
        y = _as_labels(labels, len(recs))
        test_fps[lang] = corpus_fingerprint(recs)
        if bases is not None:
            recs = remove_batch(recs, bases, mode, strict=True).records
        preds = predict_logistic(np.stack([r.vec for r in recs]), weights)
        per_lang[lang] = float(np.mean(preds == y.astype(np.int64)))
    config["test_fingerprints"] = test_fps

    return TransferReport(
        per_language_accuracy=per_lang,
        average=math.fsum(per_lang.values()) / len(per_lang),
        train_language=train_lang,
        config=config,
    )


def export_projection(
    records: Sequence[EmbeddingRecord], k: int
) -> list[tuple[str, str, tuple[float, ...]]]:
    """PCA scores for a record collection, one (id, lang, scores) row each.

    All records are stacked jointly (all languages together) and projected
    onto the top-k principal directions of the centered stack.
    """
    recs = tuple(records)
    if len(recs) < 2:
        raise RankError("projection export needs at least two records")
    check_collection(recs)
    scores = linalg.pca_project(np.stack([r.vec for r in recs]), k)
    return [
        (rec.id, rec.lang, tuple(float(x) for x in row))
        for rec, row in zip(recs, scores)
    ]
