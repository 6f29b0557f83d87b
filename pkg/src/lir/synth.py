"""Synthetic multilingual embedding generator with a controllable language bias.

Construction: every topic is a uniformly random direction of length
`semantic_scale`, shared across languages. Every language gets an offset of
length `bias_scale` along a unit direction orthogonal to the whole topic span
and to the other languages' offsets. A record for (language, topic) is

    offset + topic + per-coordinate Gaussian noise (std = noise_scale)

so the per-language dominant direction is, by construction, exactly the
language's offset once bias dominates the semantic scale. Records with index
0 in their (language, topic) group are designated queries; the qrels of a
query mark all other same-topic records, across all languages, as relevant.

Randomness comes from numpy's PCG64 bit generator seeded explicitly, so a
seed reproduces the same dataset on every platform; OS entropy is never used.
The draw order is topics, then raw offsets, then noise, and bias/skew only
rescale already-drawn vectors, so changing them never shifts the stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np

from .core import EmbeddingRecord, RetrievalDataset, _frozen_array
from .errors import ConfigError

TOPIC_PARITY = "topic-parity"


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings; everything is validated up front."""

    languages: tuple[str, ...]
    topics: int
    per_topic_per_lang: int
    dim: int
    bias_scale: float
    semantic_scale: float = 1.0
    noise_scale: float = 0.1
    seed: int = 0
    label_rule: Optional[str] = None
    skew: float = 0.0

    def __post_init__(self):
        langs = tuple(str(code).strip() for code in self.languages)
        if not langs or any(not code for code in langs):
            raise ConfigError("languages must be a non-empty list of non-blank codes")
        if len(set(langs)) != len(langs):
            raise ConfigError("language codes must be unique")
        object.__setattr__(self, "languages", langs)
        if self.topics < 2:
            raise ConfigError("need at least 2 topics")
        if self.per_topic_per_lang < 1:
            raise ConfigError("per_topic_per_lang must be >= 1")
        if self.dim < len(langs) + 2:
            raise ConfigError(
                f"dim must be >= languages + 2 = {len(langs) + 2} to leave room "
                "for orthogonal offsets plus semantic directions"
            )
        if not self.semantic_scale > 0.0:
            raise ConfigError("semantic_scale must be positive")
        if self.bias_scale < 0.0:
            raise ConfigError("bias_scale must be non-negative")
        if self.noise_scale < 0.0:
            raise ConfigError("noise_scale must be non-negative")
        if self.skew < 0.0:
            raise ConfigError("skew must be non-negative")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an integer in [0, 2^64)")
        if self.label_rule not in (None, TOPIC_PARITY):
            raise ConfigError(f"unknown label_rule {self.label_rule!r}")


@dataclass(frozen=True)
class SynthResult:
    """Generated records plus the ground truth that produced them."""

    records: tuple[EmbeddingRecord, ...]
    query_ids: frozenset[str]
    qrels: Mapping[str, frozenset[str]]
    labels: Optional[Mapping[str, int]]
    ground_truth: Mapping[str, np.ndarray]
    config: SynthConfig

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "query_ids", frozenset(self.query_ids))
        object.__setattr__(self, "qrels", MappingProxyType(dict(self.qrels)))
        if self.labels is not None:
            object.__setattr__(self, "labels", MappingProxyType(dict(self.labels)))
        object.__setattr__(
            self,
            "ground_truth",
            MappingProxyType(
                {lang: _frozen_array(vec) for lang, vec in dict(self.ground_truth).items()}
            ),
        )

    @property
    def queries(self) -> tuple[EmbeddingRecord, ...]:
        return tuple(r for r in self.records if r.id in self.query_ids)

    @property
    def candidates(self) -> tuple[EmbeddingRecord, ...]:
        return tuple(r for r in self.records if r.id not in self.query_ids)

    def records_for(self, lang: str) -> tuple[EmbeddingRecord, ...]:
        return tuple(r for r in self.records if r.lang == lang)

    def retrieval_dataset(self) -> RetrievalDataset:
        return RetrievalDataset(
            queries=self.queries, candidates=self.candidates, qrels=dict(self.qrels)
        )


def _orthonormal_rows(rows: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the row span via two-pass Gram-Schmidt."""
    scale = float(np.max(np.linalg.norm(rows, axis=1))) if rows.size else 0.0
    kept: list[np.ndarray] = []
    for row in rows:
        vec = row.copy()
        for _ in range(2):
            for q in kept:
                vec -= (q @ vec) * q
        nrm = float(np.linalg.norm(vec))
        if nrm > 1e-10 * max(scale, 1.0):
            kept.append(vec / nrm)
    if not kept:
        return np.zeros((0, rows.shape[1]))
    return np.stack(kept)


def generate(config: SynthConfig) -> SynthResult:
    """Generate a deterministic synthetic multilingual embedding corpus."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    langs = config.languages
    n_lang, n_topic, per, dim = (
        len(langs),
        config.topics,
        config.per_topic_per_lang,
        config.dim,
    )

    raw_topics = rng.standard_normal((n_topic, dim))
    topic_norms = np.linalg.norm(raw_topics, axis=1)
    if np.any(topic_norms < 1e-12):
        raise ConfigError("degenerate topic draw; use a different seed")
    topics = config.semantic_scale * raw_topics / topic_norms[:, None]

    raw_offsets = rng.standard_normal((n_lang, dim))
    noise = config.noise_scale * rng.standard_normal((n_lang * n_topic * per, dim))

    topic_basis = _orthonormal_rows(topics)
    directions: list[np.ndarray] = []
    for i in range(n_lang):
        vec = raw_offsets[i].copy()
        for _ in range(2):
            vec -= topic_basis.T @ (topic_basis @ vec)
            for prev in directions:
                vec -= (prev @ vec) * prev
        nrm = float(np.linalg.norm(vec))
        if nrm < 1e-8:
            raise ConfigError(
                "cannot orthogonalize language offsets against the topic span; "
                "increase dim or reduce topics"
            )
        directions.append(vec / nrm)

    if config.skew > 0.0:
        # Robustness knob: tilt each offset back toward the topic span so the
        # exact-orthogonality premise no longer holds.
        tilted = []
        for i, direction in enumerate(directions):
            in_span = topic_basis.T @ (topic_basis @ raw_offsets[i])
            nrm = float(np.linalg.norm(in_span))
            if nrm > 0.0:
                direction = direction + config.skew * in_span / nrm
                direction = direction / float(np.linalg.norm(direction))
            tilted.append(direction)
        directions = tilted

    offsets = {lang: config.bias_scale * directions[i] for i, lang in enumerate(langs)}

    records: list[EmbeddingRecord] = []
    query_ids: set[str] = set()
    by_topic_candidates: dict[int, list[str]] = {t: [] for t in range(n_topic)}
    labels: Optional[dict[str, int]] = {} if config.label_rule == TOPIC_PARITY else None
    row = 0
    for li, lang in enumerate(langs):
        base = offsets[lang]
        for t in range(n_topic):
            for j in range(per):
                rec_id = f"{lang}-t{t:04d}-{j:04d}"
                vec = base + topics[t] + noise[row]
                row += 1
                records.append(EmbeddingRecord(id=rec_id, lang=lang, vec=vec))
                if j == 0:
                    query_ids.add(rec_id)
                else:
                    by_topic_candidates[t].append(rec_id)
                if labels is not None:
                    labels[rec_id] = t % 2

    qrels = {
        rec_id: frozenset(by_topic_candidates[t])
        for t in range(n_topic)
        for rec_id in (f"{lang}-t{t:04d}-0000" for lang in langs)
    }

    return SynthResult(
        records=tuple(records),
        query_ids=frozenset(query_ids),
        qrels=qrels,
        labels=labels,
        ground_truth=offsets,
        config=config,
    )
