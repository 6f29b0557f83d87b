"""Shared domain types: embedding records, language matrices, component bases,
retrieval datasets, and evaluation reports.

All types are immutable after construction and safe to share across threads.
Array fields are stored as read-only float64 copies regardless of the input
dtype; files may store 32-bit values but all computation happens in 64-bit.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CorruptBasis,
    DatasetError,
    DimensionError,
    DuplicateKey,
    InvalidMatrix,
    InvalidVector,
    LanguageMismatch,
    NoRelevantError,
    RankError,
)


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    out = np.array(values, dtype=dtype, order="C", copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class EmbeddingRecord:
    """One d-dimensional embedding vector with an id and a language tag.

    Language codes are opaque, case-sensitive strings; the only normalization
    applied is whitespace trimming.
    """

    id: str
    lang: str
    vec: np.ndarray

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise InvalidVector("record id must be a non-empty string")
        lang = str(self.lang).strip()
        if not lang:
            raise InvalidVector(f"record {self.id!r}: language tag is empty")
        object.__setattr__(self, "lang", lang)
        vec = np.asarray(self.vec, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise InvalidVector(
                f"record {self.id!r}: vector must be 1-D with at least one coordinate"
            )
        if not np.all(np.isfinite(vec)):
            raise InvalidVector(f"record {self.id!r}: vector has non-finite coordinates")
        object.__setattr__(self, "vec", _frozen_array(vec))

    @property
    def dim(self) -> int:
        return self.vec.size


def check_collection(records: Sequence[EmbeddingRecord]) -> int:
    """Validate a record collection: unique ids, one shared dimension.

    Returns the shared dimension (0 for an empty collection). Raises
    DuplicateKey on repeated ids and DimensionError on mixed dimensions.
    Per-record finiteness is enforced by EmbeddingRecord itself.
    """
    seen: set[str] = set()
    dim = 0
    for rec in records:
        if rec.id in seen:
            raise DuplicateKey(rec.id, f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
        if dim == 0:
            dim = rec.dim
        elif rec.dim != dim:
            raise DimensionError(
                f"record {rec.id!r} has dimension {rec.dim}, expected {dim}"
            )
    return dim


def corpus_fingerprint(records: Iterable[EmbeddingRecord]) -> str:
    """Deterministic checksum identifying a record collection (ids, langs, values)."""
    h = hashlib.sha256()
    count = 0
    for rec in records:
        h.update(rec.id.encode("utf-8"))
        h.update(b"\x00")
        h.update(rec.lang.encode("utf-8"))
        h.update(b"\x00")
        h.update(rec.vec.tobytes())
        count += 1
    h.update(struct.pack("<Q", count))
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class LanguageMatrix:
    """n x d matrix whose rows are embeddings of phrases in one language."""

    lang: str
    rows: np.ndarray

    def __post_init__(self):
        lang = str(self.lang).strip()
        if not lang:
            raise InvalidMatrix("language tag is empty")
        object.__setattr__(self, "lang", lang)
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise InvalidMatrix("language matrix must be 2-D with n >= 1 and d >= 1")
        if not np.all(np.isfinite(rows)):
            raise InvalidMatrix("language matrix has non-finite entries")
        object.__setattr__(self, "rows", _frozen_array(rows))

    @classmethod
    def from_records(cls, records: Sequence[EmbeddingRecord]) -> "LanguageMatrix":
        records = tuple(records)
        if not records:
            raise InvalidMatrix("cannot build a language matrix from zero records")
        check_collection(records)
        langs = {rec.lang for rec in records}
        if len(langs) > 1:
            raise LanguageMismatch(
                f"records span multiple languages: {sorted(langs)}"
            )
        return cls(lang=records[0].lang, rows=np.stack([r.vec for r in records]))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.lang.encode("utf-8"))
        h.update(struct.pack("<QQ", self.n, self.d))
        h.update(self.rows.tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class SvdResult:
    """Thin factorization M = U diag(sigma) V^T with k = min(n, d).

    sigma is non-negative and non-increasing; U (n x k) and V (d x k) have
    orthonormal columns oriented so each column of V has its largest-magnitude
    entry non-negative.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.ndim != 2 or v.ndim != 2 or sigma.ndim != 1:
            raise InvalidMatrix("SVD factors have wrong ranks")
        k = sigma.size
        if u.shape[1] != k or v.shape[1] != k:
            raise DimensionError("SVD factor shapes do not agree")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(sigma)) and np.all(np.isfinite(v))):
            raise InvalidMatrix("SVD factors contain non-finite entries")
        if k and (np.any(sigma < 0.0) or np.any(np.diff(sigma) > 0.0)):
            raise InvalidMatrix("singular values must be non-negative and non-increasing")
        object.__setattr__(self, "u", _frozen_array(u))
        object.__setattr__(self, "sigma", _frozen_array(sigma))
        object.__setattr__(self, "v", _frozen_array(v))


_BASIS_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class ComponentBasis:
    """d x r orthonormal matrix of language-identity directions for one language.

    rank 0 is legal and makes removal a no-op. sample_count records the number
    of rows the basis was fitted on, and source_fingerprint the checksum of
    the fitting corpus.
    """

    lang: str
    basis: np.ndarray
    rank: int
    source_fingerprint: str
    sample_count: int

    def __post_init__(self):
        lang = str(self.lang).strip()
        if not lang:
            raise InvalidMatrix("language tag is empty")
        object.__setattr__(self, "lang", lang)
        basis = np.asarray(self.basis, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[0] < 1:
            raise InvalidMatrix("component basis must be a 2-D d x r matrix with d >= 1")
        if not np.all(np.isfinite(basis)):
            raise InvalidMatrix("component basis has non-finite entries")
        d, r = basis.shape
        if self.rank != r:
            raise RankError(f"declared rank {self.rank} != basis columns {r}")
        if self.sample_count < 0:
            raise RankError("sample_count must be non-negative")
        if r > min(self.sample_count, d):
            raise RankError(
                f"rank {r} exceeds min(sample_count={self.sample_count}, d={d})"
            )
        if r:
            dev = np.max(np.abs(basis.T @ basis - np.eye(r)))
            if dev > _BASIS_ORTHO_TOL:
                raise CorruptBasis(
                    f"basis columns deviate from orthonormal by {dev:.3g}"
                )
        object.__setattr__(self, "basis", _frozen_array(basis))

    @property
    def dim(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class RetrievalDataset:
    """Queries, candidates, and relevance judgments for MAP evaluation.

    Every qrels key must name a query, every query must have at least one
    relevant candidate, and every relevant id must exist in the candidate
    pool. Queries are never silently deduplicated from the candidate pool.
    """

    queries: tuple[EmbeddingRecord, ...]
    candidates: tuple[EmbeddingRecord, ...]
    qrels: Mapping[str, frozenset[str]]

    def __post_init__(self):
        queries = tuple(self.queries)
        candidates = tuple(self.candidates)
        if not queries:
            raise DatasetError("dataset has no queries")
        if not candidates:
            raise DatasetError("dataset has no candidates")
        dq = check_collection(queries)
        dc = check_collection(candidates)
        if dq != dc:
            raise DimensionError(
                f"query dimension {dq} != candidate dimension {dc}"
            )
        qrels = {str(k): frozenset(str(i) for i in v) for k, v in dict(self.qrels).items()}
        qids = {r.id for r in queries}
        cids = {r.id for r in candidates}
        for qid, rel in qrels.items():
            if qid not in qids:
                raise DatasetError(f"qrels references unknown query id {qid!r}")
            if not rel:
                raise NoRelevantError(f"query {qid!r} has no relevant candidates")
            unknown = rel - cids
            if unknown:
                raise DatasetError(
                    f"qrels for query {qid!r} references unknown candidate ids: "
                    f"{sorted(unknown)[:5]}"
                )
        for rec in queries:
            if rec.id not in qrels:
                raise NoRelevantError(f"query {rec.id!r} has no qrels entry")
        object.__setattr__(self, "queries", queries)
        object.__setattr__(self, "candidates", candidates)
        object.__setattr__(self, "qrels", MappingProxyType(qrels))

    @property
    def dim(self) -> int:
        return self.queries[0].dim


@dataclass(frozen=True)
class EvalReport:
    """Retrieval evaluation result.

    overall_map is the mean of per-query average precisions, not the mean of
    the per-language means. per_language_map groups queries by their own
    language tag.
    """

    overall_map: float
    per_language_map: Mapping[str, float]
    query_count: int
    config: Mapping[str, object]

    def __post_init__(self):
        object.__setattr__(
            self, "per_language_map", MappingProxyType(dict(self.per_language_map))
        )
        object.__setattr__(self, "config", MappingProxyType(dict(self.config)))


@dataclass(frozen=True)
class TransferReport:
    """Zero-shot transfer-classification result.

    average is the unweighted mean of the per-language accuracies over all
    evaluated languages.
    """

    per_language_accuracy: Mapping[str, float]
    average: float
    train_language: str
    config: Mapping[str, object]

    def __post_init__(self):
        object.__setattr__(
            self,
            "per_language_accuracy",
            MappingProxyType(dict(self.per_language_accuracy)),
        )
        object.__setattr__(self, "config", MappingProxyType(dict(self.config)))
