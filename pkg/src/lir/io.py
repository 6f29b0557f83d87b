"""Bit-exact serialization: binary embedding/component files, JSONL inputs,
report JSON, and the projection CSV.

Binary layouts (all integers little-endian):

  embeddings (.lire):
    magic b"LIRE" | version byte 1 | u32 header length | UTF-8 JSON header
    {"count","dim","dtype":"f32","lang"} | per record: u16 id length,
    id bytes (UTF-8), dim float32 values.

  components (.lirc):
    magic b"LIRC" | version byte 1 | u32 header length | UTF-8 JSON header
    {"dim","rank","lang","sample_count","source_fingerprint"[,"mode_hint"]}
    | dim*rank float32 values in column-major order.

Files store 32-bit floats; everything is upcast to 64-bit on read, and a
stored basis is re-orthonormalized after the 32-bit round trip. Writes are
byte-deterministic: the same in-memory value always produces the same file.
Every malformed input raises a structured error, never a crash.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import BinaryIO, Mapping, Sequence

import numpy as np

from .core import (
    ComponentBasis,
    EmbeddingRecord,
    EvalReport,
    TransferReport,
    check_collection,
)
from .errors import (
    CorruptBasis,
    DimensionError,
    DuplicateKey,
    FormatError,
    InvalidVector,
    LanguageMismatch,
    ParseError,
    TruncatedFile,
)

EMBEDDING_MAGIC = b"LIRE"
COMPONENT_MAGIC = b"LIRC"
FORMAT_VERSION = 1

_CORRUPT_BASIS_TOL = 1e-2


def _read_exact(f: BinaryIO, nbytes: int, what: str) -> bytes:
    data = f.read(nbytes)
    if len(data) != nbytes:
        raise TruncatedFile(f"file ends inside {what}")
    return data


def _read_header(f: BinaryIO, magic: bytes) -> dict:
    if f.read(len(magic)) != magic:
        raise FormatError("bad magic")
    version = _read_exact(f, 1, "version byte")[0]
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    (hlen,) = struct.unpack("<I", _read_exact(f, 4, "header length"))
    raw = _read_exact(f, hlen, "header")
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise FormatError(f"header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError("header must be a JSON object")
    return header


def _header_int(header: dict, key: str, minimum: int = 0) -> int:
    value = header.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise FormatError(f"header field {key!r} must be an integer >= {minimum}")
    return value


def _header_str(header: dict, key: str) -> str:
    value = header.get(key)
    if not isinstance(value, str) or not value:
        raise FormatError(f"header field {key!r} must be a non-empty string")
    return value


def write_embeddings(path, records: Sequence[EmbeddingRecord]) -> None:
    """Write one language's records to a .lire file (32-bit values)."""
    records = list(records)
    if not records:
        raise FormatError("refusing to write an empty embedding file")
    dim = check_collection(records)
    langs = {r.lang for r in records}
    if len(langs) > 1:
        raise LanguageMismatch(
            f"an embedding file holds a single language, got {sorted(langs)}"
        )
    header = {"count": len(records), "dim": dim, "dtype": "f32", "lang": records[0].lang}
    hjson = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf = bytearray()
    buf += EMBEDDING_MAGIC
    buf.append(FORMAT_VERSION)
    buf += struct.pack("<I", len(hjson))
    buf += hjson
    for rec in records:
        idb = rec.id.encode("utf-8")
        if len(idb) > 0xFFFF:
            raise FormatError(f"record id too long to store: {rec.id[:32]!r}...")
        buf += struct.pack("<H", len(idb))
        buf += idb
        buf += rec.vec.astype("<f4").tobytes()
    Path(path).write_bytes(bytes(buf))


def read_embeddings(path) -> list[EmbeddingRecord]:
    """Read a .lire file back into records (values upcast to 64-bit)."""
    with open(path, "rb") as f:
        header = _read_header(f, EMBEDDING_MAGIC)
        count = _header_int(header, "count")
        dim = _header_int(header, "dim", minimum=1)
        lang = _header_str(header, "lang")
        if header.get("dtype") != "f32":
            raise FormatError(f"unsupported dtype {header.get('dtype')!r}")
        records = []
        for idx in range(count):
            (idlen,) = struct.unpack(
                "<H", _read_exact(f, 2, f"record {idx} id length")
            )
            try:
                rec_id = _read_exact(f, idlen, f"record {idx} id").decode("utf-8")
            except UnicodeDecodeError as exc:
                raise FormatError(f"record {idx} id is not valid UTF-8") from exc
            raw = _read_exact(f, 4 * dim, f"record {idx} values")
            vec = np.frombuffer(raw, dtype="<f4").astype(np.float64)
            records.append(EmbeddingRecord(id=rec_id, lang=lang, vec=vec))
        if f.read(1):
            raise FormatError("trailing data after the declared record count")
    check_collection(records)
    return records


def write_components(path, basis: ComponentBasis, mode_hint: str | None = None) -> None:
    """Write a component basis to a .lirc file (32-bit, column-major)."""
    header: dict = {
        "dim": basis.dim,
        "lang": basis.lang,
        "rank": basis.rank,
        "sample_count": basis.sample_count,
        "source_fingerprint": basis.source_fingerprint,
    }
    if mode_hint is not None:
        header["mode_hint"] = str(mode_hint)
    hjson = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf = bytearray()
    buf += COMPONENT_MAGIC
    buf.append(FORMAT_VERSION)
    buf += struct.pack("<I", len(hjson))
    buf += hjson
    buf += basis.basis.astype("<f4").tobytes(order="F")
    Path(path).write_bytes(bytes(buf))


def _gram_schmidt_columns(b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(b)
    for i in range(b.shape[1]):
        col = b[:, i].copy()
        for _ in range(2):
            if i:
                col -= out[:, :i] @ (out[:, :i].T @ col)
        nrm = float(np.linalg.norm(col))
        if nrm < 0.5:
            raise CorruptBasis("basis columns are linearly dependent")
        out[:, i] = col / nrm
    return out


def read_components(path) -> ComponentBasis:
    """Read a .lirc file; validates near-orthonormality and repairs the
    32-bit rounding by re-orthonormalizing to 64-bit tolerance."""
    with open(path, "rb") as f:
        header = _read_header(f, COMPONENT_MAGIC)
        dim = _header_int(header, "dim", minimum=1)
        rank = _header_int(header, "rank")
        lang = _header_str(header, "lang")
        sample_count = _header_int(header, "sample_count")
        fingerprint = _header_str(header, "source_fingerprint")
        if rank > dim:
            raise FormatError(f"rank {rank} exceeds dimension {dim}")
        raw = _read_exact(f, 4 * dim * rank, "basis values")
        if f.read(1):
            raise FormatError("trailing data after the basis values")
    values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    basis = values.reshape((dim, rank), order="F")
    if rank:
        if not np.all(np.isfinite(basis)):
            raise CorruptBasis("stored basis has non-finite values")
        dev = float(np.max(np.abs(basis.T @ basis - np.eye(rank))))
        if dev > _CORRUPT_BASIS_TOL:
            raise CorruptBasis(
                f"stored basis deviates from orthonormal by {dev:.3g}"
            )
        basis = _gram_schmidt_columns(basis)
    return ComponentBasis(
        lang=lang,
        basis=basis,
        rank=rank,
        source_fingerprint=fingerprint,
        sample_count=sample_count,
    )


def read_components_dir(path) -> dict[str, ComponentBasis]:
    """Read every .lirc file in a directory, keyed by language."""
    root = Path(path)
    files = sorted(root.glob("*.lirc"))
    if not files:
        raise FormatError(f"no .lirc files found in {root}")
    bases: dict[str, ComponentBasis] = {}
    for file in files:
        basis = read_components(file)
        if basis.lang in bases:
            raise DuplicateKey(
                basis.lang, f"two component files for language {basis.lang!r}"
            )
        bases[basis.lang] = basis
    return bases


def _iter_jsonl(path):
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped:
                raise ParseError(line_no, "blank line")
            try:
                obj = json.loads(stripped)
            except ValueError as exc:
                raise ParseError(line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ParseError(line_no, "expected a JSON object")
            yield line_no, obj


def _jsonl_str(obj: dict, key: str, line_no: int) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        raise ParseError(line_no, f"field {key!r} must be a non-empty string")
    return value


def read_jsonl_embeddings(path) -> list[EmbeddingRecord]:
    """Read records from JSONL lines of the form {"id","lang","vec"}."""
    records: list[EmbeddingRecord] = []
    dim = 0
    for line_no, obj in _iter_jsonl(path):
        rec_id = _jsonl_str(obj, "id", line_no)
        lang = _jsonl_str(obj, "lang", line_no)
        vec = obj.get("vec")
        if not isinstance(vec, list) or not vec or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in vec
        ):
            raise ParseError(line_no, "field 'vec' must be a non-empty number list")
        try:
            rec = EmbeddingRecord(id=rec_id, lang=lang, vec=np.asarray(vec, dtype=np.float64))
        except InvalidVector as exc:
            raise ParseError(line_no, str(exc)) from exc
        if dim == 0:
            dim = rec.dim
        elif rec.dim != dim:
            raise DimensionError(
                f"line {line_no}: vector length {rec.dim} != {dim} seen earlier"
            )
        records.append(rec)
    check_collection(records)
    return records


def read_qrels(path) -> dict[str, frozenset[str]]:
    """Read relevance judgments from JSONL lines {"query_id","relevant":[...]}."""
    out: dict[str, frozenset[str]] = {}
    for line_no, obj in _iter_jsonl(path):
        qid = _jsonl_str(obj, "query_id", line_no)
        relevant = obj.get("relevant")
        if not isinstance(relevant, list) or not all(
            isinstance(x, str) and x for x in relevant
        ):
            raise ParseError(line_no, "field 'relevant' must be a list of ids")
        if qid in out:
            raise DuplicateKey(qid, f"line {line_no}: duplicate query_id {qid!r}")
        out[qid] = frozenset(relevant)
    return out


def read_labels(path) -> dict[str, int]:
    """Read binary labels from JSONL lines {"id","label"} with label in {0,1}."""
    out: dict[str, int] = {}
    for line_no, obj in _iter_jsonl(path):
        rec_id = _jsonl_str(obj, "id", line_no)
        label = obj.get("label")
        if not isinstance(label, int) or isinstance(label, bool) or label not in (0, 1):
            raise ParseError(line_no, "field 'label' must be 0 or 1")
        if rec_id in out:
            raise DuplicateKey(rec_id, f"line {line_no}: duplicate id {rec_id!r}")
        out[rec_id] = label
    return out


def write_qrels(path, qrels: Mapping[str, frozenset[str]]) -> None:
    lines = [
        json.dumps(
            {"query_id": qid, "relevant": sorted(qrels[qid])},
            sort_keys=True,
            separators=(",", ":"),
        )
        for qid in sorted(qrels)
    ]
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def write_labels(path, labels: Mapping[str, int]) -> None:
    lines = [
        json.dumps({"id": rec_id, "label": labels[rec_id]}, sort_keys=True, separators=(",", ":"))
        for rec_id in sorted(labels)
    ]
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def report_to_dict(report: EvalReport | TransferReport) -> dict:
    if isinstance(report, EvalReport):
        return {
            "config": dict(report.config),
            "overall_map": report.overall_map,
            "per_language_map": dict(report.per_language_map),
            "query_count": report.query_count,
        }
    if isinstance(report, TransferReport):
        return {
            "average": report.average,
            "config": dict(report.config),
            "per_language_accuracy": dict(report.per_language_accuracy),
            "train_language": report.train_language,
        }
    raise FormatError(f"cannot serialize object of type {type(report).__name__}")


def report_json(report: EvalReport | TransferReport) -> str:
    """Pretty-printed JSON with sorted keys and a trailing newline."""
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def write_report(path, report: EvalReport | TransferReport) -> None:
    Path(path).write_bytes(report_json(report).encode("utf-8"))


def write_projection_csv(path, rows: Sequence[tuple[str, str, tuple[float, ...]]]) -> None:
    """Write projection rows as CSV: header id,lang,score_1..score_k, UTF-8,
    LF line endings, full-precision (round-trip exact) decimal floats."""
    rows = list(rows)
    if not rows:
        raise FormatError("refusing to write an empty projection CSV")
    k = len(rows[0][2])
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "lang"] + [f"score_{i + 1}" for i in range(k)])
        for rec_id, lang, scores in rows:
            if len(scores) != k:
                raise DimensionError("projection rows have mixed score counts")
            writer.writerow([rec_id, lang] + [repr(float(s)) for s in scores])
