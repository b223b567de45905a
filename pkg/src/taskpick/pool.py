"""Prompt pool loading, validation, and task partitioning.

A pool file is JSON Lines: one record per line, each an object with

* ``id`` (string, unique across the pool),
* ``task`` (string label, matched exactly, never normalized),
* ``embedding`` (optional array of reals, same length for every record),
* ``confidence`` (optional real in (0, 1]),
* ``token_probs`` (optional array of per-position probability arrays;
  within a position the entries are sorted non-increasing, lie in
  [0, 1], and there are at least two of them).

Embeddings may instead be supplied through a binary sidecar file whose
layout is: two little-endian uint64 values ``N`` and ``d``, followed by
``N * d`` little-endian IEEE-754 float32 values in row-major order.
Inline embeddings and a sidecar are mutually exclusive.
"""

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DuplicateId,
    MissingEmbedding,
    ParseError,
    ShapeError,
    ValidationError,
)

_SIDECAR_HEADER = struct.Struct("<QQ")


@dataclass(frozen=True)
class PromptRecord:
    """One pool element. Only ``id`` and ``task`` are mandatory."""

    id: str
    task: str
    embedding: np.ndarray | None = None
    token_probs: tuple[tuple[float, ...], ...] | None = None
    confidence: float | None = None


@dataclass(frozen=True)
class TaskPartition:
    """Pool indices grouped by task, tasks ordered lexicographically."""

    tasks: tuple[str, ...]
    members: tuple[tuple[int, ...], ...]
    counts: tuple[int, ...]

    def index_of(self, task: str) -> int:
        return self.tasks.index(task)

    def members_of(self, task: str) -> tuple[int, ...]:
        return self.members[self.index_of(task)]


def _build_partition(records) -> TaskPartition:
    groups: dict[str, list[int]] = {}
    for i, rec in enumerate(records):
        groups.setdefault(rec.task, []).append(i)
    tasks = tuple(sorted(groups))
    members = tuple(tuple(groups[t]) for t in tasks)
    return TaskPartition(tasks=tasks, members=members, counts=tuple(len(m) for m in members))


def _check_token_probs(probs, rec_id: str) -> None:
    if len(probs) == 0:
        raise ValidationError(f"record {rec_id!r}: token_probs has no positions")
    for j, pos in enumerate(probs):
        if len(pos) < 2:
            raise ValidationError(
                f"record {rec_id!r}: token_probs position {j} has fewer than 2 entries"
            )
        prev = None
        for p in pos:
            if not (0.0 <= p <= 1.0):
                raise ValidationError(
                    f"record {rec_id!r}: probability {p!r} at position {j} is outside [0, 1]"
                )
            if prev is not None and p > prev:
                raise ValidationError(
                    f"record {rec_id!r}: probabilities at position {j} are not non-increasing"
                )
            prev = p


class Pool:
    """Immutable, validated prompt pool with a lexicographic task partition.

    Safe for concurrent reads; all mutation happens before construction
    finishes. Build one via :func:`load_pool` or directly from records.
    """

    def __init__(self, records):
        records = tuple(records)
        if not records:
            raise ValidationError("pool contains no records")

        seen: set[str] = set()
        dim: int | None = None
        for rec in records:
            if rec.id in seen:
                raise DuplicateId(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
            if rec.embedding is not None:
                emb = rec.embedding
                if emb.ndim != 1 or emb.shape[0] < 1:
                    raise ShapeError(f"record {rec.id!r}: embedding must be a non-empty vector")
                if dim is None:
                    dim = emb.shape[0]
                elif emb.shape[0] != dim:
                    raise ShapeError(
                        f"record {rec.id!r}: embedding length {emb.shape[0]} != {dim}"
                    )
                if not np.all(np.isfinite(emb)):
                    raise ValidationError(f"record {rec.id!r}: embedding has non-finite values")
            if rec.confidence is not None and not (0.0 < rec.confidence <= 1.0):
                raise ValidationError(
                    f"record {rec.id!r}: confidence {rec.confidence!r} is outside (0, 1]"
                )
            if rec.token_probs is not None:
                _check_token_probs(rec.token_probs, rec.id)

        self._records = records
        self._partition = _build_partition(records)
        self._matrix: np.ndarray | None = None

    @property
    def records(self) -> tuple[PromptRecord, ...]:
        return self._records

    @property
    def partition(self) -> TaskPartition:
        return self._partition

    def __len__(self) -> int:
        return len(self._records)

    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self._records)

    def embedding_matrix(self) -> np.ndarray:
        """All embeddings stacked as a read-only float64 matrix of shape (N, d).

        Raises MissingEmbedding if any record lacks one.
        """
        if self._matrix is None:
            for rec in self._records:
                if rec.embedding is None:
                    raise MissingEmbedding(f"record {rec.id!r} has no embedding")
            mat = np.stack([r.embedding for r in self._records]).astype(np.float64)
            mat.flags.writeable = False
            self._matrix = mat
        return self._matrix


def partition_by_task(pool: Pool) -> TaskPartition:
    """Recompute the task partition of a pool (deterministic for a fixed pool)."""
    return _build_partition(pool.records)


def _record_from_obj(obj, path, line_no: int) -> PromptRecord:
    def fail(msg):
        raise ParseError(f"{path}:{line_no}: {msg}")

    if not isinstance(obj, dict):
        fail("record is not an object")
    rec_id = obj.get("id")
    task = obj.get("task")
    if not isinstance(rec_id, str) or not rec_id:
        fail("missing or invalid 'id'")
    if not isinstance(task, str) or not task:
        fail("missing or invalid 'task'")

    embedding = None
    if obj.get("embedding") is not None:
        raw = obj["embedding"]
        if not isinstance(raw, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw
        ):
            fail("'embedding' must be an array of numbers")
        embedding = np.asarray(raw, dtype=np.float64)
        embedding.flags.writeable = False

    confidence = None
    if obj.get("confidence") is not None:
        raw = obj["confidence"]
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            fail("'confidence' must be a number")
        confidence = float(raw)

    token_probs = None
    if obj.get("token_probs") is not None:
        raw = obj["token_probs"]
        if not isinstance(raw, list):
            fail("'token_probs' must be an array of arrays")
        positions = []
        for pos in raw:
            if not isinstance(pos, list) or any(
                isinstance(v, bool) or not isinstance(v, (int, float)) for v in pos
            ):
                fail("'token_probs' must be an array of arrays of numbers")
            positions.append(tuple(float(v) for v in pos))
        token_probs = tuple(positions)

    return PromptRecord(
        id=rec_id, task=task, embedding=embedding, token_probs=token_probs, confidence=confidence
    )


def load_pool(pool_path, embeddings_path=None) -> Pool:
    """Load and validate a pool file, optionally attaching sidecar embeddings.

    Records keep the order of their lines, so pool index equals input
    line index (blank lines are skipped).
    """
    records = []
    with open(pool_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{pool_path}:{line_no}: invalid JSON ({exc.msg})") from exc
            records.append(_record_from_obj(obj, pool_path, line_no))

    if embeddings_path is not None:
        if any(r.embedding is not None for r in records):
            raise ValidationError(
                "pool has inline embeddings; a sidecar file cannot also be given"
            )
        matrix = read_embeddings(embeddings_path)
        if matrix.shape[0] != len(records):
            raise ShapeError(
                f"sidecar holds {matrix.shape[0]} rows but pool has {len(records)} records"
            )
        records = [replace(r, embedding=matrix[i]) for i, r in enumerate(records)]

    return Pool(records)


def save_pool(pool: Pool, pool_path, embeddings_path=None) -> None:
    """Write a pool back to disk; reloading yields identical records.

    With ``embeddings_path`` the embeddings go to a binary sidecar and
    are omitted from the JSON lines, otherwise they are stored inline.
    """
    if embeddings_path is not None:
        write_embeddings(embeddings_path, pool.embedding_matrix().astype(np.float32))
    with open(pool_path, "w", encoding="utf-8") as fh:
        for rec in pool.records:
            obj = {"id": rec.id, "task": rec.task}
            if embeddings_path is None and rec.embedding is not None:
                obj["embedding"] = [float(v) for v in rec.embedding]
            if rec.confidence is not None:
                obj["confidence"] = rec.confidence
            if rec.token_probs is not None:
                obj["token_probs"] = [list(pos) for pos in rec.token_probs]
            fh.write(json.dumps(obj) + "\n")


def read_embeddings(path) -> np.ndarray:
    """Read a binary embedding sidecar into a read-only float32 (N, d) matrix."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _SIDECAR_HEADER.size:
        raise ShapeError(f"{path}: sidecar shorter than its 16-byte header")
    n, d = _SIDECAR_HEADER.unpack_from(data)
    expected = _SIDECAR_HEADER.size + n * d * 4
    if len(data) != expected:
        raise ShapeError(f"{path}: expected {expected} bytes for ({n}, {d}), found {len(data)}")
    if n > 0 and d < 1:
        raise ShapeError(f"{path}: embedding dimension must be >= 1, header says {d}")
    matrix = np.frombuffer(data, dtype="<f4", offset=_SIDECAR_HEADER.size).reshape(n, d)
    return matrix  # frombuffer on bytes is already read-only


def write_embeddings(path, matrix) -> None:
    """Write an (N, d) array as a binary embedding sidecar (float32)."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ShapeError("embedding matrix must be 2-dimensional")
    with open(path, "wb") as fh:
        fh.write(_SIDECAR_HEADER.pack(matrix.shape[0], matrix.shape[1]))
        fh.write(matrix.tobytes())
