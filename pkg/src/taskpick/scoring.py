"""Per-example confidence and uncertainty scores, and task-level means.

All scores are pure functions of the token-probability trace (or of a
precomputed confidence), so they can be evaluated in any order or in
parallel without changing results.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateProbability,
    EmptySequence,
    InsufficientCandidates,
    MissingConfidence,
    ParseError,
    ValidationError,
)
from .pool import Pool, PromptRecord, TaskPartition

# Task means are floored before they are ever inverted downstream.
CONFIDENCE_FLOOR = 1e-12


def log_confidence(token_probs) -> float:
    """Sum of log realized-token probabilities (the top entry per position).

    Kept in log space because the raw product underflows for long
    sequences.
    """
    total = 0.0
    count = 0
    for j, pos in enumerate(token_probs):
        if len(pos) == 0:
            raise ValidationError(f"position {j} has no probability entries")
        p = pos[0]
        if p <= 0.0:
            raise DegenerateProbability(f"realized-token probability {p!r} at position {j}")
        total += math.log(p)
        count += 1
    if count == 0:
        raise EmptySequence("token_probs has no positions")
    return total


def confidence(token_probs) -> float:
    """Product of realized-token probabilities, in (0, 1]."""
    return math.exp(log_confidence(token_probs))


def mean_entropy(token_probs) -> float:
    """Mean per-position Shannon entropy (natural log, 0*log 0 = 0)."""
    total = 0.0
    count = 0
    for pos in token_probs:
        h = 0.0
        for p in pos:
            if p > 0.0:
                h -= p * math.log(p)
        total += h
        count += 1
    if count == 0:
        raise EmptySequence("token_probs has no positions")
    return total / count


def margins(token_probs) -> tuple[float, float]:
    """(mean, min) of the per-position top-two probability gaps."""
    gaps = []
    for j, pos in enumerate(token_probs):
        if len(pos) < 2:
            raise InsufficientCandidates(f"position {j} has fewer than 2 entries")
        gaps.append(pos[0] - pos[1])
    if not gaps:
        raise EmptySequence("token_probs has no positions")
    return sum(gaps) / len(gaps), min(gaps)


@dataclass(frozen=True)
class ExampleScores:
    """Scores for one example; a field is None when its inputs are absent.

    ``confidence`` is the raw product (exactly the precomputed field when
    one was supplied); ``log_confidence`` is its log-space form, which
    selectors use for ranking because it stays resolvable where the raw
    product underflows.
    """

    confidence: float | None = None
    log_confidence: float | None = None
    mean_entropy: float | None = None
    mean_margin: float | None = None
    min_margin: float | None = None


def score_example(record: PromptRecord) -> ExampleScores:
    """Compute every score derivable from the record's fields.

    A precomputed confidence field takes precedence over the trace.
    """
    conf = logc = ent = mean_m = min_m = None
    if record.confidence is not None:
        conf = record.confidence
        logc = math.log(conf)
    elif record.token_probs is not None:
        logc = log_confidence(record.token_probs)
        conf = math.exp(logc)
    if record.token_probs is not None:
        ent = mean_entropy(record.token_probs)
        mean_m, min_m = margins(record.token_probs)
    return ExampleScores(
        confidence=conf,
        log_confidence=logc,
        mean_entropy=ent,
        mean_margin=mean_m,
        min_margin=min_m,
    )


def score_pool(pool: Pool) -> list[ExampleScores]:
    return [score_example(rec) for rec in pool.records]


@dataclass(frozen=True)
class TaskConfidence:
    """Arithmetic mean confidence per task, aligned with a task list."""

    tasks: tuple[str, ...]
    values: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return {t: float(v) for t, v in zip(self.tasks, self.values)}


def task_mean_confidence(pool: Pool, partition: TaskPartition | None = None) -> TaskConfidence:
    """Mean raw confidence per task, floored at CONFIDENCE_FLOOR.

    The precomputed confidence field takes precedence; otherwise the
    value is derived from the token trace.
    """
    part = partition if partition is not None else pool.partition
    confs = np.empty(len(pool))
    for i, rec in enumerate(pool.records):
        if rec.confidence is not None:
            confs[i] = rec.confidence
        elif rec.token_probs is not None:
            confs[i] = math.exp(log_confidence(rec.token_probs))
        else:
            raise MissingConfidence(
                f"record {rec.id!r} has neither a confidence nor token_probs"
            )
    values = np.empty(len(part.tasks))
    for t, members in enumerate(part.members):
        values[t] = confs[np.fromiter(members, dtype=np.intp)].mean()
    values = np.maximum(values, CONFIDENCE_FLOOR)
    values.flags.writeable = False
    return TaskConfidence(tasks=part.tasks, values=values)


_SCORE_FIELDS = ("confidence", "mean_entropy", "mean_margin", "min_margin")


def render_scores(pool: Pool, scores) -> str:
    """Serialize per-example scores as JSON lines, omitting absent fields."""
    lines = []
    for rec, s in zip(pool.records, scores):
        obj = {"id": rec.id}
        for name in _SCORE_FIELDS:
            value = getattr(s, name)
            if value is not None:
                obj[name] = value
        lines.append(json.dumps(obj))
    return "\n".join(lines) + "\n"


def write_scores(path, pool: Pool, scores) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_scores(pool, scores))


def read_scores(path, pool: Pool) -> list[ExampleScores]:
    """Load a scores cache and align it with the pool by id."""
    by_id: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
                raise ParseError(f"{path}:{line_no}: score record needs a string 'id'")
            by_id[obj["id"]] = obj

    out = []
    for rec in pool.records:
        obj = by_id.get(rec.id)
        if obj is None:
            raise ValidationError(f"scores cache is missing record {rec.id!r}")
        values = {}
        for name in _SCORE_FIELDS:
            raw = obj.get(name)
            if raw is None:
                continue
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                raise ParseError(f"score field {name!r} of {rec.id!r} is not a number")
            values[name] = float(raw)
        conf = values.get("confidence")
        if conf is not None and not (0.0 < conf <= 1.0):
            raise ValidationError(f"cached confidence {conf!r} of {rec.id!r} is outside (0, 1]")
        out.append(
            ExampleScores(
                confidence=conf,
                log_confidence=math.log(conf) if conf is not None else None,
                mean_entropy=values.get("mean_entropy"),
                mean_margin=values.get("mean_margin"),
                min_margin=values.get("min_margin"),
            )
        )
    return out
