"""Subset materialization: round-robin sampling over an allocation plus
random, uncertainty, k-center, facility-location, and deterministic DPP
selectors, and the strategy dispatcher tying them together.

Determinism contract: identical (pool, config, seed) always reproduces
the identical selection. Randomized selectors draw from counter-based
generators keyed by (seed, task label), so the within-task draws do not
depend on how many other tasks exist or in which order they are visited.
All argmax reductions break ties toward the lowest index.
"""

import hashlib
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .allocation import (
    AllocationVector,
    allocate_active_it,
    allocate_task_diversity,
    allocate_weighted,
    ceil_allocation,
)
from .errors import ConfigError, InvalidBudget, InvalidKernel, MissingScore
from .pool import Pool, TaskPartition
from .scoring import score_pool, task_mean_confidence

# Cap on transient kernel-block size (elements) for the blocked passes.
_BLOCK_FLOATS = 92_000_000

UNCERTAINTY_CRITERIA = ("least_confidence", "mean_entropy", "mean_margin", "min_margin")

STRATEGIES = (
    "random",
    "least_confidence",
    "mean_entropy",
    "mean_margin",
    "min_margin",
    "task_diversity",
    "weighted_task_diversity",
    "active_it",
    "k_center",
    "facility_location",
    "dpp",
)


@dataclass(frozen=True)
class KernelSpec:
    """Similarity choice for the geometric selectors.

    ``euclidean`` means raw geometry: true distance for k-center,
    negative squared distance for facility location, and the plain
    inner-product Gram matrix for DPP. ``rbf`` is exp(-gamma * ||a-b||^2)
    and ``cosine`` is the (possibly negative) cosine similarity.
    """

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "rbf", "cosine"):
            raise InvalidKernel(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not (self.gamma is not None and self.gamma > 0):
            raise InvalidKernel(f"rbf kernel needs gamma > 0, got {self.gamma!r}")


@dataclass
class SelectionResult:
    """Outcome of one selection run."""

    selected: list[int]
    strategy: str
    params: dict
    seed: int | None = None
    per_task: dict[str, int] | None = None
    objective_trace: list[float] | None = None
    warnings: list[str] = field(default_factory=list)
    allocation: list[dict] | None = None


def _check_budget(budget: int) -> None:
    if budget < 1:
        raise InvalidBudget(f"budget must be >= 1, got {budget}")


def _check_seed(seed: int) -> None:
    if not (0 <= seed < 2**64):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "little")


def _stream(seed: int, label: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, _label_key(label)))))


def _cap_note(budget: int, available: int, what: str) -> list[str]:
    if budget > available:
        return [f"budget {budget} exceeds {what} ({available}); selecting {available}"]
    return []


def _tally(partition: TaskPartition, selected) -> dict[str, int]:
    task_of = np.empty(sum(partition.counts), dtype=np.intp)
    for t, members in enumerate(partition.members):
        task_of[np.fromiter(members, dtype=np.intp)] = t
    counts = np.bincount(task_of[np.asarray(selected, dtype=np.intp)], minlength=len(partition.tasks)) if selected else np.zeros(len(partition.tasks), dtype=int)
    return {t: int(c) for t, c in zip(partition.tasks, counts)}


def round_robin(allocation: AllocationVector, partition: TaskPartition, budget: int, seed: int) -> SelectionResult:
    """Materialize an allocation by cycling over tasks, one draw per pass.

    Tasks are visited in ascending ceil(alpha) order (ties by label); a
    task is eligible while it is below both its rounded allocation and
    its pool size. Draws are uniform without replacement within a task.
    Stops when the budget is met or no task is eligible.
    """
    _check_budget(budget)
    _check_seed(seed)

    n_tasks = len(partition.tasks)
    if allocation.tasks is not None:
        if set(allocation.tasks) != set(partition.tasks):
            raise ConfigError("allocation and partition cover different tasks")
        by_label = dict(zip(allocation.tasks, allocation.alpha))
        alpha = np.array([by_label[t] for t in partition.tasks])
    else:
        if len(allocation.alpha) != n_tasks:
            raise ConfigError(
                f"allocation has {len(allocation.alpha)} entries for {n_tasks} tasks"
            )
        alpha = np.asarray(allocation.alpha, dtype=np.float64)

    caps = ceil_allocation(alpha)
    sizes = partition.counts
    order = sorted(range(n_tasks), key=lambda t: (caps[t], partition.tasks[t]))

    queues: dict[int, np.ndarray] = {}
    taken = [0] * n_tasks
    selected: list[int] = []
    done = False
    while not done:
        progressed = False
        for t in order:
            if taken[t] >= caps[t] or taken[t] >= sizes[t]:
                continue
            if t not in queues:
                members = np.fromiter(partition.members[t], dtype=np.int64)
                queues[t] = _stream(seed, partition.tasks[t]).permutation(members)
            selected.append(int(queues[t][taken[t]]))
            taken[t] += 1
            progressed = True
            if len(selected) == budget:
                done = True
                break
        if not progressed:
            break

    warnings = list(allocation.warnings)
    if len(selected) < budget:
        warnings.append(
            f"allocation exhausted after {len(selected)} of {budget} requested examples"
        )
    return SelectionResult(
        selected=selected,
        strategy="round_robin",
        params={"budget": budget},
        seed=seed,
        per_task={t: taken[i] for i, t in enumerate(partition.tasks)},
        warnings=warnings,
    )


def select_random(pool: Pool, budget: int, seed: int) -> SelectionResult:
    """Uniform sample without replacement, deterministic under the seed."""
    _check_budget(budget)
    _check_seed(seed)
    n = len(pool)
    k = min(budget, n)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    selected = [int(i) for i in rng.choice(n, size=k, replace=False)]
    return SelectionResult(
        selected=selected,
        strategy="random",
        params={"budget": budget},
        seed=seed,
        per_task=_tally(pool.partition, selected),
        warnings=_cap_note(budget, n, "pool size"),
    )


def select_uncertainty(pool: Pool, scores, criterion: str, budget: int) -> SelectionResult:
    """Pick the examples the model is least sure about.

    Ranking is ascending log-confidence, descending mean entropy, or
    ascending mean/min margin; ties go to the lower pool index.
    """
    if criterion not in UNCERTAINTY_CRITERIA:
        raise ConfigError(f"unknown uncertainty criterion {criterion!r}")
    _check_budget(budget)
    n = len(pool)
    if len(scores) != n:
        raise ConfigError(f"got {len(scores)} score entries for {n} records")
    keys = np.empty(n)
    for i, (rec, s) in enumerate(zip(pool.records, scores)):
        if criterion == "least_confidence":
            value = s.log_confidence
        elif criterion == "mean_entropy":
            value = None if s.mean_entropy is None else -s.mean_entropy
        elif criterion == "mean_margin":
            value = s.mean_margin
        else:
            value = s.min_margin
        if value is None:
            raise MissingScore(f"record {rec.id!r} has no {criterion} score")
        keys[i] = value
    order = np.argsort(keys, kind="stable")
    selected = [int(i) for i in order[: min(budget, n)]]
    return SelectionResult(
        selected=selected,
        strategy=criterion,
        params={"budget": budget},
        per_task=_tally(pool.partition, selected),
        warnings=_cap_note(budget, n, "pool size"),
    )


class _ColumnKernel:
    """Evaluates kernel columns on demand; materializes at most one block.

    The full N x N kernel never exists in memory, which is what makes the
    greedy selectors usable on pools of ~100K examples.
    """

    def __init__(self, embeddings: np.ndarray, spec: KernelSpec):
        self.spec = spec
        if spec.kind == "cosine":
            norms = np.sqrt((embeddings * embeddings).sum(axis=1))
            self.points = embeddings / np.maximum(norms, 1e-30)[:, None]
        else:
            self.points = embeddings
            self.sq_norms = (embeddings * embeddings).sum(axis=1)
        self.n = embeddings.shape[0]

    def column(self, j: int) -> np.ndarray:
        return self.columns(slice(j, j + 1))[:, 0]

    def columns(self, which) -> np.ndarray:
        """Similarity columns for a slice or index array, shape (n, len(which))."""
        return self.cross(slice(None), which)

    def cross(self, rows, cols) -> np.ndarray:
        """Similarity block K[rows, cols] for slices or index arrays."""
        pts = self.points
        out = pts[rows] @ pts[cols].T
        if self.spec.kind == "cosine":
            return out
        # negative squared distance, computed in place from the Gram block
        out *= 2.0
        out -= self.sq_norms[rows][:, None]
        out -= self.sq_norms[cols][None, :]
        np.minimum(out, 0.0, out=out)  # clamp cancellation noise
        if self.spec.kind == "rbf":
            out *= self.spec.gamma
            np.exp(out, out=out)
        return out

    def block_size(self) -> int:
        return max(1, min(self.n, _BLOCK_FLOATS // self.n))


def select_k_center(embeddings, budget: int, kernel: KernelSpec | None = None) -> SelectionResult:
    """Greedy farthest-first traversal under Euclidean distance.

    The first center is the point with minimum total squared distance to
    the rest (the dataset medoid); each later center is the point
    farthest from its nearest chosen center. The trace records the
    covering radius after each pick.
    """
    if kernel is not None and kernel.kind != "euclidean":
        raise InvalidKernel("k-center supports the euclidean kernel only")
    _check_budget(budget)
    points = np.asarray(embeddings, dtype=np.float64)
    n = points.shape[0]
    k = min(budget, n)

    sq_norms = (points * points).sum(axis=1)
    totals = n * sq_norms + sq_norms.sum() - 2.0 * (points @ points.sum(axis=0))
    first = int(np.argmin(totals))

    def dist_to(j: int) -> np.ndarray:
        sq = sq_norms + sq_norms[j] - 2.0 * (points @ points[j])
        np.maximum(sq, 0.0, out=sq)
        return np.sqrt(sq)

    chosen = np.zeros(n, dtype=bool)
    selected = [first]
    chosen[first] = True
    min_dist = dist_to(first)
    min_dist[first] = 0.0
    trace = [float(min_dist.max())]
    while len(selected) < k:
        candidates = np.where(chosen, -np.inf, min_dist)
        nxt = int(np.argmax(candidates))
        selected.append(nxt)
        chosen[nxt] = True
        np.minimum(min_dist, dist_to(nxt), out=min_dist)
        min_dist[nxt] = 0.0
        trace.append(float(min_dist.max()))

    return SelectionResult(
        selected=selected,
        strategy="k_center",
        params={"budget": budget, "kernel": "euclidean"},
        objective_trace=trace,
        warnings=_cap_note(budget, n, "number of points"),
    )


def select_facility_location(embeddings, budget: int, kernel: KernelSpec) -> SelectionResult:
    """Lazy greedy maximization of sum-of-best-similarities coverage.

    Each point is served by its most similar chosen center; the greedy
    step adds the candidate with the largest coverage gain. Per-point
    best similarities start at -inf so negative (cosine) similarities
    rank correctly (the definitional first pick, the max column sum,
    realizes that initialization).

    Laziness is two-tier, and exact at both tiers. A heap holds stale
    gains, which submodularity makes valid upper bounds; they are only
    trusted after re-evaluation. Re-evaluated candidates move to a
    "front" whose gains are kept exact at every step by subtracting the
    coverage each new center steals, which needs only the kernel block
    between the captured points and the front. That incremental update
    is what keeps near-tie regimes (thousands of candidates within
    rounding of the best gain) from forcing full column recomputes on
    every step.
    """
    _check_budget(budget)
    points = np.asarray(embeddings, dtype=np.float64)
    n = points.shape[0]
    k = min(budget, n)
    cols = _ColumnKernel(points, kernel)
    blk = cols.block_size()

    col_sums = np.empty(n)
    for start in range(0, n, blk):
        stop = min(start + blk, n)
        col_sums[start:stop] = cols.columns(slice(start, stop)).sum(axis=0)

    first = int(np.argmax(col_sums))
    best = cols.column(first)
    selected = [first]
    trace = [float(best.sum())]

    def exact_gains(idx: np.ndarray) -> np.ndarray:
        block = cols.columns(idx)
        block -= best[:, None]
        np.maximum(block, 0.0, out=block)
        return block.sum(axis=0)

    # Stale upper bounds, seeded with exact second-step gains (blocked, so
    # BLAS-batched rather than one matvec per candidate).
    heap: list[tuple[float, int]] = []
    if k > 1:
        for start in range(0, n, blk):
            stop = min(start + blk, n)
            gains = exact_gains(np.arange(start, stop))
            heap.extend((-gains[c - start], c) for c in range(start, stop) if c != first)
        heapq.heapify(heap)

    # Front of candidates with exactly-maintained gains, kept index-sorted
    # so argmax resolves ties toward the lowest candidate index. A small
    # front keeps the per-step capture updates cheap; demoted candidates
    # re-enter through the heap with tight bounds, so churn stays low.
    front_idx = np.empty(0, dtype=np.intp)
    front_gain = np.empty(0)
    demote_cap = 1024

    while len(selected) < k:
        # absorb stale candidates until every remaining bound is beaten
        batch = 64
        while heap:
            front_max = front_gain.max() if front_gain.size else -np.inf
            if -heap[0][0] < front_max:
                break
            absorbed = [heapq.heappop(heap)[1]]
            while heap and len(absorbed) < batch and -heap[0][0] >= front_max:
                absorbed.append(heapq.heappop(heap)[1])
            absorbed = np.asarray(absorbed, dtype=np.intp)
            merged = np.concatenate([front_idx, absorbed])
            gains = np.concatenate([front_gain, exact_gains(absorbed)])
            order = np.argsort(merged, kind="stable")
            front_idx, front_gain = merged[order], gains[order]
            batch = min(batch * 4, max(64, blk))

        pos = int(np.argmax(front_gain))
        chosen = int(front_idx[pos])
        selected.append(chosen)
        front_idx = np.delete(front_idx, pos)
        front_gain = np.delete(front_gain, pos)

        column = cols.column(chosen)
        captured = np.where(column > best)[0]
        if captured.size and front_idx.size:
            old_best = best[captured].copy()
            new_best = column[captured]
            block = cols.cross(captured, front_idx)
            loss = np.maximum(block - old_best[:, None], 0.0)
            loss -= np.maximum(block - new_best[:, None], 0.0)
            front_gain -= loss.sum(axis=0)
        if captured.size:
            best[captured] = column[captured]
        trace.append(float(best.sum()))

        if front_idx.size > demote_cap:
            # push the cold half back as (tight) stale bounds
            keep = np.argsort(front_gain, kind="stable")[front_idx.size // 2 :]
            drop = np.setdiff1d(np.arange(front_idx.size), keep, assume_unique=True)
            for i in drop:
                heapq.heappush(heap, (-float(front_gain[i]), int(front_idx[i])))
            keep.sort()
            front_idx, front_gain = front_idx[keep], front_gain[keep]

    return SelectionResult(
        selected=selected,
        strategy="facility_location",
        params={"budget": budget, "kernel": kernel.kind, "gamma": kernel.gamma},
        objective_trace=trace,
        warnings=_cap_note(budget, n, "number of points"),
    )


def select_dpp(embeddings, budget: int, kernel: KernelSpec, jitter: float = 1e-6) -> SelectionResult:
    """Greedy log-determinant maximization (deterministic DPP).

    Grows an incremental Cholesky-style factorization of the jittered
    kernel; each step adds the point with the largest residual squared
    norm after projecting onto the span of the chosen points, which
    equals the marginal log-det gain. If every residual collapses to
    zero the result is returned partial, flagged with a warning.
    """
    _check_budget(budget)
    if not jitter > 0:
        raise ConfigError(f"jitter must be positive, got {jitter!r}")
    points = np.asarray(embeddings, dtype=np.float64)
    if kernel.kind == "cosine":
        norms = np.sqrt((points * points).sum(axis=1))
        points = points / np.maximum(norms, 1e-30)[:, None]
    n = points.shape[0]
    k = min(budget, n)

    if kernel.kind == "rbf":
        sq_norms = (points * points).sum(axis=1)
        diag = np.ones(n)

        def row(j: int) -> np.ndarray:
            sq = sq_norms + sq_norms[j] - 2.0 * (points @ points[j])
            np.maximum(sq, 0.0, out=sq)
            return np.exp(-kernel.gamma * sq)

    else:
        diag = (points * points).sum(axis=1)

        def row(j: int) -> np.ndarray:
            return points @ points[j]

    residual = diag + jitter
    factors = np.zeros((k, n))
    selected: list[int] = []
    trace: list[float] = []
    warnings = _cap_note(budget, n, "number of points")
    log_det = 0.0
    for step in range(k):
        j = int(np.argmax(residual))
        pivot = residual[j]
        if not pivot > 0.0:
            warnings.append(
                f"kernel rank exhausted after {step} of {k} selections; partial result"
            )
            break
        log_det += math.log(pivot)
        trace.append(log_det)
        if step:
            projected = row(j) - factors[:step, j] @ factors[:step]
        else:
            projected = row(j)
        projected /= math.sqrt(pivot)
        factors[step] = projected
        residual -= projected * projected
        selected.append(j)
        residual[j] = -np.inf

    return SelectionResult(
        selected=selected,
        strategy="dpp",
        params={"budget": budget, "kernel": kernel.kind, "gamma": kernel.gamma, "jitter": jitter},
        objective_trace=trace,
        warnings=warnings,
    )


@dataclass
class StrategyConfig:
    """Parameters of one selection run; unset kernel falls back to the
    strategy's natural default."""

    strategy: str
    budget: int
    seed: int = 0
    base: int = 5
    kernel: KernelSpec | None = None
    jitter: float = 1e-6


_DEFAULT_KERNELS = {
    "k_center": KernelSpec("euclidean"),
    "facility_location": KernelSpec("rbf", 0.1),
    "dpp": KernelSpec("euclidean"),
}


def _allocation_table(partition, allocation, result, task_conf=None) -> list[dict]:
    caps = ceil_allocation(allocation.alpha)
    rows = []
    for t, label in enumerate(partition.tasks):
        row = {
            "task": label,
            "available": int(partition.counts[t]),
            "alpha": float(allocation.alpha[t]),
            "alpha_ceil": int(caps[t]),
            "selected": result.per_task[label],
        }
        if task_conf is not None:
            row["confidence"] = float(task_conf.values[t])
        rows.append(row)
    return rows


def run_strategy(pool: Pool, config: StrategyConfig, scores=None) -> SelectionResult:
    """Dispatch a named strategy over a pool.

    The two allocation-first strategies compose partition -> (confidence
    when weighted) -> allocation -> round robin; ``scores`` may carry
    precomputed per-example scores for the uncertainty strategies.
    """
    name = config.strategy
    if name not in STRATEGIES:
        raise ConfigError(f"unknown strategy {name!r}")
    part = pool.partition
    params: dict = {"budget": config.budget}

    if name == "random":
        result = select_random(pool, config.budget, config.seed)
    elif name in UNCERTAINTY_CRITERIA:
        if scores is None:
            scores = score_pool(pool)
        result = select_uncertainty(pool, scores, name, config.budget)
    elif name in ("task_diversity", "weighted_task_diversity", "active_it"):
        if name == "task_diversity":
            alloc = allocate_task_diversity(part.counts, config.budget, tasks=part.tasks)
            task_conf = None
        elif name == "weighted_task_diversity":
            task_conf = task_mean_confidence(pool, part)
            alloc = allocate_weighted(part.counts, task_conf, config.budget, base=config.base)
            params["base"] = config.base
        else:
            task_conf = task_mean_confidence(pool, part)
            alloc = allocate_active_it(part.counts, task_conf, config.budget)
        result = round_robin(alloc, part, config.budget, config.seed)
        result.allocation = _allocation_table(part, alloc, result, task_conf)
    else:
        kernel = config.kernel if config.kernel is not None else _DEFAULT_KERNELS[name]
        embeddings = pool.embedding_matrix()
        if name == "k_center":
            result = select_k_center(embeddings, config.budget, kernel)
        elif name == "facility_location":
            result = select_facility_location(embeddings, config.budget, kernel)
        else:
            result = select_dpp(embeddings, config.budget, kernel, jitter=config.jitter)
            params["jitter"] = config.jitter
        params["kernel"] = kernel.kind
        if kernel.kind == "rbf":
            params["gamma"] = kernel.gamma

    result.strategy = name
    result.seed = config.seed
    result.params = params
    if result.per_task is None:
        result.per_task = _tally(part, result.selected)
    return result


def manifest_payload(result: SelectionResult, pool: Pool) -> dict:
    """Serializable selection manifest; keys are stable across runs."""
    ids = pool.ids()
    payload = {
        "strategy": result.strategy,
        "params": result.params,
        "seed": result.seed,
        "budget": result.params.get("budget"),
        "selected_ids": [ids[i] for i in result.selected],
        "per_task": result.per_task,
        "warnings": result.warnings,
    }
    if result.objective_trace is not None:
        payload["objective_trace"] = result.objective_trace
    if result.allocation is not None:
        payload["allocation"] = result.allocation
    return payload
