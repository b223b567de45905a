"""Per-task budget allocation solvers.

Three strategies split an annotation budget across tasks:

* ``allocate_task_diversity`` levels the budget (water filling), so small
  tasks saturate and everyone else shares a common level;
* ``allocate_weighted`` spreads the budget in proportion to inverse task
  confidence, clamped between a base floor and the task size;
* ``allocate_active_it`` spends whole tasks in ascending-confidence order.

Allocations stay real-valued here; rounding to integers is the sampler's
job (see ``selectors.round_robin``).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidBudget, NoTasks
from .scoring import CONFIDENCE_FLOOR, TaskConfidence

# Absorbs float noise in allocations that land exactly on integers.
_CEIL_EPS = 1e-9


@dataclass(frozen=True)
class AllocationVector:
    """Per-task real-valued budget split.

    ``feasible`` is False when the requested budget had to be capped at
    the pool size or when the base floor could not be honored; the
    warnings say which. ``tasks`` is None for label-free instances,
    which align positionally with a partition.
    """

    alpha: np.ndarray
    budget: int
    feasible: bool
    strategy: str
    tasks: tuple[str, ...] | None = None
    warnings: tuple[str, ...] = ()


def ceil_allocation(alpha) -> np.ndarray:
    """Elementwise ceiling with a small tolerance for float noise."""
    return np.maximum(np.ceil(np.asarray(alpha, dtype=np.float64) - _CEIL_EPS), 0).astype(int)


def _validated_counts(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size == 0:
        raise NoTasks("allocation requested over an empty task list")
    if np.any(counts < 1):
        raise ConfigError("every task must have at least one available example")
    return counts


def _cap_budget(budget: int, total: int):
    if budget < 1:
        raise InvalidBudget(f"budget must be >= 1, got {budget}")
    if budget > total:
        return total, [f"budget {budget} exceeds pool size {total}; capped at {total}"]
    return budget, []


def _water_fill(counts: np.ndarray, target: int) -> np.ndarray:
    # Saturate tasks in ascending size until the remaining budget spread
    # evenly over the remaining tasks no longer covers the next size;
    # that spread is the water level.
    alpha = np.zeros(len(counts))
    order = np.argsort(counts, kind="stable")
    left = int(target)
    for rank, idx in enumerate(order):
        rest = len(counts) - rank
        if counts[idx] * rest <= left:
            alpha[idx] = counts[idx]
            left -= int(counts[idx])
        else:
            remaining = order[rank:]
            alpha[remaining] = np.minimum(counts[remaining], left / rest)
            break
    return alpha


def allocate_task_diversity(counts, budget: int, tasks=None) -> AllocationVector:
    """Minimize the largest per-task allocation subject to full budget use
    and per-task availability. Water filling solves this exactly."""
    counts = _validated_counts(counts)
    target, warnings = _cap_budget(budget, int(counts.sum()))
    alpha = _water_fill(counts, target)
    alpha.flags.writeable = False
    return AllocationVector(
        alpha=alpha,
        budget=budget,
        feasible=not warnings,
        strategy="task_diversity",
        tasks=tuple(tasks) if tasks is not None else None,
        warnings=tuple(warnings),
    )


def _spent(c: float, inv: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    return float(np.clip(c * inv, lo, hi).sum())


def _bisect_c(inv, lo, hi, target, c_max: float) -> float:
    a, b = 0.0, c_max
    for _ in range(200):
        mid = 0.5 * (a + b)
        if _spent(mid, inv, lo, hi) < target:
            a = mid
        else:
            b = mid
    return b


def allocate_weighted(counts, task_conf: TaskConfidence, budget: int, base: int = 5) -> AllocationVector:
    """Clamped inverse-confidence allocation.

    Solves for the constant ``C`` with ``alpha_t = clamp(C / conf_t,
    min(base, counts_t), counts_t)`` summing to the budget. The spend is
    a continuous, piecewise-linear, non-decreasing function of ``C``, so
    an exact sweep over the sorted clamp-activation points finds the
    linear segment containing the budget; bisection is kept as a
    numerical fallback. When even the base floors overshoot the budget,
    falls back to plain task-diversity water filling with a warning.
    """
    counts = _validated_counts(counts)
    if base < 0:
        raise ConfigError(f"base allocation must be non-negative, got {base}")
    if len(task_conf.tasks) != len(counts):
        raise ConfigError("task confidences and counts cover different numbers of tasks")
    target, warnings = _cap_budget(budget, int(counts.sum()))

    lo = np.minimum(base, counts).astype(np.float64)
    hi = counts.astype(np.float64)
    if lo.sum() > target + 1e-9:
        fallback = allocate_task_diversity(counts, budget, tasks=task_conf.tasks)
        note = (
            f"base allocation infeasible (task floors sum to {lo.sum():.0f} > budget"
            f" {target}); fell back to task-diversity water filling"
        )
        return AllocationVector(
            alpha=fallback.alpha,
            budget=budget,
            feasible=False,
            strategy="weighted_task_diversity",
            tasks=tuple(task_conf.tasks),
            warnings=tuple(warnings) + (note,) + fallback.warnings,
        )

    conf = np.maximum(np.asarray(task_conf.values, dtype=np.float64), CONFIDENCE_FLOOR)
    inv = 1.0 / conf

    if target >= hi.sum():
        alpha = hi.copy()
    else:
        # C values at which each task enters/leaves its linear ramp.
        c_lo = lo / inv
        c_hi = hi / inv
        brk = np.unique(np.concatenate(([0.0], c_lo, c_hi)))
        # Binary search for the first breakpoint whose spend reaches the target.
        lo_i, hi_i = 0, len(brk) - 1
        while lo_i < hi_i:
            mid = (lo_i + hi_i) // 2
            if _spent(brk[mid], inv, lo, hi) < target:
                lo_i = mid + 1
            else:
                hi_i = mid
        if lo_i == 0:
            c = 0.0
        else:
            a, b = brk[lo_i - 1], brk[lo_i]
            ramp = (c_lo <= a) & (c_hi >= b)
            fixed = hi[c_hi <= a].sum() + lo[c_lo >= b].sum()
            inv_sum = inv[ramp].sum()
            c = a if inv_sum == 0.0 else (target - fixed) / inv_sum
            c = min(max(c, a), b)
        alpha = np.clip(c * inv, lo, hi)
        if abs(alpha.sum() - target) > 1e-9:
            c = _bisect_c(inv, lo, hi, target, float(c_hi.max()) + 1.0)
            alpha = np.clip(c * inv, lo, hi)

    alpha.flags.writeable = False
    return AllocationVector(
        alpha=alpha,
        budget=budget,
        feasible=not warnings,
        strategy="weighted_task_diversity",
        tasks=tuple(task_conf.tasks),
        warnings=tuple(warnings),
    )


def allocate_active_it(counts, task_conf: TaskConfidence, budget: int) -> AllocationVector:
    """Spend whole tasks in ascending mean-confidence order (ties by label);
    the first task that no longer fits receives the leftover budget."""
    counts = _validated_counts(counts)
    if len(task_conf.tasks) != len(counts):
        raise ConfigError("task confidences and counts cover different numbers of tasks")
    target, warnings = _cap_budget(budget, int(counts.sum()))

    labels = np.asarray(task_conf.tasks)
    order = np.lexsort((labels, np.asarray(task_conf.values, dtype=np.float64)))
    alpha = np.zeros(len(counts))
    left = int(target)
    for idx in order:
        take = min(int(counts[idx]), left)
        alpha[idx] = take
        left -= take
        if left == 0:
            break
    alpha.flags.writeable = False
    return AllocationVector(
        alpha=alpha,
        budget=budget,
        feasible=not warnings,
        strategy="active_it",
        tasks=tuple(task_conf.tasks),
        warnings=tuple(warnings),
    )
