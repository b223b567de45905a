"""Budget-constrained prompt selection for annotation.

Load a task-partitioned prompt pool, split an annotation budget across
tasks (uniformly or by inverse model confidence), and materialize the
selection with round-robin sampling. Diversity (k-center, facility
location, DPP) and uncertainty (confidence, entropy, margin) baselines
share the same pool format and selection interface.
"""

from .allocation import (
    AllocationVector,
    allocate_active_it,
    allocate_task_diversity,
    allocate_weighted,
    ceil_allocation,
)
from .errors import TaskpickError
from .pool import (
    Pool,
    PromptRecord,
    TaskPartition,
    load_pool,
    partition_by_task,
    read_embeddings,
    save_pool,
    write_embeddings,
)
from .scoring import (
    ExampleScores,
    TaskConfidence,
    confidence,
    log_confidence,
    margins,
    mean_entropy,
    score_example,
    score_pool,
    task_mean_confidence,
)
from .selectors import (
    STRATEGIES,
    KernelSpec,
    SelectionResult,
    StrategyConfig,
    manifest_payload,
    round_robin,
    run_strategy,
    select_dpp,
    select_facility_location,
    select_k_center,
    select_random,
    select_uncertainty,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationVector",
    "ExampleScores",
    "KernelSpec",
    "Pool",
    "PromptRecord",
    "STRATEGIES",
    "SelectionResult",
    "StrategyConfig",
    "TaskConfidence",
    "TaskPartition",
    "TaskpickError",
    "allocate_active_it",
    "allocate_task_diversity",
    "allocate_weighted",
    "ceil_allocation",
    "confidence",
    "load_pool",
    "log_confidence",
    "manifest_payload",
    "margins",
    "mean_entropy",
    "partition_by_task",
    "read_embeddings",
    "round_robin",
    "run_strategy",
    "save_pool",
    "score_example",
    "score_pool",
    "select_dpp",
    "select_facility_location",
    "select_k_center",
    "select_random",
    "select_uncertainty",
    "task_mean_confidence",
    "write_embeddings",
]
