import numpy as np
import pytest

from taskpick.pool import Pool, PromptRecord


def make_pool(task_sizes, confidences=None, embeddings=None, token_probs=None):
    """Build a pool with the given per-task sizes (label -> count)."""
    labels = [task for task, size in task_sizes.items() for _ in range(size)]
    records = []
    for i, task in enumerate(labels):
        records.append(
            PromptRecord(
                id=f"ex-{i:04d}",
                task=task,
                confidence=None if confidences is None else confidences[i],
                embedding=None if embeddings is None else np.asarray(embeddings[i], float),
                token_probs=None if token_probs is None else token_probs[i],
            )
        )
    return Pool(records)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
