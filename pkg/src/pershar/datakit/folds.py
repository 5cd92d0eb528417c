from __future__ import annotations

import numpy as np

from ..errors import DataError
from .records import FoldPlan


def make_subject_folds(subject_ids, k: int, seed: int) -> FoldPlan:
    """Shuffle subjects with ``seed`` and deal them round-robin into ``k`` folds.

    Input order does not matter; subjects are sorted before shuffling.
    """
    ids = [str(s) for s in subject_ids]
    if len(set(ids)) != len(ids):
        dupes = sorted({s for s in ids if ids.count(s) > 1})
        raise DataError(f"duplicate subject ids: {dupes}")
    if k < 2:
        raise DataError(f"need k >= 2 folds, got {k}")
    if len(ids) < k:
        raise DataError(f"{len(ids)} subjects cannot fill {k} folds")
    order = sorted(ids)
    perm = np.random.default_rng(seed).permutation(len(order))
    assignment = {order[j]: pos % k for pos, j in enumerate(perm)}
    return FoldPlan(k=k, assignment=assignment, seed=seed)
