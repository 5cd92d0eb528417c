"""Triplet selection over a SegmentSet; triplets hold row indices."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from ..datakit import SegmentSet
from ..errors import DataError


class Triplet(NamedTuple):
    anchor: int
    positive: int
    negative: int
    is_subject_triplet: bool = False


def _disjoint(segs: SegmentSet, i: int, cand: np.ndarray) -> np.ndarray:
    """Rows in ``cand`` whose sample range cannot overlap row ``i``."""
    other_rec = segs.recordings[cand] != segs.recordings[i]
    apart = (segs.starts[cand] >= segs.stops[i]) | (segs.stops[cand] <= segs.starts[i])
    return other_rec | apart


def _valid_positives(segs: SegmentSet, i: int, pool: np.ndarray) -> np.ndarray:
    same = pool[(segs.labels[pool] == segs.labels[i]) & (pool != i)]
    return same[_disjoint(segs, i, same)]


def _anchors_with_positive(segs: SegmentSet, pool: np.ndarray) -> np.ndarray:
    keep = [i for i in pool if _valid_positives(segs, i, pool).size]
    return np.asarray(keep, dtype=np.int64)


class _Pool:
    """Anchor candidates and negatives for one sampling population."""

    def __init__(self, segs: SegmentSet, members: np.ndarray):
        self.members = members
        labels = segs.labels[members]
        self.anchors = np.zeros(0, dtype=np.int64)
        if np.unique(labels).size < 2:
            return
        by_class = [members[labels == c] for c in np.unique(labels)]
        self.anchors = np.concatenate([_anchors_with_positive(segs, m) for m in by_class])

    @property
    def viable(self) -> bool:
        return self.anchors.size > 0

    def draw(self, segs: SegmentSet, rng: np.random.Generator, subject: bool) -> Triplet:
        a = int(self.anchors[rng.integers(self.anchors.size)])
        pos = _valid_positives(segs, a, self.members)
        p = int(pos[rng.integers(pos.size)])
        neg = self.members[segs.labels[self.members] != segs.labels[a]]
        n = int(neg[rng.integers(neg.size)])
        return Triplet(a, p, n, subject)


def mine_random_triplets(segments: SegmentSet, count: int, rng: np.random.Generator) -> list[Triplet]:
    """Anchor drawn uniformly among rows with a valid positive, then a uniform
    non-overlapping positive of its class and a uniform negative of any other
    class, from any subject."""
    pool = _Pool(segments, np.arange(len(segments)))
    if not pool.viable:
        raise DataError("no class has two non-overlapping segments next to a second class")
    return [pool.draw(segments, rng, False) for _ in range(count)]


def subject_pools(segments: SegmentSet) -> dict[str, _Pool]:
    pools = {}
    for s in sorted(set(segments.subjects)):
        pool = _Pool(segments, np.flatnonzero(segments.subjects == s))
        if pool.viable:
            pools[s] = pool
    return pools


def mine_subject_triplets(segments: SegmentSet, count: int, rng: np.random.Generator,
                          pools: dict | None = None) -> list[Triplet]:
    """Subject drawn uniformly among viable subjects, then a triplet within it."""
    pools = subject_pools(segments) if pools is None else pools
    if not pools:
        raise DataError("no subject has two classes and a non-overlapping anchor/positive pair")
    names = list(pools)
    out = []
    for _ in range(count):
        pool = pools[names[rng.integers(len(names))]]
        out.append(pool.draw(segments, rng, True))
    return out


class TripletMiner:
    """Mixed miner: ``round(count * subject_ratio)`` subject triplets, the rest random.

    Pools are built once; each call to ``mine`` draws a fresh shuffled batch.
    """

    def __init__(self, segments: SegmentSet, subject_ratio: float):
        if not 0 <= subject_ratio <= 1:
            raise DataError(f"subject_triplet_ratio must be in [0, 1], got {subject_ratio}")
        self.segments = segments
        self.ratio = subject_ratio
        self.random_pool = _Pool(segments, np.arange(len(segments)))
        self.subject_pools = subject_pools(segments) if subject_ratio > 0 else {}
        if subject_ratio < 1 and not self.random_pool.viable:
            raise DataError("no class has two non-overlapping segments next to a second class")
        if subject_ratio > 0 and not self.subject_pools:
            raise DataError("no subject has two classes and a non-overlapping anchor/positive pair")

    def mine(self, count: int, rng: np.random.Generator) -> list[Triplet]:
        n_subject = int(math.floor(count * self.ratio + 0.5))
        triplets = []
        if n_subject:
            triplets = mine_subject_triplets(self.segments, n_subject, rng, self.subject_pools)
        triplets += [self.random_pool.draw(self.segments, rng, False) for _ in range(count - n_subject)]
        order = rng.permutation(len(triplets))
        return [triplets[i] for i in order]


def mine_mixed_triplets(segments: SegmentSet, count: int, subject_ratio: float,
                        rng: np.random.Generator) -> list[Triplet]:
    return TripletMiner(segments, subject_ratio).mine(count, rng)
