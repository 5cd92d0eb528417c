"""Per-subject reference embeddings: k-NN classification and OOD scoring.

Search is exact brute force; reference sets hold tens of rows per class.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .nncore.serialize import decode_container, encode_container, load_container


@dataclass
class ReferenceSet:
    subject_id: str
    embeddings: np.ndarray
    labels: np.ndarray
    embedder_id: str = ""
    unit_norm: bool = False

    def __post_init__(self):
        self.embeddings = np.atleast_2d(np.asarray(self.embeddings, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.embeddings.shape[0] < 1:
            raise DataError(f"reference set for {self.subject_id!r} is empty")
        if self.labels.size != self.embeddings.shape[0]:
            raise DataError(f"{self.labels.size} labels for {self.embeddings.shape[0]} reference rows")
        if not np.all(np.isfinite(self.embeddings)):
            raise DataError(f"reference set for {self.subject_id!r} has non-finite rows")
        if (self.labels < 0).any():
            raise DataError("reference labels must be non-negative")
        if self.unit_norm:
            norms = np.linalg.norm(self.embeddings, axis=1)
            if np.abs(norms - 1.0).max() > 1e-6:
                raise DataError("deep reference embeddings must be unit norm")

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def nbytes(self) -> int:
        return self.embeddings.astype(np.float32).nbytes + self.labels.nbytes


@dataclass
class Prediction:
    label: int
    neighbor_distances: np.ndarray
    neighbor_labels: np.ndarray


def _check_query(ref: ReferenceSet, q: np.ndarray, k: int) -> np.ndarray:
    if ref is None or len(ref) == 0:
        raise DataError("empty reference set")
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != ref.dim:
        raise DataError(f"query has dimension {q.shape[-1]}, reference has {ref.dim}")
    if not 1 <= k <= len(ref):
        raise DataError(f"k={k} but the reference set has {len(ref)} rows")
    return q


def _distances(ref: ReferenceSet, Q: np.ndarray) -> np.ndarray:
    diff = Q[:, None, :] - ref.embeddings[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def _neighbors(ref: ReferenceSet, Q: np.ndarray, k: int, chunk: int = 256):
    """Nearest rows per query, ordered by (distance, label)."""
    dists, labs = [], []
    for lo in range(0, Q.shape[0], chunk):
        d = _distances(ref, Q[lo:lo + chunk])
        lab = np.broadcast_to(ref.labels, d.shape)
        order = np.lexsort((lab, d), axis=1)[:, :k]
        dists.append(np.take_along_axis(d, order, axis=1))
        labs.append(ref.labels[order])
    return np.concatenate(dists), np.concatenate(labs)


def _vote(dist: np.ndarray, labs: np.ndarray) -> int:
    """Uniform majority; ties by smaller summed distance, then lower label."""
    best = None
    for lab in np.unique(labs):
        sel = labs == lab
        key = (-int(sel.sum()), float(dist[sel].sum()), int(lab))
        if best is None or key < best:
            best = key
    return best[2]


def knn_classify(ref: ReferenceSet, query_embedding, k: int = 3) -> Prediction:
    q = _check_query(ref, query_embedding, k)
    d, lab = _neighbors(ref, q.reshape(1, -1), k)
    return Prediction(label=_vote(d[0], lab[0]), neighbor_distances=d[0], neighbor_labels=lab[0])


def knn_predict(ref: ReferenceSet, queries, k: int = 3) -> np.ndarray:
    """Vectorised ``knn_classify`` labels for a stack of queries."""
    Q = _check_query(ref, np.atleast_2d(queries), k)
    d, lab = _neighbors(ref, Q, k)
    return np.array([_vote(d[i], lab[i]) for i in range(Q.shape[0])], dtype=np.int64)


def ood_score(ref: ReferenceSet, query_embedding, k: int = 3) -> float:
    """Mean distance to the k nearest reference rows (higher = more out-of-distribution)."""
    q = _check_query(ref, query_embedding, k)
    d, _ = _neighbors(ref, q.reshape(1, -1), k)
    return float(d[0].mean())


def ood_scores(ref: ReferenceSet, queries, k: int = 3) -> np.ndarray:
    Q = _check_query(ref, np.atleast_2d(queries), k)
    return _neighbors(ref, Q, k)[0].mean(axis=1)


def softmax_ood_score(classifier, segment) -> float:
    """1 - max softmax probability of a classifier with a head."""
    if not getattr(classifier, "has_head", False):
        raise DataError("softmax OOD scoring needs a model with a softmax head")
    X = np.asarray(segment) if isinstance(segment, (np.ndarray, list)) else segment.data
    return float(softmax_ood_scores(classifier, X[None])[0])


def softmax_ood_scores(classifier, X) -> np.ndarray:
    if not getattr(classifier, "has_head", False):
        raise DataError("softmax OOD scoring needs a model with a softmax head")
    return 1.0 - classifier.predict_proba(X).max(axis=1)


def nearest_centroid_classify(ref: ReferenceSet, query_embedding) -> Prediction:
    q = _check_query(ref, query_embedding, 1)
    classes = np.unique(ref.labels)
    centroids = np.stack([ref.embeddings[ref.labels == c].mean(axis=0) for c in classes])
    d = np.sqrt(((centroids - q) ** 2).sum(axis=1))
    i = int(np.argmin(d))  # first minimum = lowest class index
    return Prediction(label=int(classes[i]), neighbor_distances=d[i:i + 1],
                      neighbor_labels=classes[i:i + 1])


def truncate_reference(ref: ReferenceSet, per_class: int) -> tuple[ReferenceSet, bool]:
    """Keep the first ``per_class`` rows of each class (rows are in temporal order).

    The flag reports whether some class had fewer rows than requested.
    """
    keep = np.zeros(len(ref), dtype=bool)
    short = False
    for c in np.unique(ref.labels):
        rows = np.flatnonzero(ref.labels == c)
        short |= rows.size < per_class
        keep[rows[:per_class]] = True
    return ReferenceSet(ref.subject_id, ref.embeddings[keep], ref.labels[keep], ref.embedder_id,
                        ref.unit_norm), short


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def encode_references(refs: dict[str, ReferenceSet]) -> bytes:
    ids = {r.embedder_id for r in refs.values()}
    if len(ids) > 1:
        raise DataError(f"reference sets come from different embedders: {sorted(ids)}")
    tensors = {}
    for sid in sorted(refs):
        tensors[f"ref/{sid}/embeddings"] = refs[sid].embeddings
        tensors[f"ref/{sid}/labels"] = refs[sid].labels
    meta = {"type": "reference", "embedder_id": ids.pop() if ids else "",
            "subjects": sorted(refs), "unit_norm": {s: refs[s].unit_norm for s in refs}}
    return encode_container(tensors, meta)


def save_references(refs: dict[str, ReferenceSet], path) -> int:
    buf = encode_references(refs)
    with open(path, "wb") as fh:
        fh.write(buf)
    return len(buf)


def _refs_from(tensors, meta) -> dict[str, ReferenceSet]:
    if meta.get("type") != "reference":
        raise DataError(f"container does not hold reference sets (type={meta.get('type')!r})")
    return {
        sid: ReferenceSet(sid, tensors[f"ref/{sid}/embeddings"], tensors[f"ref/{sid}/labels"],
                          meta["embedder_id"], meta["unit_norm"][sid])
        for sid in meta["subjects"]
    }


def load_references(path) -> dict[str, ReferenceSet]:
    return _refs_from(*load_container(path))


def decode_references(buf: bytes) -> dict[str, ReferenceSet]:
    return _refs_from(*decode_container(buf))


def write_reference_csv(ref: ReferenceSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"e{i}" for i in range(ref.dim)])
        for lab, row in zip(ref.labels, ref.embeddings):
            w.writerow([int(lab)] + [repr(float(v)) for v in row])
