"""Trained pipelines that turn stacked windows into embedding vectors.

``DeepEmbedder`` wraps an FCN core with per-channel input standardisation
(and an optional softmax head); ``FeatureEmbedder`` wraps the engineered
feature extractor with its train-set scaler and optional feature subset.
Both serialise to the binary container and expose an ``embedder_id`` that
reference sets record, so mismatched model/reference pairs are caught.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .featkit import FeatureScaler, extract_batch
from .nncore import (
    FcnConfig, FcnCore, TrainMode, decode_container, encode_container, fcn_forward,
    head_forward, load_container, softmax,
)
from .nncore.serialize import digest, save_container


@dataclass
class DeepEmbedder:
    kind: str
    core: FcnCore
    input_mean: np.ndarray
    input_std: np.ndarray
    classes: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def has_head(self) -> bool:
        return "head/w" in self.core.params

    @property
    def dim(self) -> int:
        return self.core.config.embedding_size

    def standardize(self, X: np.ndarray) -> np.ndarray:
        dtype = self.core.params["block0/conv/w"].dtype
        return ((X - self.input_mean) / self.input_std).astype(dtype, copy=False)

    def _batches(self, X, batch_size):
        if X.ndim != 3 or X.shape[2] != self.core.config.in_channels:
            raise DataError(f"model expects (n, time, {self.core.config.in_channels}) windows, got {X.shape}")
        for lo in range(0, X.shape[0], batch_size):
            yield self.standardize(X[lo:lo + batch_size])

    def embed(self, X: np.ndarray, batch_size: int = 256) -> np.ndarray:
        out = [fcn_forward(self.core, xb, TrainMode.INFER)[0] for xb in self._batches(X, batch_size)]
        if not out:
            return np.zeros((0, self.dim))
        return np.concatenate(out).astype(np.float64)

    def predict_proba(self, X: np.ndarray, batch_size: int = 256) -> np.ndarray:
        if not self.has_head:
            raise DataError(f"{self.kind} model has no softmax head")
        out = []
        for xb in self._batches(X, batch_size):
            emb = fcn_forward(self.core, xb, TrainMode.INFER)[0]
            out.append(softmax(head_forward(self.core, emb)[0].astype(np.float64)))
        return np.concatenate(out) if out else np.zeros((0, len(self.classes)))

    def predict(self, X: np.ndarray) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.class_labels()[np.argmax(proba, axis=1)]

    def class_labels(self) -> np.ndarray:
        if self.classes is not None:
            return np.asarray(self.classes)
        return np.arange(self.core.config.n_classes)

    def _payload(self):
        tensors = {f"core/{k}": v for k, v in self.core.params.items()}
        tensors["input/mean"] = np.asarray(self.input_mean)
        tensors["input/std"] = np.asarray(self.input_std)
        if self.classes is not None:
            tensors["classes"] = np.asarray(self.classes, dtype=np.int64)
        meta = {"type": "deep", "kind": self.kind, "config": self.core.config.to_dict(),
                "meta": self.meta}
        return tensors, meta

    @property
    def embedder_id(self) -> str:
        return digest(*self._payload())

    def to_bytes(self) -> bytes:
        tensors, meta = self._payload()
        meta["embedder_id"] = digest(tensors, dict(meta))
        return encode_container(tensors, meta)

    @property
    def nbytes(self) -> int:
        return sum(v.nbytes for v in self.core.params.values())


@dataclass
class FeatureEmbedder:
    kind: str
    scaler: FeatureScaler
    selected: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    has_head = False

    @property
    def dim(self) -> int:
        return self.scaler.mean.size if self.selected is None else int(self.selected.size)

    def embed(self, X: np.ndarray, batch_size: int = 1024) -> np.ndarray:
        if X.ndim != 3 or X.shape[2] * 11 != self.scaler.mean.size:
            raise DataError(f"feature model expects (n, time, {self.scaler.mean.size // 11}) windows, "
                            f"got {X.shape}")
        parts = [self.scaler.transform(extract_batch(X[lo:lo + batch_size]))
                 for lo in range(0, X.shape[0], batch_size)]
        feats = np.concatenate(parts) if parts else np.zeros((0, self.scaler.mean.size))
        return feats if self.selected is None else feats[:, self.selected]

    def _payload(self):
        tensors = {"scaler/mean": self.scaler.mean, "scaler/std": self.scaler.std}
        if self.selected is not None:
            tensors["selected"] = np.asarray(self.selected, dtype=np.int64)
        return tensors, {"type": "features", "kind": self.kind, "meta": self.meta}

    @property
    def embedder_id(self) -> str:
        return digest(*self._payload())

    def to_bytes(self) -> bytes:
        tensors, meta = self._payload()
        meta["embedder_id"] = digest(tensors, dict(meta))
        return encode_container(tensors, meta)

    @property
    def nbytes(self) -> int:
        n = self.scaler.mean.nbytes + self.scaler.std.nbytes
        return n + (0 if self.selected is None else self.selected.nbytes)


def save_embedder(embedder, path) -> int:
    data = embedder.to_bytes()
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def embedder_from_container(tensors: dict, meta: dict):
    if meta.get("type") == "deep":
        core = FcnCore(FcnConfig.from_dict(meta["config"]),
                       {k[5:]: v for k, v in tensors.items() if k.startswith("core/")})
        return DeepEmbedder(kind=meta["kind"], core=core, input_mean=tensors["input/mean"],
                            input_std=tensors["input/std"], classes=tensors.get("classes"),
                            meta=meta.get("meta", {}))
    if meta.get("type") == "features":
        return FeatureEmbedder(kind=meta["kind"],
                               scaler=FeatureScaler(tensors["scaler/mean"], tensors["scaler/std"]),
                               selected=tensors.get("selected"), meta=meta.get("meta", {}))
    raise DataError(f"container does not hold a model (type={meta.get('type')!r})")


def load_embedder(path):
    return embedder_from_container(*load_container(path))


def embedder_from_bytes(buf: bytes):
    return embedder_from_container(*decode_container(buf))


__all__ = ["DeepEmbedder", "FeatureEmbedder", "embedder_from_bytes", "load_embedder",
           "save_embedder", "save_container"]
