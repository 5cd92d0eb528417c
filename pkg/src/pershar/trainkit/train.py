from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..datakit import SegmentSet
from ..embedders import DeepEmbedder
from ..errors import DataError
from ..nncore import (
    AdamState, FcnConfig, TrainMode, adam_step, apply_bn_stats, fcn_backward, fcn_forward,
    head_backward, head_forward, init_core, softmax_cce,
)
from .losses import triplet_loss_grad
from .mining import TripletMiner, mine_random_triplets


@dataclass
class TrainConfig:
    """Optimisation and architecture settings for one training run.

    ``subject_triplet_ratio`` only matters for triplet loss: 0.5 gives the
    subject-triplet network, 0.0 the conventional random-triplet variant.
    """

    loss: str = "cce"
    epochs: int = 150
    batch_size: int = 64
    lr: float = 1e-3
    margin: float = 0.3
    subject_triplet_ratio: float = 0.5
    seed: int = 0
    clipnorm: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-7
    filters: tuple = (128, 256, 128)
    kernels: tuple = (8, 5, 3)
    strides: tuple = (1, 1, 1)
    embed_dim: int | None = None
    dropout: float = 0.3
    bn_momentum: float = 0.99
    bn_eps: float = 1e-3

    def __post_init__(self):
        if self.loss not in ("cce", "triplet"):
            raise DataError(f"loss must be 'cce' or 'triplet', got {self.loss!r}")
        self.filters = tuple(self.filters)
        self.kernels = tuple(self.kernels)
        self.strides = tuple(self.strides)

    @classmethod
    def cce(cls, **overrides) -> "TrainConfig":
        return cls(**{"loss": "cce", "epochs": 150, "lr": 1e-3, **overrides})

    @classmethod
    def triplet(cls, subject_triplet_ratio: float = 0.5, **overrides) -> "TrainConfig":
        return cls(**{"loss": "triplet", "epochs": 150, "lr": 2e-4, "margin": 0.3,
                      "subject_triplet_ratio": subject_triplet_ratio, **overrides})

    def fcn_config(self, in_channels: int, n_classes: int | None) -> FcnConfig:
        return FcnConfig(in_channels=in_channels, filters=self.filters, kernels=self.kernels,
                         strides=self.strides, embed_dim=self.embed_dim, n_classes=n_classes,
                         dropout=self.dropout, bn_momentum=self.bn_momentum, bn_eps=self.bn_eps)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("filters", "kernels", "strides"):
            d[k] = list(d[k])
        return d


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    seconds: float


@dataclass
class TrainLog:
    entries: list[EpochLog] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "val_accuracy", "seconds"])
            for e in self.entries:
                w.writerow([e.epoch, repr(e.train_loss), repr(e.val_loss), repr(e.val_accuracy),
                            repr(e.seconds)])


def _streams(seed: int):
    init, order, drop, mine, val = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5))
    return init, order, drop, mine, val


def channel_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = X.reshape(-1, X.shape[-1]).astype(np.float64)
    std = flat.std(axis=0)
    return flat.mean(axis=0), np.where(std > 1e-8, std, 1.0)


def _step(core, state, grads):
    adam_step(state, core.trainable(), grads)


def train_classifier(train: SegmentSet, val: SegmentSet | None, config: TrainConfig,
                     kind: str = "fcn") -> tuple[DeepEmbedder, TrainLog]:
    """Train the FCN core plus softmax head with categorical cross-entropy."""
    classes = np.unique(train.labels)
    if classes.size < 2:
        raise DataError("classifier training needs at least two classes")
    if not np.array_equal(classes, np.arange(classes.size)):
        raise DataError(f"labels must be contiguous 0..n-1, got {classes.tolist()}")
    n_classes = classes.size
    init_rng, order_rng, drop_rng, _, _ = _streams(config.seed)
    core = init_core(config.fcn_config(train.X.shape[2], n_classes), init_rng)
    mean, std = channel_stats(train.X)
    model = DeepEmbedder(kind=kind, core=core, input_mean=mean, input_std=std,
                         classes=classes.astype(np.int64))
    state = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps,
                      clipnorm=config.clipnorm)
    Xs = model.standardize(train.X)
    eye = np.eye(n_classes, dtype=Xs.dtype)
    log = TrainLog()
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = order_rng.permutation(len(train))
        total, seen = 0.0, 0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            emb, cache = fcn_forward(core, Xs[idx], TrainMode.TRAIN, drop_rng)
            logits, hcache = head_forward(core, emb)
            loss, dlogits = softmax_cce(logits, eye[train.labels[idx]])
            grads, d_emb = head_backward(dlogits, hcache)
            core_grads, _ = fcn_backward(core, cache, d_emb)
            grads.update(core_grads)
            apply_bn_stats(core, cache)
            _step(core, state, grads)
            total += loss * idx.size
            seen += idx.size
        val_loss, val_acc = _validate_classifier(model, val, eye)
        log.entries.append(EpochLog(epoch + 1, total / max(seen, 1), val_loss, val_acc,
                                    time.perf_counter() - t0))
    return model, log


def _validate_classifier(model: DeepEmbedder, val: SegmentSet | None, eye) -> tuple[float, float]:
    if val is None or len(val) == 0:
        return math.nan, math.nan
    known = np.isin(val.labels, model.classes)
    if not known.any():
        return math.nan, math.nan
    X, y = val.X[known], val.labels[known]
    proba = model.predict_proba(X)
    p_true = proba[np.arange(y.size), np.searchsorted(model.classes, y)]
    loss = float(-np.mean(np.log(np.maximum(p_true, 1e-12))))
    acc = float(np.mean(model.classes[np.argmax(proba, axis=1)] == y))
    return loss, acc


def train_triplet(train: SegmentSet, val: SegmentSet | None, config: TrainConfig,
                  kind: str = "ptn") -> tuple[DeepEmbedder, TrainLog]:
    """Train the FCN core with triplet loss.

    Each epoch mines N triplets (N = number of training windows). The three
    members of a batch of triplets are stacked into one forward pass of
    shared weights.
    """
    init_rng, order_rng, drop_rng, mine_rng, val_rng = _streams(config.seed)
    miner = TripletMiner(train, config.subject_triplet_ratio)
    core = init_core(config.fcn_config(train.X.shape[2], None), init_rng)
    mean, std = channel_stats(train.X)
    model = DeepEmbedder(kind=kind, core=core, input_mean=mean, input_std=std)
    state = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps,
                      clipnorm=config.clipnorm)
    Xs = model.standardize(train.X)
    val_triplets = _val_triplets(val, val_rng)
    log = TrainLog()
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        triplets = np.asarray([t[:3] for t in miner.mine(len(train), mine_rng)], dtype=np.int64)
        total = 0.0
        for lo in range(0, len(triplets), config.batch_size):
            tb = triplets[lo:lo + config.batch_size]
            b = tb.shape[0]
            emb, cache = fcn_forward(core, Xs[tb.T.reshape(-1)], TrainMode.TRAIN, drop_rng)
            loss, da, dp, dn = triplet_loss_grad(emb[:b], emb[b:2 * b], emb[2 * b:], config.margin)
            grads, _ = fcn_backward(core, cache, np.concatenate([da, dp, dn]))
            apply_bn_stats(core, cache)
            _step(core, state, grads)
            total += loss
        val_loss, val_acc = _validate_triplets(model, val, val_triplets, config.margin)
        log.entries.append(EpochLog(epoch + 1, total / max(len(triplets), 1), val_loss, val_acc,
                                    time.perf_counter() - t0))
    return model, log


def _val_triplets(val: SegmentSet | None, rng, count: int = 512):
    if val is None or len(val) == 0:
        return None
    try:
        return np.asarray([t[:3] for t in mine_random_triplets(val, min(count, len(val)), rng)])
    except DataError:
        return None


def _validate_triplets(model, val, triplets, margin) -> tuple[float, float]:
    """Mean triplet loss and the fraction of triplets with d(a,p) < d(a,n)."""
    if triplets is None:
        return math.nan, math.nan
    used = np.unique(triplets)
    emb = np.zeros((len(val), model.dim))
    emb[used] = model.embed(val.X[used])
    a, p, n = emb[triplets[:, 0]], emb[triplets[:, 1]], emb[triplets[:, 2]]
    loss = triplet_loss_grad(a, p, n, margin)[0] / len(triplets)
    ok = ((a - p) ** 2).sum(axis=1) < ((a - n) ** 2).sum(axis=1)
    return float(loss), float(ok.mean())
