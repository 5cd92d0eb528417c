from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from . import layers as L
from .layers import TrainMode


@dataclass(frozen=True)
class FcnConfig:
    """Architecture of the FCN core.

    ``embed_dim=None`` means no projection: the embedding is the pooled
    output of the last block. ``n_classes=None`` means no softmax head.
    """

    in_channels: int
    filters: tuple = (128, 256, 128)
    kernels: tuple = (8, 5, 3)
    strides: tuple = (1, 1, 1)
    embed_dim: int | None = None
    n_classes: int | None = None
    dropout: float = 0.3
    bn_momentum: float = 0.99
    bn_eps: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(int(f) for f in self.filters))
        object.__setattr__(self, "kernels", tuple(int(k) for k in self.kernels))
        object.__setattr__(self, "strides", tuple(int(s) for s in self.strides))
        if not (len(self.filters) == len(self.kernels) == len(self.strides)) or not self.filters:
            raise DataError("filters, kernels and strides must be non-empty and equally long")

    @property
    def embedding_size(self) -> int:
        return self.embed_dim if self.embed_dim is not None else self.filters[-1]

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels, "filters": list(self.filters),
            "kernels": list(self.kernels), "strides": list(self.strides),
            "embed_dim": self.embed_dim, "n_classes": self.n_classes, "dropout": self.dropout,
            "bn_momentum": self.bn_momentum, "bn_eps": self.bn_eps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FcnConfig":
        return cls(**d)


def param_shapes(config: FcnConfig) -> dict[str, tuple]:
    shapes = {}
    c_in = config.in_channels
    for i, (f, k) in enumerate(zip(config.filters, config.kernels)):
        shapes[f"block{i}/conv/w"] = (k, c_in, f)
        shapes[f"block{i}/conv/b"] = (f,)
        for name in ("gamma", "beta", "mean", "var"):
            shapes[f"block{i}/bn/{name}"] = (f,)
        c_in = f
    if config.embed_dim is not None:
        shapes["proj/w"] = (c_in, config.embed_dim)
        shapes["proj/b"] = (config.embed_dim,)
    if config.n_classes is not None:
        shapes["head/w"] = (config.embedding_size, config.n_classes)
        shapes["head/b"] = (config.n_classes,)
    return shapes


def param_count(config: FcnConfig) -> int:
    """Conv weights and biases, all four BN vectors per block, projection and head."""
    return int(sum(np.prod(s) for s in param_shapes(config).values()))


def is_trainable(name: str) -> bool:
    return not (name.endswith("/bn/mean") or name.endswith("/bn/var"))


@dataclass
class FcnCore:
    config: FcnConfig
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def trainable(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.params.items() if is_trainable(k)}

    def astype(self, dtype) -> "FcnCore":
        return FcnCore(self.config, {k: v.astype(dtype) for k, v in self.params.items()})

    def copy(self) -> "FcnCore":
        return FcnCore(self.config, {k: v.copy() for k, v in self.params.items()})


def init_core(config: FcnConfig, rng: np.random.Generator, dtype=np.float32) -> FcnCore:
    """Fan-in scaled uniform init; He bound for convs, LeCun bound for dense layers."""
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith("conv/w"):
            fan_in = shape[0] * shape[1]
            lim = np.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-lim, lim, size=shape)
        elif name in ("proj/w", "head/w"):
            lim = np.sqrt(3.0 / shape[0])
            params[name] = rng.uniform(-lim, lim, size=shape)
        elif name.endswith(("bn/gamma", "bn/var")):
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    return FcnCore(config, {k: v.astype(dtype) for k, v in params.items()})


def fcn_forward(core: FcnCore, batch: np.ndarray, mode: TrainMode = TrainMode.INFER,
                rng: np.random.Generator | None = None):
    """Embed a batch ``(B, T, C)`` -> unit-norm rows ``(B, d)``.

    Each block runs conv -> batchnorm -> ReLU -> dropout, then global average
    pooling, the optional projection and L2 normalisation. Returns
    ``(embeddings, cache)``; ``cache["bn_stats"]`` holds the running
    statistics a training step should write back.
    """
    cfg = core.config
    p = core.params
    if batch.ndim != 3 or batch.shape[2] != cfg.in_channels:
        raise DataError(f"model expects (batch, time, {cfg.in_channels}) input, got {batch.shape}")
    if mode is TrainMode.TRAIN and cfg.dropout > 0 and rng is None:
        raise DataError("train mode with dropout needs an rng")
    h = batch.astype(p["block0/conv/w"].dtype, copy=False)
    caches = []
    bn_stats = {}
    for i, stride in enumerate(cfg.strides):
        h, c_conv = L.conv1d_forward(h, p[f"block{i}/conv/w"], p[f"block{i}/conv/b"], stride)
        h, c_bn, stats = L.batchnorm_forward(
            h, p[f"block{i}/bn/gamma"], p[f"block{i}/bn/beta"], p[f"block{i}/bn/mean"],
            p[f"block{i}/bn/var"], mode, cfg.bn_momentum, cfg.bn_eps)
        bn_stats[f"block{i}/bn/mean"], bn_stats[f"block{i}/bn/var"] = stats
        h, c_relu = L.relu_forward(h)
        h, c_drop = L.dropout_forward(h, cfg.dropout, rng, mode)
        caches.append((c_conv, c_bn, c_relu, c_drop))
    h, c_gap = L.global_avg_pool_forward(h)
    c_proj = None
    if cfg.embed_dim is not None:
        h, c_proj = L.dense_forward(h, p["proj/w"], p["proj/b"])
    emb, c_l2 = L.l2_normalize_forward(h)
    return emb, {"blocks": caches, "gap": c_gap, "proj": c_proj, "l2": c_l2, "bn_stats": bn_stats}


def fcn_backward(core: FcnCore, cache: dict, d_emb: np.ndarray, need_input_grad: bool = False
                 ) -> tuple[dict, np.ndarray | None]:
    """Gradients of the trainable core parameters (and of the input batch on request)."""
    grads = {}
    g = L.l2_normalize_backward(d_emb, cache["l2"])
    if cache["proj"] is not None:
        g, grads["proj/w"], grads["proj/b"] = L.dense_backward(g, cache["proj"])
    g = L.global_avg_pool_backward(g, cache["gap"])
    for i in reversed(range(len(cache["blocks"]))):
        c_conv, c_bn, c_relu, c_drop = cache["blocks"][i]
        g = L.dropout_backward(g, c_drop)
        g = L.relu_backward(g, c_relu)
        g, grads[f"block{i}/bn/gamma"], grads[f"block{i}/bn/beta"] = L.batchnorm_backward(g, c_bn)
        g, grads[f"block{i}/conv/w"], grads[f"block{i}/conv/b"] = L.conv1d_backward(
            g, c_conv, need_dx=need_input_grad or i > 0)
    return grads, g


def head_forward(core: FcnCore, emb: np.ndarray):
    if "head/w" not in core.params:
        raise DataError("model has no softmax head")
    return L.dense_forward(emb, core.params["head/w"], core.params["head/b"])


def head_backward(d_logits, cache) -> tuple[dict, np.ndarray]:
    d_emb, dw, db = L.dense_backward(d_logits, cache)
    return {"head/w": dw, "head/b": db}, d_emb


def apply_bn_stats(core: FcnCore, cache: dict) -> None:
    for name, value in cache["bn_stats"].items():
        core.params[name] = value.astype(core.params[name].dtype, copy=False)
