"""Forward/backward pairs for the layers of the FCN core.

Every ``*_forward`` returns ``(out, cache)`` and the matching
``*_backward(dout, cache)`` returns gradients in the order of the forward
arguments. Tensors are ``(batch, time, channels)`` unless noted.
"""
from __future__ import annotations

import enum
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DataError


class TrainMode(enum.Enum):
    TRAIN = "train"
    INFER = "infer"


def same_padding(kernel: int) -> tuple[int, int]:
    left = (kernel - 1) // 2
    return left, kernel - 1 - left


def conv1d_forward(x, w, b, stride: int = 1):
    """'Same'-padded 1-D cross-correlation.

    x: (B, T, C_in); w: (kernel, C_in, F); b: (F,). Output (B, ceil(T/stride), F).
    """
    if x.ndim != 3:
        raise DataError(f"conv1d input must be (batch, time, channels), got shape {x.shape}")
    k, c_in, f = w.shape
    if x.shape[2] != c_in:
        raise DataError(f"conv1d input has {x.shape[2]} channels, weights expect {c_in}")
    if b.shape != (f,):
        raise DataError(f"conv1d bias shape {b.shape} does not match {f} filters")
    if stride < 1:
        raise DataError(f"stride must be >= 1, got {stride}")
    bsz, t, _ = x.shape
    pl, pr = same_padding(k)
    xp = np.pad(x, ((0, 0), (pl, pr), (0, 0)))
    t_out = math.ceil(t / stride)
    # (B, T, C_in, k) -> (B, T_out, k, C_in)
    win = sliding_window_view(xp, k, axis=1)[:, ::stride][:, :t_out]
    cols = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(bsz * t_out, k * c_in)
    out = cols @ w.reshape(k * c_in, f) + b
    return out.reshape(bsz, t_out, f), (x.shape, cols, w, stride)


def conv1d_backward(dout, cache, need_dx: bool = True):
    """Returns (dx, dw, db); dx is None when ``need_dx`` is false."""
    x_shape, cols, w, stride = cache
    bsz, t, c_in = x_shape
    k, _, f = w.shape
    t_out = dout.shape[1]
    d2 = dout.reshape(bsz * t_out, f)
    dw = (cols.T @ d2).reshape(k, c_in, f)
    db = d2.sum(axis=0)
    if not need_dx:
        return None, dw, db
    pl, pr = same_padding(k)
    dxp = np.zeros((bsz, t + pl + pr, c_in), dtype=dout.dtype)
    span = stride * (t_out - 1) + 1
    for j in range(k):
        dxp[:, j:j + span:stride] += (d2 @ w[j].T).reshape(bsz, t_out, c_in)
    return dxp[:, pl:pl + t], dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode: TrainMode,
                      momentum: float = 0.99, eps: float = 1e-3):
    """Per-channel batch norm over (batch, time).

    Returns ``(out, cache, (new_running_mean, new_running_var))``; running
    statistics are never modified in place.
    """
    c = x.shape[-1]
    for name, v in (("gamma", gamma), ("beta", beta), ("running_mean", running_mean),
                    ("running_var", running_var)):
        if v.shape != (c,):
            raise DataError(f"batchnorm {name} has shape {v.shape}, input has {c} channels")
    if mode is TrainMode.TRAIN:
        n = x.shape[0] * x.shape[1]
        if n < 2:
            raise DataError("batchnorm in train mode needs batch x time >= 2")
        mu = x.mean(axis=(0, 1))
        var = x.var(axis=(0, 1))
        new_stats = (momentum * running_mean + (1 - momentum) * mu,
                     momentum * running_var + (1 - momentum) * var)
    else:
        mu, var = running_mean, running_var
        new_stats = (running_mean, running_var)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    out = gamma * xhat + beta
    return out, (xhat, gamma, inv_std, mode), new_stats


def batchnorm_backward(dout, cache):
    xhat, gamma, inv_std, mode = cache
    dgamma = (dout * xhat).sum(axis=(0, 1))
    dbeta = dout.sum(axis=(0, 1))
    if mode is TrainMode.TRAIN:
        n = dout.shape[0] * dout.shape[1]
        dx = (gamma * inv_std / n) * (n * dout - dbeta - xhat * dgamma)
    else:
        dx = dout * gamma * inv_std
    return dx, dgamma, dbeta


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, mask):
    return dout * mask


def dropout_forward(x, rate: float, rng, mode: TrainMode):
    """Inverted dropout: survivors are scaled by 1/(1-rate) in train mode."""
    if mode is not TrainMode.TRAIN or rate == 0:
        return x, None
    keep = 1.0 - rate
    mask = (rng.random(x.shape, dtype=np.float32) < keep) * x.dtype.type(1.0 / keep)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def global_avg_pool_forward(x):
    return x.mean(axis=1), x.shape[1]


def global_avg_pool_backward(dout, t):
    return np.repeat(dout[:, None, :] / t, t, axis=1)


L2_EPS = 1e-12


def l2_normalize_forward(x):
    """Row-wise x / (||x|| + 1e-12); the epsilon keeps zero rows finite."""
    norm = np.sqrt((x * x).sum(axis=1, keepdims=True))
    denom = norm + L2_EPS
    y = x / denom
    return y, (x, norm, denom)


def l2_normalize_backward(dout, cache):
    x, norm, denom = cache
    proj = (x * dout).sum(axis=1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    return dout / denom - x * proj / (safe * denom * denom) * (norm > 0)


def dense_forward(x, w, b):
    return x @ w + b, (x, w)


def dense_backward(dout, cache):
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cce(logits, one_hot_targets):
    """Mean categorical cross-entropy and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -(one_hot_targets * log_p).sum() / n
    grad = (np.exp(log_p) - one_hot_targets) / n
    return float(loss), grad.astype(logits.dtype, copy=False)
