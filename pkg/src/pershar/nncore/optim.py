from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    clipnorm: float | None = 1.0
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def global_norm(grads: dict) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))


def adam_step(state: AdamState, params: dict, grads: dict) -> float:
    """One Adam update of ``params`` in place; returns the pre-clip gradient norm.

    All gradients are rescaled together when their global norm exceeds
    ``clipnorm``. Non-finite gradients raise instead of being clamped.
    """
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {params[name].shape} for {name}")
    norm = global_norm(grads)
    if not np.isfinite(norm):
        bad = sorted(k for k, g in grads.items() if not np.all(np.isfinite(g)))
        raise NumericError(f"non-finite gradient in {bad}")
    scale = 1.0
    if state.clipnorm is not None and norm > state.clipnorm:
        scale = state.clipnorm / norm
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for name, g in grads.items():
        p = params[name]
        g = g * p.dtype.type(scale) if scale != 1.0 else g
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= (state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)).astype(p.dtype, copy=False)
    return norm
