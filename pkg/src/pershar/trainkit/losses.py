from __future__ import annotations

import numpy as np


def triplet_loss(emb_a, emb_p, emb_n, margin: float = 0.3) -> float:
    """Sum over triplets of max(|a-p|^2 - |a-n|^2 + margin, 0)."""
    return triplet_loss_grad(emb_a, emb_p, emb_n, margin)[0]


def triplet_loss_grad(emb_a, emb_p, emb_n, margin: float = 0.3):
    """Loss and its gradients w.r.t. anchor, positive and negative embeddings.

    Clamped triplets (hinge argument <= 0) contribute neither loss nor gradient.
    """
    a, p, n = (np.atleast_2d(v) for v in (emb_a, emb_p, emb_n))
    if not a.shape == p.shape == n.shape:
        raise ValueError(f"embedding shapes differ: {a.shape}, {p.shape}, {n.shape}")
    d_ap = ((a - p) ** 2).sum(axis=1)
    d_an = ((a - n) ** 2).sum(axis=1)
    hinge = d_ap - d_an + margin
    active = (hinge > 0).astype(a.dtype)[:, None]
    loss = float(np.sum(np.maximum(hinge, 0.0)))
    da = 2.0 * (n - p) * active
    dp = 2.0 * (p - a) * active
    dn = 2.0 * (a - n) * active
    return loss, da, dp, dn
