"""Numpy implementation of the scalar-GCN kernels; same signatures as the compiled module."""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def propagate(indptr, indices, data, x):
    # every row holds its self loop, so no segment is empty
    return np.add.reduceat(data * x[indices], indptr[:-1]) if len(indptr) > 1 else np.zeros(0)


def _hidden(z1, keep, w1):
    t = w1 * z1
    return np.where(t > 0, t * keep, 0.0), t > 0


def forward(indptr, indices, data, z1, keep, w1, w2):
    h1, _ = _hidden(z1, keep, w1)
    return _sigmoid(w2 * propagate(indptr, indices, data, h1))


def loss_and_grad(indptr, indices, data, z1, y, mask, keep, w1, w2, eps):
    mask = mask.astype(bool)
    m = mask.sum()
    if m == 0:
        raise ValueError("empty loss mask")
    h1, active = _hidden(z1, keep, w1)
    z2 = propagate(indptr, indices, data, h1)
    o = _sigmoid(w2 * z2)
    oc = np.clip(o, eps, 1.0 - eps)
    ym = y[mask]
    loss = -np.sum(ym * np.log(oc[mask]) + (1.0 - ym) * np.log(1.0 - oc[mask])) / m
    inside = mask & (o >= eps) & (o <= 1.0 - eps)
    dz = np.where(inside, (o - y) / m, 0.0)
    g2 = float(np.sum(dz * z2))
    dh = propagate(indptr, indices, data, dz * w2)
    g1 = float(np.sum(np.where(active, dh * keep * z1, 0.0)))
    return float(loss), g1, g2
