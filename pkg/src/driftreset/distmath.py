"""Numeric kernels for categorical distributions.

All functions accept a single vector or a 2-D array of row vectors and work
along the last axis.  Logarithms are natural, so entropies are in nats and
bounded above by ``ln C``.
"""

from __future__ import annotations

import numpy as np

from driftreset.errors import InvalidInputError

#: Lower clamp applied to reference probabilities inside the KL ratio.
KL_EPS = 1e-12
#: Tolerance on the normalization of a probability vector.
NORM_TOL = 1e-9


def _as_float_array(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise InvalidInputError(f"{name} must be 1-D or 2-D, got ndim={arr.ndim}")
    if arr.shape[-1] < 2:
        raise InvalidInputError(f"{name} needs at least 2 classes, got {arr.shape[-1]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def check_distribution(p, name="p"):
    """Validate ``p`` as probability vector(s) and return it as float64."""
    arr = _as_float_array(p, name)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InvalidInputError(f"{name} has entries outside [0, 1]")
    if np.any(np.abs(arr.sum(axis=-1) - 1.0) > NORM_TOL):
        raise InvalidInputError(f"{name} does not sum to 1 within {NORM_TOL}")
    return arr


def softmax(z):
    """Numerically stable softmax (max-subtraction form)."""
    z = _as_float_array(z, "z")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z):
    z = _as_float_array(z, "z")
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _xlogy(x, y):
    # 0 * log(0) = 0 convention
    out = np.zeros(np.broadcast(x, y).shape)
    nz = x > 0
    np.log(y, out=out, where=nz)
    return np.where(nz, x * out, 0.0)


def entropy(p):
    """Shannon entropy ``-sum p log p`` in nats."""
    p = check_distribution(p)
    return -_xlogy(p, p).sum(axis=-1)


def kl_divergence(p, q, eps=KL_EPS):
    """``KL(p || q)`` in nats with ``q`` clamped below at ``eps``.

    The clamp keeps the divergence finite when the reference has no mass on a
    class the current distribution predicts.
    """
    p = check_distribution(p, "p")
    q = check_distribution(q, "q")
    if p.shape[-1] != q.shape[-1]:
        raise InvalidInputError(f"length mismatch: {p.shape[-1]} vs {q.shape[-1]}")
    qc = np.maximum(q, eps)
    ratio = np.divide(p, qc)
    kl = _xlogy(p, ratio).sum(axis=-1)
    # rounding can leave tiny negatives when p == q
    return np.maximum(kl, 0.0)


def cosine_similarity(u, v):
    """Cosine of the angle between ``u`` and ``v``; 0 if either norm is 0."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape[-1] != v.shape[-1]:
        raise InvalidInputError(f"length mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    denom = nu * nv
    dot = (u * v).sum(axis=-1)
    safe = np.where(denom > 0.0, denom, 1.0)
    cos = np.where(denom > 0.0, dot / safe, 0.0)
    cos = np.clip(cos, -1.0, 1.0)
    return float(cos) if cos.ndim == 0 else cos
