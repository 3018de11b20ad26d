"""Pure-numpy implementations of the per-batch kernels.

These define the reference semantics; ``_ckernels`` must agree with them to
floating-point rounding.
"""

import numpy as np


def batch_forward(x, gamma, beta, weight, bias, eps_std):
    """Normalize ``x`` by its own column statistics and apply the head.

    Returns ``(xhat, logits, probs, logp, ent)`` where ``ent`` holds the
    per-row entropies in nats.
    """
    m = x.mean(axis=0)
    s = np.sqrt(((x - m) ** 2).mean(axis=0))
    np.maximum(s, eps_std, out=s)
    xhat = (x - m) / s
    logits = (xhat * gamma + beta) @ weight.T + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    z = e.sum(axis=1, keepdims=True)
    probs = e / z
    logp = shifted - np.log(z)
    ent = -(probs * logp).sum(axis=1)
    return xhat, logits, probs, logp, ent


def entropy_grad(xhat, probs, logp, ent, mask, weight):
    """Mean entropy over masked rows and its gradient w.r.t. (gamma, beta).

    Normalization statistics are treated as constants.
    """
    d = xhat.shape[1]
    n = int(np.count_nonzero(mask))
    if n == 0:
        return 0.0, np.zeros(d), np.zeros(d)
    p = probs[mask]
    h = ent[mask]
    dz = -p * (logp[mask] + h[:, None]) / n
    dh = dz @ weight
    g_gamma = (dh * xhat[mask]).sum(axis=0)
    g_beta = dh.sum(axis=0)
    return float(h.sum() / n), g_gamma, g_beta
