"""Affine-normalized softmax classifier adapted online by entropy minimization.

The model normalizes each incoming batch by its own column statistics, then
applies an adaptable per-feature scale ``gamma`` and shift ``beta`` followed
by a frozen linear head.  Only ``gamma`` and ``beta`` move at test time.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from driftreset import kernels
from driftreset.errors import InvalidInputError

EPS_STD = 1e-6

CHECKPOINT_MAGIC = b"RDPP"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


class AdaptiveModel:
    """Normalization layer with adaptable affine parameters and a frozen head.

    Parameters
    ----------
    weight, bias:
        Frozen head of shape ``(C, d)`` and ``(C,)``.
    gamma, beta:
        Initial affine parameters; default to ones and zeros.  The values at
        construction are captured as the restore snapshot.
    """

    def __init__(self, weight, bias, gamma=None, beta=None):
        weight = np.array(weight, dtype=np.float64, order="C")
        bias = np.array(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise InvalidInputError(f"head shapes do not match: W{weight.shape}, b{bias.shape}")
        if weight.shape[0] < 2 or weight.shape[1] < 1:
            raise InvalidInputError(f"need C >= 2 and d >= 1, got W{weight.shape}")
        n_classes, dim = weight.shape
        self.weight = weight
        self.bias = bias
        self.weight.flags.writeable = False
        self.bias.flags.writeable = False
        self.gamma = np.ones(dim) if gamma is None else np.array(gamma, dtype=np.float64)
        self.beta = np.zeros(dim) if beta is None else np.array(beta, dtype=np.float64)
        if self.gamma.shape != (dim,) or self.beta.shape != (dim,):
            raise InvalidInputError("gamma and beta must have length d")
        self.gamma0 = self.gamma.copy()
        self.beta0 = self.beta.copy()
        self.gamma0.flags.writeable = False
        self.beta0.flags.writeable = False
        self.feature_mean = np.zeros(dim)
        self.feature_std = np.ones(dim)

    @property
    def dim(self) -> int:
        return self.weight.shape[1]

    @property
    def n_classes(self) -> int:
        return self.weight.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.beta])

    @property
    def theta0(self) -> np.ndarray:
        return np.concatenate([self.gamma0, self.beta0])

    def _check_batch(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise InvalidInputError(f"expected a (B, {self.dim}) batch, got {x.shape}")
        if x.shape[0] < 2:
            raise InvalidInputError("batch statistics need at least 2 samples")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("batch contains non-finite features")
        return x

    def run(self, x, check=True):
        """Full forward pass: ``(xhat, logits, probs, logp, entropies)``."""
        if check:
            x = self._check_batch(x)
        out = kernels.batch_forward(x, self.gamma, self.beta, self.weight, self.bias, EPS_STD)
        return out

    def forward(self, x):
        """Logits for a batch; records the batch normalization statistics."""
        x = self._check_batch(x)
        self.feature_mean = x.mean(axis=0)
        self.feature_std = np.maximum(x.std(axis=0), EPS_STD)
        return self.run(x, check=False)[1]

    def predict_proba(self, x):
        return self.run(x)[2]


def entropy_loss_and_grad(model: AdaptiveModel, x, mask=None):
    """Mean entropy of the masked samples and its (gamma, beta) gradient.

    Returns ``None`` when the mask selects no sample, meaning no update.
    """
    xhat, _, probs, logp, ent = model.run(x)
    if mask is None:
        mask = np.ones(len(ent), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != ent.shape:
        raise InvalidInputError(f"mask length {mask.shape} != batch size {ent.shape}")
    if not mask.any():
        return None
    return kernels.entropy_grad(xhat, probs, logp, ent, mask, model.weight)


def default_entropy_margin(n_classes: int) -> float:
    return 0.4 * math.log(n_classes)


def reliability_filter(probs, e0=None, entropies=None):
    """Keep samples whose entropy is strictly below ``e0`` (default 0.4 ln C)."""
    probs = np.asarray(probs, dtype=np.float64)
    if e0 is None:
        e0 = default_entropy_margin(probs.shape[-1])
    if entropies is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            entropies = -np.where(probs > 0, probs * np.log(probs), 0.0).sum(axis=-1)
    return np.asarray(entropies) < e0


@dataclass
class FilterDecision:
    mask: np.ndarray
    redundancy_ema: np.ndarray


def redundancy_filter(probs, redundancy_ema, eps_red=0.95, decay=0.1, candidates=None) -> FilterDecision:
    """Drop samples whose prediction is too cosine-similar to recent updates.

    Every candidate is compared against the EMA as it stood at the start of
    the batch; kept samples then enter the EMA one at a time with ``decay``.
    A zero EMA accepts everything.
    """
    probs = np.asarray(probs, dtype=np.float64)
    ema = np.asarray(redundancy_ema, dtype=np.float64)
    n = probs.shape[0]
    if candidates is None:
        candidates = np.ones(n, dtype=bool)
    ema_norm = math.sqrt(float(ema @ ema))
    if ema_norm == 0.0:
        keep = candidates.copy()
    else:
        pn = np.sqrt(np.einsum("ij,ij->i", probs, probs))
        cos = (probs @ ema) / (np.where(pn > 0, pn, 1.0) * ema_norm)
        cos = np.where(pn > 0, cos, 0.0)
        keep = candidates & (cos <= eps_red)
    kept = probs[keep]
    m = kept.shape[0]
    if m:
        # closed form of m sequential updates ema <- (1-decay)*ema + decay*p
        w = decay * (1.0 - decay) ** np.arange(m - 1, -1, -1)
        ema = (1.0 - decay) ** m * ema + w @ kept
    return FilterDecision(mask=keep, redundancy_ema=ema)


@dataclass
class OptimizerState:
    """SGD with heavy-ball momentum over (gamma, beta)."""

    dim: int
    learning_rate: float = 0.01
    momentum: float = 0.9
    velocity_gamma: np.ndarray = field(default=None, repr=False)
    velocity_beta: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidInputError(f"momentum must be in [0, 1), got {self.momentum}")
        if not self.learning_rate > 0.0:
            raise InvalidInputError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.velocity_gamma is None:
            self.velocity_gamma = np.zeros(self.dim)
        if self.velocity_beta is None:
            self.velocity_beta = np.zeros(self.dim)
        self.velocity_gamma = np.array(self.velocity_gamma, dtype=np.float64)
        self.velocity_beta = np.array(self.velocity_beta, dtype=np.float64)
        self.velocity_gamma0 = self.velocity_gamma.copy()
        self.velocity_beta0 = self.velocity_beta.copy()


def sgd_step(model: AdaptiveModel, opt: OptimizerState, grad_gamma, grad_beta) -> bool:
    """Apply one momentum step; returns False (and changes nothing) on non-finite grads."""
    if not (np.all(np.isfinite(grad_gamma)) and np.all(np.isfinite(grad_beta))):
        return False
    mu, lr = opt.momentum, opt.learning_rate
    opt.velocity_gamma *= mu
    opt.velocity_gamma += grad_gamma
    opt.velocity_beta *= mu
    opt.velocity_beta += grad_beta
    model.gamma -= lr * opt.velocity_gamma
    model.beta -= lr * opt.velocity_beta
    return True


def restore_full(model: AdaptiveModel, opt: OptimizerState | None = None):
    model.gamma[:] = model.gamma0
    model.beta[:] = model.beta0
    if opt is not None:
        opt.velocity_gamma[:] = opt.velocity_gamma0
        opt.velocity_beta[:] = opt.velocity_beta0
    return model, opt


def restore_soft(model: AdaptiveModel, lam: float):
    """Pull (gamma, beta) toward the snapshot: ``theta <- lam*theta0 + (1-lam)*theta``."""
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise InvalidInputError(f"lambda must be in [0, 1], got {lam}")
    if lam == 1.0:
        model.gamma[:] = model.gamma0
        model.beta[:] = model.beta0
    elif lam > 0.0:
        model.gamma[:] = lam * model.gamma0 + (1.0 - lam) * model.gamma
        model.beta[:] = lam * model.beta0 + (1.0 - lam) * model.beta
    return model


# -- checkpoint -----------------------------------------------------------
#
# Layout (little-endian):
#   magic  b"RDPP"
#   u32    format version
#   u32    d
#   u32    C
#   f64[d] gamma0, f64[d] beta0, f64[C*d] W row-major, f64[C] b,
#   f64[d] velocity_gamma0, f64[d] velocity_beta0


def save_checkpoint(path, model: AdaptiveModel, opt: OptimizerState):
    d, c = model.dim, model.n_classes
    body = np.concatenate(
        [model.gamma0, model.beta0, model.weight.ravel(), model.bias, opt.velocity_gamma0, opt.velocity_beta0]
    ).astype("<f8")
    Path(path).write_bytes(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, d, c) + body.tobytes())


def load_checkpoint(path, learning_rate=0.01, momentum=0.9):
    """Rebuild ``(model, opt)`` in their snapshot state from a checkpoint file."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidInputError(f"{path}: truncated header")
    magic, version, d, c = _HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise InvalidInputError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise InvalidInputError(f"{path}: unsupported checkpoint version {version}")
    n = 4 * d + c * d + c
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != n:
        raise InvalidInputError(f"{path}: expected {n} parameters, found {body.size}")
    body = body.astype(np.float64)
    parts = np.split(body, np.cumsum([d, d, c * d, c, d]))
    gamma, beta, w, b, vg, vb = parts
    model = AdaptiveModel(w.reshape(c, d), b, gamma=gamma, beta=beta)
    opt = OptimizerState(d, learning_rate=learning_rate, momentum=momentum, velocity_gamma=vg, velocity_beta=vb)
    return model, opt


def fit_head(features, labels, n_classes, batch_size=64, steps=400, learning_rate=0.5, l2=1e-3, seed=0):
    """Fit the frozen head by multinomial logistic regression.

    Features are normalized batch-by-batch (as at test time) before fitting,
    then full-batch gradient descent runs for ``steps`` iterations from a
    small seeded random start.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    n, d = x.shape
    nb = n // batch_size
    xs = x[: nb * batch_size].reshape(nb, batch_size, d)
    m = xs.mean(axis=1, keepdims=True)
    s = np.maximum(xs.std(axis=1, keepdims=True), EPS_STD)
    xn = ((xs - m) / s).reshape(-1, d)
    y = y[: nb * batch_size]
    onehot = np.eye(n_classes)[y]
    rng = np.random.default_rng(seed)
    w = 0.01 * rng.standard_normal((n_classes, d))
    b = np.zeros(n_classes)
    for _ in range(steps):
        z = xn @ w.T + b
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        g = (p - onehot) / len(y)
        w -= learning_rate * (g.T @ xn + l2 * w)
        b -= learning_rate * g.sum(axis=0)
    return w, b
