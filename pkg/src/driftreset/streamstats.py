"""Exponential-moving-average statistics for scalar drift signals.

An :class:`EmaTracker` keeps a running mean and variance of one scalar
signal (batch entropy or batch KL) and standardizes new observations
against them.  :class:`ReferenceDistribution` keeps an EMA of predicted
class distributions, used as the reference for KL drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from driftreset.errors import InvalidInputError

SIGMA_FLOOR = 1e-8


@dataclass
class EmaTracker:
    """Running EMA mean/variance of a scalar signal.

    Parameters
    ----------
    alpha:
        Decay in ``(0, 1]``; ``1`` replaces the state with each observation.
    warmup:
        Number of observations after a reset during which :attr:`in_warmup`
        is true.

    The recursion is the usual single-pass exponentially weighted one::

        delta = x - mean
        mean += alpha * delta
        var = (1 - alpha) * (var + alpha * delta**2)
    """

    alpha: float = 0.01
    warmup: int = 20
    mean: float = 0.0
    variance: float = 0.0
    count: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidInputError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.warmup < 1:
            raise InvalidInputError(f"warmup must be >= 1, got {self.warmup}")

    @property
    def in_warmup(self) -> bool:
        return self.count < self.warmup

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def update(self, x: float) -> "EmaTracker":
        x = float(x)
        if not math.isfinite(x):
            raise InvalidInputError(f"observation must be finite, got {x}")
        a = self.alpha
        delta = x - self.mean
        self.mean += a * delta
        self.variance = (1.0 - a) * (self.variance + a * delta * delta)
        self.count += 1
        return self

    def zscore(self, x: float) -> float:
        """``|x - mean| / max(std, SIGMA_FLOOR)``."""
        x = float(x)
        if not math.isfinite(x):
            raise InvalidInputError(f"observation must be finite, got {x}")
        return abs(x - self.mean) / max(math.sqrt(self.variance), SIGMA_FLOOR)

    def reset(self) -> "EmaTracker":
        self.mean = 0.0
        self.variance = 0.0
        self.count = 0
        return self


def ema_update(tracker: EmaTracker, x: float) -> EmaTracker:
    return tracker.update(x)


def ema_zscore(tracker: EmaTracker, x: float) -> float:
    return tracker.zscore(x)


def ema_reset(tracker: EmaTracker) -> EmaTracker:
    return tracker.reset()


@dataclass
class ReferenceDistribution:
    """EMA of predicted class distributions, initialized uniform."""

    n_classes: int
    decay: float = 0.05
    q: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_classes < 2:
            raise InvalidInputError(f"n_classes must be >= 2, got {self.n_classes}")
        if not 0.0 < self.decay <= 1.0:
            raise InvalidInputError(f"decay must be in (0, 1], got {self.decay}")
        if self.q is None:
            self.reset()
        else:
            self.q = np.array(self.q, dtype=np.float64)

    def reset(self) -> "ReferenceDistribution":
        self.q = np.full(self.n_classes, 1.0 / self.n_classes)
        return self

    def update(self, p) -> "ReferenceDistribution":
        p = np.asarray(p, dtype=np.float64)
        if p.shape != self.q.shape:
            raise InvalidInputError(f"length mismatch: {p.shape} vs {self.q.shape}")
        b = self.decay
        if b == 1.0:
            self.q = p.copy()
        else:
            self.q = (1.0 - b) * self.q + b * p
        return self


def reference_update(ref: ReferenceDistribution, p) -> ReferenceDistribution:
    return ref.update(p)
