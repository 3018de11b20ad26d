"""Adaptation policies: when to adapt, when to reset, and how.

A :class:`Controller` owns one model, its optimizer state, the EATA-style
sample filters and (for drift-aware variants) a :class:`DriftDetector`.
It only ever sees unlabeled features; accuracy is scored outside, in
:func:`run_stream`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from driftreset import kernels
from driftreset.adaptmodel import (
    EPS_STD,
    AdaptiveModel,
    OptimizerState,
    default_entropy_margin,
    redundancy_filter,
    restore_full,
    restore_soft,
    sgd_step,
)
from driftreset.detector import DriftConfig, DriftDetector, DriftSignal
from driftreset.errors import InvalidInputError

COLLAPSE_WINDOW = 500


class ResetEvent(enum.IntEnum):
    NONE = 0
    FULL = 1
    SOFT = 2


# canonical name -> (table label, adapts, drift signal, reset kind)
VARIANTS = {
    "frozen": ("Baseline", False, None, None),
    "noreset": ("NoReset", True, None, None),
    "rdumb": ("RDumb", True, None, ResetEvent.FULL),
    "entropy-full": ("EntropyFull", True, DriftSignal.ENTROPY, ResetEvent.FULL),
    "entropy-soft": ("EntropySoft", True, DriftSignal.ENTROPY, ResetEvent.SOFT),
    "kl-full": ("KLFull", True, DriftSignal.KL, ResetEvent.FULL),
    "kl-soft": ("KLSoft", True, DriftSignal.KL, ResetEvent.SOFT),
}
_ALIASES = {v[0].lower(): k for k, v in VARIANTS.items()}
_ALIASES.update({"baseline": "frozen", "frozenbaseline": "frozen", "noresetadapter": "noreset", "rdumbfixed": "rdumb"})


def canonical_variant(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key.replace("-", "").replace("_", ""), key)
    if key not in VARIANTS:
        raise InvalidInputError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}")
    return key


@dataclass(frozen=True)
class PolicyVariant:
    """Which policy to run; ``interval`` applies to rdumb, ``lam`` to soft variants."""

    name: str
    interval: int = 1000
    lam: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "name", canonical_variant(self.name))
        if self.interval < 1:
            raise InvalidInputError(f"interval must be >= 1, got {self.interval}")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInputError(f"lambda must be in [0, 1], got {self.lam}")

    @property
    def label(self) -> str:
        return VARIANTS[self.name][0]

    @property
    def adapts(self) -> bool:
        return VARIANTS[self.name][1]

    @property
    def signal(self):
        return VARIANTS[self.name][2]

    @property
    def reset_kind(self):
        return VARIANTS[self.name][3]


@dataclass(frozen=True)
class AdaptConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    entropy_margin: float | None = None  # None -> 0.4 ln C
    eps_red: float = 0.95
    redundancy_decay: float = 0.1


@dataclass
class StepReport:
    step_index: int
    predictions: np.ndarray
    batch_entropy: float
    drift_score: float
    reset_event: ResetEvent
    batch_accuracy: float = math.nan


class Controller:
    def __init__(
        self,
        model: AdaptiveModel,
        variant: PolicyVariant | str,
        drift: DriftConfig | None = None,
        adapt: AdaptConfig | None = None,
    ):
        self.model = model
        self.variant = variant if isinstance(variant, PolicyVariant) else PolicyVariant(variant)
        self.adapt = adapt or AdaptConfig()
        self.opt = OptimizerState(model.dim, learning_rate=self.adapt.learning_rate, momentum=self.adapt.momentum)
        self.e0 = (
            default_entropy_margin(model.n_classes)
            if self.adapt.entropy_margin is None
            else self.adapt.entropy_margin
        )
        self.redundancy_ema = np.zeros(model.n_classes)
        sig = self.variant.signal
        self.detector = DriftDetector(sig, model.n_classes, drift) if sig is not None else None
        self.steps = 0
        self.resets = 0
        self.updates = 0
        self._force_drift = False

    def force_drift(self):
        """Make the next drift check fire regardless of the detector (testing hook)."""
        self._force_drift = True

    def _reset(self) -> ResetEvent:
        kind = self.variant.reset_kind
        if kind is ResetEvent.SOFT:
            restore_soft(self.model, self.variant.lam)
        else:
            restore_full(self.model, self.opt)
            self.redundancy_ema[:] = 0.0
        if self.detector is not None:
            self.detector.notify_reset()
        self.resets += 1
        return kind

    def step(self, features) -> StepReport:
        """Predict on one unlabeled batch, then reset or adapt."""
        m = self.model
        x = np.ascontiguousarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != m.dim or x.shape[0] < 2:
            raise InvalidInputError(f"expected a (B>=2, {m.dim}) batch, got {x.shape}")
        self.steps += 1
        xhat, logits, probs, logp, ent = kernels.batch_forward(x, m.gamma, m.beta, m.weight, m.bias, EPS_STD)
        preds = logits.argmax(axis=1)
        report = StepReport(self.steps, preds, float(ent.mean()), 0.0, ResetEvent.NONE)
        v = self.variant
        if not v.adapts:
            return report

        fire = False
        if v.name == "rdumb":
            fire = self.steps % v.interval == 0
        elif self.detector is not None:
            verdict = self.detector.observe(probs, ent)
            report.drift_score = verdict.score
            fire = verdict.fired
        if self._force_drift:
            fire = True
            self._force_drift = False
        if fire:
            report.reset_event = self._reset()
            return report

        reliable = ent < self.e0
        if not reliable.any():
            return report
        dec = redundancy_filter(probs, self.redundancy_ema, self.adapt.eps_red, self.adapt.redundancy_decay, reliable)
        self.redundancy_ema = dec.redundancy_ema
        if dec.mask.any():
            _, gg, gb = kernels.entropy_grad(xhat, probs, logp, ent, dec.mask, m.weight)
            if sgd_step(m, self.opt, gg, gb):
                self.updates += 1
        return report


def controller_step(ctrl: Controller, features) -> StepReport:
    return ctrl.step(features)


@dataclass
class Trace:
    accuracy: np.ndarray
    entropy: np.ndarray
    drift_score: np.ndarray
    reset_event: np.ndarray
    summary: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.accuracy)


def window_accuracy(acc, window=COLLAPSE_WINDOW):
    """Means of every contiguous ``window``-step stretch (one value if shorter)."""
    acc = np.asarray(acc, dtype=np.float64)
    w = min(window, len(acc))
    c = np.concatenate([[0.0], np.cumsum(acc)])
    return (c[w:] - c[:-w]) / w


def summarize_trace(trace: Trace, n_classes: int) -> dict:
    win = window_accuracy(trace.accuracy)
    return {
        "steps": len(trace),
        "mean_accuracy": float(trace.accuracy.mean()),
        "resets": int(np.count_nonzero(trace.reset_event)),
        "collapse": bool(win.min() < 1.5 / n_classes),
        "min_window_accuracy": float(win.min()),
        "max_window_accuracy": float(win.max()),
    }


def run_stream(ctrl: Controller, sim, n_steps: int) -> Trace:
    """Drive ``ctrl`` over ``n_steps`` batches of ``sim`` and score predictions."""
    if n_steps < 1:
        raise InvalidInputError(f"n_steps must be >= 1, got {n_steps}")
    acc = np.empty(n_steps)
    ent = np.empty(n_steps)
    score = np.empty(n_steps)
    event = np.empty(n_steps, dtype=np.int8)
    for i in range(n_steps):
        batch = sim.next_batch()
        rep = ctrl.step(batch.features)
        rep.batch_accuracy = float(np.mean(rep.predictions == batch.labels))
        acc[i] = rep.batch_accuracy
        ent[i] = rep.batch_entropy
        score[i] = rep.drift_score
        event[i] = rep.reset_event
    trace = Trace(acc, ent, score, event)
    trace.summary = summarize_trace(trace, ctrl.model.n_classes)
    return trace
