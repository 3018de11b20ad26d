"""Seeded non-stationary stream of corrupted feature batches.

Clean samples are drawn around fixed class means; each step applies two
corruptions whose severities cross-fade across a segment of ``speed``
steps, so the dominant corruption changes continuously along a cycle.

Randomness comes from Philox, a counter-based generator: every draw is a
pure function of ``(seed, stream id, step)``, so any batch can be
regenerated without replaying the stream.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from driftreset.errors import InvalidInputError

CLEAN_NOISE = 0.5
CLASS_MEAN_NORM = 3.0

# Philox key words identifying independent random streams
_STREAM_WORLD = 0
_STREAM_GEOMETRY = 1
_STREAM_BATCH = 2
_MASK64 = (1 << 64) - 1


def philox(seed: int, stream: int, counter: int = 0) -> np.random.Generator:
    """Generator for ``(seed, stream)`` positioned at block ``counter``.

    ``counter`` sits in the third counter word, leaving 2**128 draws per
    position before two positions could overlap.
    """
    bitgen = np.random.Philox(key=[seed & _MASK64, stream], counter=[0, 0, counter & _MASK64, 0])
    return np.random.Generator(bitgen)


class CorruptionKind(enum.Enum):
    GAUSSIAN_NOISE = "gaussian_noise"
    FEATURE_SCALE = "feature_scale"
    FEATURE_SHIFT = "feature_shift"
    FEATURE_ROTATE = "feature_rotate"
    FEATURE_MASK = "feature_mask"


DEFAULT_CYCLE = (
    CorruptionKind.GAUSSIAN_NOISE,
    CorruptionKind.FEATURE_SCALE,
    CorruptionKind.FEATURE_SHIFT,
    CorruptionKind.FEATURE_ROTATE,
    CorruptionKind.FEATURE_MASK,
)


@dataclass(frozen=True)
class StreamConfig:
    dim: int = 32
    n_classes: int = 10
    batch_size: int = 64
    speed: int = 1000
    severity_max: float = 5.0
    seed: int = 0
    world_seed: int = 0
    cycle: tuple = DEFAULT_CYCLE

    def __post_init__(self):
        object.__setattr__(self, "cycle", tuple(CorruptionKind(k) for k in self.cycle))
        problems = self.problems()
        if problems:
            raise InvalidInputError("; ".join(problems))

    def problems(self):
        out = []
        if self.dim < 2:
            out.append(f"stream.dim must be >= 2, got {self.dim}")
        if self.n_classes < 2:
            out.append(f"stream.n_classes must be >= 2, got {self.n_classes}")
        if self.batch_size < 2:
            out.append(f"stream.batch_size must be >= 2, got {self.batch_size}")
        if self.speed < 2:
            out.append(f"stream.speed must be >= 2, got {self.speed}")
        if not (self.severity_max >= 0 and math.isfinite(self.severity_max)):
            out.append(f"stream.severity_max must be finite and >= 0, got {self.severity_max}")
        if not 0 <= self.seed <= _MASK64:
            out.append(f"stream.seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.cycle:
            out.append("stream.cycle must name at least one corruption")
        return out


def schedule(step: int, cfg: StreamConfig):
    """Active corruption pair and severities at ``step``.

    Returns ``(kind_a, kind_b, sev_a, sev_b)``: the outgoing kind fades from
    ``severity_max`` to 0 over the segment while the incoming kind rises.
    """
    if step < 0:
        raise InvalidInputError(f"step must be >= 0, got {step}")
    seg, pos = divmod(step, cfg.speed)
    n = len(cfg.cycle)
    # The larger severity comes from the formula and the smaller from an exact
    # subtraction (Sterbenz), so sev_a + sev_b == severity_max in floating point.
    smax = cfg.severity_max
    if 2 * pos >= cfg.speed:
        sev_b = smax * (pos / cfg.speed)
        sev_a = smax - sev_b
    else:
        sev_a = smax * ((cfg.speed - pos) / cfg.speed)
        sev_b = smax - sev_a
    return cfg.cycle[seg % n], cfg.cycle[(seg + 1) % n], sev_a, sev_b


@dataclass(frozen=True)
class CorruptionGeometry:
    """Per-stream fixed directions used by the structured corruptions."""

    shift_direction: np.ndarray
    plane: np.ndarray  # (2, d) orthonormal rows
    mask_order: np.ndarray

    @classmethod
    def from_seed(cls, seed: int, dim: int) -> "CorruptionGeometry":
        rng = philox(seed, _STREAM_GEOMETRY)
        u = rng.standard_normal(dim)
        u /= np.linalg.norm(u)
        q, _ = np.linalg.qr(rng.standard_normal((dim, 2)))
        return cls(shift_direction=u, plane=np.ascontiguousarray(q.T), mask_order=rng.permutation(dim))


def apply_corruption(x, kind, severity, rng=None, geometry=None, severity_max=math.inf):
    """Corrupt a feature vector or a batch of row vectors.

    Severity 0 returns ``x`` itself, untouched.
    """
    kind = CorruptionKind(kind)
    severity = float(severity)
    if not 0.0 <= severity <= severity_max:
        raise InvalidInputError(f"severity {severity} outside [0, {severity_max}]")
    if severity == 0.0:
        return x
    x = np.asarray(x, dtype=np.float64)
    if kind is CorruptionKind.GAUSSIAN_NOISE:
        if rng is None:
            raise InvalidInputError("gaussian noise needs an rng")
        return x + 0.3 * severity * rng.standard_normal(x.shape)
    if kind is CorruptionKind.FEATURE_SCALE:
        return x * (1.0 + 0.25 * severity)
    if geometry is None:
        raise InvalidInputError(f"{kind.value} needs a CorruptionGeometry")
    if kind is CorruptionKind.FEATURE_SHIFT:
        return x + 0.4 * severity * geometry.shift_direction
    if kind is CorruptionKind.FEATURE_ROTATE:
        angle = 0.15 * severity
        c, s = math.cos(angle), math.sin(angle)
        u1, u2 = geometry.plane
        a = x @ u1
        b = x @ u2
        da = (c - 1.0) * a - s * b
        db = s * a + (c - 1.0) * b
        return x + np.multiply.outer(da, u1) + np.multiply.outer(db, u2)
    # FEATURE_MASK
    dim = x.shape[-1]
    n = min(dim, math.ceil(severity * dim / 10.0))
    out = x.copy()
    out[..., geometry.mask_order[:n]] = 0.0
    return out


@dataclass(frozen=True)
class BatchMeta:
    step: int
    segment: int
    kinds: tuple
    severities: tuple


@dataclass(frozen=True)
class StreamBatch:
    """Features plus evaluation-only labels.

    Adaptation code receives ``features`` alone; ``labels`` stay with the
    evaluation loop.
    """

    features: np.ndarray
    labels: np.ndarray
    meta: BatchMeta


def class_means(world_seed: int, n_classes: int, dim: int) -> np.ndarray:
    rng = philox(world_seed, _STREAM_WORLD)
    means = rng.standard_normal((n_classes, dim))
    means *= CLASS_MEAN_NORM / np.linalg.norm(means, axis=1, keepdims=True)
    return means


def clean_samples(world_seed: int, n_classes: int, dim: int, n: int, seed: int = 0):
    """Uncorrupted ``(features, labels)`` for fitting the frozen head."""
    means = class_means(world_seed, n_classes, dim)
    rng = philox(seed, _STREAM_BATCH + 1)
    labels = rng.integers(n_classes, size=n)
    return means[labels] + CLEAN_NOISE * rng.standard_normal((n, dim)), labels


class StreamSimulator:
    """Iterator over :class:`StreamBatch` for one seeded stream."""

    def __init__(self, cfg: StreamConfig, start: int = 0):
        self.cfg = cfg
        self.means = class_means(cfg.world_seed, cfg.n_classes, cfg.dim)
        self.geometry = CorruptionGeometry.from_seed(cfg.seed, cfg.dim)
        self.step = start

    def batch_at(self, step: int) -> StreamBatch:
        cfg = self.cfg
        rng = philox(cfg.seed, _STREAM_BATCH, step)
        labels = rng.integers(cfg.n_classes, size=cfg.batch_size)
        x = self.means[labels] + CLEAN_NOISE * rng.standard_normal((cfg.batch_size, cfg.dim))
        kind_a, kind_b, sev_a, sev_b = schedule(step, cfg)
        x = apply_corruption(x, kind_a, sev_a, rng, self.geometry)
        x = apply_corruption(x, kind_b, sev_b, rng, self.geometry)
        meta = BatchMeta(step=step, segment=step // cfg.speed, kinds=(kind_a, kind_b), severities=(sev_a, sev_b))
        return StreamBatch(features=x, labels=labels, meta=meta)

    def next_batch(self) -> StreamBatch:
        batch = self.batch_at(self.step)
        self.step += 1
        return batch

    def __iter__(self):
        return self

    def __next__(self):
        return self.next_batch()


def preview_records(cfg: StreamConfig, n_steps: int, every: int = 1):
    """Schedule records for plotting: one dict per ``every`` steps."""
    for step in range(0, n_steps, every):
        kind_a, kind_b, sev_a, sev_b = schedule(step, cfg)
        yield {
            "step": step,
            "segment": step // cfg.speed,
            "kinds": [kind_a.value, kind_b.value],
            "severities": [sev_a, sev_b],
        }


def write_preview(path, cfg: StreamConfig, n_steps: int, every: int = 1):
    with open(path, "w") as fh:
        for rec in preview_records(cfg, n_steps, every):
            fh.write(json.dumps(rec) + "\n")
