"""Experiment runner: configuration, seed/speed/variant grids, result tables.

Configuration files are flat ``key = value`` text with dotted section
prefixes::

    variant = entropy-full
    policy.k = 2.5
    stream.speed = 1000
    run.seeds = 0,1,2

Every run writes one decimated trace per seed under ``<out>/traces/`` and
upserts one row into ``<out>/results.tsv``.  Rows are kept sorted by
(variant, parameters, speed), so a rerun reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import io
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from driftreset.adaptmodel import AdaptiveModel, fit_head
from driftreset.controller import (
    VARIANTS,
    AdaptConfig,
    Controller,
    PolicyVariant,
    ResetEvent,
    canonical_variant,
    run_stream,
)
from driftreset.detector import DriftConfig
from driftreset.errors import CalibrationError, ConfigError, InvalidInputError
from driftreset.streamsim import CorruptionKind, StreamConfig, StreamSimulator, clean_samples

log = logging.getLogger(__name__)

VARIANT_ORDER = list(VARIANTS)
REPORT_VARIANTS = ["frozen", "rdumb", "entropy-full", "entropy-soft", "kl-full", "kl-soft"]
PROTOCOL_SPEEDS = (1000, 2000, 5000)
CLEAN_TRAIN_SAMPLES = 12800

# Experiment stream: the two corruptions that survive per-batch normalization
# (scale and shift are exact no-ops, rotation nearly so), at the severity
# where unreset entropy minimization collapses within 10^5 steps.
PROTOCOL_STREAM = StreamConfig(cycle=(CorruptionKind.FEATURE_MASK, CorruptionKind.GAUSSIAN_NOISE), severity_max=6.0)

RESULT_FIELDS = [
    "variant", "label", "k", "lambda", "interval", "speed", "steps",
    "seeds", "seed_accuracies", "mean_accuracy", "resets", "collapse",
]


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any float64."""
    return format(float(x), ".17g")


@functools.lru_cache(maxsize=8)
def _pretrained_head(world_seed, n_classes, dim, batch_size):
    x, y = clean_samples(world_seed, n_classes, dim, CLEAN_TRAIN_SAMPLES, seed=world_seed)
    w, b = fit_head(x, y, n_classes, batch_size=batch_size, seed=world_seed)
    w.flags.writeable = False
    b.flags.writeable = False
    return w, b


def pretrained_model(stream: StreamConfig) -> AdaptiveModel:
    """Fresh model around the clean-trained head for ``stream``'s world."""
    w, b = _pretrained_head(stream.world_seed, stream.n_classes, stream.dim, stream.batch_size)
    return AdaptiveModel(w, b)


def frozen_accuracy(stream: StreamConfig, model: AdaptiveModel, n_steps: int) -> float:
    sim = StreamSimulator(stream)
    hits = 0
    for _ in range(n_steps):
        batch = sim.next_batch()
        hits += int(np.count_nonzero(model.run(batch.features, check=False)[1].argmax(axis=1) == batch.labels))
    return hits / (n_steps * stream.batch_size)


def calibrate_baseline(stream: StreamConfig, model: AdaptiveModel, target: float,
                       probe_steps: int = 20000, tol: float = 0.02, max_iter: int = 30,
                       upper: float = 5.0, upper_cap: float = 640.0):
    """Find ``severity_max`` at which the frozen model scores ``target`` accuracy.

    Brackets by doubling ``upper`` (up to ``upper_cap``), then bisects.
    Returns ``(severity_max, achieved_accuracy)``.
    """
    c = stream.n_classes
    if not 1.0 / c < target < 1.0:
        raise InvalidInputError(f"target must lie in (1/C, 1) = ({1.0 / c:.3f}, 1), got {target}")

    def acc_at(s):
        return frozen_accuracy(replace(stream, severity_max=s), model, probe_steps)

    lo, acc_lo = 0.0, acc_at(0.0)
    if acc_lo < target - tol:
        raise CalibrationError(f"clean accuracy {acc_lo:.4f} is below target {target}", bracket=(0.0, acc_lo))
    if abs(acc_lo - target) <= tol:
        return 0.0, acc_lo
    hi, acc_hi = upper, acc_at(upper)
    while acc_hi > target + tol:
        if hi >= upper_cap:
            raise CalibrationError(
                f"accuracy {acc_hi:.4f} at severity_max={hi} still above target {target}",
                bracket=((lo, acc_lo), (hi, acc_hi)),
            )
        lo, acc_lo = hi, acc_hi
        hi, acc_hi = min(2 * hi, upper_cap), acc_at(min(2 * hi, upper_cap))
    if abs(acc_hi - target) <= tol:
        return hi, acc_hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        acc_mid = acc_at(mid)
        log.info("calibrate: severity_max=%.4f accuracy=%.4f", mid, acc_mid)
        if abs(acc_mid - target) <= tol:
            return mid, acc_mid
        if acc_mid > target:
            lo, acc_lo = mid, acc_mid
        else:
            hi, acc_hi = mid, acc_mid
    raise CalibrationError(
        f"no severity within {tol} of target after {max_iter} bisections",
        bracket=((lo, acc_lo), (hi, acc_hi)),
    )


# -- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    variant: str = "entropy-full"
    k: float = 2.5
    lam: float = 0.5
    interval: int = 1000
    stream: StreamConfig = PROTOCOL_STREAM
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    drift: DriftConfig = field(default_factory=DriftConfig)
    steps: int = 100_000
    seeds: tuple = (0, 1, 2)
    decimate: int = 100
    out: str = "runs"

    @property
    def policy(self) -> PolicyVariant:
        return PolicyVariant(self.variant, interval=self.interval, lam=self.lam)

    def for_seed(self, seed: int) -> StreamConfig:
        return replace(self.stream, seed=seed)


def _to_int(v):
    f = float(v)
    if not f.is_integer():
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _to_cycle(v):
    return tuple(CorruptionKind(s.strip()) for s in str(v).split(",") if s.strip())


def _to_seeds(v):
    if isinstance(v, (list, tuple)):
        return tuple(_to_int(s) for s in v)
    return tuple(_to_int(s) for s in str(v).split(",") if s.strip())


def _opt_float(v):
    return None if str(v).strip().lower() in ("", "none", "default") else float(v)


# key -> (section, attribute, parser)
CONFIG_KEYS = {
    "variant": (None, "variant", str),
    "policy.k": (None, "k", float),
    "policy.lambda": (None, "lam", float),
    "policy.interval": (None, "interval", _to_int),
    "stream.dim": ("stream", "dim", _to_int),
    "stream.n_classes": ("stream", "n_classes", _to_int),
    "stream.batch_size": ("stream", "batch_size", _to_int),
    "stream.speed": ("stream", "speed", _to_int),
    "stream.severity_max": ("stream", "severity_max", float),
    "stream.world_seed": ("stream", "world_seed", _to_int),
    "stream.cycle": ("stream", "cycle", _to_cycle),
    "adapt.lr": ("adapt", "learning_rate", float),
    "adapt.momentum": ("adapt", "momentum", float),
    "adapt.entropy_margin": ("adapt", "entropy_margin", _opt_float),
    "adapt.eps_red": ("adapt", "eps_red", float),
    "adapt.redundancy_decay": ("adapt", "redundancy_decay", float),
    "drift.warmup": ("drift", "warmup", _to_int),
    "drift.cooldown": ("drift", "cooldown", _to_int),
    "drift.alpha": ("drift", "alpha", float),
    "drift.ref_decay": ("drift", "ref_decay", float),
    "run.steps": (None, "steps", _to_int),
    "run.seeds": (None, "seeds", _to_seeds),
    "run.decimate": (None, "decimate", _to_int),
    "run.out": (None, "out", str),
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    problems = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{n}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            problems.append(f"{source}:{n}: unknown key {key!r}")
            continue
        values[key] = value
    if problems:
        raise ConfigError(problems)
    return values


def build_config(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply raw ``values`` (dotted keys) over ``base`` and validate everything.

    Raises :class:`ConfigError` listing every offending field.
    """
    base = base or ExperimentConfig()
    top = {}
    sections = {"stream": {}, "adapt": {}, "drift": {}}
    problems = []
    for key, raw in values.items():
        if key not in CONFIG_KEYS:
            problems.append(f"unknown key {key!r}")
            continue
        section, attr, parse = CONFIG_KEYS[key]
        try:
            val = parse(raw)
        except (ValueError, TypeError) as exc:
            problems.append(f"{key}: cannot parse {raw!r} ({exc})")
            continue
        (sections[section] if section else top)[attr] = val
    if problems:
        raise ConfigError(problems)

    stream_kw = {f.name: getattr(base.stream, f.name) for f in dataclasses.fields(StreamConfig)}
    stream_kw.update(sections["stream"])
    adapt_kw = dataclasses.asdict(base.adapt) | sections["adapt"]
    drift_kw = dataclasses.asdict(base.drift) | sections["drift"]
    cfg_kw = {f.name: getattr(base, f.name) for f in dataclasses.fields(ExperimentConfig)}
    cfg_kw.update(top)

    # validate every section before giving up so the message lists all problems
    try:
        cfg_kw["stream"] = StreamConfig(**stream_kw)
    except InvalidInputError as exc:
        problems.extend(str(exc).split("; "))
    try:
        cfg_kw["drift"] = DriftConfig(**drift_kw)
    except InvalidInputError as exc:
        problems.extend(f"drift.{p}" for p in str(exc).split("; "))
    cfg_kw["adapt"] = AdaptConfig(**adapt_kw)
    problems.extend(_adapt_problems(cfg_kw["adapt"]))
    try:
        cfg_kw["variant"] = canonical_variant(str(cfg_kw["variant"]))
    except InvalidInputError as exc:
        problems.append(f"variant: {exc}")
    problems.extend(_run_problems(cfg_kw))
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(**cfg_kw)


def _adapt_problems(a: AdaptConfig):
    out = []
    if not (a.learning_rate > 0 and math.isfinite(a.learning_rate)):
        out.append(f"adapt.lr must be finite and > 0, got {a.learning_rate}")
    if not 0.0 <= a.momentum < 1.0:
        out.append(f"adapt.momentum must be in [0, 1), got {a.momentum}")
    if a.entropy_margin is not None and not a.entropy_margin > 0:
        out.append(f"adapt.entropy_margin must be > 0, got {a.entropy_margin}")
    if not -1.0 <= a.eps_red <= 1.0:
        out.append(f"adapt.eps_red must be in [-1, 1], got {a.eps_red}")
    if not 0.0 < a.redundancy_decay <= 1.0:
        out.append(f"adapt.redundancy_decay must be in (0, 1], got {a.redundancy_decay}")
    return out


def _run_problems(kw):
    out = []
    if not (kw["k"] > 0 and math.isfinite(kw["k"])):
        out.append(f"policy.k must be finite and > 0, got {kw['k']}")
    if not 0.0 <= kw["lam"] <= 1.0:
        out.append(f"policy.lambda must be in [0, 1], got {kw['lam']}")
    if kw["interval"] < 1:
        out.append(f"policy.interval must be >= 1, got {kw['interval']}")
    if kw["steps"] < 1:
        out.append(f"run.steps must be >= 1, got {kw['steps']}")
    if len(kw["seeds"]) < 1:
        out.append("run.seeds must list at least one seed")
    elif len(set(kw["seeds"])) != len(kw["seeds"]):
        out.append(f"run.seeds has duplicates: {kw['seeds']}")
    elif any(s < 0 for s in kw["seeds"]):
        out.append(f"run.seeds must be non-negative, got {kw['seeds']}")
    if kw["decimate"] < 1:
        out.append(f"run.decimate must be >= 1, got {kw['decimate']}")
    return out


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a config file, then apply ``overrides`` (same dotted keys; they win)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    values = parse_config_text(text, str(path))
    values.update(overrides or {})
    return build_config(values)


def config_text(cfg: ExperimentConfig) -> str:
    """Serialize ``cfg`` in the format :func:`parse_config_text` reads."""
    lines = []
    for key, (section, attr, _) in CONFIG_KEYS.items():
        obj = getattr(cfg, section) if section else cfg
        v = getattr(obj, attr)
        if isinstance(v, tuple):
            v = ",".join(x.value if isinstance(x, CorruptionKind) else str(x) for x in v)
        elif v is None:
            v = "default"
        elif isinstance(v, float):
            v = fmt(v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


# -- running ---------------------------------------------------------------

_EVENT_NAMES = {int(e): e.name.lower() for e in ResetEvent}


def run_seed(cfg: ExperimentConfig, seed: int):
    """One stream for one seed; returns the full :class:`Trace`."""
    stream = cfg.for_seed(seed)
    ctrl = Controller(pretrained_model(stream), cfg.policy, drift=replace(cfg.drift, k=cfg.k), adapt=cfg.adapt)
    return run_stream(ctrl, StreamSimulator(stream), cfg.steps)


def trace_lines(trace, decimate: int):
    """Decimated JSON-lines records.

    A record is written every ``decimate`` steps and at every reset step.
    ``accuracy`` and ``entropy`` average the steps since the previous record;
    ``drift_score`` and ``reset_event`` belong to the recorded step itself.
    Steps are 1-based.
    """
    n = len(trace)
    keep = np.zeros(n, dtype=bool)
    keep[decimate - 1 :: decimate] = True
    keep[trace.reset_event != 0] = True
    keep[n - 1] = True
    idx = np.flatnonzero(keep)
    cacc = np.concatenate([[0.0], np.cumsum(trace.accuracy)])
    cent = np.concatenate([[0.0], np.cumsum(trace.entropy)])
    prev = 0
    for i in idx:
        span = i + 1 - prev
        acc = (cacc[i + 1] - cacc[prev]) / span
        ent = (cent[i + 1] - cent[prev]) / span
        yield (
            f'{{"step": {i + 1}, "accuracy": {fmt(acc)}, "entropy": {fmt(ent)}, '
            f'"drift_score": {fmt(trace.drift_score[i])}, "reset_event": "{_EVENT_NAMES[int(trace.reset_event[i])]}"}}\n'
        )
        prev = i + 1


def run_name(cfg: ExperimentConfig) -> str:
    v = cfg.variant
    parts = [v]
    if v in ("entropy-full", "entropy-soft", "kl-full", "kl-soft"):
        parts.append(f"k{cfg.k:g}")
    if v.endswith("-soft"):
        parts.append(f"lam{cfg.lam:g}")
    if v == "rdumb":
        parts.append(f"T{cfg.interval}")
    parts.append(f"speed{cfg.stream.speed}")
    return "_".join(parts)


@dataclass
class SummaryRow:
    variant: str
    label: str
    k: float
    lam: float
    interval: int
    speed: int
    steps: int
    seeds: tuple
    seed_accuracies: tuple
    resets: int
    collapse: bool

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.seed_accuracies))

    @property
    def key(self):
        return (VARIANT_ORDER.index(self.variant), self.k, self.lam, self.interval, self.speed)

    def as_record(self) -> dict:
        return {
            "variant": self.variant,
            "label": self.label,
            "k": fmt(self.k),
            "lambda": fmt(self.lam),
            "interval": str(self.interval),
            "speed": str(self.speed),
            "steps": str(self.steps),
            "seeds": ";".join(map(str, self.seeds)),
            "seed_accuracies": ";".join(fmt(a) for a in self.seed_accuracies),
            "mean_accuracy": fmt(self.mean_accuracy),
            "resets": str(self.resets),
            "collapse": "1" if self.collapse else "0",
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SummaryRow":
        return cls(
            variant=canonical_variant(rec["variant"]),
            label=rec["label"],
            k=float(rec["k"]),
            lam=float(rec["lambda"]),
            interval=int(rec["interval"]),
            speed=int(rec["speed"]),
            steps=int(rec["steps"]),
            seeds=tuple(int(s) for s in rec["seeds"].split(";")),
            seed_accuracies=tuple(float(a) for a in rec["seed_accuracies"].split(";")),
            resets=int(rec["resets"]),
            collapse=rec["collapse"] == "1",
        )


def _run_cell(cfg: ExperimentConfig):
    traces = {seed: run_seed(cfg, seed) for seed in cfg.seeds}
    return cfg, traces


def _row_for(cfg, traces) -> SummaryRow:
    return SummaryRow(
        variant=cfg.variant,
        label=cfg.policy.label,
        k=cfg.k,
        lam=cfg.lam,
        interval=cfg.interval,
        speed=cfg.stream.speed,
        steps=cfg.steps,
        seeds=tuple(cfg.seeds),
        seed_accuracies=tuple(traces[s].summary["mean_accuracy"] for s in cfg.seeds),
        resets=sum(traces[s].summary["resets"] for s in cfg.seeds),
        collapse=any(traces[s].summary["collapse"] for s in cfg.seeds),
    )


def _write_traces(cfg, traces):
    tdir = Path(cfg.out) / "traces"
    tdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for seed in cfg.seeds:
        path = tdir / f"{run_name(cfg)}_seed{seed}.jsonl"
        with open(path, "w") as fh:
            fh.writelines(trace_lines(traces[seed], cfg.decimate))
        paths.append(path)
    return paths


def read_results(path) -> list[SummaryRow]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read results file {path}: {exc.strerror or exc}") from exc
    reader = csv.DictReader(io.StringIO(text), delimiter="\t")
    if reader.fieldnames != RESULT_FIELDS:
        raise OSError(f"{path}: not a results table (header {reader.fieldnames})")
    try:
        return [SummaryRow.from_record(r) for r in reader]
    except (KeyError, ValueError, AttributeError, InvalidInputError) as exc:
        raise OSError(f"{path}: corrupt results row ({exc})") from exc


def write_results(path, rows):
    rows = sorted(rows, key=lambda r: r.key)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RESULT_FIELDS, delimiter="\t", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.as_record())
    Path(path).write_text(buf.getvalue())


def upsert_results(path, new_rows):
    path = Path(path)
    rows = read_results(path) if path.exists() else []
    merged = {r.key: r for r in rows}
    for r in new_rows:
        merged[r.key] = r
    write_results(path, merged.values())


def run_experiment(cfg: ExperimentConfig):
    """Run every seed of ``cfg``; write traces and upsert the summary row.

    Returns ``(trace_paths, SummaryRow)``.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg, traces = _run_cell(cfg)
    paths = _write_traces(cfg, traces)
    row = _row_for(cfg, traces)
    upsert_results(out / "results.tsv", [row])
    return paths, row


def run_grid(cfgs, jobs: int = 1):
    """Run many configs (possibly in parallel) and merge results deterministically."""
    cfgs = list(cfgs)
    if not cfgs:
        raise InvalidInputError("empty grid")
    for cfg in cfgs:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            done = list(ex.map(_run_cell, cfgs))
    else:
        done = [_run_cell(c) for c in cfgs]
    rows = []
    by_out = {}
    for cfg, traces in done:
        _write_traces(cfg, traces)
        row = _row_for(cfg, traces)
        rows.append(row)
        by_out.setdefault(cfg.out, []).append(row)
    for out, out_rows in sorted(by_out.items()):
        upsert_results(Path(out) / "results.tsv", out_rows)
    return rows


SWEEP_PARAMS = {"k": "k", "lambda": "lam", "speed": None, "variant": "variant"}


def sweep(base: ExperimentConfig, grid: dict, jobs: int = 1):
    """Cartesian sweep over ``grid`` (keys: k, lambda, speed, variant).

    Returns ``(rows, ablation)`` where ``ablation`` holds one
    ``(params, mean_accuracy)`` entry per grid point, averaged over speeds
    when speed is not itself swept, sorted by parameter value.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise InvalidInputError("sweep grid must be non-empty")
    unknown = set(grid) - set(SWEEP_PARAMS)
    if unknown:
        raise InvalidInputError(f"cannot sweep over {sorted(unknown)}")
    keys = sorted(grid)
    cfgs = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cfg = base
        for key, val in zip(keys, combo):
            if key == "speed":
                cfg = replace(cfg, stream=replace(cfg.stream, speed=int(val)))
            elif key == "variant":
                cfg = replace(cfg, variant=canonical_variant(val))
            else:
                cfg = replace(cfg, **{SWEEP_PARAMS[key]: float(val)})
        cfgs.append(cfg)
    rows = run_grid(cfgs, jobs=jobs)
    ablation = ablation_table(rows, keys)
    return rows, ablation


def ablation_table(rows, keys):
    groups = {}
    for r in rows:
        point = tuple(_param_of(r, k) for k in keys)
        groups.setdefault(point, []).append(r.mean_accuracy)
    table = [(dict(zip(keys, p)), float(np.mean(v))) for p, v in groups.items()]
    table.sort(key=lambda e: tuple(_sort_key(e[0][k]) for k in keys))
    return table


def _param_of(row, key):
    return {"k": row.k, "lambda": row.lam, "speed": row.speed, "variant": row.variant}[key]


def _sort_key(v):
    return (0, v, "") if isinstance(v, (int, float)) else (1, 0, VARIANT_ORDER.index(v))


def write_ablation(path, keys, table):
    lines = ["\t".join(keys + ["mean_accuracy"])]
    for params, acc in table:
        lines.append("\t".join([str(params[k]) for k in keys] + [fmt(acc)]))
    Path(path).write_text("\n".join(lines) + "\n")


# -- summary tables --------------------------------------------------------


def _row_name(r: SummaryRow) -> str:
    extras = []
    if r.variant in ("entropy-full", "entropy-soft", "kl-full", "kl-soft") and r.k != 2.5:
        extras.append(f"k={r.k:g}")
    if r.variant.endswith("-soft") and r.lam != 0.5:
        extras.append(f"lambda={r.lam:g}")
    if r.variant == "rdumb" and r.interval != 1000:
        extras.append(f"T={r.interval}")
    return r.label + (f" ({', '.join(extras)})" if extras else "")


def summarize(paths):
    """Aggregate result files into a variant-by-speed table.

    Returns ``(speeds, table)`` where ``table`` is a list of
    ``(name, {speed: accuracy}, avg)``.  ``avg`` is the mean over the speed
    cells present for that row.
    """
    if not paths:
        raise InvalidInputError("summarize needs at least one result file")
    rows = []
    for p in paths:
        rows.extend(read_results(p))
    rows.sort(key=lambda r: r.key)
    speeds = sorted({r.speed for r in rows})
    table = {}
    order = []
    for r in rows:
        name = _row_name(r)
        if name not in table:
            table[name] = {}
            order.append(name)
        table[name][r.speed] = r.mean_accuracy
    out = [(name, table[name], float(np.mean(list(table[name].values())))) for name in order]
    return speeds, out


def format_table(speeds, table) -> str:
    head = ["Model"] + [str(s) for s in speeds] + ["Avg"]
    body = []
    for name, cells, avg in table:
        body.append([name] + [f"{100 * cells[s]:.2f}" if s in cells else "-" for s in speeds] + [f"{100 * avg:.2f}"])
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    fmt_row = lambda r: "  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r))
    lines = [fmt_row(head), "  ".join("-" * w for w in widths)] + [fmt_row(r) for r in body]
    return "\n".join(lines) + "\n"


def write_summary(path, speeds, table):
    lines = ["\t".join(["model"] + [str(s) for s in speeds] + ["avg"])]
    for name, cells, avg in table:
        lines.append("\t".join([name] + [fmt(cells[s]) if s in cells else "" for s in speeds] + [fmt(avg)]))
    Path(path).write_text("\n".join(lines) + "\n")
