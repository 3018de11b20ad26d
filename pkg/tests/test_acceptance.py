"""Acceptance criteria 1-11, one test each.

Every test records a one-line verdict that is printed in the terminal
summary.  The experiment grid behind criteria 7-9 runs once per session
(about 30 minutes on one core at the default 10^5 steps); set
DRIFTRESET_ACCEPTANCE_STEPS to shorten it while iterating.
"""

import math
import os
import time
from dataclasses import replace
from decimal import Decimal, getcontext

import numpy as np
import pytest

from driftreset.adaptmodel import (
    AdaptiveModel,
    OptimizerState,
    entropy_loss_and_grad,
    load_checkpoint,
    restore_full,
    restore_soft,
    save_checkpoint,
    sgd_step,
)
from driftreset.controller import Controller, PolicyVariant, ResetEvent, run_stream, window_accuracy
from driftreset.detector import DriftDetector, DriftSignal
from driftreset.distmath import entropy, kl_divergence, softmax
from driftreset.harness import ExperimentConfig, pretrained_model, run_experiment, run_seed, sweep
from driftreset.streamsim import CorruptionKind, StreamConfig, StreamSimulator, apply_corruption, philox
from driftreset.streamstats import EmaTracker

STEPS = int(os.environ.get("DRIFTRESET_ACCEPTANCE_STEPS", 100_000))
SPEEDS = (1000, 2000, 5000)
SEEDS = (0, 1, 2)
TABLE_VARIANTS = ("frozen", "noreset", "rdumb", "entropy-full", "entropy-soft", "kl-full", "kl-soft")
ADAPTIVE = TABLE_VARIANTS[1:]
ABLATION_SPEED = 1000

# closed form of KL((0.75, 0.25) || (0.5, 0.5)), evaluated independently
KL_75_25_VS_HALF = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)


class Grid:
    """Lazily computed mean accuracies and traces, shared by criteria 7-9."""

    def __init__(self):
        self.base = ExperimentConfig(steps=STEPS)
        self.cache = {}

    def traces(self, variant, speed, k=None, lam=None):
        key = (variant, speed, k, lam)
        if key not in self.cache:
            cfg = replace(self.base, variant=variant, stream=replace(self.base.stream, speed=speed))
            if k is not None:
                cfg = replace(cfg, k=k)
            if lam is not None:
                cfg = replace(cfg, lam=lam)
            self.cache[key] = [run_seed(cfg, s) for s in SEEDS]
        return self.cache[key]

    def mean(self, variant, speed, **kw):
        return float(np.mean([t.summary["mean_accuracy"] for t in self.traces(variant, speed, **kw)]))

    def speed_avg(self, variant):
        return float(np.mean([self.mean(variant, s) for s in SPEEDS]))


@pytest.fixture(scope="session")
def grid():
    return Grid()


def test_c1_closed_form_math(verdict):
    t = time.perf_counter()
    e_err = abs(entropy(np.full(4, 0.25)) - math.log(4))
    kl = kl_divergence([0.75, 0.25], [0.5, 0.5])
    kl_err = abs(kl - KL_75_25_VS_HALF)
    rng = np.random.default_rng(1)
    z = rng.normal(scale=5.0, size=(10_000, 8))
    c = rng.normal(scale=50.0, size=(10_000, 1))
    shift_err = float(np.abs(softmax(z + c) - softmax(z)).max())
    dt = time.perf_counter() - t
    ok = e_err < 1e-9 and kl_err < 1e-9 and shift_err < 1e-12 and dt < 1.0
    verdict(1, "closed-form math", ok,
            f"|H-ln4|={e_err:.1e} KL={kl:.10f} (|err|={kl_err:.1e}) shift={shift_err:.1e} in {dt:.2f}s")
    assert ok


def test_c2_ema_oracle(verdict):
    t = time.perf_counter()
    rng = np.random.default_rng(2)
    xs = np.cumsum(rng.normal(size=100_000)) * 0.01 + rng.normal(size=100_000)
    tracker = EmaTracker(alpha=0.01)
    for x in xs:
        tracker.update(x)
    getcontext().prec = 50
    a, one = Decimal(0.01), Decimal(1)
    mean = var = Decimal(0)
    for x in xs:
        d = Decimal(float(x)) - mean
        mean += a * d
        var = (one - a) * (var + a * d * d)
    rel_m = abs(tracker.mean - float(mean)) / abs(float(mean))
    rel_v = abs(tracker.variance - float(var)) / abs(float(var))
    dt = time.perf_counter() - t
    ok = rel_m < 1e-10 and rel_v < 1e-10 and dt < 5.0
    verdict(2, "EMA oracle equivalence", ok, f"rel err mean={rel_m:.1e} var={rel_v:.1e} in {dt:.2f}s")
    assert ok


def test_c3_gradient_check(verdict):
    t = time.perf_counter()
    worst = 0.0
    h = 1e-5
    for seed in range(100):
        rng = np.random.default_rng(300 + seed)
        model = AdaptiveModel(rng.normal(size=(5, 8)), rng.normal(size=5),
                              gamma=rng.uniform(0.5, 1.5, 8), beta=rng.normal(scale=0.3, size=8))
        x = rng.normal(size=(16, 8))
        _, gg, gb = entropy_loss_and_grad(model, x)
        analytic = np.concatenate([gg, gb])
        numeric = np.empty(16)
        for j in range(16):
            p = model.gamma if j < 8 else model.beta
            i = j % 8
            orig = p[i]
            p[i] = orig + h
            up = entropy_loss_and_grad(model, x)[0]
            p[i] = orig - h
            dn = entropy_loss_and_grad(model, x)[0]
            p[i] = orig
            numeric[j] = (up - dn) / (2 * h)
        worst = max(worst, np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric))
    dt = time.perf_counter() - t
    ok = worst < 1e-5 and dt < 10.0
    verdict(3, "gradient check", ok, f"worst relative error {worst:.1e} over 100 instances in {dt:.2f}s")
    assert ok


def test_c4_reset_algebra(verdict):
    rng = np.random.default_rng(4)
    model = AdaptiveModel(rng.normal(size=(10, 32)), rng.normal(size=10))
    opt = OptimizerState(32)
    for _ in range(30):
        _, gg, gb = entropy_loss_and_grad(model, rng.normal(size=(64, 32)))
        sgd_step(model, opt, gg, gb)
    adapted = model.theta
    restore_soft(model, 1.0)
    soft_one = model.theta.tobytes()
    model.gamma[:], model.beta[:] = adapted[:32], adapted[32:]
    restore_full(model, opt)
    full = model.theta.tobytes()
    model.gamma[:], model.beta[:] = adapted[:32], adapted[32:]
    restore_soft(model, 0.0)
    noop = model.theta.tobytes() == adapted.tobytes()
    errs = []
    for lam in (0.3, 0.5, 0.7):
        model.gamma[:], model.beta[:] = adapted[:32], adapted[32:]
        before = np.linalg.norm(model.theta - model.theta0)
        restore_soft(model, lam)
        errs.append(abs(np.linalg.norm(model.theta - model.theta0) - (1 - lam) * before))
    ok = soft_one == full and noop and max(errs) < 1e-12
    verdict(4, "reset algebra", ok,
            f"soft(1)==full bit-exact: {soft_one == full}; soft(0) no-op: {noop}; contraction err {max(errs):.1e}")
    assert ok


def test_c5_rdumb_schedule(verdict):
    stream = StreamConfig()
    ctrl = Controller(pretrained_model(stream), PolicyVariant("rdumb", interval=1000))
    trace = run_stream(ctrl, StreamSimulator(stream), 10_000)
    steps = (np.flatnonzero(trace.reset_event == ResetEvent.FULL) + 1).tolist()
    ok = steps == list(range(1000, 10_001, 1000)) and ctrl.resets == 10
    verdict(5, "RDumb special case", ok, f"full resets at {steps}")
    assert ok


def detection_trial(seed, model, warmup_batches=None):
    """Clean stationary stream, then an abrupt switch to Gaussian noise at severity 3."""
    det = DriftDetector(DriftSignal.ENTROPY, model.n_classes)
    pre = det.config.warmup + 500
    sim = StreamSimulator(StreamConfig(severity_max=0.0, seed=6000 + seed))
    false_fires, latency = 0, None
    for t in range(pre + 50):
        x = sim.next_batch().features
        if t >= pre:
            x = apply_corruption(x, CorruptionKind.GAUSSIAN_NOISE, 3.0, philox(6000 + seed, 7, t))
        if det.observe(model.predict_proba(x)).fired:
            if t < pre:
                false_fires += t >= det.config.warmup
            elif latency is None:
                latency = t - pre
    return false_fires, latency


def test_c6_detection_latency(verdict):
    t = time.perf_counter()
    model = pretrained_model(StreamConfig())
    trials = [detection_trial(s, model) for s in range(20)]
    detected = sum(lat is not None for _, lat in trials)
    clean = sum(fa == 0 for fa, _ in trials)
    dt = time.perf_counter() - t
    ok = detected >= 18 and clean >= 16 and dt < 60.0
    verdict(6, "detection latency", ok,
            f"fired within 50 batches in {detected}/20 (need 18), no false firing in {clean}/20 (need 16); "
            f"false firings per trial {[fa for fa, _ in trials]}; {dt:.1f}s")
    assert ok


@pytest.mark.slow
def test_c7_variant_trend(verdict, grid):
    avg = {v: grid.speed_avg(v) for v in TABLE_VARIANTS}
    frozen, rdumb = avg["frozen"], avg["rdumb"]
    gap_a = {v: 100 * (avg[v] - rdumb) for v in ("entropy-full", "kl-full")}
    gap_b = {v: 100 * (avg[v] - frozen) for v in ADAPTIVE}
    ok_a = all(g >= 1.0 for g in gap_a.values())
    ok_b = all(g >= 5.0 for g in gap_b.values())
    table = " ".join(f"{v}={100 * a:.2f}" for v, a in avg.items())
    verdict(7, "variant trend", ok_a and ok_b,
            f"(a) {'ok' if ok_a else 'FAIL'} vs RDumb " + " ".join(f"{v}:{g:+.2f}" for v, g in gap_a.items())
            + f"; (b) {'ok' if ok_b else 'FAIL'} vs frozen " + " ".join(f"{v}:{g:+.2f}" for v, g in gap_b.items())
            + f"; speed-avg % {table}")
    assert ok_a and ok_b


def collapsed(trace):
    w = window_accuracy(trace.accuracy)
    return bool(w.min() < 0.5 * w.max())


@pytest.mark.slow
def test_c8_collapse(verdict, grid):
    noreset = [collapsed(t) for t in grid.traces("noreset", ABLATION_SPEED)]
    entfull = [collapsed(t) for t in grid.traces("entropy-full", ABLATION_SPEED)]
    ok = sum(noreset) >= 2 and not any(entfull)
    ratio = lambda t: window_accuracy(t.accuracy).min() / window_accuracy(t.accuracy).max()
    verdict(8, "collapse demonstration", ok,
            f"speed {ABLATION_SPEED}: NoReset collapsed on {sum(noreset)}/3 seeds, EntropyFull on {sum(entfull)}/3; "
            f"min/best window NoReset {[round(float(ratio(t)), 3) for t in grid.traces('noreset', ABLATION_SPEED)]} "
            f"EntropyFull {[round(float(ratio(t)), 3) for t in grid.traces('entropy-full', ABLATION_SPEED)]}")
    assert ok


@pytest.mark.slow
def test_c9_ablation_shape(verdict, grid):
    k_acc = [100 * grid.mean("entropy-full", ABLATION_SPEED, k=k if k != 2.5 else None) for k in (2.0, 2.5, 3.0)]
    l_acc = [100 * grid.mean("entropy-soft", ABLATION_SPEED, lam=l if l != 0.5 else None) for l in (0.3, 0.5, 0.7)]
    ok_k = k_acc[1] >= max(k_acc[0], k_acc[2]) - 0.5
    ok_l = l_acc[1] >= max(l_acc[0], l_acc[2]) - 0.5
    verdict(9, "ablation shape", ok_k and ok_l,
            f"EntropyFull k 2.0/2.5/3.0 = {'/'.join(f'{a:.2f}' for a in k_acc)} ({'ok' if ok_k else 'FAIL'}); "
            f"EntropySoft lambda 0.3/0.5/0.7 = {'/'.join(f'{a:.2f}' for a in l_acc)} ({'ok' if ok_l else 'FAIL'})")
    assert ok_k and ok_l


def test_c10_determinism_and_persistence(verdict, tmp_path):
    def outputs(out):
        cfg = ExperimentConfig(variant="kl-soft", steps=2000, decimate=100, out=str(out))
        paths, _ = run_experiment(cfg)
        sweep(replace(cfg, variant="entropy-full"), {"k": [2.0, 3.0]})
        files = sorted(p for p in out.rglob("*") if p.is_file())
        return {p.relative_to(out): p.read_bytes() for p in files}

    a, b = outputs(tmp_path / "a"), outputs(tmp_path / "b")
    same_files = a == b
    model = pretrained_model(StreamConfig())
    rng = np.random.default_rng(10)
    opt = OptimizerState(model.dim, velocity_gamma=rng.normal(size=model.dim), velocity_beta=rng.normal(size=model.dim))
    save_checkpoint(tmp_path / "m.ckpt", model, opt)
    m2, o2 = load_checkpoint(tmp_path / "m.ckpt")
    exact = all(x.tobytes() == y.tobytes() for x, y in [
        (model.gamma0, m2.gamma0), (model.beta0, m2.beta0), (model.weight, m2.weight), (model.bias, m2.bias),
        (opt.velocity_gamma0, o2.velocity_gamma0), (opt.velocity_beta0, o2.velocity_beta0)])
    ok = same_files and exact and len(a) >= 6
    verdict(10, "determinism and persistence", ok,
            f"{len(a)} output files byte-identical on rerun: {same_files}; checkpoint bit-exact: {exact}")
    assert ok


def test_c11_throughput(verdict):
    stream = StreamConfig(dim=32, n_classes=10, batch_size=64)
    ctrl = Controller(pretrained_model(stream), "entropy-full")
    sim = StreamSimulator(stream)
    n = 5000
    t = time.perf_counter()
    run_stream(ctrl, sim, n)
    rate = n * stream.batch_size / (time.perf_counter() - t)
    ok = rate >= 5000
    verdict(11, "throughput", ok, f"{rate:,.0f} samples/s end-to-end (need 5,000); "
            f"a 10^6-sample stream takes {1e6 / rate:.1f} s")
    assert ok
