import numpy as np
import pytest

from driftreset.controller import (
    VARIANTS,
    AdaptConfig,
    Controller,
    PolicyVariant,
    ResetEvent,
    Trace,
    canonical_variant,
    controller_step,
    run_stream,
    summarize_trace,
    window_accuracy,
)
from driftreset.detector import DriftConfig
from driftreset.errors import InvalidInputError
from driftreset.harness import pretrained_model
from driftreset.streamsim import StreamConfig, StreamSimulator

STREAM = StreamConfig(speed=200, seed=1)


def controller(variant, **kw):
    return Controller(pretrained_model(STREAM), variant, **kw)


def drive(ctrl, n, cfg=STREAM):
    sim = StreamSimulator(cfg)
    return [ctrl.step(sim.next_batch().features) for _ in range(n)]


class TestVariants:
    @pytest.mark.parametrize("alias,name", [("EntropyFull", "entropy-full"), ("KL_Soft", "kl-soft"),
                                            ("Baseline", "frozen"), ("RDumbFixed", "rdumb"),
                                            ("NoResetAdapter", "noreset")])
    def test_aliases(self, alias, name):
        assert canonical_variant(alias) == name

    def test_unknown(self):
        with pytest.raises(InvalidInputError):
            PolicyVariant("tent")

    @pytest.mark.parametrize("kwargs", [dict(interval=0), dict(lam=1.5), dict(lam=-0.1)])
    def test_rejects(self, kwargs):
        with pytest.raises(InvalidInputError):
            PolicyVariant("rdumb", **kwargs)

    def test_labels(self):
        assert [PolicyVariant(n).label for n in VARIANTS] == [
            "Baseline", "NoReset", "RDumb", "EntropyFull", "EntropySoft", "KLFull", "KLSoft"]


class TestStep:
    def test_frozen_never_changes(self):
        ctrl = controller("frozen")
        theta0 = ctrl.model.theta0
        reports = drive(ctrl, 10_000)
        assert ctrl.model.theta.tobytes() == theta0.tobytes()
        assert all(r.reset_event == ResetEvent.NONE and r.drift_score == 0.0 for r in reports)

    def test_rdumb_reset_schedule(self):
        ctrl = controller(PolicyVariant("rdumb", interval=1000))
        events = [r.reset_event for r in drive(ctrl, 10_000)]
        steps = [i + 1 for i, e in enumerate(events) if e != ResetEvent.NONE]
        assert steps == list(range(1000, 10_001, 1000))
        assert all(events[s - 1] == ResetEvent.FULL for s in steps)

    @pytest.mark.parametrize("n,interval", [(999, 1000), (1000, 7), (1234, 100)])
    def test_rdumb_reset_count(self, n, interval):
        ctrl = controller(PolicyVariant("rdumb", interval=interval))
        drive(ctrl, n)
        assert ctrl.resets == n // interval

    def test_forced_drift_restores_snapshot(self):
        ctrl = controller("entropy-full")
        drive(ctrl, 300)
        assert ctrl.updates > 0 and not np.array_equal(ctrl.model.theta, ctrl.model.theta0)
        ctrl.force_drift()
        rep = drive(ctrl, 1)[0]
        assert rep.reset_event == ResetEvent.FULL
        assert ctrl.model.theta.tobytes() == ctrl.model.theta0.tobytes()
        assert not ctrl.opt.velocity_gamma.any() and not ctrl.redundancy_ema.any()
        assert ctrl.detector.in_warmup

    def test_post_reset_probe_matches_fresh_model(self):
        probe = StreamSimulator(StreamConfig(seed=99)).batch_at(123).features
        fresh = pretrained_model(STREAM).forward(probe)
        ctrl = controller("kl-full")
        drive(ctrl, 250)
        ctrl.force_drift()
        drive(ctrl, 1)
        assert ctrl.model.forward(probe).tobytes() == fresh.tobytes()

    @pytest.mark.parametrize("lam", [0.3, 0.5, 0.7, 1.0])
    def test_soft_reset_contracts(self, lam):
        ctrl = controller(PolicyVariant("entropy-soft", lam=lam))
        drive(ctrl, 300)
        before = np.linalg.norm(ctrl.model.theta - ctrl.model.theta0)
        assert before > 0
        ctrl.force_drift()
        assert drive(ctrl, 1)[0].reset_event == ResetEvent.SOFT
        after = np.linalg.norm(ctrl.model.theta - ctrl.model.theta0)
        assert after < before

    def test_reset_step_skips_update(self):
        ctrl = controller("entropy-full")
        drive(ctrl, 50)
        updates = ctrl.updates
        ctrl.force_drift()
        drive(ctrl, 1)
        assert ctrl.updates == updates

    def test_noreset_adapts_without_resets(self):
        ctrl = controller("noreset")
        reports = drive(ctrl, 500)
        assert ctrl.updates > 0 and ctrl.resets == 0
        assert all(r.drift_score == 0.0 for r in reports)

    def test_drift_variants_report_scores(self):
        ctrl = controller("kl-full")
        reports = drive(ctrl, 50)
        assert any(r.drift_score > 0 for r in reports)

    def test_detector_config_passed(self):
        ctrl = controller("entropy-full", drift=DriftConfig(k=3.0, warmup=7))
        assert ctrl.detector.config.k == 3.0 and ctrl.detector.tracker.warmup == 7

    def test_learning_rate_passed(self):
        ctrl = controller("noreset", adapt=AdaptConfig(learning_rate=0.2, momentum=0.5))
        assert (ctrl.opt.learning_rate, ctrl.opt.momentum) == (0.2, 0.5)

    def test_rejects_bad_batch(self):
        with pytest.raises(InvalidInputError):
            controller_step(controller("noreset"), np.zeros((1, 32)))

    def test_predictions_match_model(self):
        ctrl = controller("frozen")
        x = StreamSimulator(STREAM).batch_at(0).features
        np.testing.assert_array_equal(ctrl.step(x).predictions, ctrl.model.forward(x).argmax(axis=1))


class TestRunStream:
    def test_single_step(self):
        trace = run_stream(controller("entropy-full"), StreamSimulator(STREAM), 1)
        assert len(trace) == 1 and trace.summary["steps"] == 1

    def test_rejects_zero_steps(self):
        with pytest.raises(InvalidInputError):
            run_stream(controller("frozen"), StreamSimulator(STREAM), 0)

    @pytest.mark.parametrize("variant", ["rdumb", "entropy-soft", "kl-full"])
    def test_deterministic(self, variant):
        a = run_stream(controller(variant), StreamSimulator(STREAM), 600)
        b = run_stream(controller(variant), StreamSimulator(STREAM), 600)
        for field in ("accuracy", "entropy", "drift_score", "reset_event"):
            assert getattr(a, field).tobytes() == getattr(b, field).tobytes()
        assert a.summary == b.summary

    def test_summary(self):
        acc = np.concatenate([np.full(600, 0.9), np.full(500, 0.1), np.full(400, 0.8)])
        t = Trace(acc, np.zeros(1500), np.zeros(1500), np.zeros(1500, dtype=np.int8))
        t.reset_event[[3, 700]] = ResetEvent.FULL
        s = summarize_trace(t, 10)
        assert s["resets"] == 2 and s["collapse"]
        assert s["min_window_accuracy"] == pytest.approx(0.1)
        assert s["max_window_accuracy"] == pytest.approx(0.9)
        assert s["mean_accuracy"] == pytest.approx(acc.mean())

    def test_no_collapse_at_threshold(self):
        t = Trace(np.full(800, 0.16), np.zeros(800), np.zeros(800), np.zeros(800, dtype=np.int8))
        assert not summarize_trace(t, 10)["collapse"]

    def test_window_accuracy(self):
        np.testing.assert_allclose(window_accuracy([1, 0, 1, 1], window=2), [0.5, 0.5, 1.0])
        np.testing.assert_allclose(window_accuracy([1, 0, 1]), [2 / 3])
