"""Acceptance suite: one test per release criterion, each printing a
pass/fail line via pytest -v. Run with:

    pytest tests/test_acceptance.py -v

Criteria 7 and 8 train real networks and together take ~10 minutes.
"""

import time

import numpy as np
import pytest

from gunwatch import cli
from gunwatch import layers as L
from gunwatch import metrics as M
from gunwatch import network as nn
from gunwatch.architectures import build_mini_backbone, build_paper_cnn
from gunwatch.datasets import (
    DatasetSpec,
    gen_motion_sequence,
    generate_binary_samples,
    generate_samples,
    samples_to_arrays,
)
from gunwatch.detection import FrameRing, PipelineConfig, feed_frame, iou, run_stream
from gunwatch.network import Network, grad_check
from gunwatch.training import TrainConfig, train, transfer_experiment

pytestmark = pytest.mark.acceptance


def run_eval_counts(capsys, tp, fn, tn, fp):
    start = time.monotonic()
    code = cli.main(["eval", "--tp", str(tp), "--fn", str(fn), "--tn", str(tn), "--fp", str(fp)])
    elapsed = time.monotonic() - start
    out = capsys.readouterr().out
    assert code == 0
    return out, elapsed


class TestCriterion01MetricReproduction:
    def test_c01_precision_recall_f1_from_published_counts(self, capsys):
        out, elapsed = run_eval_counts(capsys, 272, 32, 255, 49)
        assert "precision 84.74" in out
        assert "recall    89.47" in out
        assert "f1        87.04" in out
        out2, elapsed2 = run_eval_counts(capsys, 304, 0, 247, 57)
        assert "precision 84.21" in out2
        assert "recall    100.00" in out2
        assert "f1        91.43" in out2
        assert elapsed + elapsed2 < 1.0, f"counts mode took {elapsed + elapsed2:.2f}s"
        # +-0.01 percentage points on the underlying fractions
        cm = M.ConfusionMatrix(272, 32, 255, 49)
        assert abs(100 * M.precision(cm) - 84.74) < 0.01
        assert abs(100 * M.recall(cm) - 89.47) < 0.01
        assert abs(100 * M.f1(cm) - 87.04) < 0.01


class TestCriterion02AccuracyReproduction:
    def test_c02_accuracy_from_published_totals(self, capsys):
        out, elapsed = run_eval_counts(capsys, 527, 81, 0, 0)
        assert "accuracy  86.68" in out
        out2, elapsed2 = run_eval_counts(capsys, 334, 274, 0, 0)
        assert "accuracy  54.93" in out2
        assert elapsed + elapsed2 < 1.0
        assert abs(100 * 527 / 608 - 86.68) < 0.01
        assert abs(100 * 334 / 608 - 54.93) < 0.01


class TestCriterion03GradientVerification:
    TOL = 1e-4
    EPS = 1e-5

    def _kink_free_input(self, shape, seed):
        rng = np.random.default_rng(seed)
        return rng.uniform(0.1, 0.9, shape)

    def test_c03_full_architecture_and_isolated_layers(self):
        start = time.monotonic()
        # full 12-layer architecture at 8x8 input (widths scaled so the
        # O(#params) checker finishes; topology identical to full width)
        net = build_paper_cnn(2, input_size=8, width_scale=0.125, seed=3)
        err = grad_check(net, self._kink_free_input((1, 8, 8), 0), 1, eps=self.EPS)
        assert err < self.TOL, f"full architecture: {err:.3e}"

        isolated = {
            "conv2d": Network(
                [nn.conv2d(2, 3), nn.flatten(), nn.dense(48, 2), nn.softmax_layer()],
                (2, 4, 4),
                seed=1,
            ),
            "relu": Network(
                [nn.flatten(), nn.dense(9, 6), nn.relu(), nn.dense(6, 2), nn.softmax_layer()],
                (1, 3, 3),
                seed=2,
            ),
            "maxpool2x2": Network(
                [nn.maxpool2x2(), nn.flatten(), nn.dense(4, 2), nn.softmax_layer()],
                (1, 4, 4),
                seed=3,
            ),
            "dense": Network(
                [nn.flatten(), nn.dense(8, 3), nn.softmax_layer()], (1, 2, 4), seed=4
            ),
        }
        for kind, small in isolated.items():
            err = grad_check(small, self._kink_free_input(small.input_shape, 42), 1, eps=self.EPS)
            assert err < self.TOL, f"{kind}: {err:.3e}"
        assert time.monotonic() - start < 120


class TestCriterion04KernelOracles:
    def test_c04_conv_and_maxpool_match_naive_loops(self):
        from test_layers import naive_conv2d, naive_maxpool2x2

        start = time.monotonic()
        rng = np.random.default_rng(7)
        for case in range(100):
            c = int(rng.integers(1, 4))
            o = int(rng.integers(1, 5))
            h = int(rng.integers(2, 5)) * 2
            w = int(rng.integers(2, 5)) * 2
            x = rng.standard_normal((c, h, w))
            wts = rng.standard_normal((o, c, 3, 3))
            b = rng.standard_normal(o)
            fast = L.conv2d_forward(x, wts, b)
            assert np.abs(fast - naive_conv2d(x, wts, b)).max() < 1e-12, f"conv case {case}"
            pooled, _ = L.maxpool2x2_forward(x)
            assert np.abs(pooled - naive_maxpool2x2(x)).max() < 1e-12, f"pool case {case}"
        assert time.monotonic() - start < 30


class TestCriterion05ArchitectureShapeAudit:
    def test_c05_intermediate_shapes_match_stated_dimensions(self):
        net = build_paper_cnn(100, in_channels=1)
        shapes = dict(enumerate(net.shapes))
        assert shapes[0] == (32, 32, 32)  # conv1: 32 maps of 32x32
        assert shapes[4] == (32, 16, 16)  # pool1: 32 maps of 16x16
        assert shapes[11] == (64, 8, 8)  # pool2: 64 maps of 8x8
        assert shapes[12] == (4096,)  # flatten
        assert shapes[13] == (1024,) and shapes[15] == (1024,)
        assert net.output_shape == (100,)
        # and the actual forward pass produces those shapes, not just
        # the static inference
        probs, acts, _ = net._forward_collect(np.zeros((1, 1, 32, 32)))
        actual = [a.shape[1:] for a in acts[1:]] + [probs.shape[1:]]
        assert actual == net.shapes


class TestCriterion06MotionGate:
    def test_c06_static_sequence_gate_and_classifier_silent(self, tmp_path):
        start = time.monotonic()
        frames_dir = tmp_path / "static"
        gen_motion_sequence(20, 10, 0, noise_std=0.0, seed=5, out_dir=frames_dir)
        (frames_dir / "truth.csv").unlink()
        net = build_mini_backbone(2, seed=0, width_scale=0.1)
        summary = run_stream(frames_dir, net, PipelineConfig())
        assert summary.frames == 20
        assert summary.gate_passes == 0
        assert summary.classifier_invocations == 0

        seq = gen_motion_sequence(20, 10, 2, noise_std=0.0, seed=5)
        ring = FrameRing(PipelineConfig())
        hits, evaluated = 0, 0
        for frame in seq.frames:
            boxes = feed_frame(ring, frame)
            if boxes is None:
                continue
            evaluated += 1
            truth = seq.boxes[ring.middle_index - 1]
            if boxes and iou(boxes[0], truth) >= 0.5:
                hits += 1
        assert evaluated == 18
        assert hits / evaluated >= 0.9, f"IoU hits only {hits}/{evaluated}"
        assert time.monotonic() - start < 10


class TestCriterion07OverfitSanity:
    def test_c07_paper_cnn_reaches_full_train_accuracy(self):
        start = time.monotonic()
        samples = generate_binary_samples(
            DatasetSpec(10, 16, noise_std=8.0, seed=11), positive_class=3
        )
        X, y = samples_to_arrays(samples)
        assert len(X) == 32
        net = build_paper_cnn(2, seed=0)
        report = train(net, X, y, TrainConfig(epochs=60, lr=0.01, momentum=0.9, batch_size=16, seed=0))
        reached = report.epochs_to_target(1.0, series="train")
        assert reached is not None and reached <= 200, "never reached 100% train accuracy"
        assert time.monotonic() - start < 300


class TestCriterion08TransferProperty:
    def test_c08_transfer_reaches_target_no_later_than_scratch(self):
        start = time.monotonic()
        pre = samples_to_arrays(generate_samples(DatasetSpec(10, 30, noise_std=8.0, seed=100)))
        binset = samples_to_arrays(
            generate_binary_samples(DatasetSpec(10, 100, noise_std=8.0, seed=200), positive_class=4)
        )
        cfg_pre = TrainConfig(epochs=12, lr=0.01, momentum=0.9, batch_size=16)
        cfg_fine = TrainConfig(epochs=40, lr=0.002, momentum=0.0, batch_size=16)
        outcome = transfer_experiment(
            pre, binset, cfg_pre, cfg_fine, seeds=[1, 2, 3, 4, 5], target=0.95
        )
        detail = ", ".join(
            f"seed {r.seed}: {r.transfer.epochs_to_target} vs {r.scratch.epochs_to_target}"
            for r in outcome.runs
        )
        assert outcome.transfer_median <= outcome.scratch_median, detail
        assert outcome.strict_wins >= 3, detail
        assert time.monotonic() - start < 1800


class TestCriterion09Determinism:
    def test_c09_generation_commands_bitwise_reproducible(self, capsys, tmp_path):
        import os

        for sub in ("a", "b"):
            assert cli.main([
                "gen-data", "--out", str(tmp_path / sub), "--classes", "4",
                "--per-class", "6", "--seed", "13",
            ]) == 0
        capsys.readouterr()
        files_a = sorted(
            os.path.relpath(os.path.join(r, f), tmp_path / "a")
            for r, _, fs in os.walk(tmp_path / "a")
            for f in fs
        )
        assert files_a
        for rel in files_a:
            a = (tmp_path / "a" / rel).read_bytes()
            b = (tmp_path / "b" / rel).read_bytes()
            assert a == b, rel

    def test_c09_training_commands_bitwise_reproducible(self, capsys, tmp_path):
        from gunwatch.datasets import gen_binary_dataset

        data = tmp_path / "data"
        gen_binary_dataset(DatasetSpec(10, 8, noise_std=4.0, seed=3), data)
        blobs = []
        for name in ("a.ckpt", "b.ckpt"):
            assert cli.main([
                "train", "--data", str(data), "--out", str(tmp_path / name),
                "--arch", "mini", "--width-scale", "0.1", "--epochs", "3", "--seed", "21",
            ]) == 0
            blobs.append((tmp_path / name).read_bytes())
        capsys.readouterr()
        assert blobs[0] == blobs[1]


class TestCriterion10NonReproducibilityRecord:
    def test_c10_inconsistent_published_cell_documented(self):
        bad = M.KNOWN_DISCREPANCY
        counts = M.BENCHMARK_COUNTS[bad["name"]]
        computed = round(100 * counts[0] / (counts[0] + counts[3]), 2)
        assert computed == 80.56
        assert bad["reported"] == 80.76
        assert abs(bad["reported"] - computed) > 0.015

    def test_c10_readme_records_limits_and_discrepancy(self):
        import pathlib

        readme = pathlib.Path(__file__).resolve().parent.parent / "README.md"
        text = readme.read_text(encoding="utf-8")
        assert "80.56" in text and "80.76" in text
        assert "not reproducible" in text.lower()
