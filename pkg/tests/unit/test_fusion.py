# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Unit tests for TTA fusion, gamma aggregation and the gamma search."""

import numpy as np
import pytest

from tests.helpers import one_hot, random_soft
from segfuse.errors import ClassCountMismatch, EmptyDataset, EmptyList, ShapeMismatch, ValidationError
from segfuse.fusion import (
    TTA_PRESETS,
    AggregationSpec,
    TtaSpec,
    aggregate,
    fuse_tta,
    gamma_grid,
    gamma_search,
    gamma_search_frames,
    normalize,
    score_threshold_report,
)
from segfuse.metrics import frame_confusion, merge_all, miou
from segfuse.tensors import LabelMap, SoftPrediction, argmax_labels


def soft(values) -> SoftPrediction:
    """K x 1 x N prediction from a list of per-pixel probability vectors."""
    arr = np.asarray(values, dtype=np.float32).T[:, None, :]
    return SoftPrediction(arr)


class TestTtaSpec:
    def test_defaults_and_transforms(self):
        spec = TtaSpec()
        assert spec.scales == (0.5, 1.0, 1.5)
        assert spec.transforms() == [(0.5, False), (0.5, True), (1.0, False), (1.0, True),
                                     (1.5, False), (1.5, True)]
        assert TtaSpec((1.0,), flip=False).transforms() == [(1.0, False)]

    def test_presets(self):
        assert TtaSpec.preset("swin") is TTA_PRESETS["swin"]
        assert TtaSpec.preset("volo").scales == (1.0,)
        with pytest.raises(ValidationError):
            TtaSpec.preset("resnet")

    def test_invalid_scales(self):
        with pytest.raises(ValidationError):
            TtaSpec(())
        with pytest.raises(ValidationError):
            TtaSpec((1.0, 0.0))


class TestFuseTta:
    def test_single_input_is_identity_after_renormalization(self, rng):
        p = SoftPrediction(random_soft(rng, 4, 6, 7))
        fused = fuse_tta([(p, 1.0, False)], 6, 7)
        assert np.array_equal(fused.data, normalize(p).data)

    def test_flip_cancels(self, rng):
        p = SoftPrediction(random_soft(rng, 3, 5, 8))
        flipped = SoftPrediction(p.data[:, :, ::-1])
        fused = fuse_tta([(p, 1.0, False), (flipped, 1.0, True)], 5, 8)
        assert np.array_equal(fused.data, normalize(p).data)

    def test_order_does_not_matter(self, rng):
        preds = [
            (SoftPrediction(random_soft(rng, 3, 4, 6)), 0.5, False),
            (SoftPrediction(random_soft(rng, 3, 8, 12)), 1.0, True),
            (SoftPrediction(random_soft(rng, 3, 12, 18)), 1.5, False),
            (SoftPrediction(random_soft(rng, 3, 8, 12)), 1.0, False),
        ]
        first = fuse_tta(preds, 8, 12)
        for order in ([3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]):
            again = fuse_tta([preds[i] for i in order], 8, 12)
            assert again.data.tobytes() == first.data.tobytes()

    def test_constant_maps_survive_rescaling(self):
        values = np.array([0.2, 0.5, 0.3], dtype=np.float32)
        preds = []
        for scale, (h, w) in zip((0.5, 1.0, 1.5), ((5, 8), (10, 16), (15, 24))):
            data = np.broadcast_to(values[:, None, None], (3, h, w))
            preds.append((SoftPrediction(data), scale, False))
            preds.append((SoftPrediction(data), scale, True))
        fused = fuse_tta(preds, 10, 16)
        assert fused.shape == (3, 10, 16)
        assert np.allclose(fused.data, values[:, None, None], atol=1e-6)

    def test_output_is_normalized(self, rng):
        preds = [(SoftPrediction(random_soft(rng, 5, 7, 9)), 0.5, False),
                 (SoftPrediction(random_soft(rng, 5, 20, 27)), 1.5, True)]
        fused = fuse_tta(preds, 14, 18)
        assert np.allclose(fused.data.sum(axis=0), 1.0, atol=1e-5)

    def test_errors(self, rng):
        with pytest.raises(EmptyList):
            fuse_tta([], 4, 4)
        a = SoftPrediction(random_soft(rng, 2, 4, 4))
        b = SoftPrediction(random_soft(rng, 3, 4, 4))
        with pytest.raises(ClassCountMismatch):
            fuse_tta([(a, 1.0, False), (b, 1.0, False)], 4, 4)

    def test_normalize_zero_pixels_become_uniform(self):
        p = SoftPrediction(np.zeros((4, 1, 1), dtype=np.float32), normalized=False)
        assert normalize(p).data[:, 0, 0].tolist() == [0.25] * 4


class TestAggregate:
    def test_gamma_endpoints_return_inputs(self, rng):
        ps = SoftPrediction(random_soft(rng, 3, 4, 5))
        pv = SoftPrediction(random_soft(rng, 3, 4, 5))
        assert aggregate(ps, pv, AggregationSpec(1.0)).data.tobytes() == ps.data.tobytes()
        assert aggregate(ps, pv, AggregationSpec(0.0)).data.tobytes() == pv.data.tobytes()

    def test_half_example(self):
        out = aggregate(soft([[0.6, 0.4]]), soft([[0.2, 0.8]]), AggregationSpec(0.5))
        assert out.data[:, 0, 0].tolist() == np.array([0.4, 0.6], dtype=np.float32).tolist()

    def test_same_input_is_fixed_point(self, rng):
        p = SoftPrediction(random_soft(rng, 4, 3, 3))
        for gamma in (0.0, 0.13, 0.56, 0.99):
            assert aggregate(p, p, AggregationSpec(gamma)).data.tobytes() == p.data.tobytes()

    def test_shared_argmax_dominates(self, rng):
        ps = random_soft(rng, 4, 25, 40)
        pv = random_soft(rng, 4, 25, 40)
        shared = np.argmax(ps, axis=0) == np.argmax(pv, axis=0)
        winner = np.argmax(ps, axis=0)
        for gamma in np.linspace(0.0, 1.0, 11):
            out = aggregate(SoftPrediction(ps), SoftPrediction(pv), AggregationSpec(float(gamma))).data
            picked = np.take_along_axis(out, winner[None], axis=0)[0]
            assert np.all(picked[shared] >= out.max(axis=0)[shared])

    def test_output_stays_normalized(self, rng):
        ps = SoftPrediction(random_soft(rng, 6, 5, 5))
        pv = SoftPrediction(random_soft(rng, 6, 5, 5))
        out = aggregate(ps, pv, AggregationSpec(0.37))
        assert out.normalized
        assert np.allclose(out.data.sum(axis=0), 1.0, atol=1e-5)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatch):
            aggregate(SoftPrediction(random_soft(rng, 2, 3, 3)), SoftPrediction(random_soft(rng, 2, 3, 4)),
                      AggregationSpec(0.5))

    def test_gamma_range(self):
        with pytest.raises(ValidationError):
            AggregationSpec(1.01)
        with pytest.raises(ValidationError):
            AggregationSpec(float("nan"))


class TestScoreThreshold:
    def test_one_hot_gives_ones(self):
        lbl = np.array([[0, 2], [1, 1]])
        report = score_threshold_report(SoftPrediction(one_hot(lbl, 3)))
        assert report.tolist() == [[1.0, 1.0], [1.0, 1.0]]

    def test_uniform_gives_reciprocal(self):
        report = score_threshold_report(SoftPrediction(np.full((4, 2, 3), 0.25, dtype=np.float32)))
        assert np.all(report == np.float32(0.25))

    def test_matches_pixel_scan(self, rng):
        data = random_soft(rng, 3, 4, 5)
        report = score_threshold_report(SoftPrediction(data))
        for r in range(4):
            for c in range(5):
                assert report[r, c] == max(data[:, r, c])


class TestGammaSearch:
    def test_grid(self):
        grid = gamma_grid(0.01)
        assert len(grid) == 101
        assert grid[0] == 0.0 and grid[-1] == 1.0
        assert grid[56] == 0.56
        assert gamma_grid(0.3) == [0.0, 0.3, 0.6, 0.9, 1.0]
        assert gamma_grid(0.5) == [0.0, 0.5, 1.0]
        with pytest.raises(ValidationError):
            gamma_grid(0.0)
        with pytest.raises(ValidationError):
            gamma_grid(0.6)

    def test_finds_designed_optimum(self):
        # gt 0 pixel is right only for gamma >= 0.555, gt 1 pixel only for gamma < 0.565
        ps = soft([[0.9009, 0.0991], [0.88496, 0.11504]])
        pv = soft([[0.0, 1.0], [0.0, 1.0]])
        gt = LabelMap(np.array([[0, 1]], dtype=np.uint8))
        result = gamma_search([ps], [pv], [gt], 0.01)
        assert result.gamma == 0.56
        assert result.miou == 1.0
        assert len(result.curve) == 101
        assert dict(result.curve)[0.55] < 1.0
        assert dict(result.curve)[0.57] < 1.0

    def test_adversarial_pair_switches_after_half(self):
        ps = soft([[1.0, 0.0], [0.0, 1.0]])
        pv = soft([[0.0, 1.0], [1.0, 0.0]])
        gt = LabelMap(np.array([[0, 1]], dtype=np.uint8))
        result = gamma_search([ps], [pv], [gt], 0.01)
        assert result.gamma == 0.51
        values = [v for g, v in result.curve if g <= 0.51]
        assert values == sorted(values)

    def test_identical_models_tie_to_zero(self, rng):
        p = SoftPrediction(random_soft(rng, 3, 4, 4))
        gt = LabelMap(rng.integers(0, 3, size=(4, 4)))
        result = gamma_search([p], [p], [gt], 0.1)
        assert result.gamma == 0.0
        assert len({v for _, v in result.curve}) == 1

    def test_matches_exhaustive_search(self, rng):
        frames = []
        for _ in range(4):
            gt = LabelMap(rng.integers(0, 3, size=(6, 6)))
            noisy_s = 0.6 * one_hot(gt.data, 3) + 0.4 * random_soft(rng, 3, 6, 6)
            frames.append((SoftPrediction(noisy_s), SoftPrediction(random_soft(rng, 3, 6, 6)), gt))
        ps_set, pv_set, gts = zip(*frames)
        result = gamma_search(list(ps_set), list(pv_set), list(gts), 0.05)

        best_gamma, best = None, -1.0
        for gamma in gamma_grid(0.05):
            cms = (frame_confusion(g, argmax_labels(aggregate(s, v, AggregationSpec(gamma))), 3)
                   for s, v, g in frames)
            value = miou(merge_all(cms, 3)).mean_iou
            assert dict(result.curve)[gamma] == value
            if value > best:
                best_gamma, best = gamma, value
        assert (result.gamma, result.miou) == (best_gamma, best)
        assert result.miou >= dict(result.curve)[0.0]
        assert result.miou >= dict(result.curve)[1.0]

    def test_thread_count_does_not_change_result(self, rng):
        frames = [(SoftPrediction(random_soft(rng, 2, 5, 5)), SoftPrediction(random_soft(rng, 2, 5, 5)),
                   LabelMap(rng.integers(0, 2, size=(5, 5)))) for _ in range(9)]
        args = [list(x) for x in zip(*frames)]
        results = [gamma_search(*args, grid_step=0.02, threads=n) for n in (1, 2, 8)]
        assert results[0] == results[1] == results[2]

    def test_progress_callback(self, rng):
        p = SoftPrediction(random_soft(rng, 2, 2, 2))
        gt = LabelMap(np.zeros((2, 2)))
        seen = []
        gamma_search_frames([lambda: (p, p, gt)] * 3, 0.5, threads=2, on_done=lambda i, n: seen.append((i, n)))
        assert sorted(seen) == [(1, 3), (2, 3), (3, 3)]

    def test_errors(self, rng):
        with pytest.raises(EmptyDataset):
            gamma_search([], [], [], 0.01)
        p = SoftPrediction(random_soft(rng, 2, 2, 2))
        with pytest.raises(ValidationError):
            gamma_search([p], [p, p], [LabelMap(np.zeros((2, 2)))], 0.01)
