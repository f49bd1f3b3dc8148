import json

import numpy as np
import pytest

from conftest import erode, square_mask
from mmms.dataset import load_sample
from mmms.errors import ConfigError, PredictorError
from mmms.masks import BinaryMask, Click, iou, joint_extract, mask_to_json
from mmms.predictors import (
    ClassicalPredictor,
    OraclePredictor,
    PredictRequest,
    predictor_factory,
)
from mmms.predictors.base import Predictor


def make_sample(rgb=None, h=16, w=16, image_id="img0000"):
    from mmms.dataset import Sample
    from mmms.masks import JointMask

    if rgb is None:
        rgb = np.full((h, w, 3), 100, np.uint8)
    labels = np.zeros(rgb.shape[:2], np.uint16)
    labels[2:6, 2:6] = 1
    return Sample(image_id, rgb, {}, JointMask(labels, 1), {})


class TestOracle:
    def test_returns_script_entry_per_call_count(self):
        gt = square_mask(8, 8, 2, 2, 4)
        half = erode(gt)
        oracle = OraclePredictor({"img0000": {1: [half, gt]}})
        oracle.prepare(make_sample(h=8, w=8))
        first = oracle.predict(PredictRequest((Click(3, 3, True),), BinaryMask.zeros(8, 8), 1))
        assert BinaryMask(first.probabilities >= 0.5) == half
        second = oracle.predict(
            PredictRequest((Click(3, 3, True), Click(2, 2, True)), BinaryMask.zeros(8, 8), 1)
        )
        assert BinaryMask(second.probabilities >= 0.5) == gt

    def test_last_entry_repeats(self):
        gt = square_mask(8, 8, 2, 2, 4)
        oracle = OraclePredictor({"img0000": {1: [gt]}})
        oracle.prepare(make_sample(h=8, w=8))
        clicks = tuple(Click(i, 0, True) for i in range(5))
        response = oracle.predict(PredictRequest(clicks, BinaryMask.zeros(8, 8), 1))
        assert BinaryMask(response.probabilities >= 0.5) == gt

    def test_prepare_is_free_and_predict_counts_time(self):
        gt = square_mask(8, 8, 2, 2, 4)
        oracle = OraclePredictor({"img0000": {1: [gt]}})
        oracle.prepare(make_sample(h=8, w=8))
        assert oracle.feature_seconds < 0.05

    def test_missing_surface_errors(self):
        oracle = OraclePredictor({"img0000": {1: [square_mask(8, 8, 2, 2, 4)]}})
        oracle.prepare(make_sample(h=8, w=8))
        with pytest.raises(PredictorError):
            oracle.predict(PredictRequest((Click(0, 0, True),), BinaryMask.zeros(8, 8), 2))

    def test_from_file(self, tmp_path):
        gt = square_mask(8, 8, 2, 2, 4)
        path = tmp_path / "script.json"
        path.write_text(json.dumps({"images": {"img0000": {"1": [mask_to_json(gt)]}}}))
        oracle = OraclePredictor.from_file(path)
        oracle.prepare(make_sample(h=8, w=8))
        response = oracle.predict(PredictRequest((Click(3, 3, True),), BinaryMask.zeros(8, 8), 1))
        assert BinaryMask(response.probabilities >= 0.5) == gt


class TestClassical:
    def test_uniform_image_floods_around_click(self):
        predictor = ClassicalPredictor()
        predictor.prepare(make_sample(h=15, w=15))
        response = predictor.predict(
            PredictRequest((Click(7, 7, True),), BinaryMask.zeros(15, 15))
        )
        mask = response.probabilities >= 0.5
        assert mask[7, 7]
        # uniform costs: geodesic distance is epsilon * Manhattan distance,
        # so the flood is exactly a Manhattan ball of radius tau_bg * max
        rows, cols = np.indices((15, 15))
        manhattan = np.abs(rows - 7) + np.abs(cols - 7)
        radius = predictor.tau_bg * manhattan.max()
        assert np.array_equal(mask, manhattan <= radius)

    def test_two_region_image_splits_at_feature_edge(self):
        rgb = np.zeros((16, 16, 3), np.uint8)
        rgb[:, 8:] = 200
        predictor = ClassicalPredictor()
        predictor.prepare(make_sample(rgb=rgb))
        clicks = (Click(8, 3, True), Click(8, 12, False))
        response = predictor.predict(PredictRequest(clicks, BinaryMask.zeros(16, 16)))
        mask = response.probabilities >= 0.5
        assert mask[:, :8].all()
        assert not mask[:, 8:].any()

    def test_positive_wins_ties(self):
        predictor = ClassicalPredictor()
        predictor.prepare(make_sample(h=9, w=9))
        # symmetric seeds on a uniform image: the midline is equidistant
        clicks = (Click(4, 2, True), Click(4, 6, False))
        response = predictor.predict(PredictRequest(clicks, BinaryMask.zeros(9, 9)))
        assert response.probabilities[4, 4] == 1.0

    def test_requires_positive_click(self):
        predictor = ClassicalPredictor()
        predictor.prepare(make_sample(h=8, w=8))
        with pytest.raises(PredictorError):
            predictor.predict(PredictRequest((Click(1, 1, False),), BinaryMask.zeros(8, 8)))

    def test_click_order_invariant_and_deterministic(self):
        rgb = (np.random.default_rng(3).random((12, 12, 3)) * 255).astype(np.uint8)
        predictor = ClassicalPredictor()
        predictor.prepare(make_sample(rgb=rgb, h=12, w=12))
        clicks = (Click(2, 2, True), Click(9, 9, False), Click(5, 7, True))
        a = predictor.predict(PredictRequest(clicks, BinaryMask.zeros(12, 12)))
        b = predictor.predict(PredictRequest(clicks[::-1], BinaryMask.zeros(12, 12)))
        assert np.array_equal(a.probabilities, b.probabilities)

    def test_segments_synthetic_surface_well(self, tiny_adjacent_dataset):
        sample = load_sample(tiny_adjacent_dataset, tiny_adjacent_dataset.images[0])
        predictor = ClassicalPredictor()
        predictor.prepare(sample)
        gt = joint_extract(sample.gt_joint, 1)
        distances = np.argwhere(gt.data)
        center = tuple(distances.mean(axis=0).astype(int))
        response = predictor.predict(
            PredictRequest((Click(center[0], center[1], True),), BinaryMask.zeros(*gt.shape))
        )
        assert iou(BinaryMask(response.probabilities >= 0.5), gt) > 60.0


class TestBaseContract:
    def test_predict_before_prepare_fails(self):
        predictor = ClassicalPredictor()
        with pytest.raises(PredictorError):
            predictor.predict(PredictRequest((Click(0, 0, True),), BinaryMask.zeros(4, 4)))

    def test_probabilities_validated(self):
        class Broken(Predictor):
            name = "broken"

            def _prepare(self, sample):
                pass

            def _predict(self, request):
                return np.full(request.prev_mask.shape, 1.5, np.float32)

        predictor = Broken()
        predictor.prepare(make_sample(h=4, w=4))
        with pytest.raises(PredictorError):
            predictor.predict(PredictRequest((), BinaryMask.zeros(4, 4)))

    def test_factory_specs(self):
        assert predictor_factory("classical")().name == "classical"
        with pytest.raises(ConfigError):
            predictor_factory("oracle")
        with pytest.raises(ConfigError):
            predictor_factory("nonsense")
