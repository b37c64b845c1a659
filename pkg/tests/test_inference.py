import numpy as np
import pytest
import torch

from mpoxscreen.dataset import ArrayStore, ClassLabel
from mpoxscreen.folds import make_folds
from mpoxscreen.inference import label_from_probabilities, predict, predict_pixels
from mpoxscreen.networks import build_classifier
from mpoxscreen.synthetic import constant_image, make_redgreen_manifest
from mpoxscreen.training import instantiate, train

from conftest import oracle_config, original, random_pixels


@pytest.fixture(scope="module")
def redgreen_model():
    manifest = make_redgreen_manifest(6, 2)
    plan = make_folds(manifest, seed=3)
    config = oracle_config(seed=11, max_epochs=5)
    return train(build_classifier(config), plan.folds[0], manifest, ArrayStore(), config)


def test_tie_breaks_toward_monkeypox():
    assert label_from_probabilities(np.array([0.5, 0.5])) == ClassLabel.MONKEYPOX
    assert label_from_probabilities(np.array([0.4, 0.6])) == ClassLabel.OTHERS
    assert label_from_probabilities(np.array([0.6, 0.4])) == ClassLabel.MONKEYPOX


def test_single_vs_batched_probabilities_agree(redgreen_model):
    images = [original(f"x{i}", "p", ClassLabel.MONKEYPOX, random_pixels(i)) for i in range(16)]
    batched = predict(redgreen_model, images)
    alone = predict(redgreen_model, images[3:4])
    assert np.allclose(
        batched.predictions[3].probabilities, alone.predictions[0].probabilities, atol=1e-5
    )


def test_probabilities_sum_to_one_and_order_preserved(redgreen_model):
    images = [original(f"x{i}", "p", ClassLabel.MONKEYPOX, random_pixels(i)) for i in range(5)]
    batch = predict(redgreen_model, images)
    assert [p.image_id for p in batch.predictions] == [f"x{i}" for i in range(5)]
    for p in batch.predictions:
        assert abs(p.probabilities.sum() - 1.0) < 1e-6
        assert p.predicted_label == label_from_probabilities(p.probabilities)


def test_pure_red_probe_is_confident_monkeypox(redgreen_model):
    probe = original("probe", "p", ClassLabel.MONKEYPOX, constant_image((255, 0, 0)))
    batch = predict(redgreen_model, [probe])
    assert batch.predictions[0].predicted_label == ClassLabel.MONKEYPOX
    assert batch.predictions[0].probabilities[0] > 0.9
    green = predict_pixels(instantiate(redgreen_model), constant_image((0, 255, 0)))
    assert green[1] > 0.9


def test_wrong_dimensions_rejected_by_image_id(redgreen_model):
    bad = original("tiny_one", "p", ClassLabel.MONKEYPOX)
    bad.pixels = None
    store = ArrayStore()
    store._data["tiny_one"] = np.zeros((100, 100, 3), dtype=np.uint8)
    with pytest.raises(ValueError, match="tiny_one"):
        predict(redgreen_model, [bad], store=store)


def test_inference_is_dropout_free(redgreen_model):
    images = [original("x", "p", ClassLabel.MONKEYPOX, random_pixels(0))]
    a = predict(redgreen_model, images).predictions[0].probabilities
    b = predict(redgreen_model, images).predictions[0].probabilities
    assert np.array_equal(a, b)
