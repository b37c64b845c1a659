import numpy as np
import pytest

from mpoxscreen.dataset import ArrayStore, ClassLabel, DatasetManifest, LesionImage
from mpoxscreen.networks import tiny_config


def oracle_config(seed: int = 11, **overrides):
    """Config for the color-separable oracle set: a handful of Adam steps
    at a healthy learning rate are enough to fit it."""
    base = dict(learning_rate=1e-2, batch_size=4)
    base.update(overrides)
    return tiny_config(seed=seed, **base)


def original(image_id: str, patient_id: str, label=ClassLabel.MONKEYPOX, pixels=None):
    return LesionImage(image_id=image_id, patient_id=patient_id, label=label, pixels=pixels)


def random_pixels(seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(224, 224, 3), dtype=np.uint8)


@pytest.fixture
def array_store():
    return ArrayStore()


@pytest.fixture
def small_manifest():
    """Two patients per class, one image each, pixels attached."""
    entries = [
        original("m0_0", "m0", ClassLabel.MONKEYPOX, random_pixels(1)),
        original("m1_0", "m1", ClassLabel.MONKEYPOX, random_pixels(2)),
        original("o0_0", "o0", ClassLabel.OTHERS, random_pixels(3)),
        original("o1_0", "o1", ClassLabel.OTHERS, random_pixels(4)),
    ]
    return DatasetManifest(entries=entries)
