import hypothesis
import numpy as np
import pytest

from digit_coach.data import Dataset

hypothesis.settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("default")

ARTIFACTS_HINT = (
    "training artifacts are missing; run `python scripts/run_acceptance.py` "
    "(about 10 CPU-hours) to produce them"
)


@pytest.fixture(scope="session")
def mnist():
    from digit_coach.data import load_mnist

    try:
        return load_mnist("data/mnist")
    except FileNotFoundError as e:
        pytest.skip(f"MNIST files not available: {e}")


@pytest.fixture()
def tiny_dataset():
    """16 deterministic pseudo-digits, enough to drive training loops."""
    rng = np.random.default_rng(123)
    images = (rng.random((16, 784)) < 0.13).astype(np.float32) * rng.random(
        (16, 784), dtype=np.float32)
    labels = np.arange(16, dtype=np.int64) % 10
    return Dataset(images=images, labels=labels, split="train")
