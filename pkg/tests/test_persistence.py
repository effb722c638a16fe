"""Checkpoint container: round-trips, determinism, and corruption handling."""
import numpy as np
import pytest

from digit_coach.models import ClassifierModel, CoachModel, DiscriminatorModel
from digit_coach.persistence import (CheckpointCorruptError, CheckpointFormatError,
                                     CheckpointVersionError, checkpoint_checksum,
                                     load_checkpoint, read_header, save_checkpoint)
from digit_coach.training import TrainConfig


@pytest.fixture()
def probe():
    rng = np.random.default_rng(0)
    return rng.random((4, 1, 28, 28), dtype=np.float32), rng.integers(0, 10, 4)


@pytest.mark.parametrize("kind", [ClassifierModel, CoachModel, DiscriminatorModel])
def test_round_trip_bit_identical_outputs(kind, probe, tmp_path):
    images, labels = probe
    model = kind(seed=42)
    # give the moments non-trivial content
    for p in model.parameters().values():
        p.m1 += 0.25
        p.m2 += 0.5
        p.steps = 7
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)

    if kind is CoachModel:
        a, b = model.propose(images, labels), loaded.propose(images, labels)
    elif kind is ClassifierModel:
        a, b = model.classify(images), loaded.classify(images)
    else:
        a, b = model.forward(images).data, loaded.forward(images).data
    np.testing.assert_array_equal(a, b)
    for name, p in model.parameters().items():
        q = loaded.parameters()[name]
        np.testing.assert_array_equal(p.data, q.data)
        np.testing.assert_array_equal(p.m1, q.m1)
        np.testing.assert_array_equal(p.m2, q.m2)
        assert p.steps == q.steps


def test_save_twice_byte_identical(tmp_path):
    model = CoachModel(seed=1)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(model, p1, config=TrainConfig(seed=1))
    save_checkpoint(model, p2, config=TrainConfig(seed=1))
    assert p1.read_bytes() == p2.read_bytes()


def test_checksum_matches_independent_recomputation(tmp_path):
    import hashlib

    model = ClassifierModel(seed=2)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    raw = path.read_bytes()
    assert hashlib.sha256(raw[:-32]).digest() == raw[-32:]
    assert checkpoint_checksum(path) == raw[-32:].hex()


def test_frozen_flag_round_trips(tmp_path):
    model = ClassifierModel(seed=3)
    model.freeze()
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    assert load_checkpoint(path).frozen


def test_config_stored_in_header(tmp_path):
    model = ClassifierModel(seed=4)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path, config=TrainConfig(seed=4, max_steps=100))
    header = read_header(path)
    assert header["config"]["seed"] == 4
    assert header["config"]["max_steps"] == 100
    assert header["model_kind"] == "classifier"


def test_bad_magic(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(ClassifierModel(seed=0), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointFormatError, match="magic"):
        load_checkpoint(path)


def test_unknown_version(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(ClassifierModel(seed=0), path)
    raw = bytearray(path.read_bytes())
    raw[4:8] = (999).to_bytes(4, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointVersionError, match="999"):
        load_checkpoint(path)


def test_truncated_file(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(ClassifierModel(seed=0), path)
    path.write_bytes(path.read_bytes()[:-40])
    with pytest.raises(CheckpointCorruptError):
        load_checkpoint(path)


def test_flipped_payload_byte_detected(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(ClassifierModel(seed=0), path)
    raw = bytearray(path.read_bytes())
    raw[-100] ^= 0x40
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointCorruptError, match="checksum"):
        load_checkpoint(path)


def test_nonfinite_parameters_rejected_on_save(tmp_path):
    model = ClassifierModel(seed=0)
    model.fc_w.value.data[0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        save_checkpoint(model, tmp_path / "m.ckpt")
