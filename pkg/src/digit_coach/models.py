"""Model architectures: fixed digit classifier, conditional conv autoencoder
coach, and the realness discriminator.

The coach receives the intended class as 10 extra one-hot image channels
concatenated to the drawing (11 input channels total). Its decoder uses
nearest-neighbor upsampling followed by convolutions (no transposed convs,
which produce checkerboard artifacts), with a ReLU after every conv except
the sigmoid output layer.
"""
from __future__ import annotations

import numpy as np

from . import engine as eg
from .engine import Parameter, Tensor

IMAGE_SIDE = 28
NUM_CLASSES = 10
SCORE_CLAMP = 1e-6


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


def _conv_param(rng, c_in, c_out, k=3):
    w = Parameter(_glorot(rng, (c_out, c_in, k, k), c_in * k * k, c_out * k * k))
    b = Parameter(np.zeros(c_out, dtype=np.float32))
    return w, b


def _linear_param(rng, n_in, n_out):
    w = Parameter(_glorot(rng, (n_out, n_in), n_in, n_out))
    b = Parameter(np.zeros(n_out, dtype=np.float32))
    return w, b


class _Model:
    """Common parameter bookkeeping."""

    kind = "model"

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def _register(self, name: str, param: Parameter) -> Parameter:
        self._params[name] = param
        return param

    def parameters(self) -> dict[str, Parameter]:
        return dict(self._params)

    def zero_grad(self):
        for p in self._params.values():
            p.zero_grad()

    def freeze(self):
        for p in self._params.values():
            p.freeze()

    @property
    def frozen(self) -> bool:
        return all(not p.value.requires_grad for p in self._params.values())


def _as_image_tensor(images) -> Tensor:
    if isinstance(images, Tensor):
        t = images
    else:
        t = Tensor(np.asarray(images, dtype=np.float32))
    if t.data.ndim == 2 and t.data.shape[1] == IMAGE_SIDE * IMAGE_SIDE:
        t = eg.reshape(t, (t.data.shape[0], 1, IMAGE_SIDE, IMAGE_SIDE))
    if t.data.ndim != 4 or t.data.shape[1] != 1 or t.data.shape[2:] != (IMAGE_SIDE, IMAGE_SIDE):
        raise ValueError(f"expected (B,1,28,28) images, got {t.data.shape}")
    return t


class ClassifierModel(_Model):
    """Two conv layers (8 then 16 channels), each followed by ReLU and 2x2
    max-pool, then a single fully-connected layer 784 -> 10."""

    kind = "classifier"

    def __init__(self, seed: int = 0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.conv1_w, self.conv1_b = _conv_param(rng, 1, 8)
        self.conv2_w, self.conv2_b = _conv_param(rng, 8, 16)
        self.fc_w, self.fc_b = _linear_param(rng, 16 * 7 * 7, NUM_CLASSES)
        for name in ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc_w", "fc_b"):
            self._register(name, getattr(self, name))

    def logits(self, images) -> Tensor:
        x = _as_image_tensor(images)
        h = eg.maxpool2x2(eg.relu(eg.conv2d(x, self.conv1_w.value, self.conv1_b.value, padding=1)))
        h = eg.maxpool2x2(eg.relu(eg.conv2d(h, self.conv2_w.value, self.conv2_b.value, padding=1)))
        h = eg.reshape(h, (h.data.shape[0], 16 * 7 * 7))
        return eg.linear(h, self.fc_w.value, self.fc_b.value)

    def classify(self, images) -> np.ndarray:
        """Per-sample class probabilities, rows summing to 1."""
        return eg.softmax(self.logits(images).data)

    def predict(self, images) -> np.ndarray:
        return self.classify(images).argmax(axis=1)


def classify(model: ClassifierModel, images) -> np.ndarray:
    return model.classify(images)


def condition_channels(label: int) -> np.ndarray:
    """One-hot class plane stack: channel `label` all ones, the rest zeros."""
    if not 0 <= int(label) < NUM_CLASSES:
        raise ValueError(f"label {label} outside 0..9")
    planes = np.zeros((NUM_CLASSES, IMAGE_SIDE, IMAGE_SIDE), dtype=np.float32)
    planes[int(label)] = 1.0
    return planes


def _condition_batch(labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
        raise ValueError("labels outside 0..9")
    planes = np.zeros((labels.shape[0], NUM_CLASSES, IMAGE_SIDE, IMAGE_SIDE), dtype=np.float32)
    planes[np.arange(labels.shape[0]), labels] = 1.0
    return planes


class CoachModel(_Model):
    """Conditional conv autoencoder mapping (drawing, intended class) to a
    same-shaped proposal in [0,1].

    Encoder: conv(11->16) pool conv(16->32) pool (latent 32x7x7).
    Decoder: up conv(32->16) up conv(16->8) conv(8->1), ReLU after every
    conv including the last. Training runs on the raw ReLU output (a sigmoid
    head saturates black under the L1 pull of the mostly-black targets and
    kills the gradient); the public forward clamps to [0,1].
    """

    kind = "coach"

    def __init__(self, seed: int = 0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.enc1_w, self.enc1_b = _conv_param(rng, 1 + NUM_CLASSES, 16)
        self.enc2_w, self.enc2_b = _conv_param(rng, 16, 32)
        self.dec1_w, self.dec1_b = _conv_param(rng, 32, 16)
        self.dec2_w, self.dec2_b = _conv_param(rng, 16, 8)
        self.out_w, self.out_b = _conv_param(rng, 8, 1)
        for name in ("enc1_w", "enc1_b", "enc2_w", "enc2_b", "dec1_w", "dec1_b",
                     "dec2_w", "dec2_b", "out_w", "out_b"):
            self._register(name, getattr(self, name))

    def forward_raw(self, images, labels) -> Tensor:
        """Training-time forward: raw ReLU output, lower-bounded at 0 but not
        clamped above (the reconstruction pull keeps it at target scale)."""
        x = _as_image_tensor(images)
        cond = Tensor(_condition_batch(labels))
        if cond.data.shape[0] != x.data.shape[0]:
            raise ValueError("images/labels batch size mismatch")
        h = eg.concat_channels(x, cond)
        h = eg.maxpool2x2(eg.relu(eg.conv2d(h, self.enc1_w.value, self.enc1_b.value, padding=1)))
        h = eg.maxpool2x2(eg.relu(eg.conv2d(h, self.enc2_w.value, self.enc2_b.value, padding=1)))
        h = eg.nn_upsample2x(h)
        h = eg.relu(eg.conv2d(h, self.dec1_w.value, self.dec1_b.value, padding=1))
        h = eg.nn_upsample2x(h)
        h = eg.relu(eg.conv2d(h, self.dec2_w.value, self.dec2_b.value, padding=1))
        return eg.relu(eg.conv2d(h, self.out_w.value, self.out_b.value, padding=1))

    def forward(self, images, labels) -> Tensor:
        """Proposal with every pixel in [0,1]."""
        return eg.clamp(self.forward_raw(images, labels), 0.0, 1.0)

    def propose(self, images, labels) -> np.ndarray:
        """Inference-only forward; returns (B,784) proposals in [0,1]."""
        out = self.forward(images, labels)
        return out.data.reshape(out.data.shape[0], -1).copy()


def coach_forward(model: CoachModel, images, labels) -> Tensor:
    return model.forward(images, labels)


class DiscriminatorModel(_Model):
    """Small CNN scoring realness of an image; mirrors the classifier body
    with a single sigmoid output unit."""

    kind = "discriminator"

    def __init__(self, seed: int = 0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.conv1_w, self.conv1_b = _conv_param(rng, 1, 8)
        self.conv2_w, self.conv2_b = _conv_param(rng, 8, 16)
        self.fc_w, self.fc_b = _linear_param(rng, 16 * 7 * 7, 1)
        for name in ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc_w", "fc_b"):
            self._register(name, getattr(self, name))

    def forward(self, images) -> Tensor:
        """Realness scores (B,), clamped to [1e-6, 1-1e-6]."""
        x = _as_image_tensor(images)
        h = eg.maxpool2x2(eg.relu(eg.conv2d(x, self.conv1_w.value, self.conv1_b.value, padding=1)))
        h = eg.maxpool2x2(eg.relu(eg.conv2d(h, self.conv2_w.value, self.conv2_b.value, padding=1)))
        h = eg.reshape(h, (h.data.shape[0], 16 * 7 * 7))
        s = eg.sigmoid(eg.linear(h, self.fc_w.value, self.fc_b.value))
        return eg.clamp(eg.reshape(s, (s.data.shape[0],)), SCORE_CLAMP, 1.0 - SCORE_CLAMP)


def discriminate(model: DiscriminatorModel, images) -> np.ndarray:
    return model.forward(images).data.copy()


MODEL_KINDS = {
    "classifier": ClassifierModel,
    "coach": CoachModel,
    "discriminator": DiscriminatorModel,
}
