"""The four objective terms and their weighted combination.

All terms are reported as per-sample, per-pixel means (batch means for the
classifier and discriminator terms), so a weight of 32 on the reconstruction
term plays against e.g. 0.03 on the classification term at comparable
gradient magnitudes. With the reconstruction and ink terms sharing one
normalization, setting their weights equal makes their subgradients cancel
exactly on inked pixels, which is what drives the collapse at high ink
weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine as eg
from .engine import Tensor
from .models import ClassifierModel, DiscriminatorModel

DEFAULT_ALPHA_RE = 32.0


@dataclass(frozen=True)
class LossWeights:
    """Term weights: reconstruction, classification, ink efficiency, realism."""

    alpha_re: float = DEFAULT_ALPHA_RE
    alpha_cl: float = 0.0
    alpha_ef: float = 0.0
    alpha_d: float = 0.0

    def __post_init__(self):
        for name in ("alpha_re", "alpha_cl", "alpha_ef", "alpha_d"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def as_tuple(self):
        return (self.alpha_re, self.alpha_cl, self.alpha_ef, self.alpha_d)


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term values (batch means) and their weighted total."""

    l_re: float
    l_cl: float
    l_ef: float
    l_d: float
    l_total: float


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))


def reconstruction_loss(x, xhat) -> Tensor:
    """Mean absolute pixel change between input and proposal."""
    x, xhat = _as_tensor(x), _as_tensor(xhat)
    if x.data.shape != xhat.data.shape:
        raise ValueError(f"shape mismatch: {x.data.shape} vs {xhat.data.shape}")
    return eg.mean(eg.absolute(eg.sub(x, xhat)))


def efficiency_loss(xhat) -> Tensor:
    """Mean ink of the proposal (per-pixel absolute brightness)."""
    return eg.mean(eg.absolute(_as_tensor(xhat)))


def classification_loss(xhat, labels, classifier: ClassifierModel) -> Tensor:
    """Cross-entropy of the frozen classifier on the proposals.

    Gradients flow into the proposal pixels only; the classifier must be
    frozen so its own parameters never accumulate gradient.
    """
    if not classifier.frozen:
        raise ValueError("classification_loss requires a frozen classifier")
    xhat = _as_tensor(xhat)
    logits = classifier.logits(xhat)
    return eg.softmax_xent(logits, labels)


def generator_adversarial_loss(xhat, discriminator: DiscriminatorModel) -> Tensor:
    """Batch mean of log(1 - D(proposal)); lower means D rates it more real."""
    scores = discriminator.forward(_as_tensor(xhat))  # clamped inside the model
    return eg.mean(eg.log(eg.affine(scores, -1.0, 1.0)))


def discriminator_training_loss(real, fake, discriminator: DiscriminatorModel) -> Tensor:
    """Binary cross-entropy for D: real toward 1, fake toward 0."""
    real, fake = _as_tensor(real), _as_tensor(fake)
    if real.data.size == 0 or fake.data.size == 0:
        raise ValueError("empty batch")
    s_real = discriminator.forward(real)
    s_fake = discriminator.forward(fake)
    return eg.add(eg.scale(eg.mean(eg.log(s_real)), -1.0),
                  eg.scale(eg.mean(eg.log(eg.affine(s_fake, -1.0, 1.0))), -1.0))


def total_loss(x, xhat, labels, weights: LossWeights,
               classifier: ClassifierModel | None = None,
               discriminator: DiscriminatorModel | None = None,
               ) -> tuple[Tensor, LossBreakdown]:
    """Weighted sum of the active terms (zero-weight terms are skipped).

    Returns the differentiable total plus a value breakdown. A positive
    discriminator weight requires a discriminator; same for the classifier.
    """
    if weights.alpha_d > 0 and discriminator is None:
        raise ValueError("alpha_d > 0 but no discriminator given")
    if weights.alpha_cl > 0 and classifier is None:
        raise ValueError("alpha_cl > 0 but no classifier given")

    parts = []
    vals = {"l_re": 0.0, "l_cl": 0.0, "l_ef": 0.0, "l_d": 0.0}
    if weights.alpha_re > 0:
        t = reconstruction_loss(x, xhat)
        vals["l_re"] = t.item()
        parts.append(eg.scale(t, weights.alpha_re))
    if weights.alpha_cl > 0:
        t = classification_loss(xhat, labels, classifier)
        vals["l_cl"] = t.item()
        parts.append(eg.scale(t, weights.alpha_cl))
    if weights.alpha_ef > 0:
        t = efficiency_loss(xhat)
        vals["l_ef"] = t.item()
        parts.append(eg.scale(t, weights.alpha_ef))
    if weights.alpha_d > 0:
        t = generator_adversarial_loss(xhat, discriminator)
        vals["l_d"] = t.item()
        parts.append(eg.scale(t, weights.alpha_d))

    if parts:
        total = parts[0]
        for p in parts[1:]:
            total = eg.add(total, p)
    else:
        total = Tensor(np.float32(0.0))

    exact_total = (weights.alpha_re * vals["l_re"] + weights.alpha_cl * vals["l_cl"]
                   + weights.alpha_ef * vals["l_ef"] + weights.alpha_d * vals["l_d"])
    breakdown = LossBreakdown(l_total=exact_total, **vals)
    return total, breakdown
