"""End-to-end gradient check through the full coach: reconstruction loss
gradients w.r.t. the input pixels against central finite differences, with
coordinates straddling relu kinks excluded (the checker's precondition)."""
import numpy as np

from digit_coach.engine import Tensor
from digit_coach.losses import reconstruction_loss
from digit_coach.models import CoachModel


def _loss_at(coach, x, labels) -> float:
    xhat = coach.forward_raw(Tensor(x), labels)
    return reconstruction_loss(Tensor(x), xhat).item()


def test_full_coach_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(42)
    coach = CoachModel(seed=5)
    for p in coach.parameters().values():
        p.value.data = p.value.data.astype(np.float64)
    x = rng.random((1, 1, 28, 28))
    labels = [4]

    tx = Tensor(x, requires_grad=True)
    loss = reconstruction_loss(tx, coach.forward_raw(tx, labels))
    loss.backward()
    analytic = tx.grad.reshape(-1)

    h = 1e-5
    checked = 0
    failures = []
    flat_idx = rng.choice(784, size=60, replace=False)
    for i in flat_idx:
        xp = x.copy().reshape(-1)
        xm = x.copy().reshape(-1)
        xp[i] += h
        xm[i] -= h
        fd = (_loss_at(coach, xp.reshape(x.shape), labels)
              - _loss_at(coach, xm.reshape(x.shape), labels)) / (2 * h)
        # kink detector: a differentiable point gives the same estimate at h/10
        xp2, xm2 = x.copy().reshape(-1), x.copy().reshape(-1)
        xp2[i] += h / 10
        xm2[i] -= h / 10
        fd_fine = (_loss_at(coach, xp2.reshape(x.shape), labels)
                   - _loss_at(coach, xm2.reshape(x.shape), labels)) / (2 * h / 10)
        if abs(fd - fd_fine) > 1e-4 * max(1.0, abs(fd)):
            continue  # straddles a relu/|.| kink; excluded by the precondition
        checked += 1
        denom = max(abs(fd), abs(analytic[i]), 1e-8)
        if abs(fd - analytic[i]) / denom > 1e-3:
            failures.append((int(i), float(analytic[i]), float(fd)))

    assert checked >= 30, f"too few differentiable probe points ({checked})"
    assert not failures, f"gradient mismatches at {failures[:5]}"
