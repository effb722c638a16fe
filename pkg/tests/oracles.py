"""Independent reference implementations the tests check the engine against.

Everything here is deliberately naive (nested loops, float64, straight
transcriptions of the textbook formulas) and shares no code with the engine.
"""
import numpy as np


def naive_conv2d(x, w, b, padding=0, stride=1):
    """Six-nested-loop cross-correlation in float64."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    B, Cin, H, W = x.shape
    Cout, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    H2 = (H + 2 * padding - k) // stride + 1
    W2 = (W + 2 * padding - k) // stride + 1
    out = np.zeros((B, Cout, H2, W2))
    for bb in range(B):
        for co in range(Cout):
            for i in range(H2):
                for j in range(W2):
                    acc = b[co]
                    for ci in range(Cin):
                        for di in range(k):
                            for dj in range(k):
                                acc += w[co, ci, di, dj] * xp[bb, ci, i * stride + di,
                                                              j * stride + dj]
                    out[bb, co, i, j] = acc
    return out


def naive_linear(x, w, b):
    """Nested-loop affine map in float64."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    B, N = x.shape
    M = w.shape[0]
    out = np.zeros((B, M))
    for bb in range(B):
        for m in range(M):
            acc = b[m]
            for n in range(N):
                acc += x[bb, n] * w[m, n]
            out[bb, m] = acc
    return out


def highprec_softmax_xent(logits, labels, dps=50):
    """Arbitrary-precision batch-mean cross-entropy via mpmath."""
    import mpmath

    with mpmath.workdps(dps):
        total = mpmath.mpf(0)
        for row, label in zip(np.asarray(logits, dtype=np.float64), labels):
            exps = [mpmath.e ** mpmath.mpf(v) for v in row]
            z = sum(exps)
            total += -mpmath.log(exps[int(label)] / z)
        return float(total / len(labels))


def central_difference_grad(f, x, h=1e-4):
    """Central finite differences of scalar f at x, in float64."""
    x = np.asarray(x, dtype=np.float64).copy()
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


class ReferenceAdam:
    """Straight transcription of the published Adam update rule."""

    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, theta, grad):
        theta = np.asarray(theta, dtype=np.float64)
        grad = np.asarray(grad, dtype=np.float64)
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def relative_error(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())
