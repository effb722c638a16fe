"""Minimal reverse-mode autodiff engine on numpy arrays.

Provides exactly the differentiable ops the coach/classifier/discriminator
need (conv2d, relu/sigmoid, 2x2 max-pool, nearest-neighbor 2x upsample,
linear, softmax cross-entropy, plus a few elementwise/reduction ops for the
loss terms) and the Adam optimizer. Forward values and gradients live in
plain ndarrays; float32 is the working precision, float64 is used by the
finite-difference checker.
"""
from __future__ import annotations

import ctypes
import ctypes.util

import numpy as np
from numba import njit


def _tune_allocator():
    """Keep large numpy temporaries on the brk heap instead of per-allocation
    mmap regions. Training steps allocate and free a few MB of activations and
    patch matrices every iteration; without this, glibc returns the pages to
    the kernel each time and the page faults roughly double the step time."""
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c"))
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, 1 << 30)  # M_TRIM_THRESHOLD
    except (OSError, AttributeError, TypeError):
        pass  # non-glibc platform; purely a performance knob


_tune_allocator()


class Tensor:
    """Node in the computation graph: value, gradient, and backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def detach(self):
        """Value-only copy, cut off from the graph."""
        return Tensor(self.data, requires_grad=False)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True).reshape(self.data.shape)
        else:
            self.grad += g

    def backward(self, seed=None):
        """Reverse pass from this node. `seed` defaults to 1 for scalars."""
        if seed is None:
            if self.data.size != 1:
                raise ValueError("backward() without seed requires a scalar output")
            seed = np.ones_like(self.data)
        self.grad = np.asarray(seed, dtype=self.data.dtype).reshape(self.data.shape)

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad:
                    stack.append((p, False))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Small operator surface used by the loss terms.
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return scale(self, other)

    __rmul__ = __mul__


def _node(data, parents, backward):
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


class Parameter:
    """Trainable tensor plus Adam state (first/second moments, step count)."""

    def __init__(self, data):
        data = np.asarray(data)
        self.value = Tensor(data, requires_grad=True)
        self.m1 = np.zeros_like(data)
        self.m2 = np.zeros_like(data)
        self.steps = 0

    @property
    def data(self):
        return self.value.data

    @property
    def grad(self):
        return self.value.grad

    def zero_grad(self):
        self.value.grad = None

    def freeze(self):
        self.value.requires_grad = False


# ---------------------------------------------------------------------------
# elementwise / reduction ops

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _node(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"sub shape mismatch: {a.data.shape} vs {b.data.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return _node(a.data - b.data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        a._accumulate(c * g)

    return _node(a.data * np.asarray(c, dtype=a.data.dtype), (a,), backward)


def absolute(a: Tensor) -> Tensor:
    # subgradient 0 at exactly 0
    def backward(g):
        a._accumulate(np.sign(a.data) * g)

    return _node(np.abs(a.data), (a,), backward)


def affine(a: Tensor, mul: float, add_const: float) -> Tensor:
    """Elementwise mul*a + add_const."""
    mul = float(mul)

    def backward(g):
        a._accumulate(mul * g)

    return _node(np.asarray(mul, dtype=a.data.dtype) * a.data
                 + np.asarray(add_const, dtype=a.data.dtype), (a,), backward)


def mean(a: Tensor) -> Tensor:
    n = a.data.size

    def backward(g):
        a._accumulate(np.full_like(a.data, g / n))

    return _node(a.data.mean(dtype=a.data.dtype), (a,), backward)


def log(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g / a.data)

    return _node(np.log(a.data), (a,), backward)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    out_data = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)

    def backward(g):
        a._accumulate(np.where(inside, g, 0))

    return _node(out_data, (a,), backward)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two (B,C,H,W) tensors along the channel axis."""
    ca = a.data.shape[1]

    def backward(g):
        if a.requires_grad:
            a._accumulate(g[:, :ca])
        if b.requires_grad:
            b._accumulate(g[:, ca:])

    return _node(np.concatenate([a.data, b.data], axis=1), (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape

    def backward(g):
        a._accumulate(g.reshape(old))

    return _node(a.data.reshape(shape), (a,), backward)


# ---------------------------------------------------------------------------
# activations

def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g):
        a._accumulate(np.where(mask, g, 0))

    return _node(np.where(mask, a.data, 0), (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    # stable piecewise form
    x = a.data
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)

    def backward(g):
        a._accumulate(g * s * (1.0 - s))

    return _node(s, (a,), backward)


def activation(a: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(a)
    if kind == "sigmoid":
        return sigmoid(a)
    raise ValueError(f"unknown activation kind {kind!r}")


# ---------------------------------------------------------------------------
# conv / pool / upsample / linear

@njit(cache=True)
def _gather_patches(xp, k, colT):
    """Gather k*k patches of padded input xp (B,Cin,Hp,Wp) into the
    transposed patch matrix colT (Cin*k*k, B*H2*W2), stride 1."""
    B, Cin, Hp, Wp = xp.shape
    H2 = Hp - k + 1
    W2 = Wp - k + 1
    for ci in range(Cin):
        for di in range(k):
            for dj in range(k):
                cidx = (ci * k + di) * k + dj
                dst = colT[cidx]
                r = 0
                for b in range(B):
                    for i in range(H2):
                        src = xp[b, ci, i + di]
                        for j in range(W2):
                            dst[r + j] = src[dj + j]
                        r += W2


@njit(cache=True)
def _scatter_patches_add(colT, k, gxp):
    """Transpose of _gather_patches: accumulate patch-matrix gradients back
    into the padded input gradient gxp (B,Cin,Hp,Wp)."""
    B, Cin, Hp, Wp = gxp.shape
    H2 = Hp - k + 1
    W2 = Wp - k + 1
    for ci in range(Cin):
        for di in range(k):
            for dj in range(k):
                cidx = (ci * k + di) * k + dj
                src = colT[cidx]
                r = 0
                for b in range(B):
                    for i in range(H2):
                        dst = gxp[b, ci, i + di]
                        for j in range(W2):
                            dst[dj + j] += src[r + j]
                        r += W2


def _pad_hw(x: np.ndarray, padding: int) -> np.ndarray:
    if not padding:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _im2col(x: np.ndarray, k: int, padding: int, stride: int):
    """(B,Cin,H,W) -> patch matrix (B*H2*W2, Cin*k*k); generic-stride path."""
    B, Cin, H, W = x.shape
    x = _pad_hw(x, padding)
    Hp, Wp = x.shape[2], x.shape[3]
    H2 = (Hp - k) // stride + 1
    W2 = (Wp - k) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    col = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(B * H2 * W2, Cin * k * k)
    return col, H2, W2


def _conv_out_dims(H, W, k, padding, stride):
    if (H + 2 * padding - k) % stride or (W + 2 * padding - k) % stride:
        raise ValueError(
            f"conv geometry not integral: input {H}x{W}, k={k}, padding={padding}, stride={stride}"
        )
    return (H + 2 * padding - k) // stride + 1, (W + 2 * padding - k) // stride + 1


def conv2d(x: Tensor, w: Tensor, b: Tensor, padding: int = 0, stride: int = 1) -> Tensor:
    """Cross-correlate (B,Cin,H,W) with (Cout,Cin,k,k) kernels plus bias."""
    B, Cin, H, W = x.data.shape
    Cout, Cin2, kh, kw = w.data.shape
    if kh != kw or kh % 2 == 0:
        raise ValueError(f"kernel must be square with odd size, got {kh}x{kw}")
    if Cin2 != Cin:
        raise ValueError(f"conv channel mismatch: input {Cin}, kernel expects {Cin2}")
    if b.data.shape != (Cout,):
        raise ValueError(f"bias shape {b.data.shape} != ({Cout},)")
    k = kh
    H2, W2 = _conv_out_dims(H, W, k, padding, stride)

    if stride == 1:
        # gather patches once (transposed layout keeps every copy run-contiguous),
        # then it is a single sgemm for the forward and two for the backward
        dt = x.data.dtype
        xp = np.ascontiguousarray(_pad_hw(x.data, padding))
        colT = np.empty((Cin * k * k, B * H2 * W2), dtype=dt)
        _gather_patches(xp, k, colT)
        w_mat = w.data.reshape(Cout, Cin * k * k)
        out_cb = w_mat @ colT  # (Cout, B*H2*W2) laid out (co, b, i, j)
        out_data = np.ascontiguousarray(
            out_cb.reshape(Cout, B, H2 * W2).transpose(1, 0, 2)
        ).reshape(B, Cout, H2, W2)
        out_data += b.data.reshape(1, Cout, 1, 1)

        def backward(g):
            if b.requires_grad:
                b._accumulate(g.sum(axis=(0, 2, 3)))
            g_cb = np.ascontiguousarray(
                g.reshape(B, Cout, H2 * W2).transpose(1, 0, 2)
            ).reshape(Cout, B * H2 * W2)
            if w.requires_grad:
                w._accumulate((g_cb @ colT.T).reshape(w.data.shape))
            if x.requires_grad:
                colT_grad = w_mat.T @ g_cb
                gxp = np.zeros_like(xp)
                _scatter_patches_add(colT_grad, k, gxp)
                if padding:
                    gxp = gxp[:, :, padding:-padding, padding:-padding]
                x._accumulate(gxp)

        return _node(out_data, (x, w, b), backward)

    # generic-stride path via patch matrix + matmul
    col, H2, W2 = _im2col(x.data, k, padding, stride)
    out_data = col @ w.data.reshape(Cout, Cin * k * k).T
    out_data = np.ascontiguousarray(out_data.reshape(B, H2, W2, Cout).transpose(0, 3, 1, 2))
    out_data += b.data.reshape(1, Cout, 1, 1)

    def backward(g):
        g_mat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(B * H2 * W2, Cout)
        if b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2, 3)))
        if w.requires_grad:
            w._accumulate((g_mat.T @ col).reshape(w.data.shape))
        if x.requires_grad:
            # dilate the output grad, then full-correlate with the flipped kernel
            gd = np.zeros((B, Cout, (H2 - 1) * stride + 1, (W2 - 1) * stride + 1), dtype=g.dtype)
            gd[:, :, ::stride, ::stride] = g
            w_rot = np.ascontiguousarray(w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
            gcol, gH, gW = _im2col(gd, k, k - 1 - padding, 1)
            gx = gcol @ w_rot.reshape(Cin, Cout * k * k).T
            gx = np.ascontiguousarray(gx.reshape(B, gH, gW, Cin).transpose(0, 3, 1, 2))
            x._accumulate(gx)

    return _node(out_data, (x, w, b), backward)


@njit(cache=True)
def _maxpool_fwd(x, out, idx):
    B, C, H2, W2 = out.shape
    for b in range(B):
        for c in range(C):
            for i in range(H2):
                for j in range(W2):
                    # window cells in row-major order; ties keep the first
                    best = x[b, c, 2 * i, 2 * j]
                    arg = 0
                    v = x[b, c, 2 * i, 2 * j + 1]
                    if v > best:
                        best, arg = v, 1
                    v = x[b, c, 2 * i + 1, 2 * j]
                    if v > best:
                        best, arg = v, 2
                    v = x[b, c, 2 * i + 1, 2 * j + 1]
                    if v > best:
                        best, arg = v, 3
                    out[b, c, i, j] = best
                    idx[b, c, i, j] = arg


@njit(cache=True)
def _maxpool_bwd(g, idx, gx):
    B, C, H2, W2 = g.shape
    for b in range(B):
        for c in range(C):
            for i in range(H2):
                for j in range(W2):
                    a = idx[b, c, i, j]
                    gx[b, c, 2 * i + a // 2, 2 * j + a % 2] = g[b, c, i, j]


def maxpool2x2(x: Tensor) -> Tensor:
    """2x2 max pool, stride 2; gradient routes to the first max per window."""
    B, C, H, W = x.data.shape
    if H % 2 or W % 2:
        raise ValueError(f"maxpool2x2 needs even spatial extents, got {H}x{W}")
    H2, W2 = H // 2, W // 2
    out_data = np.empty((B, C, H2, W2), dtype=x.data.dtype)
    idx = np.empty((B, C, H2, W2), dtype=np.uint8)
    _maxpool_fwd(np.ascontiguousarray(x.data), out_data, idx)

    def backward(g):
        gx = np.zeros((B, C, H, W), dtype=g.dtype)
        _maxpool_bwd(np.ascontiguousarray(g), idx, gx)
        x._accumulate(gx)

    return _node(out_data, (x,), backward)


def nn_upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsample: each pixel becomes a 2x2 block."""
    B, C, H, W = x.data.shape
    out_data = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def backward(g):
        x._accumulate(g.reshape(B, C, H, 2, W, 2).sum(axis=(3, 5)))

    return _node(out_data, (x,), backward)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map: (B,N) @ (M,N)^T + (M,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ValueError(f"linear shape mismatch: x {x.data.shape}, w {w.data.shape}")
    if b.data.shape != (w.data.shape[0],):
        raise ValueError(f"bias shape {b.data.shape} != ({w.data.shape[0]},)")

    def backward(g):
        if b.requires_grad:
            b._accumulate(g.sum(axis=0))
        if w.requires_grad:
            w._accumulate(g.T @ x.data)
        if x.requires_grad:
            x._accumulate(g @ w.data)

    return _node(x.data @ w.data.T + b.data, (x, w, b), backward)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a (B,K) array (plain-numpy helper, no graph)."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits: Tensor, labels) -> Tensor:
    """Batch-mean cross-entropy of row-wise softmax against integer labels."""
    labels = np.asarray(labels)
    B, K = logits.data.shape
    if labels.shape != (B,):
        raise ValueError(f"labels shape {labels.shape} != ({B},)")
    if labels.min() < 0 or labels.max() >= K:
        raise ValueError(f"labels out of range for {K} classes")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    loss = (lse - z[np.arange(B), labels]).mean(dtype=logits.data.dtype)
    probs = softmax(logits.data)

    def backward(g):
        gl = probs.copy()
        gl[np.arange(B), labels] -= 1.0
        logits._accumulate(gl * (g / B))

    return _node(np.asarray(loss, dtype=logits.data.dtype), (logits,), backward)


# ---------------------------------------------------------------------------
# optimizer

def adam_update(param: Parameter, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8) -> None:
    """One bias-corrected Adam step in place; requires a populated gradient."""
    g = param.value.grad
    if g is None:
        raise ValueError("adam_update called with no gradient")
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient in adam_update")
    if lr <= 0 or beta1 <= 0 or beta2 <= 0 or eps <= 0:
        raise ValueError("adam hyperparameters must be positive")
    param.steps += 1
    t = param.steps
    param.m1 += (1.0 - beta1) * (g - param.m1)
    param.m2 += (1.0 - beta2) * (g * g - param.m2)
    m_hat = param.m1 / (1.0 - beta1 ** t)
    v_hat = param.m2 / (1.0 - beta2 ** t)
    param.value.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# gradient checking

def grad_check(fn, inputs, tolerance=1e-3, h=1e-4):
    """Compare reverse-mode gradients of scalar-valued `fn` with central
    finite differences, in float64.

    `fn` maps a list of Tensors to a scalar Tensor. Returns a report dict
    with the max relative error and a pass flag. Inputs should sit away from
    non-differentiable points (relu kinks, pool ties).
    """
    tensors = [Tensor(np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64),
                      requires_grad=True) for x in inputs]
    out = fn(tensors)
    out.backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    max_rel = 0.0
    for ti, t in enumerate(tensors):
        flat = t.data.reshape(-1)
        num = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = fn(tensors).item()
            flat[i] = orig - h
            f_minus = fn(tensors).item()
            flat[i] = orig
            num[i] = (f_plus - f_minus) / (2.0 * h)
        ana = analytic[ti].reshape(-1)
        denom = np.maximum(np.abs(num), np.abs(ana))
        denom[denom < 1e-8] = 1.0
        rel = np.abs(num - ana) / denom
        max_rel = max(max_rel, float(rel.max()) if rel.size else 0.0)

    return {"max_rel_error": max_rel, "tolerance": tolerance, "passed": max_rel < tolerance}
