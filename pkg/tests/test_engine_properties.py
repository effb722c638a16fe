"""Property tests: every layer's reverse-mode gradient agrees with central
finite differences at random non-degenerate points, conv equals the naive
definition on random shapes, and the algebraic invariants hold."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from digit_coach import engine as eg
from digit_coach.engine import Parameter, Tensor

from oracles import central_difference_grad, naive_conv2d, relative_error

LAYER_SEEDS = range(20)


def _away_from_kinks(x, margin=1e-2):
    """Shift values lying within `margin` of zero (relu/pool tie territory)."""
    x = x.copy()
    small = np.abs(x) < margin
    x[small] += np.sign(x[small] + 0.5) * margin * 2
    return x


@pytest.mark.parametrize("seed", LAYER_SEEDS)
def test_conv2d_gradcheck(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 2, 6, 6))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    rep = eg.grad_check(
        lambda ts: eg.mean(eg.absolute(eg.conv2d(ts[0], ts[1], ts[2], padding=1))),
        [Tensor(x), Tensor(w), Tensor(b)], tolerance=1e-3)
    assert rep["passed"], rep


@pytest.mark.parametrize("seed", LAYER_SEEDS)
def test_relu_gradcheck(seed):
    rng = np.random.default_rng(100 + seed)
    x = _away_from_kinks(rng.standard_normal((4, 7)))
    rep = eg.grad_check(lambda ts: eg.mean(eg.relu(ts[0])), [Tensor(x)], tolerance=1e-3)
    assert rep["passed"], rep


@pytest.mark.parametrize("seed", LAYER_SEEDS)
def test_sigmoid_gradcheck(seed):
    rng = np.random.default_rng(200 + seed)
    x = rng.standard_normal((4, 7)) * 2
    rep = eg.grad_check(lambda ts: eg.mean(eg.sigmoid(ts[0])), [Tensor(x)], tolerance=1e-3)
    assert rep["passed"], rep


@pytest.mark.parametrize("seed", LAYER_SEEDS)
def test_maxpool_gradcheck(seed):
    rng = np.random.default_rng(300 + seed)
    # distinct magnitudes keep the argmax stable under the probe offset
    x = rng.permutation(2 * 2 * 6 * 6).astype(np.float64).reshape(2, 2, 6, 6)
    x += rng.random(x.shape) * 0.3
    rep = eg.grad_check(lambda ts: eg.mean(eg.maxpool2x2(ts[0])), [Tensor(x)],
                        tolerance=1e-3)
    assert rep["passed"], rep


@pytest.mark.parametrize("seed", LAYER_SEEDS)
def test_upsample_gradcheck(seed):
    rng = np.random.default_rng(400 + seed)
    x = rng.standard_normal((2, 3, 4, 4))
    rep = eg.grad_check(lambda ts: eg.mean(eg.absolute(eg.nn_upsample2x(ts[0]))),
                        [Tensor(x)], tolerance=1e-3)
    assert rep["passed"], rep


@pytest.mark.parametrize("seed", LAYER_SEEDS)
def test_linear_gradcheck(seed):
    rng = np.random.default_rng(500 + seed)
    x = rng.standard_normal((3, 5))
    w = rng.standard_normal((4, 5))
    b = rng.standard_normal(4)
    rep = eg.grad_check(lambda ts: eg.mean(eg.absolute(eg.linear(*ts))),
                        [Tensor(x), Tensor(w), Tensor(b)], tolerance=1e-3)
    assert rep["passed"], rep


@pytest.mark.parametrize("seed", LAYER_SEEDS)
def test_softmax_xent_gradcheck(seed):
    rng = np.random.default_rng(600 + seed)
    logits = rng.standard_normal((4, 10)) * 2
    labels = rng.integers(0, 10, 4)
    rep = eg.grad_check(lambda ts: eg.softmax_xent(ts[0], labels), [Tensor(logits)],
                        tolerance=1e-3)
    assert rep["passed"], rep


@given(
    batch=st.integers(1, 2), cin=st.integers(1, 3), cout=st.integers(1, 3),
    size=st.integers(3, 8), padding=st.integers(0, 1),
    seed=st.integers(0, 2 ** 31),
)
@settings(max_examples=40)
def test_conv2d_equals_naive_on_random_shapes(batch, cin, cout, size, padding, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, cin, size, size))
    w = rng.standard_normal((cout, cin, 3, 3))
    b = rng.standard_normal(cout)
    out = eg.conv2d(Tensor(x), Tensor(w), Tensor(b), padding=padding)
    assert relative_error(out.data, naive_conv2d(x, w, b, padding=padding)) < 1e-6


@given(shift=st.floats(-50, 50), seed=st.integers(0, 2 ** 31))
def test_softmax_xent_shift_invariance(shift, seed):
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((3, 10))
    labels = rng.integers(0, 10, 3)
    base = eg.softmax_xent(Tensor(logits), labels).item()
    shifted = eg.softmax_xent(Tensor(logits + shift), labels).item()
    assert abs(base - shifted) < 1e-9


@given(seed=st.integers(0, 2 ** 31))
def test_adam_zero_gradient_at_zero_moments_is_identity(seed):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(5)
    p = Parameter(values.copy())
    p.value.grad = np.zeros(5)
    eg.adam_update(p, lr=1e-2)
    np.testing.assert_array_equal(p.data, values)


@given(seed=st.integers(0, 2 ** 31))
def test_backward_accumulates_over_shared_nodes(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal(4), requires_grad=True)
    y = eg.add(x, x)
    eg.mean(y).backward()
    np.testing.assert_allclose(x.grad, np.full(4, 2 / 4))
