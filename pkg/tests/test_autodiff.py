import numpy as np
import pytest

from gedlearn import autodiff as ad
from gedlearn.autodiff import Adam, Tensor, backward, grad_check


def _param(shape, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _fd_ok(f, params, tol=1e-4):
    assert grad_check(f, params) < tol


def test_add_mul_broadcast_grads():
    a = _param((3, 4), 0)
    b = _param((4,), 1)
    _fd_ok(lambda: ad.tsum(a * b + b), [a, b])


def test_sub_div_grads():
    a = _param((2, 3), 2)
    b = Tensor(np.abs(np.random.default_rng(3).standard_normal((2, 3))) + 0.5,
               requires_grad=True)
    _fd_ok(lambda: ad.tsum(ad.div(ad.sub(a, b), b)), [a, b])


def test_matmul_transpose_grads():
    a = _param((3, 4), 4)
    b = _param((4, 2), 5)
    _fd_ok(lambda: ad.tsum(ad.transpose(a @ b) @ (a @ b)), [a, b])


def test_reshape_concat_grads():
    a = _param((2, 3), 6)
    b = _param((2, 3), 7)

    def f():
        flat = ad.concat([a.reshape(6), b.reshape(6)], axis=0)
        return ad.tsum(flat * flat)

    _fd_ok(f, [a, b])


def test_reshape_accepts_tuple_and_varargs():
    a = Tensor(np.arange(6.0))
    assert a.reshape(2, 3).shape == (2, 3)
    assert a.reshape((2, 3)).shape == (2, 3)
    one = Tensor(np.array([4.0]))
    assert one.reshape(()).shape == ()


def test_sum_mean_axis_keepdims():
    a = _param((3, 4), 8)
    assert ad.tsum(a, axis=1).shape == (3,)
    assert ad.tsum(a, axis=0, keepdims=True).shape == (1, 4)
    assert np.isclose(ad.tmean(a).item(), a.data.mean())
    _fd_ok(lambda: ad.tsum(ad.tmean(a, axis=1) * ad.tmean(a, axis=1)), [a])


@pytest.mark.parametrize("op", [ad.exp, ad.relu, ad.sigmoid])
def test_elementwise_grads(op):
    a = _param((4, 3), 9)
    _fd_ok(lambda: ad.tsum(op(a)), [a])


def test_log_sqrt_power_grads():
    rng = np.random.default_rng(10)
    a = Tensor(rng.uniform(0.5, 3.0, size=(3, 3)), requires_grad=True)
    _fd_ok(lambda: ad.tsum(ad.log(a) + ad.sqrt(a) + ad.power(a, 2.5)), [a])


def test_softplus_matches_reference_and_is_stable():
    x = Tensor(np.array([-800.0, -5.0, 0.0, 5.0, 800.0]))
    y = ad.softplus(x, beta=5.0)
    assert np.all(np.isfinite(y.data))
    # softplus(x) = log(1 + exp(beta x)) / beta, always above relu
    assert np.allclose(y.data[1:4], np.log1p(np.exp(5.0 * x.data[1:4])) / 5.0)
    assert y.data[0] >= 0.0
    assert np.isclose(y.data[4], 800.0)


def test_sigmoid_stable_at_extremes():
    y = ad.sigmoid(Tensor(np.array([-1000.0, 1000.0])))
    assert np.all(np.isfinite(y.data))
    assert y.data[0] == pytest.approx(0.0) and y.data[1] == pytest.approx(1.0)


def test_take_rows_accumulates_duplicate_indices():
    a = _param((4, 2), 11)
    idx = [0, 2, 0, 3]

    def f():
        return ad.tsum(ad.take_rows(a, idx) * Tensor(np.arange(8.0).reshape(4, 2)))

    loss = f()
    backward(loss)
    # row 0 is gathered twice, so its gradient is the sum of both slots
    expect = np.zeros((4, 2))
    w = np.arange(8.0).reshape(4, 2)
    for slot, row in enumerate(idx):
        expect[row] += w[slot]
    assert np.allclose(a.grad, expect)
    _fd_ok(f, [a])


def test_huber_quadratic_and_linear_zones():
    r = Tensor(np.array([0.25, 3.0, -2.0]))
    out = ad.huber(r, delta=1.0)
    assert np.allclose(out.data, [0.5 * 0.25**2, 3.0 - 0.5, 2.0 - 0.5])
    rr = _param((5,), 12)
    _fd_ok(lambda: ad.tsum(ad.huber(rr, delta=0.7)), [rr])


def test_smooth_l1_grad():
    p = _param((6,), 13)
    t = np.random.default_rng(14).standard_normal(6)
    _fd_ok(lambda: ad.tsum(ad.smooth_l1(p, Tensor(t))), [p])


def test_logsumexp_matches_scipy_and_survives_big_inputs():
    from scipy.special import logsumexp as sp_lse

    rng = np.random.default_rng(15)
    x = rng.standard_normal((4, 5)) * 3
    t = Tensor(x, requires_grad=True)
    out = ad.logsumexp(t, axis=1)
    assert np.allclose(out.data, sp_lse(x, axis=1))
    big = ad.logsumexp(Tensor(np.array([[1e4, 1e4 - 1.0]])), axis=1)
    assert np.isfinite(big.data).all()
    _fd_ok(lambda: ad.tsum(ad.logsumexp(t, axis=0, keepdims=True)), [t])
    _fd_ok(lambda: ad.tsum(ad.logsumexp(t, axis=1)), [t])


def test_softmax_rows_sum_to_one():
    a = _param((3, 6), 16)
    assert np.allclose(ad.softmax(a, axis=1).data.sum(axis=1), 1.0)
    _fd_ok(lambda: ad.tsum(ad.softmax(a, axis=1) *
                           Tensor(np.arange(18.0).reshape(3, 6))), [a])


def test_layer_norm_moments_and_grad():
    x = _param((4, 8), 17, scale=3.0)
    gamma = Tensor(np.ones(8), requires_grad=True)
    beta = Tensor(np.zeros(8), requires_grad=True)
    out = ad.layer_norm(x, gamma, beta)
    assert np.allclose(out.data.mean(axis=1), 0.0, atol=1e-7)
    assert np.allclose(out.data.var(axis=1), 1.0, atol=1e-4)
    _fd_ok(lambda: ad.tsum(ad.layer_norm(x, gamma, beta) *
                           Tensor(np.arange(32.0).reshape(4, 8))), [x, gamma, beta])


def test_normalize_rows_unit_norm():
    x = _param((5, 3), 18, scale=2.0)
    out = ad.normalize_rows(x)
    assert np.allclose(np.linalg.norm(out.data, axis=1), 1.0)
    _fd_ok(lambda: ad.tsum(ad.normalize_rows(x) * Tensor(np.ones((5, 3)))), [x])


def test_backward_accumulates_on_reused_node():
    a = Tensor(np.array(2.0), requires_grad=True)
    b = a * a  # a used twice
    backward(b)
    assert a.grad == pytest.approx(4.0)


def test_interior_grads_reset_between_calls():
    a = Tensor(np.array(3.0), requires_grad=True)
    for _ in range(2):
        loss = a * a
        a.zero_grad()
        backward(loss)
    # leaf grad reflects only the latest backward because of zero_grad
    assert a.grad == pytest.approx(6.0)


def test_adam_minimizes_quadratic():
    x = Tensor(np.array(10.0), requires_grad=True)
    opt = Adam([x], lr=0.1)
    for _ in range(400):
        loss = (x - 3.0) * (x - 3.0)
        opt.zero_grad()
        backward(loss)
        opt.step()
    assert abs(x.data - 3.0) < 0.05


def test_adam_requires_gradients():
    x = Tensor(np.array(1.0), requires_grad=True)
    opt = Adam([x], lr=0.1)
    with pytest.raises((RuntimeError, ValueError)):
        opt.step()  # no backward yet


def test_full_composite_grad_check():
    """One deep chain touching most ops at once."""
    w1 = _param((4, 6), 19, scale=0.5)
    w2 = _param((6, 1), 20, scale=0.5)
    x = Tensor(np.random.default_rng(21).standard_normal((3, 4)))

    def f():
        hidden = ad.relu(x @ w1)
        scores = ad.softplus(hidden @ w2, beta=5.0)
        return ad.logsumexp(scores.reshape(3), axis=0) + ad.tmean(hidden * hidden)

    assert grad_check(f, [w1, w2]) < 1e-4


def test_grad_check_catches_wrong_gradient():
    # a deliberately broken function: value of x**2 with gradient of x
    a = Tensor(np.array(1.7), requires_grad=True)

    def f():
        out = Tensor(a.data * a.data, requires_grad=False)
        bad = Tensor(out.data, _parents=(a,),
                     _backward_fn=lambda g: [g * 1.0])
        bad.requires_grad = True
        return bad

    assert grad_check(f, [a]) > 0.1
