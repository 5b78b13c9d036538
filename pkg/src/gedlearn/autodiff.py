"""Minimal reverse-mode automatic differentiation on numpy arrays.

Every value is a float64 Tensor. Each forward op records a closure that
routes the output gradient back to its inputs; backward() walks the recorded
tape in reverse topological order. The tape is dynamic: it is rebuilt on
every forward pass, so shapes may change freely between calls.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, _parents=(), _backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward_fn = _backward_fn

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def t(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcasted gradient back down to the original shape."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _make(data, parents, backward_fn) -> Tensor:
    tracked = tuple(p for p in parents if p.requires_grad)
    if not tracked:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=parents, _backward_fn=backward_fn)


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward_fn(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def backward_fn(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward_fn(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data / b.data

    def backward_fn(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data @ b.data

    def backward_fn(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(out_data, (a, b), backward_fn)


def transpose(a) -> Tensor:
    a = as_tensor(a)

    def backward_fn(g):
        _accum(a, g.T)

    return _make(a.data.T, (a,), backward_fn)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.data.shape

    def backward_fn(g):
        _accum(a, g.reshape(old))

    return _make(a.data.reshape(shape), (a,), backward_fn)


def concat(tensors, axis=0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in ts]
    out_data = np.concatenate([t.data for t in ts], axis=axis)

    def backward_fn(g):
        offset = 0
        for t, size in zip(ts, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offset, offset + size)
            _accum(t, g[tuple(idx)])
            offset += size

    return _make(out_data, tuple(ts), backward_fn)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward_fn(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg, a.data.shape).copy())

    return _make(out_data, (a,), backward_fn)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def log(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.log(a.data)

    def backward_fn(g):
        _accum(a, g / a.data)

    return _make(out_data, (a,), backward_fn)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def backward_fn(g):
        _accum(a, g * out_data)

    return _make(out_data, (a,), backward_fn)


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    out_data = a.data ** exponent

    def backward_fn(g):
        _accum(a, g * exponent * a.data ** (exponent - 1))

    return _make(out_data, (a,), backward_fn)


def sqrt(a) -> Tensor:
    return power(a, 0.5)


def relu(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.maximum(a.data, 0.0)

    def backward_fn(g):
        _accum(a, g * (a.data > 0.0))

    return _make(out_data, (a,), backward_fn)


def softplus(a, beta: float = 1.0) -> Tensor:
    """(1/beta) * log(1 + exp(beta * x)), computed without overflow."""
    a = as_tensor(a)
    z = beta * a.data
    out_data = (np.logaddexp(0.0, z)) / beta

    def backward_fn(g):
        # derivative is sigmoid(beta * x)
        _accum(a, g * _stable_sigmoid(z))

    return _make(out_data, (a,), backward_fn)


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    # exp is only ever taken of a non-positive argument
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out_data = _stable_sigmoid(a.data)

    def backward_fn(g):
        _accum(a, g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward_fn)


def take_rows(a, indices) -> Tensor:
    """Gather rows of a 2-D tensor; backward scatter-adds into the table."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)
    out_data = a.data[idx]

    def backward_fn(g):
        if not a.requires_grad:
            return
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        _accum(a, buf)

    return _make(out_data, (a,), backward_fn)


def huber(residual, delta: float = 1.0) -> Tensor:
    """Elementwise Huber penalty of a residual: quadratic inside delta, linear outside."""
    a = as_tensor(residual)
    x = a.data
    absx = np.abs(x)
    out_data = np.where(absx <= delta, 0.5 * x * x, delta * (absx - 0.5 * delta))

    def backward_fn(g):
        _accum(a, g * np.clip(x, -delta, delta))

    return _make(out_data, (a,), backward_fn)


def smooth_l1(pred, target) -> Tensor:
    """Mean smooth-L1 (Huber with delta 1) between predictions and targets."""
    return tmean(huber(sub(pred, target), delta=1.0))


def logsumexp(a, axis, keepdims=False) -> Tensor:
    """Stable log-sum-exp along an axis; the max shift is treated as constant."""
    a = as_tensor(a)
    shift = np.max(a.data, axis=axis, keepdims=True)
    shifted = sub(a, Tensor(shift))
    s = log(tsum(exp(shifted), axis=axis, keepdims=True))
    out = add(s, Tensor(shift))
    if not keepdims:
        out = reshape(out, np.squeeze(out.data, axis=axis).shape)
    return out


def softmax(a, axis=-1, temperature: float = 1.0) -> Tensor:
    a = as_tensor(a)
    scaled = mul(a, 1.0 / temperature)
    return exp(sub(scaled, logsumexp(scaled, axis=axis, keepdims=True)))


def layer_norm(x, gamma, beta, eps: float = 1e-8) -> Tensor:
    """Per-row standardization followed by an affine map."""
    mu = tmean(x, axis=1, keepdims=True)
    centered = sub(x, mu)
    var = tmean(mul(centered, centered), axis=1, keepdims=True)
    normed = div(centered, sqrt(add(var, eps)))
    return add(mul(normed, gamma), beta)


def normalize_rows(x, eps: float = 1e-24) -> Tensor:
    """Project each row onto the unit sphere."""
    sq = tsum(mul(x, x), axis=1, keepdims=True)
    return div(x, sqrt(add(sq, eps)))


def backward(loss: Tensor) -> None:
    """Populate grad buffers of every tracked tensor reachable from loss.

    Gradients accumulate into leaf buffers; callers zero them explicitly
    (usually through the optimizer) between steps.
    """
    if loss.data.size != 1:
        raise ValueError("backward requires a scalar loss")
    if not loss.requires_grad:
        return

    topo: list[Tensor] = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    # interior grads are transient per call; leaf grads accumulate
    for node in topo:
        if node._parents:
            node.grad = np.zeros_like(node.data)
        elif node.grad is None:
            node.grad = np.zeros_like(node.data)
    loss.grad = np.ones_like(loss.data)

    for node in reversed(topo):
        if node._backward_fn is not None:
            node._backward_fn(node.grad)


class Adam:
    """Standard Adam optimizer over a list of parameter tensors."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [p for p in params if p.requires_grad]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise RuntimeError("adam step before any backward populated this grad")
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1 ** t)
            v_hat = self.v[i] / (1 - self.beta2 ** t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def grad_check(f, params, h: float = 1e-5) -> float:
    """Compare autodiff gradients of f() against central finite differences.

    f is a zero-argument callable returning a scalar Tensor computed from
    params. Returns the max over all coordinates of
    |autodiff - central| / (|central| + 1e-8).

    When a coordinate's slope is many orders below the function value the
    difference (up - down) sits in float64 roundoff at the default step, so
    the step is widened (up to 1e-3) until the difference carries enough
    significant digits to be a trustworthy reference.
    """
    for p in params:
        p.zero_grad()
    loss = f()
    backward(loss)
    grads = [p.grad.copy() for p in params]

    worst = 0.0
    for p, auto in zip(params, grads):
        flat = p.data.reshape(-1)
        auto_flat = auto.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            step = h
            while True:
                flat[k] = orig + step
                up = f().item()
                flat[k] = orig - step
                down = f().item()
                flat[k] = orig
                noise_floor = 1e-9 * max(1.0, abs(up), abs(down))
                if abs(up - down) >= noise_floor or step >= 1e-3:
                    break
                step *= 10.0
            central = (up - down) / (2 * step)
            err = abs(auto_flat[k] - central) / (abs(central) + 1e-8)
            worst = max(worst, err)
    return worst
