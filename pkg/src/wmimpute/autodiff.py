"""A small reverse-mode differentiation engine over numpy arrays.

Only the operations the attention imputer needs are provided. Each op records
its parents and a closure that pushes the output gradient back to them;
:meth:`Tensor.backward` replays the closures in reverse topological order.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (undo numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g):
        if self.requires_grad:
            self.grad = g if self.grad is None else self.grad + g

    @staticmethod
    def _result(data, parents, backward):
        parents = tuple(p for p in parents if p.requires_grad)
        out = Tensor(data, requires_grad=bool(parents), _parents=parents)
        if parents:
            out._backward = backward
        return out

    def backward(self, grad=None):
        order, seen = [], set()

        def visit(t):
            stack = [(t, False)]
            while stack:
                node, done = stack.pop()
                if done:
                    order.append(node)
                    continue
                if id(node) in seen:
                    continue
                seen.add(id(node))
                stack.append((node, True))
                stack.extend((p, False) for p in node._parents)

        visit(self)
        self.grad = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)

        def backward(g):
            self._accumulate(_unbroadcast(g, self.shape))
            other._accumulate(_unbroadcast(g, other.shape))

        return Tensor._result(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        return Tensor._result(-self.data, (self,), lambda g: self._accumulate(-g))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __mul__(self, other):
        other = as_tensor(other)

        def backward(g):
            self._accumulate(_unbroadcast(g * other.data, self.shape))
            other._accumulate(_unbroadcast(g * self.data, other.shape))

        return Tensor._result(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        shared = b.ndim == 2 and a.ndim > 2
        if shared:
            # weight matrix shared across the batch: one 2-D GEMM over folded rows
            a2 = a.reshape(-1, a.shape[-1])
            data = (a2 @ b).reshape(*a.shape[:-1], b.shape[-1])
        else:
            data = a @ b

        def backward(g):
            if shared:
                g2 = g.reshape(-1, g.shape[-1])
                if self.requires_grad:
                    self._accumulate((g2 @ b.T).reshape(a.shape))
                if other.requires_grad:
                    other._accumulate(a2.T @ g2)
                return
            if self.requires_grad:
                self._accumulate(_unbroadcast(g @ np.swapaxes(b, -1, -2), a.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(np.swapaxes(a, -1, -2) @ g, b.shape))

        return Tensor._result(data, (self, other), backward)

    # shape ops ----------------------------------------------------------

    def reshape(self, *shape):
        old = self.shape
        return Tensor._result(self.data.reshape(*shape), (self,), lambda g: self._accumulate(g.reshape(old)))

    def transpose(self, *axes):
        inverse = np.argsort(axes)
        return Tensor._result(
            self.data.transpose(*axes), (self,), lambda g: self._accumulate(g.transpose(*inverse))
        )

    def sum(self):
        return Tensor._result(self.data.sum(), (self,), lambda g: self._accumulate(np.broadcast_to(g, self.shape).copy()))

    # nonlinearities -----------------------------------------------------

    def relu(self):
        active = self.data > 0
        return Tensor._result(self.data * active, (self,), lambda g: self._accumulate(g * active))

    def softmax(self, axis=-1):
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=axis, keepdims=True)

        def backward(g):
            self._accumulate(y * (g - (g * y).sum(axis=axis, keepdims=True)))

        return Tensor._result(y, (self,), backward)

    def layer_norm(self, gamma, beta, eps=1e-6):
        """Normalize over the last axis, then scale by ``gamma`` and shift by ``beta``."""
        x = self.data
        mu = x.mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(x.var(axis=-1, keepdims=True) + eps)
        xhat = (x - mu) * inv

        def backward(g):
            if self.requires_grad:
                gx = g * gamma.data
                self._accumulate(inv * (gx - gx.mean(axis=-1, keepdims=True)
                                        - xhat * (gx * xhat).mean(axis=-1, keepdims=True)))
            gamma._accumulate(_unbroadcast(g * xhat, gamma.shape))
            beta._accumulate(_unbroadcast(g, beta.shape))

        return Tensor._result(xhat * gamma.data + beta.data, (self, gamma, beta), backward)

    def dropout(self, rate, rng, training=True):
        if not training or rate <= 0.0:
            return self
        keep = (rng.random(self.shape) >= rate) / (1.0 - rate)
        return Tensor._result(self.data * keep, (self,), lambda g: self._accumulate(g * keep))

    def masked_mae(self, target, mask):
        """Mean of ``|self - target|`` over cells where ``mask`` is true (0 if none)."""
        mask = np.asarray(mask, dtype=bool)
        count = int(mask.sum())
        if count == 0:
            return Tensor(0.0)
        diff = self.data - target
        value = np.abs(diff[mask]).sum() / count
        return Tensor._result(value, (self,), lambda g: self._accumulate(g * np.sign(diff) * mask / count))


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Adam:
    """Adam with bias-corrected first and second moment estimates.

    Updates a ``{name: ndarray}`` parameter dict in place.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if g is None:
                continue
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            self.params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
