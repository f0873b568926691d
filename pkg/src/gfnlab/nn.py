"""Dense tensor kernels with hand-written reverse-mode gradients.

Layers cache whatever their backward pass needs during forward. Training
normally runs in float32; gradient checks rebuild the same layers in float64
and compare against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Parameter:
    """A trainable array with its gradient buffer and Adam state."""

    name: str
    value: np.ndarray
    grad: np.ndarray = None
    m: np.ndarray = None
    v: np.ndarray = None
    step: int = 0

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.m is None:
            self.m = np.zeros_like(self.value)
        if self.v is None:
            self.v = np.zeros_like(self.value)


class ParameterSet:
    """Ordered, name-addressed collection of parameters."""

    def __init__(self, params=()):
        self._params: dict[str, Parameter] = {}
        for p in params:
            self.add(p)

    def add(self, param: Parameter) -> Parameter:
        if param.name in self._params:
            raise ValueError(f"duplicate parameter name {param.name!r}")
        self._params[param.name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self) -> None:
        for p in self:
            p.grad[...] = 0

    def total_size(self) -> int:
        return sum(p.value.size for p in self)


def adam_step(
    params: ParameterSet,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update per parameter; gradients are zeroed after."""
    for p in params:
        p.step += 1
        p.m[...] = beta1 * p.m + (1 - beta1) * p.grad
        p.v[...] = beta2 * p.v + (1 - beta2) * p.grad**2
        m_hat = p.m / (1 - beta1**p.step)
        v_hat = p.v / (1 - beta2**p.step)
        p.value[...] -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.grad[...] = 0


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


class Affine:
    """x @ W + b with exact input/weight/bias gradients."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 dtype=np.float32, name: str = "affine"):
        self.weight = Parameter(f"{name}.weight", glorot_uniform(rng, in_dim, out_dim, dtype))
        self.bias = Parameter(f"{name}.bias", np.zeros(out_dim, dtype=dtype))
        self._x = None

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if x.shape[1] != self.weight.value.shape[0]:
            raise ValueError(
                f"affine expects {self.weight.value.shape[0]} input columns, got {x.shape[1]}"
            )
        self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        self.weight.grad += self._x.T @ grad_out
        self.bias.grad += grad_out.sum(axis=0)
        return grad_out @ self.weight.value.T


class ReLU:
    """Elementwise max(0, x); the subgradient at exactly 0 is 0."""

    def __init__(self):
        self._mask = None

    def parameters(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * self._mask


class BatchNorm:
    """Per-feature batch normalization (population-variance convention).

    Train mode normalizes by batch statistics and folds them into the running
    estimates with the configured momentum; eval mode uses the running
    statistics only. Backward implements the full gradient including the
    terms through the batch mean and variance.
    """

    def __init__(self, dim: int, rng=None, momentum: float = 0.1, eps: float = 1e-5,
                 dtype=np.float32, name: str = "bn"):
        self.gamma = Parameter(f"{name}.gamma", np.ones(dim, dtype=dtype))
        self.beta = Parameter(f"{name}.beta", np.zeros(dim, dtype=dtype))
        self.running_mean = np.zeros(dim, dtype=dtype)
        self.running_var = np.ones(dim, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self._cache = None

    def parameters(self) -> list[Parameter]:
        return [self.gamma, self.beta]

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if train:
            if x.shape[0] < 2:
                raise ValueError("batch norm needs at least 2 rows in train mode")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean[...] = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var[...] = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std
        if train:
            self._cache = (x_hat, inv_std, x.shape[0])
        return self.gamma.value * x_hat + self.beta.value

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward requires a preceding train-mode forward")
        x_hat, inv_std, n = self._cache
        self.gamma.grad += (grad_out * x_hat).sum(axis=0)
        self.beta.grad += grad_out.sum(axis=0)
        g_hat = grad_out * self.gamma.value
        return inv_std / n * (
            n * g_hat - g_hat.sum(axis=0) - x_hat * (g_hat * x_hat).sum(axis=0)
        )


@dataclass
class SegmentIndex:
    """Maps each row of a stacked node matrix to its graph within a batch."""

    graph_ids: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        self.graph_ids = np.ascontiguousarray(self.graph_ids, dtype=np.int64)
        self.offsets = np.ascontiguousarray(self.offsets, dtype=np.int64)
        if (np.diff(self.graph_ids) < 0).any():
            raise ValueError("segment ids must be nondecreasing")
        if self.offsets[0] != 0 or self.offsets[-1] != self.graph_ids.size:
            raise ValueError("offsets must partition the row range")

    @classmethod
    def from_sizes(cls, sizes) -> "SegmentIndex":
        sizes = np.asarray(sizes, dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        return cls(np.repeat(np.arange(sizes.size), sizes), offsets)

    @property
    def num_segments(self) -> int:
        return int(self.offsets.size) - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)


def segment_sum(x: np.ndarray, seg: SegmentIndex) -> np.ndarray:
    """Row g of the output is the sum of x's rows belonging to graph g."""
    if x.shape[0] != seg.graph_ids.size:
        raise ValueError("segment index does not cover all rows")
    out = np.zeros((seg.num_segments, x.shape[1]), dtype=x.dtype)
    nonempty = np.flatnonzero(seg.sizes > 0)
    if x.shape[0]:
        out[nonempty] = np.add.reduceat(x, seg.offsets[:-1][nonempty], axis=0)
    return out


def segment_sum_backward(grad_out: np.ndarray, seg: SegmentIndex) -> np.ndarray:
    """Broadcast each graph's pooled gradient back to its member rows."""
    return np.repeat(grad_out, seg.sizes, axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood and its gradient w.r.t. the logits."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("label out of range")
    probs = softmax(logits)
    n = logits.shape[0]
    eps = np.finfo(probs.dtype).tiny
    loss = float(-np.log(np.maximum(probs[np.arange(n), labels], eps)).mean())
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1
    grad /= n
    return loss, grad


def finite_difference_grad(loss_fn, params: list[np.ndarray], h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient estimate of ``loss_fn()`` w.r.t. each array.

    The arrays are perturbed in place and restored; evaluate at float64 for
    meaningful comparisons.
    """
    grads = []
    for arr in params:
        g = np.zeros(arr.shape, dtype=np.float64)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn()
            flat[i] = orig - h
            f_minus = loss_fn()
            flat[i] = orig
            g.reshape(-1)[i] = (f_plus - f_minus) / (2 * h)
        grads.append(g)
    return grads
