"""Dense numeric kernels, parameter storage, Adam, and gradient checking.

All state is double precision. Randomized routines take either an integer
seed or a ``numpy.random.Generator`` so callers can wire them into named
substreams; identical seeds give bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad


class NumericError(Exception):
    """Raised when an optimization step or training epoch goes non-finite."""


def softmax(v, axis=-1):
    """Stable softmax (max-subtraction); entries positive, sum to 1."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("softmax of an empty vector")
    shifted = v - v.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def cosine(a, b, eps=1e-12):
    """Cosine similarity a.b / max(|a||b|, eps)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"cosine: shape mismatch {a.shape} vs {b.shape}")
    denom = max(np.linalg.norm(a) * np.linalg.norm(b), eps)
    return float(np.dot(a.ravel(), b.ravel()) / denom)


def l2_normalize(v, eps=1e-12):
    """Scale a vector to unit norm; vectors with norm <= eps pass through."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n <= eps:
        return v.copy()
    return v / n


def l2_normalize_rows(m, eps=1e-12):
    """Row-wise unit normalization with the same zero-norm guard."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.sqrt(np.square(m).sum(axis=-1, keepdims=True))
    return np.where(norms > eps, m / np.where(norms > eps, norms, 1.0), m)


def xavier_init(rows, cols, seed):
    """Uniform Glorot initialization on [-sqrt(6/(rows+cols)), +...]."""
    if rows < 1 or cols < 1:
        raise ValueError("xavier_init needs rows, cols >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


@dataclass
class _Slot:
    value: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    weight_decay: float = 0.0


@dataclass
class ParamStore:
    """Named parameter tensors with per-parameter Adam state."""

    _slots: dict = field(default_factory=dict)

    def add(self, name, value, weight_decay=0.0):
        value = np.asarray(value, dtype=np.float64)
        self._slots[name] = _Slot(value, np.zeros_like(value), np.zeros_like(value), 0, weight_decay)

    def __contains__(self, name):
        return name in self._slots

    def __getitem__(self, name):
        return self._slots[name].value

    def names(self):
        return list(self._slots)

    def step_of(self, name):
        return self._slots[name].step

    def leaves(self):
        """Fresh differentiable graph leaves over the current values."""
        return {name: ad.Tensor(slot.value, requires_grad=True) for name, slot in self._slots.items()}

    def snapshot(self):
        return {name: slot.value.copy() for name, slot in self._slots.items()}

    def load(self, snap):
        for name, value in snap.items():
            self._slots[name].value = np.asarray(value, dtype=np.float64).copy()

    def num_values(self):
        return sum(slot.value.size for slot in self._slots.values())


def adam_step(store: ParamStore, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update on every parameter named in ``grads``."""
    for name, g in grads.items():
        slot = store._slots[name]
        g = np.asarray(g, dtype=np.float64)
        if g.shape != slot.value.shape:
            raise ValueError(f"gradient shape mismatch for '{name}'")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter '{name}'")
        if slot.weight_decay:
            g = g + slot.weight_decay * slot.value
        slot.step += 1
        slot.m = beta1 * slot.m + (1.0 - beta1) * g
        slot.v = beta2 * slot.v + (1.0 - beta2) * (g * g)
        m_hat = slot.m / (1.0 - beta1 ** slot.step)
        v_hat = slot.v / (1.0 - beta2 ** slot.step)
        slot.value = slot.value - lr * m_hat / (np.sqrt(v_hat) + eps)


def grad_check(loss_fn, params, delta=1e-5):
    """Max relative error between reverse-mode and central-difference grads.

    ``loss_fn`` maps a dict of named leaf Tensors to a scalar Tensor and must
    be deterministic. ``params`` is a dict of named arrays (or a ParamStore).
    """
    if isinstance(params, ParamStore):
        arrays = params.snapshot()
    else:
        arrays = {name: np.asarray(v, dtype=np.float64).copy() for name, v in params.items()}

    leaves = {name: ad.Tensor(v, requires_grad=True) for name, v in arrays.items()}
    out = loss_fn(leaves)
    ad.backward(out)
    analytic = {
        name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value))
        for name, leaf in leaves.items()
    }

    worst = 0.0
    with ad.no_grad():
        for name, arr in arrays.items():
            flat = arr.ravel()
            an_flat = analytic[name].ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + delta
                f_plus = float(loss_fn({n: ad.Tensor(a) for n, a in arrays.items()}).value)
                flat[i] = orig - delta
                f_minus = float(loss_fn({n: ad.Tensor(a) for n, a in arrays.items()}).value)
                flat[i] = orig
                cd = (f_plus - f_minus) / (2.0 * delta)
                rel = abs(an_flat[i] - cd) / max(abs(an_flat[i]), abs(cd), 1e-8)
                worst = max(worst, rel)
    return worst
