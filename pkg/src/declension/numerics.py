"""Small deterministic numerical kernel.

Tensors are plain float64 numpy arrays (2-D for matrices, 1-D for vectors);
the fixed-order loops that matter for reproducibility live in
:mod:`declension.kernels`.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import kernels

MASK64 = (1 << 64) - 1
PROB_FLOOR = 1e-12


class Prng:
    """SplitMix64 stream.  Single consumer; do not share across threads."""

    GAMMA = 0x9E3779B97F4A7C15

    def __init__(self, seed: int = 0):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = (1 << 64) % n
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, walking from the end."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def _as_vector(v) -> np.ndarray:
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim == 2 and v.shape[1] == 1:
        v = v[:, 0]
    return v


def matvec(m, v) -> np.ndarray:
    """Matrix-vector product with a fixed row-major accumulation order."""
    m = np.ascontiguousarray(m, dtype=np.float64)
    vec = _as_vector(v)
    if m.ndim != 2 or vec.ndim != 1 or m.shape[1] != vec.shape[0]:
        raise ValueError(f"matvec shape mismatch: matrix {m.shape} vs vector {np.shape(v)}")
    if m.shape[0] == 0:
        return np.zeros(0)
    if m.shape[1] == 0:
        return np.zeros(m.shape[0])
    return kernels.matvec(m, vec)


def softmax(logits) -> np.ndarray:
    z = _as_vector(logits)
    if z.size == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(z - z.max())
    return e / e.sum()


def cross_entropy(probs, target: int) -> float:
    p = _as_vector(probs)
    if not 0 <= target < p.shape[0]:
        raise IndexError(f"target {target} out of range for {p.shape[0]} classes")
    return -math.log(max(float(p[target]), PROB_FLOOR))


def init_uniform(prng: Prng, dims, fan_in: int) -> np.ndarray:
    """I.i.d. uniform entries in [-1/sqrt(fan_in), 1/sqrt(fan_in)], row-major draws."""
    if fan_in < 1:
        raise ValueError("fan_in must be >= 1")
    dims = (dims,) if isinstance(dims, int) else tuple(dims)
    bound = 1.0 / math.sqrt(fan_in)
    n = math.prod(dims)
    flat = [(2.0 * prng.next_float() - 1.0) * bound for _ in range(n)]
    return np.array(flat, dtype=np.float64).reshape(dims)


def finite_diff_grad(f: Callable[[np.ndarray], float], params: np.ndarray,
                     eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``f`` at ``params``.

    ``params`` is perturbed in place and restored after each coordinate, so
    ``f`` may close over the same array.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    grad = np.zeros_like(params, dtype=np.float64)
    flat = params.reshape(-1)
    out = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        f_plus = f(params)
        flat[k] = orig - eps
        f_minus = f(params)
        flat[k] = orig
        out[k] = (f_plus - f_minus) / (2.0 * eps)
    return grad
