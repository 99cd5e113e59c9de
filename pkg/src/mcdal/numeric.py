"""Dense-array substrate: validated matrix ops, seeded RNG, LR schedule.

Matrices are C-contiguous float64 2-D numpy arrays throughout the package.
The functions here are the public, validated entry points; hot paths inside
model/trainer call the backend kernels directly with shapes guaranteed by
construction.
"""

import zlib
from dataclasses import dataclass

import numpy as np

from . import backend as K

DESCENT = -1.0
ASCENT = 1.0


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


def as_matrix(a, name="matrix"):
    """Coerce to a C-contiguous float64 2-D array; reject non-finite entries."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def _finite_result(out, op):
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{op}: result overflowed to non-finite values")
    return out


def matmul(a, b):
    """Matrix product with an explicit shape check."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    return _finite_result(K.matmul(a, b), "matmul")


def softmax_rows(logits):
    """Row-wise softmax (max-shifted); rows sum to 1 within 1e-12."""
    return K.softmax_rows(as_matrix(logits, "logits"))


def sgd_step(params, grads, rate, direction=DESCENT):
    """One plain-SGD update: params + direction * rate * grads.

    direction is DESCENT (-1) or ASCENT (+1); rate must be positive.
    """
    params = as_matrix(params, "params")
    grads = as_matrix(grads, "grads")
    if params.shape != grads.shape:
        raise ShapeError(f"sgd_step: params {params.shape} vs grads {grads.shape}")
    if rate <= 0.0:
        raise ValueError(f"sgd_step: rate must be positive, got {rate}")
    if direction not in (DESCENT, ASCENT):
        raise ValueError(f"sgd_step: direction must be +-1, got {direction}")
    return _finite_result(K.scaled_add(params, direction * rate, grads), "sgd_step")


def shuffle_indices(n, rng):
    """Uniform permutation of 0..n-1 drawn from rng; deterministic per seed."""
    if n < 0:
        raise ValueError(f"shuffle_indices: n must be >= 0, got {n}")
    return rng.permutation(n)


class Rng:
    """Seeded random stream (PCG64) passed explicitly; never global state.

    ``split(*tags)`` derives an independent child stream from string/int
    tags, so experiment components (data split, per-stage model init, ...)
    each get their own reproducible stream. ``clone()`` copies the current
    state so a branch can be replayed.
    """

    def __init__(self, seed, _sequence=None):
        self.seed = int(seed)
        self._seq = _sequence if _sequence is not None else np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    def split(self, *tags):
        key = tuple(
            zlib.crc32(t.encode()) if isinstance(t, str) else int(t) for t in tags
        )
        child = np.random.SeedSequence(
            entropy=self._seq.entropy, spawn_key=self._seq.spawn_key + key
        )
        return Rng(self.seed, _sequence=child)

    def clone(self):
        other = Rng(self.seed, _sequence=self._seq)
        other._gen.bit_generator.state = self._gen.bit_generator.state
        return other

    def permutation(self, n):
        return self._gen.permutation(n).astype(np.int64)

    def uniform(self, low, high, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc, scale, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size)

    def __repr__(self):
        return f"Rng(seed={self.seed}, key={self._seq.spawn_key})"


@dataclass(frozen=True)
class LrSchedule:
    """Multi-step schedule: rate drops by `decay` at each milestone fraction.

    rate(e) = base_rate * decay ** #{m in milestones : m * max_epochs <= e}
    for 0-based epoch index e.
    """

    base_rate: float
    milestones: tuple = (0.3, 0.6, 0.8)
    decay: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "milestones", tuple(float(m) for m in self.milestones))
        if self.base_rate <= 0.0:
            raise ValueError(f"base_rate must be positive, got {self.base_rate}")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"decay must be in (0, 1], got {self.decay}")
        ms = self.milestones
        if any(not 0.0 < m < 1.0 for m in ms) or any(a >= b for a, b in zip(ms, ms[1:])):
            raise ValueError(f"milestones must be strictly increasing in (0,1), got {ms}")

    def rate(self, epoch, max_epochs):
        crossed = sum(1 for m in self.milestones if m * max_epochs <= epoch)
        return self.base_rate * self.decay**crossed
