"""Piecewise-linear hat functions on a periodic boundary parameter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .geometry import DomainSpec


@dataclass(frozen=True)
class BoundaryBasisSpec:
    """``n`` hats of width ``2*omega`` with node ``i`` at ``i*omega + shift``."""

    n: int
    period: float
    shift: float = 0.0

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"hat count must be an integer >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if not self.period > 0:
            raise ConfigurationError("period must be positive")
        if not 0.0 <= self.shift < self.period:
            raise ConfigurationError(f"shift must lie in [0, {self.period:g})")

    @classmethod
    def for_domain(cls, domain: DomainSpec, n: int, shift: float = 0.0) -> "BoundaryBasisSpec":
        return cls(n=n, period=domain.period, shift=shift)

    @property
    def omega(self) -> float:
        return self.period / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.mod(np.arange(self.n) * self.omega + self.shift, self.period)

    def support(self, i: int) -> tuple[float, float]:
        """Support of hat ``i`` as an interval that may extend below 0."""
        node = self.nodes[i]
        return node - self.omega, node + self.omega


def layer_shift(omega: float, s: int) -> float:
    """Node offset of layer ``s`` (1-based): odd layers are shifted by omega/2."""
    return (s % 2) * omega / 2


def _cell(spec: BoundaryBasisSpec, t):
    """Split ``t`` into the index of the node at or below it and the fraction past it."""
    u = np.mod((np.asarray(t, dtype=float) - spec.shift) / spec.omega, spec.n)
    k = np.floor(u)
    frac = u - k
    k = k.astype(np.int64) % spec.n
    return k, frac


def hat_value(spec: BoundaryBasisSpec, i: int, t) -> np.ndarray:
    if isinstance(i, bool) or not 0 <= i < spec.n:
        raise DomainError(f"hat index {i} outside 0..{spec.n - 1}")
    k, frac = _cell(spec, t)
    out = np.where(k == i, 1.0 - frac, 0.0)
    return out + np.where((k + 1) % spec.n == i, frac, 0.0)


def hat_values(spec: BoundaryBasisSpec, t) -> np.ndarray:
    """All hats at once; shape ``np.shape(t) + (n,)``."""
    k, frac = _cell(spec, t)
    out = np.zeros(np.shape(k) + (spec.n,))
    np.put_along_axis(out, k[..., None], (1.0 - frac)[..., None], axis=-1)
    np.put_along_axis(out, ((k + 1) % spec.n)[..., None], frac[..., None], axis=-1)
    return out


def hat_sum(spec: BoundaryBasisSpec, t) -> np.ndarray:
    return hat_values(spec, t).sum(axis=-1)


@dataclass(frozen=True)
class TrigBasisSpec:
    """Span of ``1, cos(j t), sin(j t)`` for ``j = 1..n-1``."""

    n: int

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"frequency count must be a positive integer, got {self.n!r}")

    @property
    def dimension(self) -> int:
        return 2 * self.n - 1


def trig_values(spec: TrigBasisSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)[..., None]
    j = np.arange(1, spec.n)
    return np.concatenate(
        [np.ones(theta.shape), np.cos(j * theta), np.sin(j * theta)], axis=-1
    )


def hat_count_for_layers(L: int, c: int = 2) -> int:
    """Default per-layer hat count ``c * L``."""
    return int(math.ceil(c * L))
