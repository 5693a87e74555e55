"""Disk and square domains, their boundary parametrizations and layer sequences.

A disk is parametrized by the polar angle on ``[0, 2*pi)``.  A square of
half-side ``a`` is parametrized counter-clockwise on ``[0, 4)`` starting at the
lower-left corner, each unit of the parameter covering one side, so the
arclength speed is ``2a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

KINDS = ("disk", "square")

# relative slack used when deciding whether a point lies in a closed domain
_CLOSURE_SLACK = 1e-12


@dataclass(frozen=True)
class DomainSpec:
    """A disk (``extent`` = radius) or axis-aligned square (``extent`` = half-side)."""

    kind: str
    center: tuple[float, float] = (0.0, 0.0)
    extent: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        center = tuple(float(c) for c in self.center)
        if len(center) != 2 or not all(math.isfinite(c) for c in center):
            raise ConfigurationError(f"center must be a finite 2-vector, got {self.center!r}")
        object.__setattr__(self, "center", center)
        extent = float(self.extent)
        if not (extent > 0.0 and math.isfinite(extent)):
            raise ConfigurationError(f"extent must be positive, got {self.extent!r}")
        object.__setattr__(self, "extent", extent)

    @classmethod
    def disk(cls, radius: float, center=(0.0, 0.0)) -> "DomainSpec":
        return cls("disk", center, radius)

    @classmethod
    def square(cls, half_side: float, center=(0.0, 0.0)) -> "DomainSpec":
        return cls("square", center, half_side)

    @property
    def period(self) -> float:
        return 2.0 * math.pi if self.kind == "disk" else 4.0

    @property
    def area(self) -> float:
        if self.kind == "disk":
            return math.pi * self.extent**2
        return 4.0 * self.extent**2

    @property
    def perimeter(self) -> float:
        if self.kind == "disk":
            return 2.0 * math.pi * self.extent
        return 8.0 * self.extent

    def with_extent(self, extent: float) -> "DomainSpec":
        return DomainSpec(self.kind, self.center, extent)

    def gauge(self, points) -> np.ndarray:
        """Distance from the center in the domain's own norm (Euclidean or max)."""
        p = np.asarray(points, dtype=float)
        dx = p[..., 0] - self.center[0]
        dy = p[..., 1] - self.center[1]
        if self.kind == "disk":
            return np.hypot(dx, dy)
        return np.maximum(np.abs(dx), np.abs(dy))

    def contains(self, points, closed: bool = True) -> np.ndarray:
        g = self.gauge(points)
        if closed:
            return g <= self.extent * (1.0 + _CLOSURE_SLACK)
        return g < self.extent

    def require_inside(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        inside = self.contains(p)
        if not np.all(inside):
            bad = p.reshape(-1, 2)[~inside.reshape(-1)][0]
            raise DomainError(f"point {tuple(bad)} lies outside {self}")
        return p


def _gamma(z):
    return np.maximum(-0.5, np.minimum(0.5, 1.0 - np.abs(z)))


def boundary_point(domain: DomainSpec, t) -> np.ndarray:
    """Map boundary parameter(s) ``t`` to point(s) on the boundary of ``domain``.

    ``t`` must already be reduced to ``[0, period)``; the result has shape
    ``np.shape(t) + (2,)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t >= domain.period):
        raise DomainError(f"boundary parameter outside [0, {domain.period:g})")
    return _boundary_point(domain, t)


def _boundary_point(domain: DomainSpec, t: np.ndarray) -> np.ndarray:
    cx, cy = domain.center
    a = domain.extent
    if domain.kind == "disk":
        return np.stack([cx + a * np.cos(t), cy + a * np.sin(t)], axis=-1)
    # the closed form is 4-periodic in t up to the clamp, so fold first
    t = np.mod(t, 4.0)
    return np.stack([cx + 2 * a * _gamma(t - 1.5), cy + 2 * a * _gamma(t - 2.5)], axis=-1)


def wrap_parameter(domain: DomainSpec, t) -> np.ndarray:
    """Reduce ``t`` to ``[0, period)``."""
    r = np.mod(np.asarray(t, dtype=float), domain.period)
    # np.mod of a tiny negative number rounds up to the period itself
    return np.where(r >= domain.period, 0.0, r)


@dataclass(frozen=True)
class LayerSystem:
    """Nested domains ``layers[0]`` (outermost) down to ``layers[L]`` = K."""

    layers: tuple[DomainSpec, ...]
    L: int
    dist_K_D: float
    radii_offsets: tuple[float, ...] = field(repr=False, default=())

    @property
    def K(self) -> DomainSpec:
        return self.layers[-1]

    @property
    def shell_width(self) -> float:
        return self.dist_K_D / self.L

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, j: int) -> DomainSpec:
        return self.layers[j]

    def extents(self) -> list[float]:
        return [d.extent for d in self.layers]


def make_layers(K: DomainSpec, D: DomainSpec, L: int) -> LayerSystem:
    """Build the equal-width shell sequence between ``D`` and ``K``.

    Layer ``j`` has extent ``extent(K) + (1 - j/L) * dist(K, dD)`` so that
    ``layers[0]`` has the extent of ``D`` and ``layers[L]`` is ``K`` itself.
    """
    if isinstance(L, bool) or not isinstance(L, (int, np.integer)) or L < 1:
        raise ConfigurationError(f"layer count must be a positive integer, got {L!r}")
    if K.kind != D.kind:
        raise ConfigurationError(f"K is a {K.kind} but D is a {D.kind}")
    scale = max(K.extent, D.extent)
    if math.dist(K.center, D.center) > 1e-12 * scale:
        raise ConfigurationError("K and D must be concentric")
    if not K.extent < D.extent:
        raise ConfigurationError("K must be strictly smaller than D")
    L = int(L)
    dist = D.extent - K.extent
    offsets = tuple((1.0 - j / L) * dist for j in range(L + 1))
    layers = tuple(K.with_extent(K.extent + rho) for rho in offsets[:-1]) + (K,)
    return LayerSystem(layers=layers, L=L, dist_K_D=dist, radii_offsets=offsets)


def polar_coordinates(domain: DomainSpec, points: Sequence) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(points, dtype=float)
    dx = p[..., 0] - domain.center[0]
    dy = p[..., 1] - domain.center[1]
    return np.hypot(dx, dy), np.arctan2(dy, dx)
