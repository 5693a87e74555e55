"""Harmonic extension of boundary data into a disk or square.

Three representations are provided:

* ``GreenField`` evaluates the Poisson integral of the boundary data on a
  disk by adaptive quadrature at every evaluation point.
* ``MfsField`` is a combination of fundamental solutions
  ``S(x) = log|x| / (2 pi)`` centred outside the domain, fitted to the
  boundary data at collocation points by least squares.
* ``TrigField`` is the closed-form extension of a trigonometric polynomial
  on a disk.

``ExtendedBasis`` groups the extensions of all hats of one layer so they
can be evaluated together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .basis import BoundaryBasisSpec, TrigBasisSpec, hat_value, hat_values
from .errors import (
    ConfigurationError,
    FitError,
    NearBoundaryError,
    UnsupportedOperationError,
)
from .geometry import DomainSpec, _boundary_point, polar_coordinates
from .quadrature import DomainRule, QuadConfig, integrate_1d_batch

TWO_PI = 2.0 * math.pi

# points per chunk when forming point-by-source kernel matrices
_CHUNK = 16384


def fundamental_solution(points, sources) -> np.ndarray:
    """Matrix ``S(points[k] - sources[j])`` with ``S(x) = log|x| / (2 pi)``."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    q = np.asarray(sources, dtype=float)
    out = np.empty((p.shape[0], q.shape[0]))
    for start in range(0, p.shape[0], _CHUNK):
        blk = p[start:start + _CHUNK]
        dx = blk[:, 0, None] - q[None, :, 0]
        dy = blk[:, 1, None] - q[None, :, 1]
        out[start:start + _CHUNK] = np.log(dx * dx + dy * dy) / (4.0 * math.pi)
    return out


def _mfs_apply(points, sources, coeffs) -> np.ndarray:
    """``fundamental_solution(points, sources) @ coeffs`` without the full matrix."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    coeffs = np.asarray(coeffs, dtype=float)
    out = np.empty((p.shape[0],) + coeffs.shape[1:])
    for start in range(0, p.shape[0], _CHUNK):
        out[start:start + _CHUNK] = fundamental_solution(p[start:start + _CHUNK], sources) @ coeffs
    return out


class HarmonicField:
    """Common interface: ``evaluate(points)`` and ``gradient(points)``."""

    backend: str
    domain: DomainSpec

    def evaluate(self, points) -> np.ndarray:
        p = self._check(points)
        return self._values(p.reshape(-1, 2)).reshape(p.shape[:-1])

    def gradient(self, points) -> np.ndarray:
        p = self._check(points)
        return self._gradient(p.reshape(-1, 2)).reshape(p.shape)

    def _check(self, points) -> np.ndarray:
        return self.domain.require_inside(points)

    def _values(self, p):
        raise NotImplementedError

    def _gradient(self, p):
        raise UnsupportedOperationError(f"{self.backend} fields provide no gradient")


@dataclass(frozen=True, eq=False)
class GreenField(HarmonicField):
    """Poisson integral of ``boundary(theta)`` over a disk.

    ``support`` (an interval in theta, possibly starting below 0) restricts
    the integration when the data vanish elsewhere; ``kinks`` are angles where
    the data are not smooth and seed the initial partition.
    """

    domain: DomainSpec
    boundary: Callable[[np.ndarray], np.ndarray]
    quad: QuadConfig
    support: tuple[float, float] | None = None
    kinks: tuple[float, ...] = ()
    margin: float = 0.999
    backend: str = field(default="green", init=False)

    def _check(self, points):
        p = super()._check(points)
        r, _ = polar_coordinates(self.domain, p)
        if np.any(r > self.margin * self.domain.extent):
            raise NearBoundaryError(
                f"Poisson integral not evaluated beyond r = {self.margin} * radius"
            )
        return p

    def _values(self, p):
        a = self.domain.extent
        r, theta = polar_coordinates(self.domain, p)
        m = r.size
        if self.support is not None:
            lo0, hi0 = self.support
            owner, lo, hi = _split_intervals(
                np.full(m, lo0), np.full(m, hi0), [theta, *self.kinks], TWO_PI
            )
        else:
            owner, lo, hi = _split_intervals(
                theta - math.pi, theta + math.pi, [theta, *self.kinks], TWO_PI
            )
        num = a * a - r * r
        g = self.boundary

        def integrand(x, own):
            rr = r[own][:, None]
            kernel = num[own][:, None] / (a * a + rr * rr - 2 * a * rr * np.cos(theta[own][:, None] - x))
            return kernel * g(x) / TWO_PI

        out = np.empty(m)
        step = _CHUNK // 4
        bounds = np.searchsorted(owner, np.arange(0, m + step, step))
        for k, start in enumerate(range(0, m, step)):
            sl = slice(bounds[k], bounds[k + 1])
            count = min(step, m - start)

            def local(x, own, _start=start):
                return integrand(x, own + _start)

            v, _, _ = integrate_1d_batch(local, owner[sl] - start, lo[sl], hi[sl], count, self.quad)
            out[start:start + count] = v
        return out


def _split_intervals(lo, hi, cuts, period):
    """Split ``[lo[k], hi[k]]`` at every periodic image of the cut angles inside it."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    m = lo.size
    pieces = [lo[:, None], hi[:, None]]
    for c in cuts:
        c = np.broadcast_to(np.asarray(c, float), (m,))
        # the image of c closest above lo
        img = lo + np.mod(c - lo, period)
        for shift in (0.0, period):
            cand = img + shift
            inside = (cand > lo) & (cand < hi)
            pieces.append(np.where(inside, cand, lo)[:, None])
    edges = np.sort(np.concatenate(pieces, axis=1), axis=1)
    a, b = edges[:, :-1], edges[:, 1:]
    owner = np.repeat(np.arange(m), a.shape[1])
    a, b = a.ravel(), b.ravel()
    keep = b > a
    return owner[keep], a[keep], b[keep]


@dataclass(frozen=True, eq=False)
class MfsField(HarmonicField):
    """``sum_j coeffs[j] * S(x - sources[j])``."""

    domain: DomainSpec
    sources: np.ndarray
    coeffs: np.ndarray
    residual_rms: float = 0.0
    condition: float = 1.0
    backend: str = field(default="mfs", init=False)

    def _values(self, p):
        return _mfs_apply(p, self.sources, self.coeffs)

    def _gradient(self, p):
        out = np.zeros_like(p)
        for start in range(0, p.shape[0], _CHUNK):
            blk = p[start:start + _CHUNK]
            dx = blk[:, 0, None] - self.sources[None, :, 0]
            dy = blk[:, 1, None] - self.sources[None, :, 1]
            r2 = TWO_PI * (dx * dx + dy * dy)
            out[start:start + _CHUNK, 0] = (dx / r2) @ self.coeffs
            out[start:start + _CHUNK, 1] = (dy / r2) @ self.coeffs
        return out


@dataclass(frozen=True)
class TrigCoefficients:
    """``a0 + sum_j a[j-1] cos(j t) + b[j-1] sin(j t)``, ``j = 1..n-1``."""

    a0: float
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape != b.shape or a.ndim != 1:
            raise ConfigurationError("cosine and sine coefficient arrays must match")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a0", float(self.a0))

    @property
    def spec(self) -> TrigBasisSpec:
        return TrigBasisSpec(self.a.size + 1)

    @property
    def n(self) -> int:
        return self.a.size + 1

    def __len__(self):
        return 2 * self.a.size + 1

    @classmethod
    def zeros(cls, n: int) -> "TrigCoefficients":
        return cls(0.0, np.zeros(n - 1), np.zeros(n - 1))

    def boundary(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        j = np.arange(1, self.n)
        ang = theta[..., None] * j
        return self.a0 + np.cos(ang) @ self.a + np.sin(ang) @ self.b


@dataclass(frozen=True, eq=False)
class TrigField(HarmonicField):
    """``Re F(z)`` with ``F(z) = a0 + sum_j (a_j - i b_j) (z / radius)^j``."""

    domain: DomainSpec
    coeffs: TrigCoefficients
    backend: str = field(default="trig", init=False)

    def _z(self, p):
        cx, cy = self.domain.center
        return ((p[:, 0] - cx) + 1j * (p[:, 1] - cy)) / self.domain.extent

    def _values(self, p):
        c = self.coeffs
        poly = np.concatenate([[c.a0], c.a - 1j * c.b])
        return np.polynomial.polynomial.polyval(self._z(p), poly).real

    def _gradient(self, p):
        c = self.coeffs
        if c.n == 1:
            return np.zeros_like(p)
        j = np.arange(1, c.n)
        dpoly = j * (c.a - 1j * c.b) / self.domain.extent
        d = np.polynomial.polynomial.polyval(self._z(p), dpoly)
        return np.stack([d.real, -d.imag], axis=-1)


def field_eval(field: HarmonicField, p) -> float:
    return float(field.evaluate(np.asarray(p, dtype=float)[None, :])[0])


def field_grad(field: HarmonicField, p) -> np.ndarray:
    return field.gradient(np.asarray(p, dtype=float)[None, :])[0]


# --- Poisson integral -------------------------------------------------------


def poisson_extend(
    disk: DomainSpec,
    g: Callable[[np.ndarray], np.ndarray],
    quad_tol: float = 1e-10,
    *,
    support: tuple[float, float] | None = None,
    kinks: Sequence[float] = (),
    margin: float = 0.999,
) -> GreenField:
    """Harmonic extension of ``g(theta)`` into ``disk`` via the Poisson kernel."""
    if disk.kind != "disk":
        raise UnsupportedOperationError("the Poisson kernel is only available on disks")
    if not quad_tol > 0:
        raise ConfigurationError("quad_tol must be positive")
    cfg = QuadConfig(rel_tol=quad_tol, abs_tol=quad_tol)
    return GreenField(disk, g, cfg, support, tuple(float(k) for k in kinks), margin)


def poisson_extend_hat(disk: DomainSpec, spec: BoundaryBasisSpec, i: int, quad_tol: float = 1e-10,
                       margin: float = 0.999) -> GreenField:
    lo, hi = spec.support(i)
    node = spec.nodes[i]

    def g(theta, _spec=spec, _i=i):
        return hat_value(_spec, _i, theta)

    return poisson_extend(disk, g, quad_tol, support=(lo, hi), kinks=(node,), margin=margin)


# --- method of fundamental solutions ---------------------------------------


@dataclass(frozen=True)
class MfsConfig:
    """Source count ``N``, standoff ``offset``, collocation count ``M = factor * N``.

    ``regularization`` is an optional ridge parameter; ``rcond`` is the
    relative singular-value cutoff below which the system counts as rank
    deficient.
    """

    N: int = 256
    offset: float = 0.01
    collocation_factor: float = 3.0
    regularization: float | None = None
    rcond: float = 1e-13

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 4:
            raise ConfigurationError("MFS needs an integer source count N >= 4")
        object.__setattr__(self, "N", int(self.N))
        if not self.offset > 0:
            raise ConfigurationError("MFS offset must be positive")
        if not self.collocation_factor >= 1:
            raise ConfigurationError("collocation factor must be >= 1")
        if self.regularization is not None and not self.regularization >= 0:
            raise ConfigurationError("regularization must be non-negative")

    @property
    def M(self) -> int:
        return int(round(self.collocation_factor * self.N))

    @classmethod
    def for_kind(cls, kind: str, **overrides) -> "MfsConfig":
        factor = 3.0 if kind == "disk" else 4.0
        return cls(**{"collocation_factor": factor, **overrides})


def mfs_sources(domain: DomainSpec, cfg: MfsConfig, shift: float = 0.0) -> np.ndarray:
    """Equally spaced sources on the boundary of the domain grown by ``offset``.

    On a disk the sources start at angle ``shift``; on a square they start at
    a corner so that all four corners carry a source when ``N % 4 == 0``.
    """
    outer = domain.with_extent(domain.extent + cfg.offset)
    if domain.kind == "disk":
        t = shift + TWO_PI * np.arange(cfg.N) / cfg.N
        return _boundary_point(outer, t)
    return _boundary_point(outer, 4.0 * np.arange(cfg.N) / cfg.N)


def collocation_parameters(domain: DomainSpec, cfg: MfsConfig, shift: float = 0.0) -> np.ndarray:
    """``M`` uniform parameters, half a spacing past ``shift``."""
    M = cfg.M
    return np.mod(shift + (np.arange(M) + 0.5) * domain.period / M, domain.period)


@dataclass(frozen=True)
class _LstsqSolution:
    coeffs: np.ndarray
    residual_rms: np.ndarray
    condition: float
    rank: int


def _solve_lstsq(A: np.ndarray, G: np.ndarray, cfg: MfsConfig) -> _LstsqSolution:
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    rank = int(np.sum(s > cfg.rcond * s[0]))
    UtG = U.T @ G
    if cfg.regularization:
        lam = cfg.regularization
        filt = s / (s * s + lam * lam)
    else:
        filt = np.where(s > cfg.rcond * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    C = Vt.T @ (filt[:, None] * UtG)
    res = A @ C - G
    rms = np.sqrt(np.mean(res * res, axis=0))
    if not cfg.regularization and rank < A.shape[1]:
        raise FitError(
            f"least-squares system has numerical rank {rank} < {A.shape[1]}",
            float(rms.max()),
            cond,
        )
    return _LstsqSolution(C, rms, cond, rank)


def mfs_fit(
    domain: DomainSpec,
    g: Callable[[np.ndarray], np.ndarray],
    cfg: MfsConfig | None = None,
    *,
    shift: float = 0.0,
) -> MfsField:
    """Fit fundamental-solution coefficients to boundary data ``g(t)``."""
    cfg = cfg or MfsConfig.for_kind(domain.kind)
    sources = mfs_sources(domain, cfg, shift)
    t = collocation_parameters(domain, cfg, shift)
    A = fundamental_solution(_boundary_point(domain, t), sources)
    rhs = np.asarray(g(t), dtype=float).reshape(-1, 1)
    sol = _solve_lstsq(A, rhs, cfg)
    return MfsField(domain, sources, sol.coeffs[:, 0], float(sol.residual_rms[0]), sol.condition)


# --- per-layer bases ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExtendedBasis:
    """Harmonic extensions of all hats of ``spec`` on ``domain``.

    ``rotational`` is set when member ``i`` is exactly member 0 rotated by
    ``i * omega`` (disk only), which makes the mass matrix circulant.
    """

    spec: BoundaryBasisSpec
    domain: DomainSpec
    backend: str
    fields: tuple[HarmonicField, ...]
    rotational: bool = False
    sources: np.ndarray | None = None
    coeffs: np.ndarray | None = None
    standoff: float | None = None
    r_max: float | None = None

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def residual_rms(self) -> np.ndarray:
        return np.array([getattr(f, "residual_rms", 0.0) for f in self.fields])

    def values(self, points) -> np.ndarray:
        """Member values at ``points``; shape ``(len(points), n)``."""
        p = self.domain.require_inside(points).reshape(-1, 2)
        if self.coeffs is not None:
            return _mfs_apply(p, self.sources, self.coeffs)
        return np.stack([f.evaluate(p) for f in self.fields], axis=1)

    def values_on(self, rule: DomainRule) -> np.ndarray:
        """Member values on the points of ``rule``, reusing rotational symmetry."""
        if self._rule_is_symmetric(rule) and self.coeffs is None:
            proto = self.fields[0].evaluate(rule.points)
            step = rule.symmetry // self.n
            return np.stack(
                [proto[rule.rotation_index(i * step)] for i in range(self.n)], axis=1
            )
        return self.values(rule.points)

    def _rule_is_symmetric(self, rule: DomainRule) -> bool:
        if not (self.rotational and rule.domain.kind == "disk"):
            return False
        if rule.domain != self.domain or rule.symmetry % self.n:
            return False
        offset = (rule.origin - self.spec.shift) / (TWO_PI / rule.symmetry)
        return abs(offset - round(offset)) < 1e-9 and round(offset) % (rule.symmetry // self.n) == 0


def mfs_basis(domain: DomainSpec, spec: BoundaryBasisSpec, cfg: MfsConfig | None = None) -> ExtendedBasis:
    """Fit every hat of ``spec`` with one factorization of the collocation matrix."""
    cfg = cfg or MfsConfig.for_kind(domain.kind)
    sources = mfs_sources(domain, cfg, spec.shift)
    t = collocation_parameters(domain, cfg, spec.shift)
    A = fundamental_solution(_boundary_point(domain, t), sources)
    sol = _solve_lstsq(A, hat_values(spec, t), cfg)
    fields = tuple(
        MfsField(domain, sources, sol.coeffs[:, i], float(sol.residual_rms[i]), sol.condition)
        for i in range(spec.n)
    )
    rotational = domain.kind == "disk" and cfg.N % spec.n == 0 and cfg.M % spec.n == 0
    return ExtendedBasis(
        spec, domain, "mfs", fields, rotational, sources, sol.coeffs, standoff=cfg.offset
    )


def green_basis(domain: DomainSpec, spec: BoundaryBasisSpec, quad_tol: float = 1e-10,
                margin: float = 0.999) -> ExtendedBasis:
    fields = tuple(poisson_extend_hat(domain, spec, i, quad_tol, margin) for i in range(spec.n))
    return ExtendedBasis(
        spec, domain, "green", fields, True,
        standoff=(1.0 - margin) * domain.extent, r_max=margin * domain.extent,
    )


# --- trigonometric approximation ---------------------------------------------


def fourier_coeffs(g: Callable[[np.ndarray], np.ndarray], n: int, samples: int) -> TrigCoefficients:
    """Trapezoidal Fourier coefficients of ``g`` up to frequency ``n - 1``."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ConfigurationError("frequency count must be a positive integer")
    if samples < 4 * n:
        raise ConfigurationError(f"need at least 4n = {4 * n} samples, got {samples}")
    theta = TWO_PI * np.arange(samples) / samples
    values = np.broadcast_to(np.asarray(g(theta), dtype=float), theta.shape)
    G = np.fft.rfft(values) / samples
    return TrigCoefficients(G[0].real, 2.0 * G[1:n].real, -2.0 * G[1:n].imag)


def trig_extend(disk: DomainSpec, coeffs: TrigCoefficients) -> TrigField:
    if disk.kind != "disk":
        raise UnsupportedOperationError("trigonometric extension needs a disk")
    return TrigField(disk, coeffs)
