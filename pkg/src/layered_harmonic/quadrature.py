"""Adaptive 1D quadrature and ring-structured 2D rules on disks and squares.

The 1D integrator bisects intervals on an embedded-rule error estimate
(Gauss-Kronrod 7/15 or nested Clenshaw-Curtis).  It works on a batch of
independent integrals at once, which is how the Poisson-kernel fields are
evaluated at many points.

The 2D rules are tensor rules in "radius x boundary parameter" coordinates.
Radial panels are graded geometrically towards the outer edge so that
integrands with singularities just outside the domain (fundamental solutions
placed at a small standoff) are resolved; each ring then gets enough
boundary-parameter points for the analyticity strip at its radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError, EvaluationError
from .geometry import DomainSpec, _boundary_point

_EPS = np.finfo(float).eps

# Gauss-Kronrod 7/15 abscissae (non-negative half) and weights.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])


@dataclass(frozen=True)
class QuadConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 60
    rule_1d: str = "gauss_kronrod_15"
    order_2d: int = 16

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigurationError("quadrature tolerances must be positive")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise ConfigurationError("max_subdivisions must be a positive integer")
        if int(self.order_2d) != self.order_2d or self.order_2d < 2:
            raise ConfigurationError("order_2d must be an integer >= 2")
        embedded_rule(self.rule_1d)  # validates the name

    @property
    def ring_eps(self) -> float:
        """Target aliasing error of the per-ring periodic rules."""
        return max(0.1 * self.abs_tol, 1e-16)


@dataclass(frozen=True)
class EmbeddedRule:
    """Nodes on [-1, 1] with a high-order and an embedded low-order weight set."""

    name: str
    nodes: np.ndarray
    high: np.ndarray
    low: np.ndarray
    quadpack_error: bool


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    converged: bool
    intervals: int


def clenshaw_curtis(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Clenshaw-Curtis rule with ``k + 1`` points ``cos(j*pi/k)`` on [-1, 1]."""
    if k < 1:
        raise ConfigurationError("Clenshaw-Curtis order must be >= 1")
    theta = np.pi * np.arange(k + 1) / k
    x = np.cos(theta)
    w = np.zeros(k + 1)
    inner = np.arange(1, k)
    v = np.ones(k - 1)
    if k % 2 == 0:
        w[0] = w[k] = 1.0 / (k * k - 1)
        for j in range(1, k // 2):
            v -= 2.0 * np.cos(2 * j * theta[inner]) / (4 * j * j - 1)
        v -= np.cos(k * theta[inner]) / (k * k - 1)
    else:
        w[0] = w[k] = 1.0 / (k * k)
        for j in range(1, (k - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * j * theta[inner]) / (4 * j * j - 1)
    w[inner] = 2.0 * v / k
    return x, w


@lru_cache(maxsize=None)
def embedded_rule(name: str) -> EmbeddedRule:
    if name == "gauss_kronrod_15":
        nodes = np.concatenate([-_XGK[:-1], _XGK[::-1]])
        high = np.concatenate([_WGK[:-1], _WGK[::-1]])
        low_half = np.zeros(8)
        low_half[1::2] = _WG
        low = np.concatenate([low_half[:-1], low_half[::-1]])
        return EmbeddedRule(name, nodes, high, low, True)
    if name.startswith("clenshaw_curtis_"):
        try:
            k = int(name.rsplit("_", 1)[1])
        except ValueError:
            raise ConfigurationError(f"bad rule name {name!r}") from None
        if k < 2 or k % 2:
            raise ConfigurationError("nested Clenshaw-Curtis needs an even order >= 2")
        nodes, high = clenshaw_curtis(k)
        _, coarse = clenshaw_curtis(k // 2)
        low = np.zeros(k + 1)
        low[::2] = coarse
        return EmbeddedRule(name, nodes, high, low, False)
    raise ConfigurationError(f"unknown 1D rule {name!r}")


def _apply_rule(rule: EmbeddedRule, f, owner, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * rule.nodes[None, :]
    fx = np.asarray(f(x, owner), dtype=float)
    if not np.all(np.isfinite(fx)):
        bad = np.argwhere(~np.isfinite(fx))[0]
        raise EvaluationError("non-finite integrand", float(x[bad[0], bad[1]]))
    high = half * (fx @ rule.high)
    low = half * (fx @ rule.low)
    err = np.abs(high - low)
    if rule.quadpack_error:
        # QUADPACK's scaling of the Kronrod-Gauss difference
        mean = (fx @ rule.high) * 0.5
        resasc = np.abs(half) * (np.abs(fx - mean[:, None]) @ rule.high)
        resabs = np.abs(half) * (np.abs(fx) @ rule.high)
        scaled = np.where(
            (resasc > 0) & (err > 0),
            resasc * np.minimum(1.0, (200.0 * err / np.where(resasc > 0, resasc, 1.0)) ** 1.5),
            err,
        )
        err = np.maximum(scaled, 50.0 * _EPS * resabs)
    return high, err


def integrate_1d_batch(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    owner,
    lo,
    hi,
    n_owners: int,
    cfg: QuadConfig | None = None,
):
    """Adaptively integrate many independent integrals in one sweep.

    ``owner[k]`` names the integral that the initial interval ``[lo[k], hi[k]]``
    contributes to; several intervals per owner express an initial partition.
    ``f(x, owner)`` receives nodes of shape ``(m, p)`` together with the owner
    index of each row.

    Returns ``(values, errors, converged)`` arrays of length ``n_owners``.
    """
    cfg = cfg or QuadConfig()
    rule = embedded_rule(cfg.rule_1d)
    owner = np.asarray(owner, dtype=np.intp)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    length = np.bincount(owner, weights=hi - lo, minlength=n_owners)
    done_v = np.zeros(n_owners)
    done_e = np.zeros(n_owners)
    converged = np.ones(n_owners, dtype=bool)
    for level in range(cfg.max_subdivisions + 1):
        if owner.size == 0:
            break
        v, e = _apply_rule(rule, f, owner, lo, hi)
        tot_v = done_v + np.bincount(owner, weights=v, minlength=n_owners)
        tot_e = done_e + np.bincount(owner, weights=e, minlength=n_owners)
        tol = np.maximum(cfg.abs_tol, cfg.rel_tol * np.abs(tot_v))
        owner_ok = tot_e <= tol
        share = tol[owner] * (hi - lo) / length[owner]
        accept = owner_ok[owner] | (e <= share)
        if level == cfg.max_subdivisions:
            converged[owner[~accept]] = False
            accept[:] = True
        done_v += np.bincount(owner[accept], weights=v[accept], minlength=n_owners)
        done_e += np.bincount(owner[accept], weights=e[accept], minlength=n_owners)
        keep = ~accept
        owner, lo, hi = owner[keep], lo[keep], hi[keep]
        mid = 0.5 * (lo + hi)
        owner = np.concatenate([owner, owner])
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    return done_v, done_e, converged


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    interval: Sequence[float],
    cfg: QuadConfig | None = None,
    split_points: Sequence[float] = (),
) -> QuadResult:
    """Integrate a vectorized scalar function over ``interval``.

    ``split_points`` inside the interval seed the initial partition (kernel
    peaks, kinks).  A result that did not reach the tolerance within
    ``max_subdivisions`` bisection levels is returned with ``converged=False``.
    """
    lo, hi = map(float, interval)
    if not lo < hi:
        raise ConfigurationError(f"empty interval [{lo}, {hi}]")
    inner = sorted(float(s) for s in split_points)
    if any(s < lo or s > hi for s in inner):
        raise ConfigurationError("split points must lie inside the interval")
    edges = np.unique(np.array([lo, *inner, hi]))
    a, b = edges[:-1], edges[1:]
    counter = {"n": 0}

    def wrapped(x, _owner):
        counter["n"] += x.shape[0]
        return f(x)

    v, e, ok = integrate_1d_batch(wrapped, np.zeros(a.size, dtype=np.intp), a, b, 1, cfg)
    return QuadResult(float(v[0]), float(e[0]), bool(ok[0]), counter["n"])


def gauss_legendre(q: int) -> tuple[np.ndarray, np.ndarray]:
    return leggauss(q)


def graded_breakpoints(length: float, standoff: float) -> np.ndarray:
    """Breakpoints on ``[0, length]`` halving towards ``length``.

    The last panel is no wider than about 1.6 times ``standoff``, the
    distance from ``length`` to the nearest singularity of the integrand.
    """
    br = [length]
    w = length / 2
    while w > 1.6 * standoff:
        br.append(length - w)
        w /= 2
    br.append(0.0)
    return np.array(sorted(br))


def _two_sided_grading(width: float, h_min: float) -> np.ndarray:
    """Breakpoints on ``[0, width]`` refined geometrically towards both ends."""
    left = [0.0]
    h = h_min
    while left[-1] + h < width / 2:
        left.append(left[-1] + h)
        h *= 2
    left = np.array(left)
    mids = np.array([width / 2])
    return np.unique(np.concatenate([left, mids, width - left[::-1]]))


@dataclass(frozen=True, eq=False)
class DomainRule:
    """Quadrature points/weights laid out ring by ring.

    Within ring ``k`` (``ring_sizes[k]`` consecutive points) the boundary
    parameter increases.  ``symmetry`` is the order of the rotation group of a
    disk rule: rotating by ``2*pi/symmetry`` maps ring ``k`` onto itself with
    an index shift of ``ring_sizes[k] / symmetry``.  ``origin`` is the
    parameter of the first point of every ring.
    """

    domain: DomainSpec
    points: np.ndarray
    weights: np.ndarray
    ring_sizes: tuple[int, ...]
    symmetry: int = 1
    origin: float = 0.0

    def __len__(self):
        return self.weights.size

    def integrate(self, values) -> float:
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            k = int(np.argmin(np.isfinite(values)))
            raise EvaluationError("non-finite integrand value", tuple(self.points[k]))
        return float(self.weights @ values)

    def rotation_index(self, steps: int) -> np.ndarray:
        """Permutation realizing ``values(rotate(p, -steps*2pi/symmetry))``."""
        idx = []
        start = 0
        for size in self.ring_sizes:
            shift = (steps * size // self.symmetry) % size
            idx.append(start + (np.arange(size) - shift) % size)
            start += size
        return np.concatenate(idx)


def disk_rule(
    domain: DomainSpec,
    cfg: QuadConfig | None = None,
    *,
    align: int = 1,
    origin: float = 0.0,
    standoff: float | None = None,
    r_max: float | None = None,
    kinks: int = 0,
) -> DomainRule:
    """Polar tensor rule on a disk.

    ``standoff`` is the distance beyond ``r_max`` of the nearest singularity
    of the integrand (defaults to the radius, i.e. a smooth integrand).  With
    ``kinks = n`` every ring uses Gauss-Legendre panels graded towards ``n``
    equally spaced angles starting at ``origin``, otherwise each ring is a
    periodic trapezoidal rule whose size is a multiple of ``align``.
    """
    cfg = cfg or QuadConfig()
    a = domain.extent
    r_max = a if r_max is None else float(r_max)
    d = a if standoff is None else float(standoff)
    if d <= 0:
        raise ConfigurationError("standoff must be positive")
    q = cfg.order_2d
    x, w = gauss_legendre(q)
    br = graded_breakpoints(r_max, d)
    half = 0.5 * np.diff(br)
    radii = (0.5 * (br[1:] + br[:-1]))[:, None] + half[:, None] * x[None, :]
    rweights = half[:, None] * w[None, :]
    radii, rweights = radii.ravel(), rweights.ravel()
    R = r_max + d
    log_eps = math.log(cfg.ring_eps)
    cx, cy = domain.center

    if kinks:
        omega = 2 * math.pi / kinks
        symmetry = kinks
    else:
        symmetry = max(1, int(align))

    pts, wts, sizes = [], [], []
    for r, wr in zip(radii, rweights):
        strip = math.log(R / r)
        if kinks:
            brk = _two_sided_grading(omega, max(1.6 * strip, 1e-12))
            hh = 0.5 * np.diff(brk)
            one = ((0.5 * (brk[1:] + brk[:-1]))[:, None] + hh[:, None] * x[None, :]).ravel()
            one_w = (hh[:, None] * w[None, :]).ravel()
            theta = (origin + omega * np.arange(kinks)[:, None] + one[None, :]).ravel()
            tw = np.tile(one_w, kinks)
        else:
            P = max(2 * q, math.ceil(log_eps / math.log(r / R)))
            P = symmetry * math.ceil(P / symmetry)
            theta = origin + 2 * math.pi * np.arange(P) / P
            tw = np.full(P, 2 * math.pi / P)
        pts.append(np.stack([cx + r * np.cos(theta), cy + r * np.sin(theta)], axis=-1))
        wts.append(wr * r * tw)
        sizes.append(theta.size)
    return DomainRule(
        domain,
        np.concatenate(pts),
        np.concatenate(wts),
        tuple(sizes),
        symmetry=symmetry,
        origin=float(origin),
    )


def _merged_composite(breaks: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Composite rule over ``breaks`` for a closed rule (shared endpoints merged)."""
    half = 0.5 * np.diff(breaks)
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, ::-1]).ravel()
    weights = (half[:, None] * w[None, ::-1]).ravel()
    nodes, inv = np.unique(np.round(nodes, 15), return_inverse=True)
    merged = np.bincount(inv, weights=weights)
    return nodes, merged


def square_rule(
    domain: DomainSpec,
    cfg: QuadConfig | None = None,
    *,
    breakpoints: Sequence[float] = (),
    standoff: float | None = None,
) -> DomainRule:
    """Clenshaw-Curtis tensor rule on concentric square rings.

    A point is ``center + rho * s(t)`` where ``s`` runs over the boundary of
    the unit-half-side square; the area element is ``2 rho drho dt``.
    Parameter panels break at the corners and at ``breakpoints`` (hat nodes),
    and are subdivided to match the analyticity strip at each ring.
    """
    cfg = cfg or QuadConfig()
    a = domain.extent
    d = a if standoff is None else float(standoff)
    if d <= 0:
        raise ConfigurationError("standoff must be positive")
    k = cfg.order_2d
    x, w = clenshaw_curtis(k)
    rho, rw = _merged_composite(graded_breakpoints(a, d), x, w)
    keep = rho > 0
    rho, rw = rho[keep], rw[keep]
    base = np.unique(np.concatenate([np.arange(5.0), np.mod(np.asarray(breakpoints, float), 4.0)]))
    unit = DomainSpec("square", domain.center, 1.0)
    pts, wts, sizes = [], [], []
    for r, wr in zip(rho, rw):
        strip = (a + d - r) / (2 * r)
        brk = [base[:1]]
        for lo, hi in zip(base[:-1], base[1:]):
            m = max(1, math.ceil((hi - lo) / strip))
            brk.append(np.linspace(lo, hi, m + 1)[1:])
        t, tw = _merged_composite(np.concatenate(brk), x, w)
        # t = 4 coincides with t = 0
        if t[-1] >= 4.0 - 1e-14:
            tw[0] += tw[-1]
            t, tw = t[:-1], tw[:-1]
        s = _boundary_point(unit, t) - np.asarray(domain.center)
        pts.append(np.asarray(domain.center) + r * s)
        wts.append(wr * 2 * r * tw)
        sizes.append(t.size)
    return DomainRule(domain, np.concatenate(pts), np.concatenate(wts), tuple(sizes))


def domain_rule(
    domain: DomainSpec,
    cfg: QuadConfig | None = None,
    *,
    spec=None,
    standoff: float | None = None,
    r_max: float | None = None,
    kinks: bool = False,
) -> DomainRule:
    """Rule for ``domain`` aligned with the hat nodes of ``spec`` if given."""
    if domain.kind == "disk":
        align = spec.n if spec is not None else 1
        origin = spec.shift if spec is not None else 0.0
        return disk_rule(
            domain,
            cfg,
            align=align,
            origin=origin,
            standoff=standoff,
            r_max=r_max,
            kinks=align if kinks else 0,
        )
    if r_max is not None and r_max != domain.extent:
        raise ConfigurationError("square rules always extend to the boundary")
    nodes = spec.nodes if spec is not None else ()
    return square_rule(domain, cfg, breakpoints=nodes, standoff=standoff)


def integrate_domain(
    domain: DomainSpec,
    f: Callable[[np.ndarray], np.ndarray],
    cfg: QuadConfig | None = None,
    **rule_options,
) -> float:
    """Integrate a vectorized ``f(points) -> values`` over ``domain``."""
    rule = domain_rule(domain, cfg, **rule_options)
    return rule.integrate(f(rule.points))
