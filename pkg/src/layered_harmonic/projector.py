"""Layer-by-layer L2 projection of a harmonic function.

On layer ``s`` the current remainder ``u - sum_{l<s} c_l . phi_l`` is
projected in ``L2(K_s)`` onto the extended hats of ``K_s``.  The remainder
is never stored on a grid: it is re-evaluated at the quadrature points of
each layer from ``u`` and the bases already computed.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack, solve_circulant

from .basis import BoundaryBasisSpec, layer_shift
from .errors import ConfigurationError, LayerFailure, NonSPDError
from .extension import ExtendedBasis, MfsConfig, green_basis, mfs_basis
from .geometry import DomainSpec, LayerSystem, make_layers
from .quadrature import DomainRule, QuadConfig, domain_rule

logger = logging.getLogger(__name__)

# a layer whose remainder norm grows by more than this factor is flagged
RESIDUAL_GROWTH_LIMIT = 1.10


@dataclass(eq=False)
class MassMatrix:
    """Gram matrix of one layer's basis in ``L2(domain)``.

    ``values`` holds the ``n // 2 + 1`` distinct entries of row 0 for
    circulant storage, or the packed upper triangle (row major) otherwise.
    """

    n: int
    storage: str
    values: np.ndarray
    domain: DomainSpec | None = None
    _chol: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        expected = self.n // 2 + 1 if self.storage == "circulant" else self.n * (self.n + 1) // 2
        if self.storage not in ("circulant", "symmetric_dense"):
            raise ConfigurationError(f"unknown storage {self.storage!r}")
        if self.values.size != expected:
            raise ConfigurationError(f"{self.storage} storage needs {expected} values")

    def entry(self, i: int, j: int) -> float:
        if self.storage == "circulant":
            k = abs(i - j) % self.n
            return float(self.values[min(k, self.n - k)])
        i, j = min(i, j), max(i, j)
        # offset of row i in the packed upper triangle
        return float(self.values[i * self.n - i * (i - 1) // 2 + (j - i)])

    def first_row(self) -> np.ndarray:
        k = np.arange(self.n)
        return self.values[np.minimum(k, self.n - k)]

    def dense(self) -> np.ndarray:
        if self.storage == "circulant":
            k = np.abs(np.subtract.outer(np.arange(self.n), np.arange(self.n)))
            return self.values[np.minimum(k, self.n - k)]
        out = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n)
        out[iu] = self.values
        out.T[iu] = self.values
        return out

    def factor(self) -> np.ndarray:
        """Cholesky factor of the dense expansion, raising ``NonSPDError`` on breakdown."""
        if self._chol is None:
            c, info = lapack.dpotrf(self.dense(), lower=True, clean=True)
            if info > 0:
                raise NonSPDError("mass matrix is not positive definite", int(info))
            if info < 0:
                raise ConfigurationError("invalid argument to the Cholesky factorization")
            self._chol = c
        return self._chol

    def solve(self, b, method: str = "cholesky") -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if method == "cholesky":
            x, info = lapack.dpotrs(self.factor(), b, lower=True)
            if info:
                raise ConfigurationError("invalid argument to the Cholesky solve")
            return x
        if method == "fft":
            if self.storage != "circulant":
                raise ConfigurationError("FFT solves need circulant storage")
            self.factor()
            return solve_circulant(self.first_row(), b)
        raise ConfigurationError(f"unknown solve method {method!r}")


def _basis_matrix(fields, points, rule: DomainRule | None = None) -> np.ndarray:
    if isinstance(fields, ExtendedBasis):
        if rule is not None:
            return fields.values_on(rule)
        return fields.values(points)
    cols = []
    for f in fields:
        cols.append(f.evaluate(points) if hasattr(f, "evaluate") else np.asarray(f(points), float))
    return np.stack(cols, axis=1)


def layer_rule(basis: ExtendedBasis | None, domain: DomainSpec, cfg: QuadConfig) -> DomainRule:
    """Quadrature rule for ``domain`` aligned with ``basis`` and resolving its sources."""
    if basis is None:
        return domain_rule(domain, cfg)
    return domain_rule(
        domain,
        cfg,
        spec=basis.spec,
        standoff=basis.standoff,
        r_max=basis.r_max,
        kinks=basis.backend == "green",
    )


def assemble_mass(
    fields,
    K_s: DomainSpec,
    cfg: QuadConfig | None = None,
    *,
    rule: DomainRule | None = None,
    values: np.ndarray | None = None,
    storage: str = "auto",
    check_spd: bool = True,
) -> MassMatrix:
    """Assemble ``(phi_i, phi_j)_{L2(K_s)}``.

    ``fields`` is an ``ExtendedBasis`` or a sequence of fields/callables.
    With circulant storage only the first ``n // 2 + 1`` entries of row 0 are
    integrated; otherwise the upper triangle.  Positive definiteness is
    checked by factorizing unless ``check_spd`` is false.
    """
    cfg = cfg or QuadConfig()
    basis = fields if isinstance(fields, ExtendedBasis) else None
    if rule is None:
        rule = layer_rule(basis, K_s, cfg)
    if values is None:
        values = _basis_matrix(fields, rule.points, rule)
    n = values.shape[1]
    if storage == "auto":
        rotational = basis is not None and basis.rotational and K_s.kind == "disk"
        storage = "circulant" if rotational else "symmetric_dense"
    wv = rule.weights[:, None] * values
    if storage == "circulant":
        m = wv[:, 0] @ values[:, : n // 2 + 1]
    elif storage == "symmetric_dense":
        iu = np.triu_indices(n)
        m = (wv.T @ values)[iu]
    else:
        raise ConfigurationError(f"unknown storage {storage!r}")
    mass = MassMatrix(n, storage, np.asarray(m, dtype=float), K_s)
    if check_spd:
        mass.factor()
    return mass


def project_layer(
    residual,
    fields,
    M: MassMatrix,
    cfg: QuadConfig | None = None,
    *,
    rule: DomainRule | None = None,
    values: np.ndarray | None = None,
) -> np.ndarray:
    """Coefficients of the ``L2`` projection of ``residual`` onto ``fields``.

    ``residual`` is a callable on points or an array of its values at the
    points of ``rule``.
    """
    cfg = cfg or QuadConfig()
    if rule is None:
        basis = fields if isinstance(fields, ExtendedBasis) else None
        rule = layer_rule(basis, M.domain, cfg)
    if values is None:
        values = _basis_matrix(fields, rule.points, rule)
    r = residual(rule.points) if callable(residual) else np.asarray(residual, dtype=float)
    b = values.T @ (rule.weights * r)
    return M.solve(b)


def hats_per_layer(L: int, n_rule=None) -> list[int]:
    """Resolve ``n_rule`` (None -> 2L, int, sequence, or callable of L)."""
    if n_rule is None or n_rule == "two_L":
        counts = [2 * L] * L
    elif callable(n_rule):
        counts = [int(n_rule(L))] * L
    elif isinstance(n_rule, (int, np.integer)):
        counts = [int(n_rule)] * L
    else:
        counts = [int(c) for c in n_rule]
    if len(counts) != L:
        raise ConfigurationError(f"need {L} per-layer hat counts, got {len(counts)}")
    return counts


@dataclass
class ApproximationResult:
    layers: LayerSystem
    bases: list[ExtendedBasis]
    layer_coeffs: list[np.ndarray]
    l2_error_abs: float
    l2_error_rel: float
    u_norm_D: float
    per_layer_residual_norms: list[float]
    timings: dict[str, float]
    warnings: list[str] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return int(sum(c.size for c in self.layer_coeffs))

    @property
    def flagged(self) -> bool:
        return bool(self.warnings)

    def evaluate(self, points) -> np.ndarray:
        """The approximation ``xi_u`` at points of K."""
        p = self.layers.K.require_inside(points).reshape(-1, 2)
        out = np.zeros(p.shape[0])
        for basis, c in zip(self.bases, self.layer_coeffs):
            out += basis.values(p) @ c
        return out

    def gradient(self, points) -> np.ndarray:
        p = self.layers.K.require_inside(points).reshape(-1, 2)
        out = np.zeros_like(p)
        for basis, c in zip(self.bases, self.layer_coeffs):
            for f, ci in zip(basis.fields, c):
                out += ci * f.gradient(p)
        return out


def _build_basis(backend: str, domain: DomainSpec, spec: BoundaryBasisSpec,
                 mfs: MfsConfig, green_tol: float) -> ExtendedBasis:
    if backend == "mfs":
        return mfs_basis(domain, spec, mfs)
    if backend == "green":
        if domain.kind != "disk":
            raise ConfigurationError("the green backend is only available on disks")
        return green_basis(domain, spec, green_tol)
    raise ConfigurationError(f"unknown extension backend {backend!r}")


def approximate(
    u: Callable[[np.ndarray], np.ndarray],
    D: DomainSpec,
    K: DomainSpec,
    L: int,
    *,
    n_rule=None,
    backend: str = "mfs",
    mfs: MfsConfig | None = None,
    quad: QuadConfig | None = None,
    green_tol: float = 1e-10,
    u_norm_D: float | None = None,
) -> ApproximationResult:
    """Approximate ``u`` (harmonic on ``D``) on ``K`` with ``L`` layers.

    Returns the per-layer coefficients together with ``||u - xi_u||_{L2(K)}``
    and its ratio to ``||u||_{L2(D)}``.
    """
    quad = quad or QuadConfig()
    mfs = mfs or MfsConfig.for_kind(K.kind)
    system = make_layers(K, D, L)
    counts = hats_per_layer(system.L, n_rule)
    timings = dict.fromkeys(("fit", "rule", "evaluate", "assemble", "solve", "norm"), 0.0)

    t0 = time.perf_counter()
    if u_norm_D is None:
        u_norm_D = math.sqrt(max(0.0, _integrate_square(u, D, quad)))
    timings["norm"] += time.perf_counter() - t0

    bases: list[ExtendedBasis] = []
    coeffs: list[np.ndarray] = []
    norms: list[float] = []
    warnings: list[str] = []
    err_abs = math.nan
    for s in range(1, system.L + 1):
        K_s = system[s]
        try:
            t0 = time.perf_counter()
            n = counts[s - 1]
            spec = BoundaryBasisSpec.for_domain(K_s, n, layer_shift(K_s.period / n, s))
            basis = _build_basis(backend, K_s, spec, mfs, green_tol)
            t1 = time.perf_counter()
            rule = layer_rule(basis, K_s, quad)
            t2 = time.perf_counter()
            phi = basis.values_on(rule)
            rem = np.asarray(u(rule.points), dtype=float)
            for prev, c in zip(bases, coeffs):
                rem = rem - prev.values(rule.points) @ c
            t3 = time.perf_counter()
            mass = assemble_mass(basis, K_s, quad, rule=rule, values=phi)
            t4 = time.perf_counter()
            c = project_layer(rem, basis, mass, quad, rule=rule, values=phi)
            after = rem - phi @ c
            norm = math.sqrt(max(0.0, rule.integrate(after * after)))
            t5 = time.perf_counter()
        except Exception as exc:  # noqa: BLE001 - re-raised with the layer index
            raise LayerFailure(s, exc) from exc
        timings["fit"] += t1 - t0
        timings["rule"] += t2 - t1
        timings["evaluate"] += t3 - t2
        timings["assemble"] += t4 - t3
        timings["solve"] += t5 - t4
        if norms and norm > RESIDUAL_GROWTH_LIMIT * norms[-1]:
            msg = f"remainder norm grew on layer {s}: {norms[-1]:.3e} -> {norm:.3e}"
            logger.warning(msg)
            warnings.append(msg)
        bases.append(basis)
        coeffs.append(c)
        norms.append(norm)
        logger.debug("layer %d: n=%d, points=%d, remainder %.3e", s, n, len(rule), norm)
        # K_L = K, so the last remainder norm is the error on K
        err_abs = norm

    rel = err_abs / u_norm_D if u_norm_D > 0 else (0.0 if err_abs == 0 else math.inf)
    return ApproximationResult(
        system, bases, coeffs, err_abs, rel, u_norm_D, norms, timings, warnings
    )


def _integrate_square(u, domain: DomainSpec, cfg: QuadConfig) -> float:
    rule = domain_rule(domain, cfg)
    v = np.asarray(u(rule.points), dtype=float)
    return rule.integrate(v * v)


def l2_norm(u, domain: DomainSpec, cfg: QuadConfig | None = None) -> float:
    return math.sqrt(max(0.0, _integrate_square(u, domain, cfg or QuadConfig())))


def single_shot_projection(
    u: Callable[[np.ndarray], np.ndarray],
    bases: Sequence[ExtendedBasis],
    K: DomainSpec,
    cfg: QuadConfig | None = None,
) -> tuple[np.ndarray, float]:
    """Best ``L2(K)`` approximation of ``u`` from the union of ``bases`` (dense Gram solve).

    Used as an independent check of the layered pipeline.  Returns the
    coefficients and the error norm.
    """
    cfg = cfg or QuadConfig()
    last = bases[-1]
    rule = layer_rule(last if last.domain == K else None, K, cfg)
    phi = np.concatenate([b.values(rule.points) for b in bases], axis=1)
    w = rule.weights
    G = phi.T @ (w[:, None] * phi)
    rhs = phi.T @ (w * u(rule.points))
    c = np.linalg.solve(G, rhs)
    r = u(rule.points) - phi @ c
    return c, math.sqrt(max(0.0, float(w @ (r * r))))
