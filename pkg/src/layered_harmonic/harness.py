"""Convergence experiments: configuration, test functions, sweeps and CSV output."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, HarmonicSpaceError, UnsupportedOperationError
from .extension import MfsConfig, fourier_coeffs, trig_extend
from .geometry import DomainSpec
from .projector import approximate, hats_per_layer, l2_norm
from .quadrature import QuadConfig, domain_rule

SUMMARY_COLUMNS = (
    "backend", "L", "n", "dof", "l2_error_abs", "l2_error_rel", "theory_bound", "runtime_ms", "status",
)
H1_COLUMN = "h1_semi_error_abs"
GRID_COLUMNS = ("x", "y", "abs_err")


@dataclass(frozen=True)
class TestFunction:
    name: str
    value: Callable[[np.ndarray], np.ndarray]
    known_harmonic: bool = True
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    __test__ = False  # keep pytest from collecting this class

    def __call__(self, points):
        p = np.asarray(points, dtype=float)
        return self.value(p)


def _xy(p):
    return p[..., 0], p[..., 1]


def _disk_u1(p):
    # r^2 sin(2 theta)
    x, y = _xy(p)
    return 2.0 * x * y


def _disk_u1_grad(p):
    x, y = _xy(p)
    return np.stack([2.0 * y, 2.0 * x], axis=-1)


def _disk_u2(p):
    # exp(r sin theta) sin(r cos theta)
    x, y = _xy(p)
    return np.exp(y) * np.sin(x)


def _disk_u2_grad(p):
    x, y = _xy(p)
    return np.stack([np.exp(y) * np.cos(x), np.exp(y) * np.sin(x)], axis=-1)


def _square_u1(p):
    x, y = _xy(p)
    return x**3 - 3.0 * x * y**2


def _square_u1_grad(p):
    x, y = _xy(p)
    return np.stack([3.0 * x**2 - 3.0 * y**2, -6.0 * x * y], axis=-1)


def _square_u2(p):
    x, y = _xy(p)
    return np.exp(x) * np.sin(y)


def _square_u2_grad(p):
    x, y = _xy(p)
    return np.stack([np.exp(x) * np.sin(y), np.exp(x) * np.cos(y)], axis=-1)


def _one(p):
    return np.ones(np.shape(p)[:-1])


def _zero(p):
    return np.zeros(np.shape(p)[:-1])


def _zero_grad(p):
    return np.zeros(np.shape(p))


REGISTRY: dict[str, TestFunction] = {
    f.name: f
    for f in (
        TestFunction("disk_u1", _disk_u1, True, _disk_u1_grad),
        TestFunction("disk_u2", _disk_u2, True, _disk_u2_grad),
        TestFunction("square_u1", _square_u1, True, _square_u1_grad),
        TestFunction("square_u2", _square_u2, True, _square_u2_grad),
        TestFunction("constant_one", _one, True, _zero_grad),
        TestFunction("zero", _zero, True, _zero_grad),
    )
}


def get_test_function(name: str) -> TestFunction:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown test function {name!r}; choose from {', '.join(REGISTRY)}"
        ) from None


_DEFAULT_EXTENTS = {"disk": (0.5, 3.0), "square": (0.25, 1.5)}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one convergence study.

    Only ``domain_kind`` and ``test_function`` are required; the remaining
    defaults reproduce the published disk/square setups.
    """

    domain_kind: str = "disk"
    test_function: str = "disk_u1"
    K_extent: Optional[float] = None
    D_extent: Optional[float] = None
    backend: str = "mfs"
    L_list: tuple[int, ...] = (2, 4, 6, 8)
    n_rule: object = "two_L"
    n_list: tuple[int, ...] = (2, 4, 8, 16, 32)
    mfs: Optional[MfsConfig] = None
    quad: QuadConfig = field(default_factory=QuadConfig)
    green_tol: float = 1e-10
    summary_csv: Optional[str] = None
    grid_csv: Optional[str] = None
    grid_resolution: int = 101
    h1: bool = False

    def __post_init__(self):
        if self.domain_kind not in _DEFAULT_EXTENTS:
            raise ConfigurationError(f"unknown domain kind {self.domain_kind!r}")
        k_def, d_def = _DEFAULT_EXTENTS[self.domain_kind]
        if self.K_extent is None:
            object.__setattr__(self, "K_extent", k_def)
        if self.D_extent is None:
            object.__setattr__(self, "D_extent", d_def)
        if not 0 < self.K_extent < self.D_extent:
            raise ConfigurationError("need 0 < K_extent < D_extent")
        if self.backend not in ("mfs", "green", "trig"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        L_list = tuple(int(L) for L in self.L_list)
        if not L_list or any(L < 1 for L in L_list):
            raise ConfigurationError("L_list must be a non-empty list of positive integers")
        object.__setattr__(self, "L_list", L_list)
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if self.n_rule != "two_L" and not isinstance(self.n_rule, (int, list, tuple)):
            raise ConfigurationError("n_rule must be 'two_L', an integer or a list of integers")
        if self.mfs is None:
            object.__setattr__(self, "mfs", MfsConfig.for_kind(self.domain_kind))
        if int(self.grid_resolution) < 2:
            raise ConfigurationError("grid_resolution must be >= 2")
        get_test_function(self.test_function)

    @property
    def K(self) -> DomainSpec:
        return DomainSpec(self.domain_kind, (0.0, 0.0), self.K_extent)

    @property
    def D(self) -> DomainSpec:
        return DomainSpec(self.domain_kind, (0.0, 0.0), self.D_extent)

    @property
    def function(self) -> TestFunction:
        return get_test_function(self.test_function)

    def counts(self, L: int) -> list[int]:
        rule = self.n_rule
        if isinstance(rule, (list, tuple)) and rule and isinstance(rule[0], (list, tuple)):
            # one list per entry of L_list
            rule = rule[self.L_list.index(L)]
        return hats_per_layer(L, rule)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            kind = data.get("domain_kind", "disk")
            if isinstance(data.get("mfs"), dict):
                data["mfs"] = MfsConfig.for_kind(kind, **data["mfs"])
            if isinstance(data.get("quad"), dict):
                data["quad"] = QuadConfig(**data["quad"])
            for key in ("L_list", "n_list"):
                if key in data:
                    data[key] = tuple(data[key])
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read configuration {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("configuration must be a JSON object")
        return cls.from_dict(data)


@dataclass
class ConvergenceRow:
    backend: str
    L: int
    n: object
    dof: int
    l2_error_abs: float
    l2_error_rel: float
    theory_bound: float
    runtime_ms: float
    status: str = "ok"
    h1_semi_error_abs: Optional[float] = None

    @property
    def ok(self) -> bool:
        return not self.status.startswith("error")


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    h1: bool = False

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    @property
    def columns(self) -> tuple[str, ...]:
        return SUMMARY_COLUMNS + ((H1_COLUMN,) if self.h1 else ())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for r in self.rows:
            row = [
                r.backend,
                r.L,
                r.n,
                r.dof,
                _fmt(r.l2_error_abs),
                _fmt(r.l2_error_rel),
                _fmt(r.theory_bound),
                f"{r.runtime_ms:.3f}",
                r.status,
            ]
            if self.h1:
                row.append(_fmt(r.h1_semi_error_abs))
            writer.writerow(row)
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def theory_bound(dof: int) -> float:
    return math.exp(-2.0 * math.sqrt(dof))


def _n_column(counts: Sequence[int]):
    return counts[0] if len(set(counts)) == 1 else ";".join(str(c) for c in counts)


def _h1_error(cfg: ExperimentConfig, result) -> float:
    fn = cfg.function
    if fn.gradient is None:
        raise UnsupportedOperationError(f"{fn.name} has no gradient")
    rule = domain_rule(cfg.K, cfg.quad, standoff=cfg.mfs.offset)
    diff = fn.gradient(rule.points) - result.gradient(rule.points)
    return math.sqrt(max(0.0, rule.integrate(np.sum(diff * diff, axis=1))))


def _sweep_row(cfg: ExperimentConfig, L: int, u_norm_D: float) -> ConvergenceRow:
    counts = cfg.counts(L)
    dof = sum(counts)
    t0 = time.perf_counter()
    try:
        res = approximate(
            cfg.function,
            cfg.D,
            cfg.K,
            L,
            n_rule=counts,
            backend=cfg.backend,
            mfs=cfg.mfs,
            quad=cfg.quad,
            green_tol=cfg.green_tol,
            u_norm_D=u_norm_D,
        )
        h1 = _h1_error(cfg, res) if cfg.h1 else None
    except HarmonicSpaceError as exc:
        return ConvergenceRow(
            cfg.backend, L, _n_column(counts), dof, math.nan, math.nan, theory_bound(dof),
            1e3 * (time.perf_counter() - t0), f"error: {exc}".replace("\n", " "),
        )
    status = "ok" if not res.warnings else "warning: remainder grew"
    return ConvergenceRow(
        cfg.backend, L, _n_column(counts), res.dimension, res.l2_error_abs, res.l2_error_rel,
        theory_bound(res.dimension), 1e3 * (time.perf_counter() - t0), status, h1,
    )


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> ConvergenceTable:
    """One row per entry of ``cfg.L_list``; rows keep ``L_list`` order."""
    if cfg.backend == "trig":
        raise ConfigurationError("use run_trig for the trigonometric backend")
    if cfg.h1 and cfg.backend == "green":
        raise UnsupportedOperationError("H1 errors need gradients (mfs backend only)")
    u_norm_D = l2_norm(cfg.function, cfg.D, cfg.quad)
    if threads > 1 and len(cfg.L_list) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_sweep_row, cfg, L, u_norm_D) for L in cfg.L_list]
            rows = [f.result() for f in futures]
    else:
        rows = [_sweep_row(cfg, L, u_norm_D) for L in cfg.L_list]
    table = ConvergenceTable(rows, h1=cfg.h1)
    if cfg.summary_csv:
        table.to_csv(cfg.summary_csv)
    return table


def error_field(cfg: ExperimentConfig, L: int, path=None) -> list[tuple[float, float, Optional[float]]]:
    """Sample ``|u - xi_u|`` on a uniform grid over the bounding box of K.

    Grid points outside K (or where the backend cannot evaluate) are kept as
    rows with an empty error value.
    """
    res = approximate(
        cfg.function, cfg.D, cfg.K, L, n_rule=cfg.counts(L) if L in cfg.L_list else None,
        backend=cfg.backend, mfs=cfg.mfs, quad=cfg.quad, green_tol=cfg.green_tol,
    )
    K = cfg.K
    m = int(cfg.grid_resolution)
    xs = np.linspace(K.center[0] - K.extent, K.center[0] + K.extent, m)
    ys = np.linspace(K.center[1] - K.extent, K.center[1] + K.extent, m)
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    inside = K.contains(pts)
    if cfg.backend == "green":
        inside &= K.gauge(pts) <= res.bases[-1].fields[0].margin * K.extent
    err = np.full(pts.shape[0], np.nan)
    if inside.any():
        p_in = pts[inside]
        err[inside] = np.abs(cfg.function(p_in) - res.evaluate(p_in))
    rows = [
        (float(x), float(y), None if math.isnan(e) else float(e))
        for (x, y), e in zip(pts, err)
    ]
    target = path or cfg.grid_csv
    if target:
        write_grid_csv(rows, target)
    return rows


def write_grid_csv(rows, target) -> None:
    """Write grid rows to a path or an open text stream."""
    if hasattr(target, "write"):
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(GRID_COLUMNS)
        for x, y, e in rows:
            writer.writerow([_fmt(x), _fmt(y), _fmt(e)])
        return
    with open(target, "w", newline="") as fh:
        write_grid_csv(rows, fh)


def run_trig(cfg: ExperimentConfig, n_list: Optional[Sequence[int]] = None) -> ConvergenceTable:
    """Single-domain trigonometric approximation of ``u`` on K for each ``n``.

    In these experiments ``n`` counts the frequencies used, so the trace is
    replaced by its trigonometric polynomial with frequencies ``0..n`` (the
    space ``T_{n+1}``) and extended harmonically. ``dof`` is reported as ``n``
    and ``L`` as 0 because no layers are involved.
    """
    if cfg.domain_kind != "disk":
        raise UnsupportedOperationError("trigonometric approximation needs a smooth (disk) domain")
    n_list = tuple(n_list) if n_list is not None else cfg.n_list
    fn = cfg.function
    K = cfg.K
    u_norm_D = l2_norm(fn, cfg.D, cfg.quad)
    rule = domain_rule(K, cfg.quad)
    u_vals = fn(rule.points)
    rows = []
    for n in n_list:
        t0 = time.perf_counter()
        try:
            samples = max(4 * (n + 1), 256)
            coeffs = fourier_coeffs(
                lambda th: fn(np.stack([K.extent * np.cos(th), K.extent * np.sin(th)], axis=-1)),
                n + 1, samples,
            )
            v = trig_extend(K, coeffs)
            diff = u_vals - v.evaluate(rule.points)
            err = math.sqrt(max(0.0, rule.integrate(diff * diff)))
            h1 = None
            if cfg.h1:
                g = fn.gradient(rule.points) - v.gradient(rule.points)
                h1 = math.sqrt(max(0.0, rule.integrate(np.sum(g * g, axis=1))))
            rel = err / u_norm_D if u_norm_D > 0 else (0.0 if err == 0 else math.inf)
            rows.append(ConvergenceRow(
                "trig", 0, n, n, err, rel, theory_bound(n), 1e3 * (time.perf_counter() - t0), "ok", h1,
            ))
        except HarmonicSpaceError as exc:
            rows.append(ConvergenceRow(
                "trig", 0, n, n, math.nan, math.nan, theory_bound(n),
                1e3 * (time.perf_counter() - t0), f"error: {exc}",
            ))
    table = ConvergenceTable(rows, h1=cfg.h1)
    if cfg.summary_csv:
        table.to_csv(cfg.summary_csv)
    return table


def fitted_rate(dofs: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope ``beta`` of ``log(err) ~ alpha - beta * sqrt(dof)``."""
    x = np.sqrt(np.asarray(dofs, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(-slope)
