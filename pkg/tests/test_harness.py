import csv
import dataclasses
import io
import json
import math

import numpy as np
import pytest

from layered_harmonic.errors import ConfigurationError, UnsupportedOperationError
from layered_harmonic.harness import (
    REGISTRY,
    SUMMARY_COLUMNS,
    ExperimentConfig,
    error_field,
    fitted_rate,
    get_test_function,
    run_sweep,
    run_trig,
    theory_bound,
)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("name", ["disk_u1", "disk_u2", "square_u1", "square_u2"])
def test_registry_functions_are_harmonic(name):
    fn = REGISTRY[name]
    rng = np.random.default_rng(1)
    p = rng.uniform(-1, 1, (20, 2))
    h = 1e-3
    lap = sum(fn(p + d) + fn(p - d) for d in (np.array([h, 0]), np.array([0, h]))) - 4 * fn(p)
    assert np.max(np.abs(lap / h**2)) < 1e-4 * max(1.0, np.max(np.abs(fn(p))))
    g = fn.gradient(p)
    fd = np.stack([(fn(p + [h, 0]) - fn(p - [h, 0])) / (2 * h), (fn(p + [0, h]) - fn(p - [0, h])) / (2 * h)], 1)
    np.testing.assert_allclose(g, fd, atol=1e-5)


def test_registry_closed_forms():
    r, th = 0.4, 0.7
    p = np.array([[r * math.cos(th), r * math.sin(th)]])
    assert REGISTRY["disk_u1"](p)[0] == pytest.approx(r * r * math.sin(2 * th))
    assert REGISTRY["disk_u2"](p)[0] == pytest.approx(math.exp(r * math.sin(th)) * math.sin(r * math.cos(th)))
    assert set(REGISTRY) == {"disk_u1", "disk_u2", "square_u1", "square_u2", "constant_one", "zero"}
    with pytest.raises(ConfigurationError):
        get_test_function("nope")


def test_config_defaults():
    cfg = ExperimentConfig(domain_kind="square", test_function="square_u1")
    assert (cfg.K_extent, cfg.D_extent) == (0.25, 1.5)
    assert cfg.mfs.M == 4 * cfg.mfs.N
    disk = ExperimentConfig()
    assert (disk.K_extent, disk.D_extent, disk.mfs.M) == (0.5, 3.0, 768)
    assert disk.L_list == (2, 4, 6, 8)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"K_extent": 3.0, "D_extent": 1.0},
        {"L_list": ()},
        {"L_list": (2, 0)},
        {"backend": "fem"},
        {"grid_resolution": 1},
        {"test_function": "unknown"},
        {"domain_kind": "triangle"},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        ExperimentConfig(**kwargs)


def test_config_from_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"domain_kind": "disk", "test_function": "disk_u2",
                                "mfs": {"N": 128}, "quad": {"order_2d": 20}, "L_list": [1, 2]}))
    cfg = ExperimentConfig.from_json(path)
    assert cfg.mfs.N == 128 and cfg.mfs.collocation_factor == 3.0
    assert cfg.quad.order_2d == 20 and cfg.L_list == (1, 2)
    path.write_text(json.dumps({"domain_kind": "disk", "colour": "red"}))
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json(path)
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json(path)


def test_theory_bound():
    for dof in (1, 8, 32, 128):
        assert abs(theory_bound(dof) - math.exp(-2 * math.sqrt(dof))) <= 1e-15


def test_smoke_sweep_and_schema(tmp_path):
    out = tmp_path / "s.csv"
    cfg = ExperimentConfig(L_list=(2,), summary_csv=str(out))
    table = run_sweep(cfg)
    assert len(table) == 1
    row = table.rows[0]
    assert row.dof == 8 and math.isfinite(row.l2_error_rel) and row.status == "ok"
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(SUMMARY_COLUMNS)
    parsed = _rows(text)[0]
    assert float(parsed["theory_bound"]) == theory_bound(8)
    assert float(parsed["l2_error_abs"]) == row.l2_error_abs


def test_zero_function_sweep():
    table = run_sweep(ExperimentConfig(test_function="zero", L_list=(1, 2)))
    assert all(r.l2_error_abs <= 1e-15 for r in table)


def test_rerun_is_byte_identical_except_runtime():
    cfg = ExperimentConfig(L_list=(1, 2))

    def strip(text):
        return [{k: v for k, v in r.items() if k != "runtime_ms"} for r in _rows(text)]

    assert strip(run_sweep(cfg).to_csv()) == strip(run_sweep(cfg).to_csv())


def test_parallel_rows_match_serial_in_order():
    cfg = ExperimentConfig(L_list=(2, 1))
    serial = run_sweep(cfg)
    parallel = run_sweep(cfg, threads=2)
    assert [r.L for r in parallel] == [2, 1]
    assert [r.l2_error_abs for r in parallel] == [r.l2_error_abs for r in serial]


def test_failed_rows_are_recorded():
    from layered_harmonic.extension import MfsConfig

    cfg = ExperimentConfig(L_list=(1,), mfs=MfsConfig(N=64, offset=50.0, rcond=1e-8))
    row = run_sweep(cfg).rows[0]
    assert row.status.startswith("error") and "layer 1" in row.status
    assert math.isnan(row.l2_error_abs)


def test_h1_column():
    table = run_sweep(ExperimentConfig(L_list=(2,), h1=True))
    assert table.columns[-1] == "h1_semi_error_abs"
    assert 0 < table.rows[0].h1_semi_error_abs < 1
    with pytest.raises(UnsupportedOperationError):
        run_sweep(ExperimentConfig(L_list=(1,), h1=True, backend="green"))


def test_error_field_zero_and_mask(tmp_path):
    out = tmp_path / "g.csv"
    cfg = ExperimentConfig(test_function="zero", grid_resolution=11, grid_csv=str(out))
    rows = error_field(cfg, 1)
    assert len(rows) == 121
    vals = [e for _, _, e in rows if e is not None]
    assert vals and all(e == 0 for e in vals)
    # the corners of the bounding box lie outside the disk
    corners = [e for x, y, e in rows if abs(x) == 0.5 and abs(y) == 0.5]
    assert corners == [None] * 4
    lines = out.read_text().splitlines()
    assert lines[0] == "x,y,abs_err" and lines[1].endswith(",")


def test_error_field_square_has_no_mask():
    cfg = ExperimentConfig(domain_kind="square", test_function="square_u1", grid_resolution=5)
    rows = error_field(cfg, 1)
    assert all(e is not None for _, _, e in rows)


@pytest.mark.slow
def test_error_field_l8_disk_u1():
    cfg = ExperimentConfig(grid_resolution=41, L_list=(8,))
    rows = error_field(cfg, 8)
    assert max(e for _, _, e in rows if e is not None) <= 1e-8


def test_trig_u1_exact():
    table = run_trig(ExperimentConfig(), n_list=(2, 3, 4, 8, 16))
    assert all(r.l2_error_abs <= 1e-12 for r in table)
    assert [r.dof for r in table] == [2, 3, 4, 8, 16]
    assert all(r.backend == "trig" and r.L == 0 for r in table)


def test_trig_constant():
    row = run_trig(ExperimentConfig(test_function="constant_one"), n_list=(1,)).rows[0]
    assert row.l2_error_abs <= 1e-14


def test_trig_u2_super_algebraic():
    errs = [r.l2_error_abs for r in run_trig(ExperimentConfig(test_function="disk_u2"), n_list=(2, 4, 8, 16))]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # successive ratios improve, unlike any fixed algebraic order
    assert errs[2] / errs[1] < errs[1] / errs[0]


def test_trig_square_unsupported():
    with pytest.raises(UnsupportedOperationError):
        run_trig(ExperimentConfig(domain_kind="square", test_function="square_u1"))


def test_fitted_rate():
    dofs = [8, 32, 72]
    errs = [math.exp(1 - 2.5 * math.sqrt(d)) for d in dofs]
    assert fitted_rate(dofs, errs) == pytest.approx(2.5)


def test_counts_accept_nested_lists():
    cfg = dataclasses.replace(ExperimentConfig(L_list=(1, 2)), n_rule=[[4], [6, 8]])
    assert cfg.counts(2) == [6, 8]
