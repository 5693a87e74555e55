import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layered_harmonic.basis import BoundaryBasisSpec
from layered_harmonic.errors import ConfigurationError, EvaluationError
from layered_harmonic.geometry import DomainSpec
from layered_harmonic.quadrature import (
    QuadConfig,
    clenshaw_curtis,
    domain_rule,
    embedded_rule,
    integrate_1d,
    integrate_domain,
)


def test_sin_squared():
    res = integrate_1d(lambda t: np.sin(t) ** 2, (0.0, 2 * math.pi))
    assert res.converged
    assert res.value == pytest.approx(math.pi, abs=1e-12)


def test_triangle_area():
    w = math.pi / 4
    assert integrate_1d(lambda t: t / w, (0.0, w)).value == pytest.approx(w / 2, abs=1e-15)


@pytest.mark.parametrize("theta", [0.0, 1.0, 3.0])
def test_poisson_kernel_normalization_near_boundary(theta):
    r = 0.99

    def kernel(tt):
        return (1 - r * r) / (1 + r * r - 2 * r * np.cos(theta - tt))

    res = integrate_1d(kernel, (0.0, 2 * math.pi), split_points=[theta])
    assert res.converged
    assert res.value == pytest.approx(2 * math.pi, rel=1e-10)


def test_clenshaw_curtis_rule():
    res = integrate_1d(np.exp, (0.0, 1.0), QuadConfig(rule_1d="clenshaw_curtis_16"))
    assert res.value == pytest.approx(math.e - 1, rel=1e-13)
    x, w = clenshaw_curtis(8)
    for k in range(9):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert w @ x**k == pytest.approx(exact, abs=1e-14)


def test_unknown_rule_rejected():
    with pytest.raises(ConfigurationError):
        embedded_rule("simpson")
    with pytest.raises(ConfigurationError):
        QuadConfig(rel_tol=0.0)


def test_non_convergence_is_flagged():
    cfg = QuadConfig(rel_tol=1e-15, abs_tol=1e-300, max_subdivisions=2)
    res = integrate_1d(lambda t: np.abs(t - 1 / 3) ** 0.1, (0.0, 1.0), cfg)
    assert not res.converged
    assert res.error > 0


def test_split_point_insensitivity():
    f = lambda t: np.exp(np.sin(3 * t))  # noqa: E731
    cfg = QuadConfig()
    a = integrate_1d(f, (0.0, 2.0), cfg).value
    b = integrate_1d(f, (0.0, 2.0), cfg, split_points=[0.3, 0.7, 1.1]).value
    assert abs(a - b) <= 1e-12 * abs(a)


def test_split_points_outside_rejected():
    with pytest.raises(ConfigurationError):
        integrate_1d(np.sin, (0.0, 1.0), split_points=[2.0])


def test_refinement_monotone():
    exact = 2.0 / 3.0
    errs = []
    for tol in (1e-4, 1e-6, 1e-8, 1e-10):
        v = integrate_1d(np.sqrt, (0.0, 1.0), QuadConfig(rel_tol=tol, abs_tol=tol)).value
        errs.append(abs(v - exact))
    assert all(b <= a * 1.000001 + 1e-16 for a, b in zip(errs, errs[1:]))


def test_disk_area():
    assert integrate_domain(DomainSpec.disk(0.5), lambda p: np.ones(len(p))) == pytest.approx(
        math.pi / 4, abs=1e-10
    )


def test_square_area():
    assert integrate_domain(DomainSpec.square(0.25), lambda p: np.ones(len(p))) == pytest.approx(
        0.25, abs=1e-12
    )


def test_u1_squared_over_disk():
    a = 0.5
    val = integrate_domain(DomainSpec.disk(a), lambda p: (2 * p[:, 0] * p[:, 1]) ** 2)
    assert val == pytest.approx(math.pi * a**6 / 6, rel=1e-12)


def _monomial_disk(i, j, a):
    # int over the disk of x^i y^j
    if i % 2 or j % 2:
        return 0.0
    ang = 2 * math.gamma((i + 1) / 2) * math.gamma((j + 1) / 2) / math.gamma((i + j + 2) / 2)
    return ang * a ** (i + j + 2) / (i + j + 2)


def _monomial_square(i, j, a, c=(0.0, 0.0)):
    def one(k, cc):
        return ((cc + a) ** (k + 1) - (cc - a) ** (k + 1)) / (k + 1)

    return one(i, c[0]) * one(j, c[1])


@pytest.mark.parametrize("i, j", [(0, 0), (2, 0), (2, 2), (4, 6), (3, 1), (8, 2), (1, 0)])
def test_polynomial_exactness_disk(i, j):
    a = 0.7
    val = integrate_domain(DomainSpec.disk(a), lambda p: p[:, 0] ** i * p[:, 1] ** j)
    assert val == pytest.approx(_monomial_disk(i, j, a), abs=1e-13)


@pytest.mark.parametrize("i, j", [(0, 0), (2, 0), (2, 2), (4, 6), (3, 1), (8, 2), (5, 5)])
def test_polynomial_exactness_square(i, j):
    a, c = 0.6, (0.2, -0.1)
    val = integrate_domain(DomainSpec.square(a, c), lambda p: p[:, 0] ** i * p[:, 1] ** j)
    assert val == pytest.approx(_monomial_square(i, j, a, c), abs=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 16), st.floats(0.0, 0.999), st.sampled_from(["disk", "square"]))
def test_aligned_rules_integrate_constants(n, frac, kind):
    dom = DomainSpec(kind, (0.0, 0.0), 0.5)
    spec = BoundaryBasisSpec.for_domain(dom, n, frac * dom.period / n)
    rule = domain_rule(dom, spec=spec, standoff=0.01)
    assert rule.integrate(np.ones(len(rule))) == pytest.approx(dom.area, rel=1e-12)
    assert dom.contains(rule.points).all()


def test_disk_rule_rotation_index():
    dom = DomainSpec.disk(0.5)
    spec = BoundaryBasisSpec.for_domain(dom, 8, math.pi / 8)
    rule = domain_rule(dom, spec=spec, standoff=0.01)
    assert rule.symmetry % 8 == 0
    f = lambda p: np.exp(p[:, 0]) * np.cos(3 * p[:, 1])  # noqa: E731
    step = rule.symmetry // 8
    angle = 2 * math.pi / 8
    c, s = math.cos(angle), math.sin(angle)
    rot = rule.points @ np.array([[c, -s], [s, c]])  # rotate by -angle
    np.testing.assert_allclose(f(rule.points)[rule.rotation_index(step)], f(rot), atol=1e-12)


def test_nonfinite_integrand_reports_location():
    with pytest.raises(EvaluationError) as info:
        integrate_domain(DomainSpec.disk(1.0), lambda p: np.where(p[:, 0] > 0.5, np.nan, 1.0))
    assert info.value.location[0] > 0.5


def test_rule_is_deterministic():
    dom = DomainSpec.square(0.25)
    a = domain_rule(dom, standoff=0.01)
    b = domain_rule(dom, standoff=0.01)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)
