import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layered_harmonic.errors import ConfigurationError, DomainError
from layered_harmonic.geometry import DomainSpec, boundary_point, make_layers, wrap_parameter


def test_disk_boundary_point_at_zero():
    np.testing.assert_allclose(boundary_point(DomainSpec.disk(1.0), 0.0), [1.0, 0.0])


def test_square_boundary_point_at_zero():
    # 2a*gamma(-3/2), 2a*gamma(-5/2) with a = 0.5
    np.testing.assert_allclose(boundary_point(DomainSpec.square(0.5), 0.0), [-0.5, -0.5])


def test_square_boundary_point_at_one():
    np.testing.assert_allclose(boundary_point(DomainSpec.square(0.5), 1.0), [0.5, -0.5])


def test_square_boundary_corners_and_midpoints():
    sq = DomainSpec.square(0.25)
    pts = boundary_point(sq, np.array([0.5, 1.0, 2.0, 3.0, 3.5]))
    np.testing.assert_allclose(pts, [[0, -0.25], [0.25, -0.25], [0.25, 0.25], [-0.25, 0.25], [-0.25, 0]],
                               atol=1e-15)


@pytest.mark.parametrize("t", [-0.1, 2 * math.pi, 7.0])
def test_disk_parameter_out_of_range(t):
    with pytest.raises(DomainError):
        boundary_point(DomainSpec.disk(1.0), t)


def test_square_parameter_out_of_range():
    with pytest.raises(DomainError):
        boundary_point(DomainSpec.square(1.0), 4.0)


@pytest.mark.parametrize("dom", [DomainSpec.disk(0.7, (0.2, -0.1)), DomainSpec.square(0.3, (1.0, 2.0))])
def test_boundary_points_lie_on_boundary(dom):
    t = np.linspace(0, dom.period, 401, endpoint=False)
    np.testing.assert_allclose(dom.gauge(boundary_point(dom, t)), dom.extent, rtol=1e-14)


@pytest.mark.parametrize("dom, speed", [(DomainSpec.disk(0.7), 0.7), (DomainSpec.square(0.3), 0.6)])
def test_constant_parameter_speed(dom, speed):
    t = np.linspace(0, dom.period, 4001)
    p = boundary_point(dom, wrap_parameter(dom, t))
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1) / np.diff(t)
    # chords underestimate arcs on the disk by O(h^2)
    np.testing.assert_allclose(seg, speed, rtol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20), st.sampled_from(["disk", "square"]))
def test_parametrization_is_periodic(t, kind):
    dom = DomainSpec(kind, (0.0, 0.0), 0.8)
    a = boundary_point(dom, wrap_parameter(dom, t))
    b = boundary_point(dom, wrap_parameter(dom, t + dom.period))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_domain_validation():
    with pytest.raises(ConfigurationError):
        DomainSpec.disk(0.0)
    with pytest.raises(ConfigurationError):
        DomainSpec("hexagon", (0.0, 0.0), 1.0)


def test_contains_and_require_inside():
    sq = DomainSpec.square(0.25)
    assert sq.contains([[0.25, 0.25], [0.0, 0.1]]).all()
    assert not sq.contains([[0.26, 0.0]]).any()
    with pytest.raises(DomainError):
        sq.require_inside([[0.3, 0.0]])


def test_areas():
    assert DomainSpec.disk(0.5).area == pytest.approx(math.pi / 4)
    assert DomainSpec.square(0.25).area == pytest.approx(0.25)


def test_disk_layers_l2():
    layers = make_layers(DomainSpec.disk(0.5), DomainSpec.disk(3.0), 2)
    np.testing.assert_allclose(layers.extents(), [3.0, 1.75, 0.5])
    assert layers.dist_K_D == 2.5
    assert layers[2] == DomainSpec.disk(0.5)


def test_single_layer():
    K, D = DomainSpec.disk(0.5), DomainSpec.disk(2.0)
    layers = make_layers(K, D, 1)
    assert len(layers) == 2
    np.testing.assert_allclose(layers.extents(), [2.0, 0.5])
    assert layers.K == K


def test_square_layers_l5():
    layers = make_layers(DomainSpec.square(0.25), DomainSpec.square(1.5), 5)
    expected = [0.25 + (1 - j / 5) * 1.25 for j in range(6)]
    np.testing.assert_allclose(layers.extents(), expected, rtol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.01, 5.0), st.integers(1, 12), st.sampled_from(["disk", "square"]))
def test_layer_invariants(k, gap, L, kind):
    K = DomainSpec(kind, (0.0, 0.0), k)
    D = DomainSpec(kind, (0.0, 0.0), k + gap)
    layers = make_layers(K, D, L)
    ext = np.array(layers.extents())
    widths = -np.diff(ext)
    assert np.all(widths > 0)
    np.testing.assert_allclose(widths, gap / L, rtol=1e-12)
    assert layers[L] == K
    # boundary of K_j strictly inside K_{j-1}
    t = np.linspace(0, K.period, 64, endpoint=False)
    for j in range(1, L + 1):
        pts = boundary_point(layers[j], t)
        assert np.all(layers[j - 1].gauge(pts) < layers[j - 1].extent)


@pytest.mark.parametrize(
    "K, D, L",
    [
        (DomainSpec.disk(0.5), DomainSpec.square(3.0), 2),
        (DomainSpec.disk(0.5), DomainSpec.disk(3.0, (0.1, 0.0)), 2),
        (DomainSpec.disk(0.5), DomainSpec.disk(3.0), 0),
        (DomainSpec.disk(3.0), DomainSpec.disk(0.5), 2),
    ],
)
def test_make_layers_rejects(K, D, L):
    with pytest.raises(ConfigurationError):
        make_layers(K, D, L)
