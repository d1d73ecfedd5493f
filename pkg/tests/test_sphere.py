import numpy as np
import pytest

from skewcheck.errors import ResourceError
from skewcheck.sphere import (axis_points, minimize_on_sphere, net_size, quasi_uniform,
                              sphere_net, sphere_samples, tangent_bases)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_samples_are_unit_and_axes_first(n):
    Y = sphere_samples(n, 100, 20, seed=3)
    assert np.allclose(np.linalg.norm(Y, axis=1), 1.0)
    assert np.array_equal(Y[:2 * n], axis_points(n))
    assert Y.shape[0] == 2 * n + 100 + 20


def test_quasi_uniform_deterministic():
    assert np.array_equal(quasi_uniform(5, 64, seed=1), quasi_uniform(5, 64, seed=1))


def test_tangent_bases_orthonormal(rng):
    Y = rng.standard_normal((10, 4))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    T = tangent_bases(Y)
    for y, t in zip(Y, T):
        assert np.allclose(t @ y, 0.0, atol=1e-12)
        assert np.allclose(t @ t.T, np.eye(3), atol=1e-12)


def test_minimizer_finds_known_minimum():
    target = np.array([0.6, -0.8, 0.0])
    func = lambda Y: np.linalg.norm(Y - target, axis=1)
    res = minimize_on_sphere(func, 3, samples=200, random_samples=50, seed=0)
    assert res.value < 1e-6
    assert np.allclose(res.y, target, atol=1e-6)


def test_minimizer_ties_go_to_first_axis():
    # zero on all four axis points
    func = lambda Y: np.abs(Y[:, 0] * Y[:, 1])
    res = minimize_on_sphere(func, 2, samples=64, random_samples=8, seed=0, tie_tol=1e-12)
    assert np.array_equal(res.y, [1.0, 0.0])


def probed_covering_radius(points, n, probes, rng):
    Y = rng.standard_normal((probes, n))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    best = np.full(probes, -1.0)
    for lo in range(0, points.shape[0], 20000):
        best = np.maximum(best, (Y @ points[lo:lo + 20000].T).max(axis=1))
    return float(np.arccos(np.clip(best, -1, 1)).max())


@pytest.mark.parametrize("n,delta", [(2, 0.01), (3, 0.05), (4, 0.2)])
def test_net_covering_radius_is_sound(n, delta, rng):
    net = sphere_net(n, delta)
    assert np.allclose(np.linalg.norm(net.points, axis=1), 1.0)
    assert net.covering_radius <= delta
    assert net.mesh == pytest.approx(1.1 * net.covering_radius)
    assert probed_covering_radius(net.points, n, 4000, rng) <= net.covering_radius


def test_net_n1_is_two_points():
    net = sphere_net(1, 0.5)
    assert net.points.shape == (2, 1) and net.mesh == 0.0


def test_net_budget_guard():
    with pytest.raises(ResourceError):
        sphere_net(4, 1e-3, budget_points=10_000)
    assert net_size(2, 0.01) == sphere_net(2, 0.01).points.shape[0]
