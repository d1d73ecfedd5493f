import numpy as np
import pytest

from skewcheck.constructions import appendix_triple, skew_cubic
from skewcheck.errors import InputError, ResourceError
from skewcheck.jets import PolyMap, SymMultiMap, derivative, random_polymap
from skewcheck.local_condition import (LocalOptions, boundary_matrix, boundary_sigma_min,
                                       certify_local_condition, check_local_condition,
                                       empirical_radius, kernel_witness, lipschitz_bound,
                                       local_residual)


def linear_map(rng, n, N):
    return PolyMap(n, N, np.zeros(N), [SymMultiMap.from_linear(rng.standard_normal((N, n)))])


def test_boundary_matrix_twisted_cubic(twisted_cubic):
    bm = boundary_matrix(twisted_cubic, [0.0], [1.0])
    assert np.array_equal(bm.matrix, np.column_stack([[1, 0, 0], [0, 0, 1], [0, 1, 0]]))
    assert bm.sigma_min == pytest.approx(1.0)


def test_boundary_matrix_requires_unit(twisted_cubic):
    with pytest.raises(InputError):
        boundary_matrix(twisted_cubic, [0.0], [2.0])


def test_boundary_matrix_homogeneity(rng):
    f = random_polymap(2, 5, 3, rng)
    a = rng.standard_normal(2)
    y = rng.standard_normal(2)
    y /= np.linalg.norm(y)
    D2, D3 = derivative(f, a, 2), derivative(f, a, 3)
    M = boundary_matrix(f, a, y).matrix
    assert np.allclose(np.einsum("Nab,a->Nb", D2.dense, 2 * y), 2 * M[:, 2:4])
    assert np.allclose(D3.apply(2 * y, 2 * y, 2 * y), 8 * M[:, 4])


def test_linear_map_fails_everywhere(rng):
    f = linear_map(rng, 2, 5)
    rep = check_local_condition(f, np.zeros(2))
    assert rep.holds is False
    assert np.allclose(rep.witness.v1, 0.0, atol=1e-12)


def test_singular_second_derivative_fails(rng):
    f = random_polymap(2, 6, 3, rng)
    parts = [f.part(1), SymMultiMap.zero(2, 2, 6), f.part(3)]
    g = PolyMap(2, 6, np.zeros(6), parts)
    assert check_local_condition(g, np.zeros(2)).holds is False


@pytest.mark.parametrize("n", [1, 2, 3])
def test_skew_cubic_holds(n):
    rep = check_local_condition(skew_cubic(n), np.zeros(n))
    assert rep.holds is True and rep.min_sigma > 0


def test_heuristic_matches_dense_grid_n2():
    f = skew_cubic(2)
    rep = check_local_condition(f, np.zeros(2))
    theta = np.linspace(0, 2 * np.pi, 20000, endpoint=False)
    grid = boundary_sigma_min(f, np.zeros(2), np.column_stack([np.cos(theta), np.sin(theta)]))
    assert rep.min_sigma <= grid.min() + 1e-9
    assert rep.min_sigma >= grid.min() - 1e-6


def test_appendix_triple_fails_at_first_axis():
    rep = check_local_condition(appendix_triple(2, 6), np.zeros(2))
    assert rep.holds is False
    assert np.array_equal(rep.argmin_y, [1.0, 0.0])
    w = rep.witness
    assert np.allclose(w.v1, 0, atol=1e-12) and abs(w.lam) < 1e-12
    assert np.allclose(np.abs(w.v2), [0, 1], atol=1e-12)


def test_structural_failure(rng):
    rep = check_local_condition(random_polymap(2, 4, 3, rng), np.zeros(2))
    assert rep.holds is False and "N < 2n+1" in rep.reason
    assert rep.witness.residual < 1e-12


def test_sigma_symmetric_in_y(rng):
    f = random_polymap(3, 7, 3, rng)
    Y = rng.standard_normal((50, 3))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    a = rng.standard_normal(3)
    assert np.allclose(boundary_sigma_min(f, a, Y), boundary_sigma_min(f, a, -Y), rtol=1e-12, atol=1e-15)


def test_unit_sphere_reduction(rng):
    for _ in range(20):
        f = random_polymap(2, 5, 3, rng)
        a, v1, v2, v3 = rng.standard_normal((4, 2))
        lam = float(rng.standard_normal())
        s = np.linalg.norm(v3)
        lhs = local_residual(f, a, v1, v2, v3, lam)
        rhs = local_residual(f, a, v1, s * v2, v3 / s, s ** 3 * lam)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.linalg.norm(lhs))


def test_kernel_witness():
    f = appendix_triple(3, 9)
    w = kernel_witness(f, np.zeros(3), np.array([1.0, 0, 0]))
    assert np.allclose(w.v2, [0, 0, 1], atol=1e-12)
    assert w.residual < 1e-12
    assert kernel_witness(skew_cubic(2), np.zeros(2), np.array([1.0, 0])) is None


def test_kernel_witness_linear(rng):
    f = linear_map(rng, 2, 5)
    w = kernel_witness(f, np.zeros(2), np.array([0.6, 0.8]))
    assert np.allclose(w.v1, 0, atol=1e-12)


def test_certify_n1_and_n2():
    r1 = certify_local_condition(skew_cubic(1), np.zeros(1), 0.5)
    assert r1.holds is True and r1.min_sigma == pytest.approx(1.0)
    r2 = certify_local_condition(skew_cubic(2), np.zeros(2), 1e-3)
    assert r2.holds is True
    assert r2.min_sigma - r2.lipschitz * r2.mesh > 0
    assert check_local_condition(skew_cubic(2), np.zeros(2)).holds is True


def test_certify_appendix_never_true():
    rep = certify_local_condition(appendix_triple(2, 6), np.zeros(2), 0.01)
    assert rep.holds is False and rep.witness is not None


def test_certify_unknown_when_mesh_coarse():
    rep = certify_local_condition(skew_cubic(3), np.zeros(3), 0.5)
    assert rep.holds is None
    assert rep.to_dict()["holds"] == "unknown"
    assert rep.extra["failing_region_points"] > 0


def test_certify_guards():
    with pytest.raises(InputError):
        certify_local_condition(skew_cubic(5), np.zeros(5), 0.1)
    with pytest.raises(InputError):
        certify_local_condition(skew_cubic(2), np.zeros(2), 0.0)
    with pytest.raises(ResourceError):
        certify_local_condition(skew_cubic(4), np.zeros(4), 1e-3, budget_points=1000)


def test_lipschitz_bound_dominates_increments(rng):
    f = random_polymap(2, 6, 3, rng)
    a = rng.standard_normal(2)
    L = lipschitz_bound(f, a)
    for _ in range(200):
        y, z = rng.standard_normal((2, 2))
        y /= np.linalg.norm(y)
        z /= np.linalg.norm(z)
        d = np.linalg.norm(boundary_matrix(f, a, y).matrix - boundary_matrix(f, a, z).matrix, 2)
        assert d <= L * np.linalg.norm(y - z) + 1e-12


def test_report_json_schema():
    d = check_local_condition(appendix_triple(2, 6), np.zeros(2)).to_dict()
    assert d["holds"] == "false" and d["mode"] == "heuristic"
    assert set(d["witness"]) >= {"v1", "v2", "lambda"}


def test_local_condition_implies_small_sweep_passes():
    r = empirical_radius(skew_cubic(2), np.zeros(2), trials=200)
    assert r is not None and r >= 1e-6


def test_options_seed_changes_nothing_for_clear_instances():
    a = check_local_condition(skew_cubic(2), np.zeros(2), LocalOptions(seed=1)).holds
    b = check_local_condition(skew_cubic(2), np.zeros(2), LocalOptions(seed=2)).holds
    assert a == b is True
