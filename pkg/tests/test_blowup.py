import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewcheck.blowup import (BlowupPoint, blowup_basis_matrix, exact_pair_product,
                              exact_pair_rank, exact_rank, f_tilde, f_tilde_series, lemma2_matrix,
                              phi, remainder_scaling_check)
from skewcheck.errors import DomainError, InputError
from skewcheck.jets import PolyMap, SymMultiMap, random_polymap
from skewcheck.local_condition import boundary_matrix
from skewcheck.skewness import pair_matrix


def unit(rng, n):
    y = rng.standard_normal(n)
    return y / np.linalg.norm(y)


def test_blowup_point_validation():
    with pytest.raises(InputError):
        BlowupPoint(np.zeros(2), np.array([1.0, 1.0]), 0.1)
    with pytest.raises(InputError):
        BlowupPoint(np.zeros(1), np.ones(1), -1.0)
    with pytest.raises(DomainError):
        BlowupPoint.from_pair([1.0, 2.0], [1.0, 2.0])


def test_phi_examples(rng):
    a = rng.standard_normal(2)
    p, q = phi(BlowupPoint(a, unit(rng, 2), 0.0))
    assert np.array_equal(p, a) and np.array_equal(q, a)
    p, q = phi(BlowupPoint(np.zeros(2), np.array([1.0, 0.0]), 2.0))
    assert np.array_equal(q, [2.0, 0.0])


def test_phi_inverse_roundtrip(rng):
    for _ in range(20):
        bp = BlowupPoint(rng.standard_normal(3), unit(rng, 3), float(rng.uniform(0.01, 3)))
        p, q = phi(bp)
        assert np.linalg.norm(q - p) == pytest.approx(bp.t)
        back = BlowupPoint.from_pair(p, q)
        assert np.allclose(back.y, bp.y) and back.t == pytest.approx(bp.t)


def test_f_tilde_twisted_cubic_boundary(twisted_cubic):
    M = f_tilde(twisted_cubic, BlowupPoint(np.zeros(1), np.ones(1), 0.0))
    assert np.array_equal(M, np.column_stack([[1, 0, 0], [0, 0, 1], [0, 1, 0]]))
    assert np.linalg.svd(M, compute_uv=False).min() == pytest.approx(1.0)


def test_f_tilde_boundary_first_block_and_boundary_matrix(rng):
    f = random_polymap(2, 5, 3, rng)
    a, y = rng.standard_normal(2), unit(rng, 2)
    M = f_tilde(f, BlowupPoint(a, y, 0.0))
    assert np.allclose(M[:, :2], f.jacobian(a), rtol=1e-14, atol=1e-14)
    assert np.array_equal(M, boundary_matrix(f, a, y).matrix)


def test_f_tilde_continuity_at_zero(rng):
    for _ in range(10):
        f = random_polymap(2, 5, 3, rng)
        a, y = rng.standard_normal(2), unit(rng, 2)
        M0 = f_tilde(f, BlowupPoint(a, y, 0.0))
        Mt = f_tilde(f, BlowupPoint(a, y, 1e-4))
        assert np.linalg.norm(Mt - M0) / np.linalg.norm(M0) < 1e-3


def test_f_tilde_linear_rate(rng):
    f = random_polymap(2, 4, 4, rng)
    a, y = rng.standard_normal(2), unit(rng, 2)
    M0 = f_tilde(f, BlowupPoint(a, y, 0.0), method="series")
    d = [np.linalg.norm(f_tilde(f, BlowupPoint(a, y, t), method="series") - M0) for t in (1e-2, 1e-3, 1e-4)]
    assert d[0] / d[1] == pytest.approx(10, rel=0.1)
    assert d[1] / d[2] == pytest.approx(10, rel=0.1)


def test_series_matches_quotient_at_moderate_t(rng):
    for _ in range(10):
        f = random_polymap(3, 7, 4, rng)
        bp = BlowupPoint(rng.standard_normal(3), unit(rng, 3), float(rng.uniform(0.2, 1.0)))
        S, Q = f_tilde(f, bp, "series"), f_tilde(f, bp, "quotient")
        assert np.linalg.norm(S - Q) / np.linalg.norm(S) < 1e-12


def test_f_tilde_bad_method(twisted_cubic):
    with pytest.raises(InputError):
        f_tilde(twisted_cubic, BlowupPoint(np.zeros(1), np.ones(1), 0.1), method="x")


def test_basis_matrix_n1():
    M = blowup_basis_matrix(np.ones(1), 1.0)
    assert np.array_equal(M, [[1, -1, 6], [0, 1, 6], [0, 0, -12]])
    assert np.linalg.det(M) == pytest.approx(-12.0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_basis_matrix_determinant(n, rng):
    for t in (0.3, 1.0, 2.0):
        det = np.linalg.det(blowup_basis_matrix(unit(rng, n), t))
        assert det == pytest.approx(-12.0 / t ** (n + 3), rel=1e-10)


def test_basis_matrix_rejects_zero_t():
    with pytest.raises(DomainError):
        blowup_basis_matrix(np.ones(1), 0.0)


def test_basis_identity_floating_moderate_t(rng):
    for _ in range(20):
        f = random_polymap(2, 6, 3, rng)
        bp = BlowupPoint(rng.standard_normal(2), unit(rng, 2), float(rng.uniform(0.1, 1.0)))
        p, q = phi(bp)
        lhs = f_tilde(f, bp)
        rhs = pair_matrix(f, p, q).matrix @ blowup_basis_matrix(bp.y, bp.t)
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs) < 1e-10


def test_exact_product_matches_series_small_t(rng):
    f = random_polymap(2, 5, 3, rng)
    a, y = rng.standard_normal(2), unit(rng, 2)
    S = f_tilde_series(f, a, y, 1e-3)[0]
    assert np.linalg.norm(S - exact_pair_product(f, a, y, 1e-3)) / np.linalg.norm(S) < 1e-14


def test_exact_rank():
    assert exact_rank(np.array([[1.0, 2.0], [2.0, 4.0]])) == 1
    assert exact_rank(np.eye(3)) == 3
    assert exact_rank(np.zeros((2, 2))) == 0


def test_exact_pair_rank_planar(planar_curve):
    assert exact_pair_rank(planar_curve, np.zeros(1), np.ones(1), 1.0) == 2


def test_remainder_scaling_cubic_is_zero(rng):
    rep = remainder_scaling_check(random_polymap(2, 3, 3, rng), np.zeros(2))
    assert rep.passed and rep["identically_zero"]


def test_remainder_scaling_quartic_closed_form():
    f = PolyMap(1, 1, np.zeros(1), [SymMultiMap.zero(k, 1, 1) for k in (1, 2, 3)]
                + [SymMultiMap.from_dict(4, 1, 1, {(0, 0, 0, 0): [24.0]})])
    rep = remainder_scaling_check(f, np.zeros(1), trials=2)
    assert rep.passed
    for ratios in rep["ratios"]:
        assert np.allclose(ratios, rep["t"], rtol=1e-12)


def test_remainder_scaling_random_quartic(rng):
    rep = remainder_scaling_check(random_polymap(3, 4, 4, rng), rng.standard_normal(3))
    assert rep.passed
    assert all(0.9 <= s <= 1.1 for s in rep["slopes"])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1), st.floats(1e-3, 1.0))
def test_property_basis_identity_exact(n, seed, t):
    rng = np.random.default_rng(seed)
    f = random_polymap(n, 2 * n + 1, 3, rng)
    a, y = rng.standard_normal(n), unit(rng, n)
    S = f_tilde_series(f, a, y, t)[0]
    assert np.linalg.norm(S - exact_pair_product(f, a, y, t)) <= 1e-12 * np.linalg.norm(S)


def test_public_alias():
    assert lemma2_matrix is blowup_basis_matrix
