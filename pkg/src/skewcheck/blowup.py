"""Spherical blow-up of the diagonal and the modified pair map on it.

``phi(a, y, t) = (a, a + t y)`` parametrizes off-diagonal pairs by a base
point, a unit direction and a distance.  :func:`f_tilde` is the pair matrix
re-expressed on the blow-up so that it extends continuously to ``t = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

from .errors import DomainError, InputError
from .jets import PolyMap, contract_batch, jet_batch, taylor_tail
from .report import Report

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class BlowupPoint:
    """``(a, y, t)`` with ``||y|| = 1`` and ``t >= 0``."""

    a: np.ndarray
    y: np.ndarray
    t: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if a.ndim != 1 or y.shape != a.shape:
            raise InputError("a and y must be vectors of the same dimension")
        if abs(np.linalg.norm(y) - 1.0) > UNIT_TOL:
            raise InputError(f"y must be a unit vector, got norm {np.linalg.norm(y)!r}")
        if not self.t >= 0:
            raise InputError(f"t must be >= 0, got {self.t!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def from_pair(cls, p, q) -> "BlowupPoint":
        """Inverse of :func:`phi` off the diagonal."""
        p = np.asarray(p, dtype=float)
        d = np.asarray(q, dtype=float) - p
        t = float(np.linalg.norm(d))
        if t == 0.0:
            raise DomainError("p == q lies on the diagonal; the direction is undefined")
        return cls(p, d / t, t)


def phi(bp: BlowupPoint) -> tuple[np.ndarray, np.ndarray]:
    return bp.a.copy(), bp.a + bp.t * bp.y


def f_tilde(f: PolyMap, bp: BlowupPoint, method: str = "quotient") -> np.ndarray:
    """The blown-up pair matrix, shape ``N x (2n+1)``.

    For ``t > 0`` it is::

        (Df_a, (Df_{a+ty} - Df_a)/t,
         (6(Df_{a+ty}(ty) + Df_a(ty)) - 12(f(a+ty) - f(a)))/t^3)

    and for ``t = 0`` the boundary value
    ``(Df_a, D^2 f_a(y, .), D^3 f_a(y, y, y))``.  ``method="quotient"`` (the
    default) evaluates the difference quotients as written, in extended
    precision; ``method="series"`` evaluates the same quantity through
    :func:`f_tilde_series`, which has no cancellation at all.
    """
    a, y, t = bp.a, bp.y, bp.t
    if a.shape != (f.n,):
        raise InputError(f"base point must have dimension {f.n}")
    if method == "series":
        return f_tilde_series(f, a, y, t)[0]
    if method != "quotient":
        raise InputError(f"method must be 'series' or 'quotient', got {method!r}")
    if t == 0.0:
        return boundary_columns(jet_batch(f, a[None]), y[None], f.N, f.n)[0]
    # the quotients cancel about 3 log10(1/t) digits, so they are formed in
    # extended precision and rounded once at the end
    ld = lambda v: np.asarray(v, dtype=np.longdouble)
    a_, y_, t_ = ld(a), ld(y), np.longdouble(t)
    fa, Da = _value_and_jacobian(f, a_, ld)
    fq, Dq = _value_and_jacobian(f, a_ + t_ * y_, ld)
    second = (Dq - Da) / t_
    third = (6 * (Dq @ (t_ * y_) + Da @ (t_ * y_)) - 12 * (fq - fa)) / t_ ** 3
    return np.column_stack([Da, second, third]).astype(float)


def boundary_columns(J: list[np.ndarray], Y: np.ndarray, N: int, n: int) -> np.ndarray:
    """Batched ``[Df_a | D^2 f_a(y, .) | D^3 f_a(y, y, y)]`` from a jet batch.

    ``J`` is the output of :func:`jet_batch` (one base point per row, or a
    single base point broadcast against all rows of ``Y``).
    """
    s = Y.shape[0]
    out = np.zeros((s, N, 2 * n + 1))
    if len(J) >= 1:
        out[:, :, :n] = J[0]
    if len(J) >= 2:
        out[:, :, n:2 * n] = _bcast(J[1], s, 1, Y)
    if len(J) >= 3:
        out[:, :, 2 * n] = _bcast(J[2], s, 3, Y)
    return out


def _bcast(T, s, times, Y):
    if T.shape[0] == 1 and s != 1:
        T = np.broadcast_to(T, (s,) + T.shape[1:])
    return contract_batch(T, Y, times)


def f_tilde_series(f: PolyMap, A, Y, t) -> np.ndarray:
    """Blown-up pair matrix from the jet at ``a``, free of cancellation.

    Writing ``d_j = D^j f_a(y, ..., y)``, the exact expansions of the
    difference quotients are::

        (Df_{a+ty} - Df_a)/t = sum_{j>=2} t^(j-2)/(j-1)! D^j f_a(y^(j-1), .)
        third column         = sum_{j>=3} t^(j-3) (6j - 12)/j! d_j

    (the ``j = 1, 2`` terms of the third column cancel identically).  Valid
    for every ``t >= 0``; batched over rows of ``A``, ``Y`` and entries of ``t``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    s = max(A.shape[0], Y.shape[0])
    t = np.broadcast_to(np.asarray(t, dtype=float), (s,))
    n, N = f.n, f.N
    out = np.zeros((s, N, 2 * n + 1))
    if f.degree == 0:
        return out
    J = jet_batch(f, A)
    if A.shape[0] != s:
        J = [np.broadcast_to(T, (s,) + T.shape[1:]) for T in J]
    if Y.shape[0] != s:
        Y = np.broadcast_to(Y, (s, n))
    out[:, :, :n] = J[0]
    for j in range(2, f.degree + 1):
        w = t ** (j - 2) / factorial(j - 1)
        out[:, :, n:2 * n] += w[:, None, None] * contract_batch(J[j - 1], Y, j - 1)
    for j in range(3, f.degree + 1):
        w = t ** (j - 3) * (6 * j - 12) / factorial(j)
        out[:, :, 2 * n] += w[:, None] * contract_batch(J[j - 1], Y, j)
    return out


def blowup_basis_matrix(y, t: float) -> np.ndarray:
    """Change of basis ``M`` with ``f_tilde(a, y, t) = F(a, a + t y) @ M``.

    Block form (``I`` is ``n x n``)::

        [ I   -I/t   6y/t^2 ]
        [ 0    I/t   6y/t^2 ]
        [ 0    0    -12/t^3 ]

    Its determinant is ``-12 / t^(n+3)``.
    """
    y = np.asarray(y, dtype=float)
    if not t > 0:
        raise DomainError("the change of basis is only defined for t > 0")
    if abs(np.linalg.norm(y) - 1.0) > UNIT_TOL:
        raise InputError("y must be a unit vector")
    n = y.shape[0]
    M = np.zeros((2 * n + 1, 2 * n + 1))
    I = np.eye(n)
    M[:n, :n] = I
    M[:n, n:2 * n] = -I / t
    M[n:2 * n, n:2 * n] = I / t
    M[:n, 2 * n] = 6.0 * y / t ** 2
    M[n:2 * n, 2 * n] = 6.0 * y / t ** 2
    M[2 * n, 2 * n] = -12.0 / t ** 3
    return M


def remainder_scaling_check(f: PolyMap, a, k: int = 3, trials: int = 10,
                            seed: int = 0,
                            ts=tuple(10.0 ** -np.arange(1, 7))) -> Report:
    """Check that ``||R(a, t y)|| / t^k`` decays linearly as ``t -> 0``.

    For each of ``trials`` random unit ``y`` the ratio is evaluated at the
    given ``t`` values; the fitted log-log slope must lie in [0.9, 1.1] and
    ``ratio / t`` must stay within a factor 10 across the range.  A remainder
    that vanishes identically passes with no slope.
    """
    a = np.asarray(a, dtype=float)
    rng = np.random.default_rng(seed)
    ts = np.asarray(ts, dtype=float)
    slopes, spreads, all_zero = [], [], True
    ratios_out = []
    for _ in range(trials):
        y = rng.standard_normal(f.n)
        y /= np.linalg.norm(y)
        ratios = np.array([np.linalg.norm(taylor_tail(f, a, t * y, k)) / t ** k for t in ts])
        ratios_out.append(ratios)
        if not np.any(ratios):
            continue
        all_zero = False
        if np.any(ratios == 0.0):
            slopes.append(float("nan"))
            spreads.append(float("inf"))
            continue
        slope = np.polyfit(np.log(ts), np.log(ratios), 1)[0]
        slopes.append(float(slope))
        scaled = ratios / ts
        spreads.append(float(scaled.max() / scaled.min()))
    if all_zero:
        passed = True
    else:
        passed = all(0.9 <= s <= 1.1 for s in slopes) and all(r <= 10.0 for r in spreads)
    return Report("remainder_scaling", passed,
                  {"k": k, "trials": trials, "seed": seed, "t": ts,
                   "identically_zero": all_zero, "slopes": slopes,
                   "decay_spread": spreads, "ratios": ratios_out})


def _fractions(x) -> np.ndarray:
    return np.vectorize(Fraction, otypes=[object])(np.asarray(x, dtype=float))


def _value_and_jacobian(f: PolyMap, x: np.ndarray, convert):
    """``f(x)`` and ``Df_x`` in the number type produced by ``convert``.

    ``convert`` maps float arrays to arrays of that type (Fractions in an
    object array, or ``np.longdouble``); ``x`` must already be converted.
    """
    value = convert(f.constant)
    jac = convert(np.zeros((f.N, f.n)))
    for p in f.parts:
        T = convert(p.dense)
        for _ in range(p.k - 1):
            T = T @ x
        # T is now D^k(x^(k-1), .) as an N x n matrix
        jac = jac + T / factorial(p.k - 1)
        value = value + (T @ x) / factorial(p.k)
    return value, jac


def exact_pair_product(f: PolyMap, a, y, t: float) -> np.ndarray:
    """``F(a, a + t y) @ M(y, t)`` computed exactly from the float inputs.

    The entries of ``M`` grow like ``t^-3`` while the product stays bounded,
    so forming it in floating point loses about ``3 log10(1/t)`` digits.
    Here every input float is converted to a rational number and the product
    is formed without rounding, then converted back to float.
    """
    a, y = _fractions(a), _fractions(y)
    t = Fraction(float(t))
    if t <= 0:
        raise DomainError("the change of basis is only defined for t > 0")
    n = f.n
    fa, Da = _value_and_jacobian(f, a, _fractions)
    fq, Dq = _value_and_jacobian(f, a + t * y, _fractions)
    F = np.concatenate([Da, Dq, (fq - fa)[:, None]], axis=1)
    M = np.zeros((2 * n + 1, 2 * n + 1), dtype=object)
    M[:] = Fraction(0)
    for i in range(n):
        M[i, i] = Fraction(1)
        M[i, n + i] = -1 / t
        M[n + i, n + i] = 1 / t
        M[i, 2 * n] = 6 * y[i] / t ** 2
        M[n + i, 2 * n] = 6 * y[i] / t ** 2
    M[2 * n, 2 * n] = -12 / t ** 3
    return (F @ M).astype(float)


def exact_rank(A) -> int:
    """Rank of a float matrix, by rational Gaussian elimination."""
    return _exact_rank_objects(_fractions(A))


def exact_pair_rank(f: PolyMap, a, y, t: float) -> int:
    """Exact rank of ``F(a, a + t y)`` for the given float inputs."""
    a, y = _fractions(a), _fractions(y)
    t = Fraction(float(t))
    fa, Da = _value_and_jacobian(f, a, _fractions)
    fq, Dq = _value_and_jacobian(f, a + t * y, _fractions)
    F = np.concatenate([Da, Dq, (fq - fa)[:, None]], axis=1)
    return _exact_rank_objects(F)


def _exact_rank_objects(F: np.ndarray) -> int:
    R = [list(row) for row in F]
    rank, rows, cols = 0, F.shape[0], F.shape[1]
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if R[r][c] != 0), None)
        if pivot is None:
            continue
        R[rank], R[pivot] = R[pivot], R[rank]
        for r in range(rank + 1, rows):
            if R[r][c] != 0:
                m = R[r][c] / R[rank][c]
                R[r] = [x - m * z for x, z in zip(R[r], R[rank])]
        rank += 1
    return rank


# name used by the public API listing
lemma2_matrix = blowup_basis_matrix
