"""Geometric form of the local condition.

At a point where ``Df_a`` is injective the local condition splits into

1. the second fundamental form ``II = P_perp D^2 f_a`` is nonsingular
   (``II(x, y) = 0`` forces ``x = 0`` or ``y = 0``), and
2. no regular curve through the point has an image with vanishing third
   derivative, which at jet level means ``D^3 f_a(y, y, y)`` never lies in
   the span of ``[Df_a | D^2 f_a(y, .)]`` for unit ``y``.

For curves in R^3 both together amount to nonzero torsion.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ImmersionError, InputError
from .jets import PolyMap, SymMultiMap, derivative, jet_batch
from .local_condition import LocalOptions, check_local_condition
from .report import Report
from .sphere import minimize_on_sphere

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class CurveJet:
    """Derivatives ``g1, g2, g3`` of a curve at parameter ``t0``."""

    t0: float
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray

    def __post_init__(self):
        vs = [np.asarray(v, dtype=float) for v in (self.g1, self.g2, self.g3)]
        if not (vs[0].ndim == 1 and vs[0].shape == vs[1].shape == vs[2].shape):
            raise InputError("g1, g2, g3 must be vectors of one dimension")
        for name, v in zip(("g1", "g2", "g3"), vs):
            object.__setattr__(self, name, v)

    def point(self, s: float, base) -> np.ndarray:
        """Cubic model ``base + g1 s + g2 s^2/2 + g3 s^3/6`` (``s = t - t0``)."""
        return np.asarray(base, dtype=float) + self.g1 * s + self.g2 * s ** 2 / 2 + self.g3 * s ** 3 / 6

    def reparametrize(self, c: float, b: float, d: float) -> "CurveJet":
        """Jet of ``gamma(t0 + c s + b s^2/2 + d s^3/6)`` at ``s = 0``."""
        return CurveJet(self.t0, c * self.g1, c ** 2 * self.g2 + b * self.g1,
                        c ** 3 * self.g3 + 3 * b * c * self.g2 + d * self.g1)


def tangent_basis(f: PolyMap, a, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (``N x n``) of ``Im Df_a``, columns in ``Df_a`` order."""
    J = f.jacobian(np.asarray(a, dtype=float))
    s = np.linalg.svd(J, compute_uv=False)
    if J.shape[0] < J.shape[1] or s[-1] <= tol * max(s[0], 1.0):
        raise ImmersionError(f"Df_a is not injective (sigma_min={s[-1] if s.size else 0.0!r})")
    Q, R = np.linalg.qr(J)
    # fix signs so the basis does not depend on LAPACK conventions
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


@dataclass(frozen=True)
class SecondFundamentalForm:
    """``II(u, v) = P_perp D^2 f_a(u, v)`` with ``P_perp`` onto ``(Im Df_a)^perp``."""

    a: np.ndarray
    form: SymMultiMap
    tangent: np.ndarray

    @property
    def projector(self) -> np.ndarray:
        return np.eye(self.tangent.shape[0]) - self.tangent @ self.tangent.T

    def __call__(self, u, v) -> np.ndarray:
        return self.form.apply(u, v)

    def partial(self, x) -> np.ndarray:
        """``II(x, .)`` as an ``N x n`` matrix."""
        return np.einsum("Nab,a->Nb", self.form.dense, np.asarray(x, dtype=float))


def second_fundamental_form(f: PolyMap, a) -> SecondFundamentalForm:
    a = np.asarray(a, dtype=float)
    T = tangent_basis(f, a)
    P = np.eye(f.N) - T @ T.T
    D2 = derivative(f, a, 2)
    return SecondFundamentalForm(a, SymMultiMap(2, f.n, f.N, D2.coeffs @ P.T), T)


@dataclass(frozen=True)
class BilinearCheck:
    nonsingular: bool
    min_norm: float
    witness: tuple[np.ndarray, np.ndarray] | None


def ii_nonsingular(form: SecondFundamentalForm, opts: LocalOptions | None = None,
                   alternations: int = 20) -> BilinearCheck:
    """Estimate ``min ||II(x, y)||`` over pairs of unit vectors.

    For fixed ``x`` the minimum over ``y`` is the smallest singular value of
    ``II(x, .)``, so the search runs over ``x`` only; the best pair is then
    polished by alternating the roles of ``x`` and ``y``.
    """
    opts = opts or LocalOptions()
    n = form.form.n
    dense = form.form.dense

    def sig(X):
        mats = np.einsum("Nab,sa->sNb", dense, X)
        return np.linalg.svd(mats, compute_uv=False)[:, -1]

    if n == 1:
        x = np.ones(1)
        y = np.ones(1)
        val = float(np.linalg.norm(form(x, y)))
    else:
        samples = opts.samples or 2048 * n
        n_random = int(samples * opts.random_fraction)
        res = minimize_on_sphere(sig, n, samples=samples - n_random, random_samples=n_random,
                                 starts=opts.starts, steps=opts.steps, seed=opts.seed)
        x = res.y
        y = np.linalg.svd(form.partial(x))[2][-1]
        val = float(np.linalg.norm(form(x, y)))
        for _ in range(alternations):
            x_new = np.linalg.svd(form.partial(y))[2][-1]
            y_new = np.linalg.svd(form.partial(x_new))[2][-1]
            v_new = float(np.linalg.norm(form(x_new, y_new)))
            if v_new >= val:
                break
            x, y, val = x_new, y_new, v_new
    nonsingular = bool(val > opts.tol)
    return BilinearCheck(nonsingular, val, None if nonsingular else (x, y))


def faa_di_bruno_third(f: PolyMap, a, jet: CurveJet) -> np.ndarray:
    """Third derivative of ``f o gamma`` where ``gamma`` has the given jet at ``a``:
    ``Df_a(g3) + D^2 f_a(3 g2, g1) + D^3 f_a(g1, g1, g1)``."""
    a = np.asarray(a, dtype=float)
    D1, D2, D3 = (derivative(f, a, k) for k in (1, 2, 3))
    return D1.apply(jet.g3) + D2.apply(3 * jet.g2, jet.g1) + D3.apply(jet.g1, jet.g1, jet.g1)


def image_curve_jet(f: PolyMap, a, jet: CurveJet) -> CurveJet:
    """Jet of ``f o gamma`` from the jet of ``gamma`` at a point over ``a``."""
    a = np.asarray(a, dtype=float)
    D1, D2 = derivative(f, a, 1), derivative(f, a, 2)
    return CurveJet(jet.t0, D1.apply(jet.g1),
                    D1.apply(jet.g2) + D2.apply(jet.g1, jet.g1),
                    faa_di_bruno_third(f, a, jet))


def span_residuals(f: PolyMap, a, Y: np.ndarray, rank_tol: float = 1e-10) -> np.ndarray:
    """Distance of ``D^3 f_a(y, y, y)`` from the span of ``[Df_a | D^2 f_a(y, .)]``."""
    J = jet_batch(f, np.asarray(a, dtype=float)[None])
    n, N = f.n, f.N
    Y = np.atleast_2d(Y)
    s = Y.shape[0]
    A = np.zeros((s, N, 2 * n))
    A[:, :, :n] = J[0][0]
    target = np.zeros((s, N))
    if len(J) >= 2:
        A[:, :, n:] = np.einsum("Nab,sa->sNb", J[1][0], Y)
    if len(J) >= 3:
        target = np.einsum("Nabc,sa,sb,sc->sN", J[2][0], Y, Y, Y)
    U, S, _ = np.linalg.svd(A, full_matrices=False)
    keep = S > rank_tol * S[:, :1]
    U = U * keep[:, None, :]
    proj = np.einsum("sNr,sr->sN", U, np.einsum("sNr,sN->sr", U, target))
    return np.linalg.norm(target - proj, axis=1)


@dataclass(frozen=True)
class CurveCheck:
    holds: bool
    min_residual: float
    witness_y: np.ndarray | None


def curve_third_derivative_condition(f: PolyMap, a, opts: LocalOptions | None = None) -> CurveCheck:
    """Whether ``D^3 f_a(y, y, y)`` stays off ``span[Df_a | D^2 f_a(y, .)]`` for all unit ``y``.

    A solution with ``lam != 0`` can be scaled to ``lam = 1`` by replacing
    ``v3`` with ``lam^(1/3) v3`` (real cube root), which is why a single
    span-membership test per direction suffices.
    """
    opts = opts or LocalOptions()
    a = np.asarray(a, dtype=float)
    tangent_basis(f, a)
    func = lambda Y: span_residuals(f, a, Y)
    if f.n == 1:
        val = float(func(np.ones((1, 1)))[0])
        y = np.ones(1)
    else:
        samples = opts.samples or 2048 * f.n
        n_random = int(samples * opts.random_fraction)
        res = minimize_on_sphere(func, f.n, samples=samples - n_random, random_samples=n_random,
                                 starts=opts.starts, steps=opts.steps, seed=opts.seed)
        val, y = res.value, res.y
    holds = bool(val > opts.tol)
    return CurveCheck(holds, val, None if holds else y)


def torsion(jet: CurveJet, tol: float = 1e-12) -> float:
    """``det[g1, g2, g3] / ||g1 x g2||^2`` for a curve jet in R^3."""
    if jet.g1.shape != (3,):
        raise InputError("torsion is defined for curves in R^3")
    cross = np.cross(jet.g1, jet.g2)
    c2 = float(cross @ cross)
    if np.sqrt(c2) <= tol:
        raise DomainError("torsion is undefined where g1 and g2 are dependent")
    return float(np.linalg.det(np.column_stack([jet.g1, jet.g2, jet.g3])) / c2)


def straight_line_jet(f: PolyMap, a) -> CurveJet:
    """Image jet of ``t -> a + t`` for a curve ``f: R -> R^N``."""
    if f.n != 1:
        raise InputError("straight_line_jet needs a one-dimensional domain")
    return image_curve_jet(f, a, CurveJet(0.0, np.ones(1), np.zeros(1), np.zeros(1)))


def precompose_germ(f: PolyMap, a, A, Q: SymMultiMap | None = None,
                    K: SymMultiMap | None = None) -> PolyMap:
    """3-jet at ``a`` of ``f o phi``, with ``phi(x) = a + A x + Q(x, x)/2 + K(x, x, x)/6``.

    The result is a cubic map centred at the origin: its derivatives at 0
    are those of ``f o phi`` at 0 (where ``phi(0) = a``).
    """
    a = np.asarray(a, dtype=float)
    A = np.asarray(A, dtype=float)
    n = f.n
    if A.shape != (n, n):
        raise InputError(f"A must be {n} x {n}")
    Q = Q if Q is not None else SymMultiMap.zero(2, n, n)
    K = K if K is not None else SymMultiMap.zero(3, n, n)
    F1, F2, F3 = (derivative(f, a, k).dense for k in (1, 2, 3))
    q, k = Q.dense, K.dense
    H1 = F1 @ A
    H2 = (np.einsum("Nij,ia,jb->Nab", F2, A, A)
          + np.einsum("Ni,iab->Nab", F1, q))
    mixed = np.einsum("Nij,iab,jc->Nabc", F2, q, A)
    # the three placements of Q among (u, v, w) sum to 3 * sym(mixed)
    H3 = (np.einsum("Nijk,ia,jb,kc->Nabc", F3, A, A, A)
          + 3.0 * _symmetrize3(mixed)
          + np.einsum("Ni,iabc->Nabc", F1, k))
    return PolyMap(n, f.N, f(a), [SymMultiMap.from_dense(H1), SymMultiMap.from_dense(H2),
                                  SymMultiMap.from_dense(H3)])


def _symmetrize3(T: np.ndarray) -> np.ndarray:
    perms = [(0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 1, 3), (0, 2, 3, 1), (0, 3, 1, 2), (0, 3, 2, 1)]
    return sum(T.transpose(p) for p in perms) / 6.0


def equivalence_check(f: PolyMap, a, opts: LocalOptions | None = None) -> Report:
    """Compare the local condition with (II nonsingular) and (curve condition).

    The report passes when ``local == (ii and curve)``, or when the two
    disagree but some margin lies in the borderline band ``< 10 tol``.
    For curves in R^3 the torsion of the straight-line image jet is added.
    """
    opts = opts or LocalOptions()
    a = np.asarray(a, dtype=float)
    local = check_local_condition(f, a, opts)
    ii = ii_nonsingular(second_fundamental_form(f, a), opts)
    curve = curve_third_derivative_condition(f, a, opts)
    margins = {"local": local.min_sigma, "ii": ii.min_norm, "curve": curve.min_residual}
    borderline = any(m < 10 * opts.tol for m in margins.values())
    consistent = local.holds == (ii.nonsingular and curve.holds)
    data = {"local": bool(local.holds), "ii_nonsingular": ii.nonsingular,
            "curve_condition": curve.holds, "margins": margins,
            "borderline": borderline, "consistent": consistent, "tol": opts.tol,
            "seed": opts.seed}
    if f.n == 1 and f.N == 3:
        try:
            data["torsion"] = torsion(straight_line_jet(f, a))
        except DomainError:
            data["torsion"] = None
    return Report("geometry", consistent or borderline, data)
