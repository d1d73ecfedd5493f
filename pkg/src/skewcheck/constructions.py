"""Explicit maps: the convolution/diagonal cubic embedding and the degenerate triple.

Index conventions: :func:`conv_bilinear`, :func:`diag_trilinear` and
:func:`skew_cubic` use 0-based coordinates ``x_0 .. x_{n-1}``.
:func:`appendix_bbar` and :func:`appendix_triple` are described with 1-based
basis vectors ``e_1 .. e_n`` (and ``e'_1 .. e'_{2n}`` in the target); basis
vector ``e_i`` is stored at internal index ``i - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError
from .jets import PolyMap, SymMultiMap, multi_indices
from .report import Report


def conv_bilinear(n: int) -> SymMultiMap:
    """Symmetric bilinear ``B: R^n x R^n -> R^2n`` with ``B(x, y)_0 = 0`` and
    ``B(x, y)_k = sum_{i+j=k-1} x_i y_j`` for ``1 <= k <= 2n-1``."""
    if n < 1:
        raise InputError("n must be >= 1")
    values = {}
    for i, j in multi_indices(n, 2):
        v = np.zeros(2 * n)
        v[i + j + 1] = 1.0
        values[(i, j)] = v
    return SymMultiMap.from_dict(2, n, 2 * n, values)


def diag_trilinear(n: int) -> SymMultiMap:
    """``C(x, y, z) = (x_0 y_0 z_0, ..., x_{n-1} y_{n-1} z_{n-1}, 0, ..., 0)`` in R^2n."""
    if n < 1:
        raise InputError("n must be >= 1")
    values = {}
    for i in range(n):
        v = np.zeros(2 * n)
        v[i] = 1.0
        values[(i, i, i)] = v
    return SymMultiMap.from_dict(3, n, 2 * n, values)


def skew_cubic(n: int) -> PolyMap:
    """``f(x) = (x, B(x, x)/2 + C(x, x, x)/6)``: R^n -> R^3n.

    The 1/2 and 1/6 are absorbed by the jet storage, so the stored parts are
    exactly ``Df_0 = (I, 0)``, ``D^2 f_0 = (0, B)`` and ``D^3 f_0 = (0, C)``.
    """
    N = 3 * n
    L = SymMultiMap.from_linear(np.vstack([np.eye(n), np.zeros((2 * n, n))]))
    return PolyMap(n, N, np.zeros(N),
                   [L, conv_bilinear(n).embed(N, n), diag_trilinear(n).embed(N, n)])


def appendix_bbar(n: int) -> SymMultiMap:
    """``Bbar(e_i, e_j) = e'_{i+j}`` for ``i <= j``, except ``Bbar(e_1, e_n) = 0``.

    1-based in the description; internally ``e_i`` is index ``i - 1`` and
    ``e'_m`` is output index ``m - 1``.
    """
    if n < 2:
        raise InputError("appendix_bbar needs n >= 2")
    values = {}
    for i0, j0 in multi_indices(n, 2):
        i, j = i0 + 1, j0 + 1
        v = np.zeros(2 * n)
        if (i, j) != (1, n):
            v[i + j - 1] = 1.0
        values[(i0, j0)] = v
    return SymMultiMap.from_dict(2, n, 2 * n, values)


def appendix_triple(n: int, N: int) -> PolyMap:
    """``x -> L(x) + B(x, x)/2 + T(x, x, x)/6`` with ``L = (x, 0, 0)``,
    ``B = (0, Bbar, 0)`` and ``T = (0, C, 0)`` in ``R^n + R^2n + R^(N-3n)``."""
    if n < 2:
        raise InputError("appendix_triple needs n >= 2")
    if N < 3 * n:
        raise InputError(f"appendix_triple needs N >= 3n = {3 * n}, got N={N}")
    Lm = np.zeros((N, n))
    Lm[:n] = np.eye(n)
    return PolyMap(n, N, np.zeros(N),
                   [SymMultiMap.from_linear(Lm),
                    appendix_bbar(n).embed(N, n),
                    diag_trilinear(n).embed(N, n)])


CONSTRUCTIONS = {
    "skew-cubic": lambda n, N=None: skew_cubic(n),
    "appendix-triple": lambda n, N=None: appendix_triple(n, 3 * n if N is None else N),
}


def construct(name: str, n: int, N: int | None = None) -> PolyMap:
    """Named construction lookup used by the CLI."""
    try:
        builder = CONSTRUCTIONS[name]
    except KeyError:
        raise InputError(f"unknown construction {name!r}; "
                         f"choose from {sorted(CONSTRUCTIONS)}") from None
    if name == "skew-cubic" and N is not None and N != 3 * n:
        raise InputError(f"skew-cubic maps into R^{3 * n}, got --N {N}")
    return builder(n, N)


def lowest_index_argument(x, y) -> tuple[int, float] | None:
    """Component of ``B(x, y)`` forced nonzero by the lowest nonzero indices.

    For lowest nonzero indices ``i0`` of ``x`` and ``j0`` of ``y``, component
    ``i0 + j0 + 1`` of ``B(x, y)`` is ``x_{i0} y_{j0}``, since every other
    term of that sum has an index below ``i0`` or ``j0``.  Returns
    ``(component, value)``, or None when ``x`` or ``y`` is zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = np.flatnonzero(x), np.flatnonzero(y)
    if nx.size == 0 or ny.size == 0:
        return None
    i0, j0 = int(nx[0]), int(ny[0])
    return i0 + j0 + 1, float(x[i0] * y[j0])


def conv_nonsingular_check(n: int, mode: str = "exact", samples: int = 100_000,
                           seed: int = 0, pairs=None) -> Report:
    """Check that ``B(x, y) = 0`` forces ``x = 0`` or ``y = 0``.

    ``exact`` runs the lowest-index argument on the given ``pairs`` (or on
    ``samples`` random pairs with random sparsity) and compares the forced
    component with the actual value of ``B``.  ``sampled`` reports the
    minimum of ``||B(x, y)||`` over random unit pairs.
    """
    B = conv_bilinear(n)
    rng = np.random.default_rng(seed)
    if mode == "exact":
        if pairs is None:
            X = rng.standard_normal((samples, n)) * (rng.random((samples, n)) < 0.6)
            Y = rng.standard_normal((samples, n)) * (rng.random((samples, n)) < 0.6)
            pairs = zip(X, Y)
        checked = vacuous = mismatches = 0
        for x, y in pairs:
            hit = lowest_index_argument(x, y)
            if hit is None:
                vacuous += 1
                continue
            checked += 1
            comp, val = hit
            actual = B.apply(x, y)[comp]
            if val == 0.0 or not np.isclose(actual, val, rtol=1e-12, atol=0.0):
                mismatches += 1
        return Report("conv_nonsingular", mismatches == 0,
                      {"mode": mode, "n": n, "checked": checked,
                       "vacuous": vacuous, "mismatches": mismatches})
    if mode == "sampled":
        X = rng.standard_normal((samples, n))
        Y = rng.standard_normal((samples, n))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        Y /= np.linalg.norm(Y, axis=1, keepdims=True)
        vals = np.linalg.norm(np.einsum("Nab,sa,sb->sN", B.dense, X, Y), axis=1)
        return Report("conv_nonsingular", bool(vals.min() > 0.0),
                      {"mode": mode, "n": n, "samples": samples, "seed": seed,
                       "min_norm": float(vals.min())})
    raise InputError(f"mode must be 'exact' or 'sampled', got {mode!r}")


@dataclass(frozen=True)
class TriangularResult:
    """Outcome of the forward substitution: ``forced_zero`` or the first bad index."""

    forced_zero: bool
    contradiction_index: int | None = None


def triangular_oracle(x, lam: float, y) -> TriangularResult:
    """Forward substitution for ``B(x, y) + lam C(y, y, y) = 0`` with ``lam != 0``.

    Component 0 reads ``lam y_0^3 = 0``; once ``y_l = 0`` for ``l < k``, the
    convolution part of component ``k`` (``sum_{i+j=k-1} x_i y_j``) vanishes
    and the component reduces to ``lam y_k^3 = 0``.  Each step forces the
    next coordinate of ``y`` to zero.  Given a concrete ``y``, returns the
    first index where ``y`` disagrees with the forced value, else
    ``forced_zero=True``.
    """
    if lam == 0:
        raise DomainError("triangular_oracle needs lam != 0; use conv_nonsingular_check")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if y.shape != (n,):
        raise InputError("x and y must have the same dimension")
    for k in range(n):
        # reaching index k means y_l = 0 for all l < k, so the convolution
        # part of component k vanishes and only lam * y_k^3 remains
        if lam * y[k] ** 3 != 0.0:
            return TriangularResult(False, k)
    return TriangularResult(True)
