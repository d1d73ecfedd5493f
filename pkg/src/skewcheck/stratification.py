"""Jet triples ``(L, B, T)``, the set where the local condition fails, and its size.

A triple defines ``x -> L(x) + B(x, x)/2 + T(x, x, x)/6``; it fails when the
local condition fails at the origin.  :func:`genericity_experiment` samples
Gaussian triples and counts confirmed failures.  :func:`transversality_check`
verifies injectivity of the linearized failure equation, restricted by the
normalizations, at the explicit degenerate triple, which is the point
needed to pin the codimension of the failure set.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constructions import appendix_triple
from .errors import InputError
from .jets import PolyMap, SymMultiMap, random_sym_multimap
from .local_condition import LocalOptions, check_local_condition
from .report import Report

FAILURE_SIGMA = 1e-10
FAILURE_RESIDUAL = 1e-8


@dataclass(frozen=True)
class JetTriple:
    n: int
    N: int
    L: SymMultiMap
    B: SymMultiMap
    T: SymMultiMap

    def __post_init__(self):
        for k, m in ((1, self.L), (2, self.B), (3, self.T)):
            if (m.k, m.n, m.N) != (k, self.n, self.N):
                raise InputError(f"degree-{k} part has shape (k={m.k}, n={m.n}, N={m.N}), "
                                 f"expected (k={k}, n={self.n}, N={self.N})")

    def to_polymap(self) -> PolyMap:
        return PolyMap(self.n, self.N, np.zeros(self.N), [self.L, self.B, self.T])

    @classmethod
    def from_polymap(cls, f: PolyMap) -> "JetTriple":
        return cls(f.n, f.N, f.part(1), f.part(2), f.part(3))

    def __mul__(self, c: float) -> "JetTriple":
        return JetTriple(self.n, self.N, self.L * c, self.B * c, self.T * c)


def sample_triple(n: int, N: int, seed=0) -> JetTriple:
    """Triple with i.i.d. standard Gaussian coefficients (one per sorted multi-index).

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if n < 1 or N < 1:
        raise InputError("need n >= 1 and N >= 1")
    rng = np.random.default_rng(seed)
    return JetTriple(n, N, *(random_sym_multimap(k, n, N, rng) for k in (1, 2, 3)))


def _trial(n: int, N: int, seed: int, i: int, opts: LocalOptions):
    f = sample_triple(n, N, [seed, i]).to_polymap()
    rep = check_local_condition(f, np.zeros(n), opts)
    confirmed = (rep.min_sigma < FAILURE_SIGMA and rep.witness is not None
                 and rep.witness.residual < FAILURE_RESIDUAL)
    return rep.min_sigma, bool(confirmed)


def genericity_experiment(n: int, N: int, trials: int = 1000, seed: int = 0,
                          tol: float = 1e-8, threads: int = 1,
                          keep_values: bool = False) -> Report:
    """Count confirmed local-condition failures among random triples.

    Trial ``i`` uses the seed ``[seed, i]``.  A failure is confirmed only if
    ``min_sigma < 1e-10`` and a kernel witness with residual below ``1e-8``
    exists.  Expectations: no failures when ``N >= 3n``; every trial fails
    when ``N < 2n + 1``; nothing is asserted in between.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    opts = LocalOptions(tol=tol, seed=seed)
    run = lambda i: _trial(n, N, seed, i, opts)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(trials)))
    else:
        results = [run(i) for i in range(trials)]
    sigmas = np.array([r[0] for r in results])
    failures = int(sum(r[1] for r in results))
    if N >= 3 * n:
        expectation, passed = "no failures", failures == 0
    elif N < 2 * n + 1:
        expectation, passed = "all fail", failures == trials
    else:
        expectation, passed = "none asserted", True
    data = {"n": n, "N": N, "trials": trials, "failures": failures,
            "min_sigma_min": float(sigmas.min()),
            "min_sigma_quartiles": [float(q) for q in np.percentile(sigmas, [25, 50, 75])],
            "seed": seed, "tol": tol, "expectation": expectation}
    if keep_values:
        data["min_sigma_values"] = sigmas
    return Report("genericity", bool(passed), data)


def _degenerate_point(n: int, N: int):
    if n < 2 or N < 3 * n:
        raise InputError(f"need n >= 2 and N >= 3n, got n={n}, N={N}")
    f = appendix_triple(n, N)
    v2 = np.zeros(n)
    v2[n - 1] = 1.0
    v3 = np.zeros(n)
    v3[0] = 1.0
    return f.part(1), f.part(2), f.part(3), v2, v3, 0.0


def linearized_failure_equation(n: int, N: int, w1, w2, nu: float, w3) -> np.ndarray:
    """``L(w1) + B(w2, v3) + B(v2, w3) + nu T(v3, v3, v3) + 3 lam T(w3, v3, v3)``
    at the degenerate triple with ``v2 = e_n``, ``v3 = e_1`` and ``lam = 0``."""
    L, B, T, v2, v3, lam = _degenerate_point(n, N)
    return (L.apply(w1) + B.apply(w2, v3) + B.apply(v2, w3)
            + nu * T.apply(v3, v3, v3) + 3 * lam * T.apply(w3, v3, v3))


def appendix_differential(n: int, N: int) -> np.ndarray:
    """``N x (3n+1)`` matrix of the linearized equation on ``(w1, w2, nu, w3)``."""
    L, B, T, v2, v3, lam = _degenerate_point(n, N)
    cols = [L.as_matrix(),
            np.einsum("Nab,b->Na", B.dense, v3),
            T.apply(v3, v3, v3)[:, None],
            np.einsum("Nab,a->Nb", B.dense, v2) + 3 * lam * np.einsum("Nabc,b,c->Na", T.dense, v3, v3)]
    return np.concatenate(cols, axis=1)


def appendix_tangent_basis(n: int) -> np.ndarray:
    """Orthonormal basis (``(3n+1) x (3n-1)``) of the normalization subspace.

    The constraints ``(w1, w2, nu) _|_ (0, e_n, 0)`` and ``w3 _|_ e_1`` remove
    the coordinates ``w2_n`` and ``w3_1``; the remaining coordinate vectors,
    in order, form the basis.
    """
    dim = 3 * n + 1
    drop = {n + (n - 1), 2 * n + 1}
    return np.eye(dim)[:, [i for i in range(dim) if i not in drop]]


def appendix_tangent_system(n: int, N: int) -> np.ndarray:
    """``N x (3n-1)``: the linearized equation restricted to the normalization subspace."""
    return appendix_differential(n, N) @ appendix_tangent_basis(n)


def transversality_check(n: int, N: int, tol: float = 1e-8) -> Report:
    """Injectivity of :func:`appendix_tangent_system`, plus the unconstrained kernel.

    Without the normalizations the kernel should be two-dimensional and
    spanned by the ``w2 = e_n`` and ``w3 = e_1`` directions; the report gives
    its dimension and how much of it lies in that span.
    """
    S = appendix_tangent_system(n, N)
    s = np.linalg.svd(S, compute_uv=False)
    sigma_min = float(s[-1]) if S.shape[0] >= S.shape[1] else 0.0
    D = appendix_differential(n, N)
    _, sd, vt = np.linalg.svd(D, full_matrices=True)
    sd_full = np.zeros(D.shape[1])
    sd_full[:sd.shape[0]] = sd
    kernel = vt[sd_full <= tol * max(sd_full[0], 1.0)]
    expected = np.zeros((2, D.shape[1]))
    expected[0, n + (n - 1)] = 1.0
    expected[1, 2 * n + 1] = 1.0
    # distance of each kernel vector from span{w2 = e_n, w3 = e_1}
    off_span = float(max((np.linalg.norm(v - expected.T @ (expected @ v)) for v in kernel),
                         default=0.0))
    injective = sigma_min > tol
    kdim = int(kernel.shape[0])
    return Report("transversality", bool(injective and kdim == 2 and off_span < 1e-8),
                  {"n": n, "N": N, "tol": tol, "injective": bool(injective),
                   "sigma_min": sigma_min, "unconstrained_kernel_dim": kdim,
                   "kernel_off_span": off_span})
