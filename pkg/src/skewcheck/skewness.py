"""Total skewness of point pairs via the rank of the pair matrix.

``F(p, q) = [Df_p | Df_q | f(q) - f(p)]`` acts on ``(v1, v2, lam)``; the
tangent spaces at ``f(p)`` and ``f(q)`` are totally skew exactly when it is
injective.  A kernel vector with ``lam = 0`` gives parallel tangent lines,
one with ``lam != 0`` gives intersecting ones.

Near the diagonal ``F(p, q)`` is badly scaled (its smallest singular value
shrinks like ``|q - p|^3``).  The rank decision therefore also looks at the
blown-up matrix ``F(p, q) @ M(y, t)``, computed without cancellation by
:func:`skewcheck.blowup.f_tilde_series`; ``M`` is invertible, so both have
the same rank, and a pair is declared skew when either matrix clears the
relative threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blowup import f_tilde_series
from .errors import DomainError, InputError
from .jets import PolyMap, jet_batch
from .report import Report

DEFAULT_TOL = 1e-9


def injectivity_singular_values(M: np.ndarray) -> np.ndarray:
    """Singular values padded with zeros up to the column count.

    A wide matrix (more columns than rows) has a kernel, so its trailing
    "singular values" for the purpose of injectivity are 0.
    """
    s = np.linalg.svd(M, compute_uv=False)
    cols = M.shape[-1]
    if s.shape[-1] < cols:
        pad = np.zeros(s.shape[:-1] + (cols - s.shape[-1],))
        s = np.concatenate([s, pad], axis=-1)
    return s


def smallest_right_singular_vector(M: np.ndarray) -> np.ndarray:
    """Right singular vector of the smallest (padded) singular value, sign-normalized."""
    _, _, vt = np.linalg.svd(M, full_matrices=True)
    v = vt[-1].copy()
    i = int(np.argmax(np.abs(v)))
    return v if v[i] >= 0 else -v


@dataclass(frozen=True)
class PairMatrix:
    """``F(p, q)`` with column blocks ``[Df_p | Df_q | f(q) - f(p)]``."""

    p: np.ndarray
    q: np.ndarray
    matrix: np.ndarray
    singular_values: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def act(self, v1, v2, lam: float) -> np.ndarray:
        n = self.n
        return (self.matrix[:, :n] @ v1 + self.matrix[:, n:2 * n] @ v2
                + lam * self.matrix[:, 2 * n])

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1])

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0])

    def rank(self, tol: float = DEFAULT_TOL) -> int:
        s = self.singular_values
        return int(np.sum(s > tol * s[0])) if s[0] > 0 else 0


def pair_matrix(f: PolyMap, p, q) -> PairMatrix:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (f.n,) or q.shape != (f.n,):
        raise InputError(f"points must have dimension {f.n}")
    if np.linalg.norm(q - p) == 0.0:
        raise DomainError("the pair matrix is undefined on the diagonal p == q")
    M = _pair_matrices(f, p[None], q[None])[0]
    return PairMatrix(p, q, M, injectivity_singular_values(M))


def _pair_matrices(f: PolyMap, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    s = P.shape[0]
    out = np.zeros((s, f.N, 2 * f.n + 1))
    if f.degree:
        out[:, :, :f.n] = jet_batch(f, P)[0]
        out[:, :, f.n:2 * f.n] = jet_batch(f, Q)[0]
    out[:, :, 2 * f.n] = f(Q) - f(P)
    return out


@dataclass(frozen=True)
class PairSkewResult:
    skew: bool
    sigma_min: float
    sigma_max: float
    raw_margin: float
    blowup_margin: float
    reason: str = ""

    @property
    def margin(self) -> float:
        return max(self.raw_margin, self.blowup_margin)


def _margins(f: PolyMap, P: np.ndarray, Q: np.ndarray):
    """Raw singular values and the relative margins of both representations."""
    D = Q - P
    t = np.linalg.norm(D, axis=1)
    Y = D / t[:, None]
    raw = injectivity_singular_values(_pair_matrices(f, P, Q))
    blown = injectivity_singular_values(f_tilde_series(f, P, Y, t))
    with np.errstate(invalid="ignore", divide="ignore"):
        raw_margin = np.where(raw[:, 0] > 0, raw[:, -1] / raw[:, 0], 0.0)
        blow_margin = np.where(blown[:, 0] > 0, blown[:, -1] / blown[:, 0], 0.0)
    return raw, raw_margin, blow_margin


def is_pair_skew(f: PolyMap, p, q, tol: float = DEFAULT_TOL) -> PairSkewResult:
    """Decide whether ``f`` is totally skew at ``f(p)`` and ``f(q)``.

    ``skew`` holds when the smallest singular value exceeds ``tol`` times the
    largest, for the pair matrix or its blown-up form.  When ``N < 2n + 1``
    the answer is structurally ``False`` (``reason`` says so).
    """
    pm = pair_matrix(f, p, q)
    raw, raw_margin, blow_margin = _margins(f, pm.p[None], pm.q[None])
    if f.N < 2 * f.n + 1:
        return PairSkewResult(False, 0.0, pm.sigma_max, 0.0, 0.0,
                              f"dimension too small: N={f.N} < 2n+1={2 * f.n + 1}")
    skew = bool(max(raw_margin[0], blow_margin[0]) > tol)
    return PairSkewResult(skew, pm.sigma_min, pm.sigma_max,
                          float(raw_margin[0]), float(blow_margin[0]))


@dataclass(frozen=True)
class FailureClassification:
    """``kind`` is ``"parallel"``, ``"intersecting"`` or ``"none"``."""

    kind: str
    witness: tuple[np.ndarray, np.ndarray, float] | None = None


def classify_failure(f: PolyMap, p, q, tol: float = DEFAULT_TOL) -> FailureClassification:
    """Name the way skewness fails at ``(p, q)`` and return a kernel witness."""
    res = is_pair_skew(f, p, q, tol)
    if res.skew:
        return FailureClassification("none")
    pm = pair_matrix(f, p, q)
    w = smallest_right_singular_vector(pm.matrix)
    n = f.n
    v1, v2, lam = w[:n], w[n:2 * n], float(w[2 * n])
    kind = "parallel" if abs(lam) <= tol * np.linalg.norm(w[:2 * n]) else "intersecting"
    return FailureClassification(kind, (v1, v2, lam))


@dataclass(frozen=True)
class LinePairResult:
    """``kind`` is ``"skew"``, ``"parallel"`` or ``"intersecting"``."""

    skew: bool
    kind: str
    sigma: float


def line_pair_oracle(p1, d1, p2, d2, tol: float = DEFAULT_TOL) -> LinePairResult:
    """Classify the lines ``p1 + s d1`` and ``p2 + s d2`` in R^N.

    Parallel when ``[d1 | d2]`` has rank 1; skew when ``[d1 | d2 | p2 - p1]``
    has rank 3; intersecting otherwise.  Ranks are decided on unit-normalized
    columns with absolute singular-value threshold ``tol``; ``sigma`` is the
    third singular value (0 when ``N < 3``).
    """
    p1, d1, p2, d2 = (np.asarray(v, dtype=float) for v in (p1, d1, p2, d2))
    if p1.ndim != 1 or not (p1.shape == d1.shape == p2.shape == d2.shape):
        raise InputError("points and directions must be vectors of one dimension")
    if p1.shape[0] < 2:
        raise InputError("ambient dimension must be >= 2")
    n1, n2 = np.linalg.norm(d1), np.linalg.norm(d2)
    if n1 == 0.0 or n2 == 0.0:
        raise InputError("line directions must be nonzero")
    u1, u2 = d1 / n1, d2 / n2
    s2 = np.linalg.svd(np.column_stack([u1, u2]), compute_uv=False)
    if s2[-1] <= tol:
        return LinePairResult(False, "parallel", 0.0)
    delta = p2 - p1
    dn = np.linalg.norm(delta)
    if dn == 0.0:
        return LinePairResult(False, "intersecting", 0.0)
    s3 = injectivity_singular_values(np.column_stack([u1, u2, delta / dn]))
    sigma = float(s3[2])
    if sigma > tol:
        return LinePairResult(True, "skew", sigma)
    return LinePairResult(False, "intersecting", sigma)


def tangent_line_pair(f: PolyMap, p, q, u, w):
    """Points and directions of the tangent lines ``f(p) + s Df_p u`` and ``f(q) + s Df_q w``."""
    return f(p), f.jacobian(p) @ u, f(q), f.jacobian(q) @ w


def witness_lines(f: PolyMap, p, q, witness):
    """Tangent lines realizing a kernel witness ``(v1, v2, lam)`` of ``F(p, q)``.

    A zero direction block (the other point lies on this tangent line) is
    replaced by the first basis direction, since any line through that point
    meets the other line.
    """
    v1, v2, _ = witness
    Dp, Dq = f.jacobian(p), f.jacobian(q)
    d1, d2 = Dp @ v1, -(Dq @ v2)
    scale = max(np.linalg.norm(d1), np.linalg.norm(d2))
    if np.linalg.norm(d1) <= 1e-12 * scale:
        d1 = Dp[:, 0]
    if np.linalg.norm(d2) <= 1e-12 * scale:
        d2 = Dq[:, 0]
    return f(p), d1, f(q), d2


def sample_ball(rng: np.random.Generator, center, r: float, count: int) -> np.ndarray:
    """Uniform points in the ball: normalized Gaussian times ``r U^(1/n)``."""
    center = np.asarray(center, dtype=float)
    n = center.shape[0]
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return center + g * (r * rng.random(count) ** (1.0 / n))[:, None]


def sample_pairs(rng: np.random.Generator, a, r: float, trials: int,
                 min_sep: float) -> tuple[np.ndarray, np.ndarray]:
    P = sample_ball(rng, a, r, trials)
    Q = sample_ball(rng, a, r, trials)
    bad = np.linalg.norm(Q - P, axis=1) <= min_sep
    while np.any(bad):
        Q[bad] = sample_ball(rng, a, r, int(bad.sum()))
        bad = np.linalg.norm(Q - P, axis=1) <= min_sep
    return P, Q


def sweep_neighborhood(f: PolyMap, a, r: float, trials: int = 10_000,
                       tol: float = DEFAULT_TOL, seed: int = 0,
                       oracle_fraction: float = 0.01, batch: int = 2048,
                       max_classified: int = 50) -> Report:
    """Test total skewness on random pairs drawn uniformly from ``B_r(a)``.

    Pairs closer than ``r * 1e-6`` are redrawn.  A fraction of pairs is
    cross-checked by drawing one random tangent-line pair and classifying it
    with :func:`line_pair_oracle`; a disagreement is a pair judged skew whose
    sampled lines are not.  Non-skew pairs (up to ``max_classified``) are
    classified as parallel or intersecting.
    """
    if r <= 0 or trials < 1:
        raise InputError("need r > 0 and trials >= 1")
    a = np.asarray(a, dtype=float)
    if a.shape != (f.n,):
        raise InputError(f"base point must have dimension {f.n}")
    rng = np.random.default_rng(seed)
    P, Q = sample_pairs(rng, a, r, trials, r * 1e-6)
    sig_min = np.empty(trials)
    margin = np.empty(trials)
    for lo in range(0, trials, batch):
        hi = min(lo + batch, trials)
        raw, rm, bm = _margins(f, P[lo:hi], Q[lo:hi])
        sig_min[lo:hi] = raw[:, -1]
        margin[lo:hi] = np.maximum(rm, bm)
    structural = f.N < 2 * f.n + 1
    skew = np.zeros(trials, dtype=bool) if structural else margin > tol

    n_oracle = max(1, math.ceil(oracle_fraction * trials)) if oracle_fraction > 0 else 0
    oracle_idx = np.sort(rng.choice(trials, size=min(n_oracle, trials), replace=False))
    disagreements = []
    for i in oracle_idx:
        u = rng.standard_normal(f.n)
        w = rng.standard_normal(f.n)
        lines = tangent_line_pair(f, P[i], Q[i], u, w)
        if np.linalg.norm(lines[1]) == 0 or np.linalg.norm(lines[3]) == 0:
            continue
        verdict = line_pair_oracle(*lines, tol=tol)
        if skew[i] and not verdict.skew:
            disagreements.append(int(i))

    kinds = {"parallel": 0, "intersecting": 0}
    failing = np.flatnonzero(~skew)
    for i in failing[:max_classified]:
        kinds[classify_failure(f, P[i], Q[i], tol).kind] += 1

    worst = int(np.argmin(margin))
    passed = bool(skew.all()) and not disagreements
    return Report("sweep", passed, {
        "min_sigma": float(sig_min.min()),
        "min_margin": float(margin.min()),
        "worst_pair": [P[worst], Q[worst]],
        "trials": trials, "seed": seed, "tol": tol, "r": r, "a": a,
        "non_skew": int((~skew).sum()),
        "failure_kinds": kinds,
        "oracle_checked": int(len(oracle_idx)),
        "oracle_disagreements": len(disagreements),
        "reason": f"dimension too small: N={f.N} < 2n+1" if structural else "",
    })
