"""Point sets on the unit sphere S^(n-1) and minimization of batched functions on it.

Used for the local-condition minimizer and its certified covering nets, and
for the curve-condition residual in :mod:`skewcheck.geometry`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import norm, qmc

from .errors import InputError, ResourceError

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

# points held in memory at once when building or evaluating a net
DEFAULT_NET_BUDGET = 4_000_000


def normalize_rows(X: np.ndarray) -> np.ndarray:
    return X / np.linalg.norm(X, axis=-1, keepdims=True)


def axis_points(n: int) -> np.ndarray:
    """``+e_1, -e_1, +e_2, -e_2, ...``"""
    E = np.eye(n)
    return np.stack([s * E[i] for i in range(n) for s in (1.0, -1.0)])


def quasi_uniform(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy points on S^(n-1)."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(1.0 - z * z)
        phi = i * GOLDEN_ANGLE
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u = qmc.Halton(d=n, scramble=True, seed=seed).random(count)
    g = norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))
    return normalize_rows(g)


def sphere_samples(n: int, count: int, random_count: int, seed: int = 0) -> np.ndarray:
    """Coordinate axes first, then quasi-uniform points, then random points.

    The axes lead so that ties in a later argmin resolve to a coordinate
    direction when one attains the minimum.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]])
    rng = np.random.default_rng(seed)
    rand = normalize_rows(rng.standard_normal((random_count, n)))
    return np.vstack([axis_points(n), quasi_uniform(n, count, seed), rand])


def tangent_bases(Y: np.ndarray) -> np.ndarray:
    """Orthonormal bases of the tangent spaces ``y^perp``; shape ``(K, n-1, n)``."""
    K, n = Y.shape
    out = np.empty((K, n - 1, n))
    for i, y in enumerate(Y):
        q, _ = np.linalg.qr(np.column_stack([y, np.eye(n)]))
        out[i] = q[:, 1:].T
    return out


@dataclass
class SphereMinimum:
    value: float
    y: np.ndarray
    evaluations: int
    refined: bool


def minimize_on_sphere(func: Callable[[np.ndarray], np.ndarray], n: int, *,
                       samples: int, random_samples: int, starts: int = 8,
                       steps: int = 200, seed: int = 0, fd_step: float = 1e-6,
                       tie_tol: float = 0.0) -> SphereMinimum:
    """Minimize a nonnegative batched function over S^(n-1).

    ``func`` maps an ``(s, n)`` array of unit vectors to ``s`` values.  The
    sphere is sampled, then the ``starts`` best samples are refined by
    projected descent on ``func**2`` with central finite-difference gradients
    in the tangent space and backtracking line search.  Candidates within
    ``tie_tol`` of the best value resolve to the earliest one (samples come
    before refined points).
    """
    Y0 = sphere_samples(n, samples, random_samples, seed)
    vals = np.asarray(func(Y0), dtype=float)
    evals = len(Y0)
    cand_y, cand_v = [Y0], [vals]
    refined = False
    if n >= 2 and steps > 0 and starts > 0:
        order = np.argsort(vals, kind="stable")[:starts]
        Yr, Vr, used = _descend(func, Y0[order].copy(), vals[order].copy(), steps, fd_step)
        evals += used
        cand_y.append(Yr)
        cand_v.append(Vr)
        refined = True
    Y = np.vstack(cand_y)
    V = np.concatenate(cand_v)
    best = V.min()
    i = int(np.flatnonzero(V <= best + tie_tol)[0])
    return SphereMinimum(float(V[i]), Y[i].copy(), evals, refined)


def _descend(func, Y, V, steps, h, n_backtrack=12, min_step=1e-14):
    """Projected descent on ``func**2`` along the normalized gradient.

    The trial step length is ``min(eta, 2 g / |grad g|)``; the second term is
    the distance to a zero of a quadratic, which makes the step invariant
    under rescaling ``func``.  A failed backtracking sweep shrinks ``eta``
    instead of stopping, until it falls below ``min_step``.
    """
    K, n = Y.shape
    G = V ** 2
    eta = np.full(K, 0.25)
    active = np.ones(K, dtype=bool)
    used = 0
    shrink = 0.5 ** np.arange(n_backtrack)
    for _ in range(steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ya = Y[idx]
        T = tangent_bases(Ya)
        plus = normalize_rows(Ya[:, None, :] + h * T)
        minus = normalize_rows(Ya[:, None, :] - h * T)
        pts = np.concatenate([plus, minus], axis=1).reshape(-1, n)
        fv = np.asarray(func(pts)) ** 2
        used += len(pts)
        fv = fv.reshape(len(idx), 2, n - 1)
        coeffs = (fv[:, 0] - fv[:, 1]) / (2 * h)
        grad = np.einsum("kj,kjn->kn", coeffs, T)
        gnorm = np.sqrt(np.sum(grad * grad, axis=1))
        safe = np.where(gnorm > 0, gnorm, 1.0)
        direction = grad / safe[:, None]
        trial = np.minimum(eta[idx], 2.0 * G[idx] / safe)
        lengths = trial[:, None] * shrink[None, :]
        cand = normalize_rows(Ya[:, None, :] - lengths[..., None] * direction[:, None, :])
        gc = np.asarray(func(cand.reshape(-1, n))).reshape(len(idx), -1) ** 2
        used += cand.shape[0] * cand.shape[1]
        armijo = gc <= G[idx][:, None] - 1e-4 * lengths * gnorm[:, None]
        ok = armijo.any(axis=1) & (gnorm > 0)
        first = np.argmax(armijo, axis=1)
        for j, k in enumerate(idx):
            if gnorm[j] == 0:
                active[k] = False
                continue
            if not ok[j]:
                eta[k] = 0.5 * lengths[j, -1]
                if eta[k] < min_step:
                    active[k] = False
                continue
            new_g = gc[j, first[j]]
            if G[k] - new_g <= 1e-15 * max(G[k], 1e-300):
                active[k] = False
            Y[k] = cand[j, first[j]]
            G[k] = new_g
            eta[k] = min(2.0 * lengths[j, first[j]], 0.5)
    return Y, np.sqrt(np.maximum(G, 0.0)), used


# -- covering nets -----------------------------------------------------------


def _hyperspherical_net(n: int, delta: float, budget_points: int, build: bool):
    per = delta / (n - 1)

    def cells(lo, hi, scale, periodic):
        length = hi - lo
        if scale <= 0.0:
            return np.array([lo if not periodic else 0.0]), 0.0
        m = max(1, math.ceil(length * scale / (2.0 * per)))
        width = length / m
        centers = lo + (np.arange(m) + 0.5) * width if not periodic else lo + np.arange(m) * width
        return centers, scale * width / 2.0

    def max_sin(c, half):
        lo, hi = max(c - half, 0.0), min(c + half, math.pi)
        if lo <= math.pi / 2 <= hi:
            return 1.0
        return max(math.sin(lo), math.sin(hi))

    points, total, radius = [], 0, 0.0
    stack = [((), 1.0, 0.0)]
    while stack:
        angles, scale, acc = stack.pop()
        level = len(angles)
        if level == n - 2:
            centers, r = cells(0.0, 2 * math.pi, scale, periodic=True)
            total += len(centers)
            if total > budget_points:
                raise ResourceError(
                    f"covering net for n={n} at mesh {delta:g} exceeds {budget_points} points; "
                    "use a larger mesh")
            radius = max(radius, acc + r)
            if build:
                head = _angles_to_point(np.array(angles + (0.0,)))
                pts = np.empty((len(centers), n))
                pts[:, :n - 2] = head[:n - 2]
                s = math.prod(math.sin(a) for a in angles)
                pts[:, n - 2] = s * np.cos(centers)
                pts[:, n - 1] = s * np.sin(centers)
                points.append(pts)
            continue
        centers, r = cells(0.0, math.pi, scale, periodic=False)
        half = (math.pi / len(centers)) / 2.0
        for c in centers[::-1]:
            s = max_sin(c, half) if scale > 0 else 0.0
            stack.append((angles + (float(c),), scale * s, acc + r))
    pts = np.vstack(points) if build else None
    return pts, total, radius


def _angles_to_point(phi: np.ndarray) -> np.ndarray:
    n = len(phi) + 1
    x = np.empty(n)
    s = 1.0
    for i, a in enumerate(phi):
        x[i] = s * math.cos(a)
        s *= math.sin(a)
    x[n - 1] = s
    return x


def _icosahedron():
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    return normalize_rows(v), f


def _subdivide(V, F):
    edges = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    edges.sort(axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mids = normalize_rows(V[uniq[:, 0]] + V[uniq[:, 1]])
    m = inv.reshape(3, -1).T + len(V)
    a, b, c = F[:, 0], F[:, 1], F[:, 2]
    ab, bc, ca = m[:, 0], m[:, 1], m[:, 2]
    F2 = np.concatenate([np.column_stack([a, ab, ca]), np.column_stack([b, bc, ab]),
                         np.column_stack([c, ca, bc]), np.column_stack([ab, bc, ca])])
    return np.vstack([V, mids]), F2


def _face_circumradius(V, F) -> float:
    """Largest geodesic circumradius over spherical triangles."""
    A, B, C = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    c = normalize_rows(np.cross(B - A, C - A))
    # orient the circumcenter towards the triangle
    c *= np.sign(np.sum(c * (A + B + C), axis=1))[:, None]
    cosr = np.clip(np.sum(c * A, axis=1), -1.0, 1.0)
    return float(np.max(np.arccos(cosr)))


def _icosahedral_net(delta: float, budget_points: int, build: bool):
    V, F = _icosahedron()
    radius = _face_circumradius(V, F)
    while radius > delta:
        # next level has V + E = V + 1.5 F vertices
        if len(V) + 3 * len(F) // 2 > budget_points:
            raise ResourceError(
                f"icosahedral net at mesh {delta:g} exceeds {budget_points} points; "
                "use a larger mesh")
        V, F = _subdivide(V, F)
        radius = _face_circumradius(V, F)
    return V, len(V), radius


@dataclass
class SphereNet:
    points: np.ndarray
    covering_radius: float
    mesh: float


def sphere_net(n: int, delta: float, budget_points: int = DEFAULT_NET_BUDGET,
               safety: float = 1.1) -> SphereNet:
    """Finite subset of S^(n-1) with geodesic covering radius <= ``delta``.

    ``mesh`` is the computed covering radius times ``safety``.  Icosahedral
    refinement for n = 3, product-angle grids otherwise.
    """
    if delta <= 0:
        raise InputError("mesh must be positive")
    if n == 1:
        return SphereNet(np.array([[1.0], [-1.0]]), 0.0, 0.0)
    if n == 3:
        pts, _, radius = _icosahedral_net(delta, budget_points, build=True)
    else:
        pts, _, radius = _hyperspherical_net(n, delta, budget_points, build=True)
    return SphereNet(pts, radius, radius * safety)


def net_size(n: int, delta: float, budget_points: int = DEFAULT_NET_BUDGET) -> int:
    """Number of net points without materializing them (raises past the budget)."""
    if n == 1:
        return 2
    if n == 3:
        return _icosahedral_net(delta, budget_points, build=False)[1]
    return _hyperspherical_net(n, delta, budget_points, build=False)[1]
