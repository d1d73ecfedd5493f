"""Third-order local condition at a point.

The condition asks that ``Df_a(v1) + D^2 f_a(v2, v3) + lam D^3 f_a(v3, v3, v3) = 0``
with ``v3 != 0`` forces ``v1 = v2 = 0`` and ``lam = 0``.  Rescaling
``v3`` to unit length (``v2 -> |v3| v2``, ``lam -> |v3|^3 lam``) reduces it
to injectivity of the boundary matrix

    ``[Df_a | D^2 f_a(y, .) | D^3 f_a(y, y, y)]``

for every unit ``y``.  :func:`check_local_condition` estimates the minimum
of its smallest singular value over the sphere; :func:`certify_local_condition`
bounds it from below on a net using a Lipschitz constant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .blowup import boundary_columns
from .errors import InputError, ResourceError
from .jets import PolyMap, derivative, jet_batch, operator_norm
from .report import to_jsonable
from .skewness import injectivity_singular_values, smallest_right_singular_vector, sweep_neighborhood
from .sphere import DEFAULT_NET_BUDGET, axis_points, minimize_on_sphere, sphere_net

UNIT_TOL = 1e-12
DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class BoundaryMatrix:
    """``[Df_a | D^2 f_a(y, .) | D^3 f_a(y, y, y)]``, acting on ``(v1, v2, lam)``."""

    a: np.ndarray
    y: np.ndarray
    matrix: np.ndarray

    @property
    def singular_values(self) -> np.ndarray:
        return injectivity_singular_values(self.matrix)

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1])

    def residual(self, v1, v2, lam: float) -> np.ndarray:
        n = self.y.shape[0]
        return (self.matrix[:, :n] @ v1 + self.matrix[:, n:2 * n] @ v2
                + lam * self.matrix[:, 2 * n])


def _check_point(f: PolyMap, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (f.n,):
        raise InputError(f"base point must have dimension {f.n}")
    return a


def boundary_matrix(f: PolyMap, a, y) -> BoundaryMatrix:
    a = _check_point(f, a)
    y = np.asarray(y, dtype=float)
    if y.shape != (f.n,) or abs(np.linalg.norm(y) - 1.0) > UNIT_TOL:
        raise InputError("y must be a unit vector of the domain dimension")
    M = boundary_columns(jet_batch(f, a[None]), y[None], f.N, f.n)[0]
    return BoundaryMatrix(a, y, M)


def boundary_sigma_min(f: PolyMap, a, Y: np.ndarray, batch: int = 65536) -> np.ndarray:
    """Smallest (padded) singular value of the boundary matrix at each row of ``Y``."""
    a = _check_point(f, a)
    J = jet_batch(f, a[None])
    Y = np.atleast_2d(Y)
    out = np.empty(Y.shape[0])
    for lo in range(0, Y.shape[0], batch):
        hi = min(lo + batch, Y.shape[0])
        out[lo:hi] = injectivity_singular_values(
            boundary_columns(J, Y[lo:hi], f.N, f.n))[:, -1]
    return out


def local_residual(f: PolyMap, a, v1, v2, v3, lam: float) -> np.ndarray:
    """``Df_a(v1) + D^2 f_a(v2, v3) + lam D^3 f_a(v3, v3, v3)`` for arbitrary ``v3``."""
    D1, D2, D3 = (derivative(f, a, k) for k in (1, 2, 3))
    return D1.apply(v1) + D2.apply(v2, v3) + lam * D3.apply(v3, v3, v3)


@dataclass(frozen=True)
class KernelWitness:
    v1: np.ndarray
    v2: np.ndarray
    lam: float
    residual: float

    def to_dict(self) -> dict:
        return {"v1": self.v1, "v2": self.v2, "lambda": self.lam, "residual": self.residual}


def _witness_from_matrix(M: np.ndarray, n: int) -> KernelWitness:
    w = smallest_right_singular_vector(M)
    return KernelWitness(w[:n], w[n:2 * n], float(w[2 * n]), float(np.linalg.norm(M @ w)))


def kernel_witness(f: PolyMap, a, y, tol: float = DEFAULT_TOL) -> KernelWitness | None:
    """Unit kernel vector ``(v1, v2, lam)`` of the boundary matrix at ``y``.

    Returned when ``sigma_min <= tol * sigma_max`` (``None`` otherwise); the
    vector is normalized so its largest-magnitude entry is positive.
    """
    bm = boundary_matrix(f, a, y)
    s = bm.singular_values
    if s[-1] > tol * s[0]:
        return None
    return _witness_from_matrix(bm.matrix, f.n)


@dataclass
class LocalOptions:
    """Budget of the heuristic minimizer; ``samples=None`` means ``2048 n``."""

    tol: float = DEFAULT_TOL
    samples: int | None = None
    random_fraction: float = 0.25
    starts: int = 8
    steps: int = 200
    seed: int = 0


@dataclass
class LocalConditionReport:
    """``holds`` is True, False, or None for "unknown" (certified mode only)."""

    holds: bool | None
    min_sigma: float
    argmin_y: np.ndarray
    mode: str
    tol: float
    mesh: float | None = None
    lipschitz: float | None = None
    witness: KernelWitness | None = None
    reason: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.holds is True

    @property
    def holds_label(self) -> str:
        return {True: "true", False: "false", None: "unknown"}[self.holds]

    def to_dict(self) -> dict:
        d = {"kind": "local", "pass": self.passed, "holds": self.holds_label,
             "min_sigma": self.min_sigma, "argmin_y": self.argmin_y,
             "mode": self.mode, "tol": self.tol}
        if self.mesh is not None:
            d["mesh"] = self.mesh
        if self.lipschitz is not None:
            d["lipschitz"] = self.lipschitz
        if self.witness is not None:
            d["witness"] = self.witness.to_dict()
        if self.reason:
            d["reason"] = self.reason
        d.update(self.extra)
        return to_jsonable(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _structural_failure(f: PolyMap, a, mode: str, tol: float) -> LocalConditionReport:
    y = axis_points(f.n)[0]
    M = boundary_matrix(f, a, y).matrix
    return LocalConditionReport(False, 0.0, y, mode, tol,
                                witness=_witness_from_matrix(M, f.n),
                                reason=f"N < 2n+1 (N={f.N}, 2n+1={2 * f.n + 1})")


def check_local_condition(f: PolyMap, a, opts: LocalOptions | None = None) -> LocalConditionReport:
    """Heuristic decision: minimize ``sigma_min`` over the sphere, compare with ``tol``.

    Sampling tries the coordinate axes first, so exact ties (as for
    symmetric failure sets) resolve to the lowest-index axis.
    """
    opts = opts or LocalOptions()
    a = _check_point(f, a)
    if f.N < 2 * f.n + 1:
        return _structural_failure(f, a, "heuristic", opts.tol)
    func = lambda Y: boundary_sigma_min(f, a, Y)
    if f.n == 1:
        Y = np.array([[1.0], [-1.0]])
        vals = func(Y)
        i = int(np.argmin(vals))
        best_val, best_y, evals = float(vals[i]), Y[i], 2
    else:
        samples = opts.samples or 2048 * f.n
        n_random = int(samples * opts.random_fraction)
        scale = float(np.linalg.norm(boundary_matrix(f, a, axis_points(f.n)[0]).matrix, 2))
        res = minimize_on_sphere(func, f.n, samples=samples - n_random,
                                 random_samples=n_random, starts=opts.starts,
                                 steps=opts.steps, seed=opts.seed,
                                 tie_tol=1e-12 * max(scale, 1.0))
        best_val, best_y, evals = res.value, res.y, res.evaluations
    holds = bool(best_val > opts.tol)
    witness = None
    if not holds:
        witness = _witness_from_matrix(boundary_matrix(f, a, best_y).matrix, f.n)
    return LocalConditionReport(holds, best_val, best_y, "heuristic", opts.tol,
                                witness=witness, extra={"evaluations": evals})


def lipschitz_bound(f: PolyMap, a, seed: int = 0) -> float:
    """``||D^2 f_a|| + 3 ||D^3 f_a||``: Lipschitz constant of ``y -> boundary matrix``.

    The middle block is linear in ``y`` and the last column's increment
    telescopes into three trilinear terms.  Norms are estimates
    (see :func:`skewcheck.jets.operator_norm`).
    """
    a = _check_point(f, a)
    return (operator_norm(derivative(f, a, 2), seed=seed)
            + 3.0 * operator_norm(derivative(f, a, 3), seed=seed))


def certify_local_condition(f: PolyMap, a, mesh: float, tol: float = 0.0,
                            budget_points: int = DEFAULT_NET_BUDGET,
                            opts: LocalOptions | None = None) -> LocalConditionReport:
    """Lower-bound ``min_y sigma_min`` on a net of mesh at most ``mesh``.

    Holds (True) when ``min over net - L * mesh > tol``.  Otherwise a
    heuristic search looks for a witness: if it finds ``sigma_min <= opts.tol``
    the answer is False with that witness, else None ("unknown") together
    with the number of net points whose bound is inconclusive.
    """
    a = _check_point(f, a)
    if f.n > 4:
        raise InputError("certified mode supports n <= 4")
    if not mesh > 0:
        raise InputError("mesh must be > 0")
    opts = opts or LocalOptions()
    if f.N < 2 * f.n + 1:
        return _structural_failure(f, a, "certified", tol)
    try:
        net = sphere_net(f.n, mesh, budget_points=budget_points)
    except ResourceError as exc:
        raise ResourceError(f"{exc}; try a larger mesh") from exc
    vals = boundary_sigma_min(f, a, net.points)
    i = int(np.argmin(vals))
    L = lipschitz_bound(f, a, seed=opts.seed)
    lower = float(vals[i] - L * net.mesh)
    extra = {"net_points": int(net.points.shape[0]), "lower_bound": lower,
             "requested_mesh": mesh}
    if lower > tol:
        return LocalConditionReport(True, float(vals[i]), net.points[i], "certified", tol,
                                    mesh=net.mesh, lipschitz=L, extra=extra)
    heur = check_local_condition(f, a, opts)
    if not heur.holds:
        return LocalConditionReport(False, heur.min_sigma, heur.argmin_y, "certified", tol,
                                    mesh=net.mesh, lipschitz=L, witness=heur.witness,
                                    reason="witness found by heuristic search", extra=extra)
    region = vals - L * net.mesh <= tol
    extra["failing_region_points"] = int(region.sum())
    extra["failing_region_example"] = net.points[i]
    return LocalConditionReport(None, float(vals[i]), net.points[i], "certified", tol,
                                mesh=net.mesh, lipschitz=L,
                                reason="net bound inconclusive; refine the mesh", extra=extra)


def empirical_radius(f: PolyMap, a, r0: float = 0.5, trials: int = 1000, seed: int = 0,
                     r_min: float = 1e-6) -> float | None:
    """Largest ``r0 / 2^k`` at which a skewness sweep of ``B_r(a)`` passes.

    Purely empirical; ``None`` if no radius down to ``r_min`` passes.
    """
    r = r0
    while r >= r_min:
        if sweep_neighborhood(f, a, r, trials=trials, seed=seed).passed:
            return r
        r /= 2.0
    return None
