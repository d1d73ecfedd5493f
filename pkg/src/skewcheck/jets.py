"""Exact multilinear derivative calculus for polynomial maps R^n -> R^N.

A :class:`SymMultiMap` is a symmetric k-linear map stored by multi-index
(sorted index tuples, graded-lexicographic order), so symmetry holds by
construction.  A :class:`PolyMap` stores a polynomial through its derivatives
at the origin::

    f(x) = constant + sum_k (1/k!) part_k(x, ..., x)

which makes ``part_k`` literally ``D^k f_0`` and lets derivatives at any other
point be read off exactly after a polynomial shift.
"""
from __future__ import annotations

import itertools
import json
from math import comb, factorial
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BoundViolation, InputError

MAX_DEGREE = 4

_LETTERS = "abcd"


def multi_indices(n: int, k: int) -> list[tuple[int, ...]]:
    """Sorted multi-indices of degree ``k`` over ``n`` variables, lex order."""
    return list(itertools.combinations_with_replacement(range(n), k))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _as_vector(v, n: int, what: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise InputError(f"{what} must have shape ({n},), got {v.shape}")
    return v


def diagonal_eval(dense: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Evaluate ``m(x, ..., x)`` for each row of ``X`` (shape ``(s, n)``).

    ``dense`` has shape ``(N,) + (n,) * k``; returns shape ``(s, N)``.
    """
    k = dense.ndim - 1
    if k == 0:
        return np.broadcast_to(dense, (X.shape[0],) + dense.shape).copy()
    letters = _LETTERS[:k]
    subs = "N" + letters + "," + ",".join("s" + c for c in letters) + "->sN"
    return np.einsum(subs, dense, *([X] * k), optimize=True)


class SymMultiMap:
    """Symmetric k-linear map R^n x ... x R^n -> R^N.

    Parameters
    ----------
    k, n, N : int
        Degree, domain dimension and codomain dimension.
    coeffs : array_like, optional
        Shape ``(C(n+k-1, k), N)``; row ``i`` is the value on the basis tuple
        given by ``multi_indices(n, k)[i]``.  Zero when omitted.
    """

    __slots__ = ("k", "n", "N", "_coeffs", "_dense")

    def __init__(self, k: int, n: int, N: int, coeffs=None):
        if not 1 <= k <= MAX_DEGREE:
            raise InputError(f"degree k must be in 1..{MAX_DEGREE}, got {k}")
        if n < 1 or N < 1:
            raise InputError(f"dimensions must be positive, got n={n}, N={N}")
        size = comb(n + k - 1, k)
        if coeffs is None:
            c = np.zeros((size, N))
        else:
            c = np.array(coeffs, dtype=float)
            if c.shape != (size, N):
                raise InputError(
                    f"coefficient array must have shape ({size}, {N}), got {c.shape}")
        self.k, self.n, self.N = k, n, N
        self._coeffs = _readonly(c)
        self._dense = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_dict(cls, k: int, n: int, N: int,
                  values: Mapping[Sequence[int], Sequence[float]]) -> "SymMultiMap":
        """Build from ``{index tuple: value}``; indices may be unsorted."""
        pos = {idx: i for i, idx in enumerate(multi_indices(n, k))}
        c = np.zeros((len(pos), N))
        for idx, val in values.items():
            key = tuple(sorted(int(i) for i in idx))
            if key not in pos:
                raise InputError(f"multi-index {tuple(idx)} invalid for n={n}, k={k}")
            c[pos[key]] = _as_vector(val, N, "coefficient value")
        return cls(k, n, N, c)

    @classmethod
    def from_dense(cls, dense) -> "SymMultiMap":
        """Read the canonical (sorted-index) entries of a dense tensor.

        The tensor is assumed symmetric in its trailing ``k`` axes; only the
        sorted-index entries are consulted.
        """
        dense = np.asarray(dense, dtype=float)
        k = dense.ndim - 1
        N, n = dense.shape[0], dense.shape[1]
        idx = multi_indices(n, k)
        c = np.stack([dense[(slice(None),) + i] for i in idx])
        return cls(k, n, N, c)

    @classmethod
    def zero(cls, k: int, n: int, N: int) -> "SymMultiMap":
        return cls(k, n, N)

    @classmethod
    def from_linear(cls, matrix) -> "SymMultiMap":
        """Wrap an ``N x n`` matrix as a degree-1 map."""
        matrix = np.asarray(matrix, dtype=float)
        return cls(1, matrix.shape[1], matrix.shape[0], matrix.T)

    # -- accessors ----------------------------------------------------------

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return multi_indices(self.n, self.k)

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def dense(self) -> np.ndarray:
        """Full symmetric tensor of shape ``(N,) + (n,) * k`` (read-only)."""
        if self._dense is None:
            n, k = self.n, self.k
            pos = {idx: i for i, idx in enumerate(self.indices)}
            all_idx = list(itertools.product(range(n), repeat=k))
            rows = [pos[tuple(sorted(t))] for t in all_idx]
            T = self._coeffs[rows].T.reshape((self.N,) + (n,) * k)
            self._dense = _readonly(np.ascontiguousarray(T))
        return self._dense

    def coefficient(self, index: Sequence[int]) -> np.ndarray:
        return self.dense[(slice(None),) + tuple(index)].copy()

    def as_matrix(self) -> np.ndarray:
        """``N x n`` matrix of a degree-1 map."""
        if self.k != 1:
            raise InputError("as_matrix is only defined for k = 1")
        return self._coeffs.T.copy()

    # -- evaluation ---------------------------------------------------------

    def apply(self, *vectors) -> np.ndarray:
        """Multilinear evaluation on ``k`` vectors of R^n."""
        if len(vectors) != self.k:
            raise InputError(f"expected {self.k} arguments, got {len(vectors)}")
        r = self.dense
        for v in reversed(vectors):
            r = r @ _as_vector(v, self.n, "argument")
        return np.array(r)

    __call__ = apply

    def contract(self, v, times: int = 1):
        """Plug ``v`` into ``times`` slots; returns a lower-degree map.

        Full contraction returns the output vector itself.
        """
        if not 0 <= times <= self.k:
            raise InputError(f"cannot contract {times} slots of a degree-{self.k} map")
        v = _as_vector(v, self.n)
        r = self.dense
        for _ in range(times):
            r = r @ v
        if times == self.k:
            return np.array(r)
        if times == 0:
            return self
        return SymMultiMap.from_dense(r)

    def diagonal(self, X) -> np.ndarray:
        """Batched ``m(x, ..., x)`` for rows of ``X``; shape ``(s, N)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return diagonal_eval(self.dense, X)

    # -- algebra ------------------------------------------------------------

    def __add__(self, other: "SymMultiMap") -> "SymMultiMap":
        self._check_compatible(other)
        return SymMultiMap(self.k, self.n, self.N, self._coeffs + other._coeffs)

    def __mul__(self, c: float) -> "SymMultiMap":
        return SymMultiMap(self.k, self.n, self.N, float(c) * self._coeffs)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymMultiMap):
            return NotImplemented
        return ((self.k, self.n, self.N) == (other.k, other.n, other.N)
                and np.array_equal(self._coeffs, other._coeffs))

    __hash__ = None

    def _check_compatible(self, other: "SymMultiMap") -> None:
        if (self.k, self.n, self.N) != (other.k, other.n, other.N):
            raise InputError("incompatible multilinear maps")

    def embed(self, N: int, offset: int) -> "SymMultiMap":
        """Place the output in coordinates ``offset .. offset + self.N`` of R^N."""
        if offset < 0 or offset + self.N > N:
            raise InputError("embedding does not fit")
        c = np.zeros((self._coeffs.shape[0], N))
        c[:, offset:offset + self.N] = self._coeffs
        return SymMultiMap(self.k, self.n, N, c)

    def is_zero(self) -> bool:
        return not np.any(self._coeffs)

    def __repr__(self) -> str:
        return f"SymMultiMap(k={self.k}, n={self.n}, N={self.N})"


def random_sym_multimap(k: int, n: int, N: int, rng: np.random.Generator) -> SymMultiMap:
    """Standard-Gaussian coefficients in the graded-lex basis."""
    return SymMultiMap(k, n, N, rng.standard_normal((comb(n + k - 1, k), N)))


class PolyMap:
    """Polynomial map R^n -> R^N of degree <= 4, stored by its jet at 0.

    ``parts[k - 1]`` is ``D^k f_0``; missing degrees are zero.
    """

    __slots__ = ("n", "N", "constant", "parts")

    def __init__(self, n: int, N: int, constant=None,
                 parts: Iterable[SymMultiMap] | Mapping[int, SymMultiMap] = ()):
        if n < 1 or N < 1:
            raise InputError(f"dimensions must be positive, got n={n}, N={N}")
        self.n, self.N = n, N
        if constant is None:
            constant = np.zeros(N)
        self.constant = _readonly(_as_vector(constant, N, "constant").copy())
        if isinstance(parts, Mapping):
            parts_by_k = dict(parts)
        else:
            parts_by_k = {}
            for p in parts:
                if p.k in parts_by_k:
                    raise InputError(f"duplicate part of degree {p.k}")
                parts_by_k[p.k] = p
        for k, p in parts_by_k.items():
            if p.k != k or (p.n, p.N) != (n, N):
                raise InputError(f"part of degree {k} has inconsistent shape")
        degree = max(parts_by_k, default=0)
        if degree > MAX_DEGREE:
            raise InputError(f"degree must be <= {MAX_DEGREE}")
        self.parts = tuple(parts_by_k.get(k, SymMultiMap.zero(k, n, N))
                           for k in range(1, degree + 1))

    @property
    def degree(self) -> int:
        return len(self.parts)

    def part(self, k: int) -> SymMultiMap:
        if k <= self.degree:
            return self.parts[k - 1]
        return SymMultiMap.zero(k, self.n, self.N)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise InputError(f"point must have trailing dimension {self.n}, got {x.shape}")
        X = x.reshape(-1, self.n)
        out = np.tile(self.constant, (X.shape[0], 1))
        for p in self.parts:
            out += diagonal_eval(p.dense, X) / factorial(p.k)
        return out.reshape(x.shape[:-1] + (self.N,))

    def jacobian(self, a) -> np.ndarray:
        """``Df_a`` as an ``N x n`` matrix."""
        return derivative(self, a, 1).as_matrix()

    def shift(self, a) -> "PolyMap":
        """The polynomial ``x -> f(a + x)``."""
        a = _as_vector(a, self.n, "point")
        return PolyMap(self.n, self.N, self(a),
                       [derivative(self, a, k) for k in range(1, self.degree + 1)])

    def compose_linear_output(self, A) -> "PolyMap":
        """``x -> A f(x)`` for an ``M x N`` matrix ``A``."""
        A = np.asarray(A, dtype=float)
        parts = [SymMultiMap(p.k, self.n, A.shape[0], p.coeffs @ A.T) for p in self.parts]
        return PolyMap(self.n, A.shape[0], A @ self.constant, parts)

    def __mul__(self, c: float) -> "PolyMap":
        return PolyMap(self.n, self.N, c * self.constant, [c * p for p in self.parts])

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"PolyMap(n={self.n}, N={self.N}, degree={self.degree})"

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        parts = []
        for p in self.parts:
            entries = [{"index": list(idx), "value": row.tolist()}
                       for idx, row in zip(p.indices, p.coeffs) if np.any(row)]
            parts.append({"k": p.k, "coeffs": entries})
        return {"n": self.n, "N": self.N, "degree": self.degree,
                "constant": self.constant.tolist(), "parts": parts}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: Mapping) -> "PolyMap":
        try:
            n, N, degree = int(data["n"]), int(data["N"]), int(data["degree"])
            constant = data.get("constant")
            raw_parts = data.get("parts", [])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed PolyMap: {exc!r}") from exc
        if not 0 <= degree <= MAX_DEGREE:
            raise InputError(f"degree must be in 0..{MAX_DEGREE}, got {degree}")
        parts = {}
        for raw in raw_parts:
            try:
                k = int(raw["k"])
                entries = raw["coeffs"]
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"malformed part: {exc!r}") from exc
            if not 1 <= k <= degree:
                raise InputError(f"part degree {k} outside 1..{degree}")
            if k in parts:
                raise InputError(f"duplicate part of degree {k}")
            values = {}
            for e in entries:
                try:
                    idx = tuple(int(i) for i in e["index"])
                    value = e["value"]
                except (KeyError, TypeError, ValueError) as exc:
                    raise InputError(f"malformed coefficient entry: {exc!r}") from exc
                if len(idx) != k or list(idx) != sorted(idx):
                    raise InputError(f"index {list(idx)} must be sorted with length {k}")
                if any(i < 0 or i >= n for i in idx):
                    raise InputError(f"index {list(idx)} out of range for n={n}")
                if idx in values:
                    raise InputError(f"duplicate index {list(idx)}")
                values[idx] = value
            parts[k] = SymMultiMap.from_dict(k, n, N, values)
        for k in range(1, degree + 1):
            parts.setdefault(k, SymMultiMap.zero(k, n, N))
        return cls(n, N, constant, parts)

    @classmethod
    def from_json(cls, text: str) -> "PolyMap":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise InputError("PolyMap JSON must be an object")
        return cls.from_dict(data)


def random_polymap(n: int, N: int, degree: int, rng: np.random.Generator,
                   constant: bool = True) -> PolyMap:
    """Polynomial map with i.i.d. standard-Gaussian coefficients."""
    c = rng.standard_normal(N) if constant else np.zeros(N)
    parts = [random_sym_multimap(k, n, N, rng) for k in range(1, degree + 1)]
    return PolyMap(n, N, c, parts)


def derivative(f: PolyMap, a, k: int) -> SymMultiMap:
    """Exact ``D^k f_a``.

    ``D^k f_a = sum_{j >= k} 1/(j-k)! * D^j f_0(a, ..., a, ., ..., .)``, the
    degree-k part of the shifted polynomial.  Returns the zero map when
    ``k`` exceeds the degree of ``f``.
    """
    a = _as_vector(a, f.n, "point")
    if not 1 <= k <= MAX_DEGREE:
        raise InputError(f"k must be in 1..{MAX_DEGREE}")
    if k > f.degree:
        return SymMultiMap.zero(k, f.n, f.N)
    total = np.array(f.parts[k - 1].dense)
    for j in range(k + 1, f.degree + 1):
        r = f.parts[j - 1].dense
        for _ in range(j - k):
            r = r @ a
        total = total + r / factorial(j - k)
    return SymMultiMap.from_dense(total)


def jet(f: PolyMap, a, order: int = 3) -> list[SymMultiMap]:
    """``[Df_a, D^2 f_a, ..., D^order f_a]``."""
    return [derivative(f, a, k) for k in range(1, order + 1)]


def operator_norm(m: SymMultiMap, samples: int = 4096, seed: int = 0,
                  safety: float = 1.25, power_iters: int = 200) -> float:
    """Over-estimate of ``sup ||m(x_1, ..., x_k)||`` over unit vectors.

    Random unit tuples locate a good starting point, alternating power
    iteration climbs from it, and the result is inflated by ``safety``.
    This is an estimate, not a certified upper bound.
    """
    if m.is_zero():
        return 0.0
    T = m.dense
    if m.k == 1:
        return safety * float(np.linalg.norm(T, 2))
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((samples, m.k, m.n))
    X /= np.linalg.norm(X, axis=-1, keepdims=True)
    letters = _LETTERS[:m.k]
    subs = "N" + letters + "," + ",".join("s" + c for c in letters) + "->sN"
    vals = np.linalg.norm(np.einsum(subs, T, *[X[:, i] for i in range(m.k)],
                                    optimize=True), axis=1)
    best = int(np.argmax(vals))
    xs = [X[best, i].copy() for i in range(m.k)]
    value = float(vals[best])
    for _ in range(power_iters):
        out = m.apply(*xs)
        nrm = np.linalg.norm(out)
        if nrm == 0.0:
            break
        form = np.tensordot(out / nrm, T, axes=(0, 0))
        for i in range(m.k):
            g = form
            for j in reversed(range(m.k)):
                if j > i:
                    g = g @ xs[j]
            for j in range(i):
                g = np.tensordot(xs[j], g, axes=(0, 0))
            gn = np.linalg.norm(g)
            if gn > 0:
                xs[i] = g / gn
        new = float(np.linalg.norm(m.apply(*xs)))
        if new <= value * (1 + 1e-14):
            value = max(value, new)
            break
        value = new
    return safety * value


def taylor_tail(f: PolyMap, a, x, k: int) -> np.ndarray:
    """``R(a, x) = f(a+x) - sum_{j<=k} D^j f_a(x^j)/j!``, summed from the tail.

    For a polynomial the remainder equals ``sum_{j>k} D^j f_a(x^j)/j!``; this
    avoids the cancellation of subtracting the Taylor polynomial from
    ``f(a + x)`` when ``x`` is small.
    """
    a = _as_vector(a, f.n, "point")
    x = _as_vector(x, f.n, "displacement")
    R = np.zeros(f.N)
    for j in range(k + 1, f.degree + 1):
        R += derivative(f, a, j).diagonal(x[None])[0] / factorial(j)
    return R


def taylor_remainder(f: PolyMap, a, x, k: int, s_samples: int = 33,
                     seed: int = 0) -> tuple[np.ndarray, float]:
    """Order-``k`` Taylor remainder and its derivative-norm bound.

    Returns ``(R, bound)`` with
    ``bound = ||x||^(k+1)/(k+1)! * sup_s ||D^(k+1) f_(a+sx)||``, the sup taken
    over ``s_samples`` equally spaced values of ``s`` in [0, 1] with sampled
    operator-norm estimates.  Raises :class:`BoundViolation` if
    ``||R|| > bound``.
    """
    if not 0 <= k <= MAX_DEGREE - 1:
        raise InputError(f"order k must satisfy k + 1 <= {MAX_DEGREE}")
    a = _as_vector(a, f.n, "point")
    x = _as_vector(x, f.n, "displacement")
    R = taylor_tail(f, a, x, k)
    if k + 1 > f.degree:
        sup = 0.0
    elif k + 1 == f.degree:
        # top derivative is constant in the base point
        sup = operator_norm(f.parts[k], seed=seed)
    else:
        sup = max(operator_norm(derivative(f, a + s * x, k + 1), seed=seed)
                  for s in np.linspace(0.0, 1.0, s_samples))
    bound = np.linalg.norm(x) ** (k + 1) / factorial(k + 1) * sup
    if np.linalg.norm(R) > bound:
        raise BoundViolation(f"||R|| = {np.linalg.norm(R):.3e} exceeds bound {bound:.3e}")
    return R, float(bound)


def jet_batch(f: PolyMap, P) -> list[np.ndarray]:
    """Dense ``D^j f_p`` for every row ``p`` of ``P`` and ``j = 1..degree``.

    Entry ``j - 1`` has shape ``(s, N) + (n,) * j``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[1] != f.n:
        raise InputError(f"points must have dimension {f.n}")
    s = P.shape[0]
    out = []
    for j in range(1, f.degree + 1):
        total = np.broadcast_to(f.parts[j - 1].dense, (s,) + f.parts[j - 1].dense.shape).copy()
        for i in range(j + 1, f.degree + 1):
            r = np.broadcast_to(f.parts[i - 1].dense, (s,) + f.parts[i - 1].dense.shape)
            for _ in range(i - j):
                r = np.einsum("s...a,sa->s...", r, P)
            total += r / factorial(i - j)
        out.append(total)
    return out


def contract_batch(T: np.ndarray, Y: np.ndarray, times: int) -> np.ndarray:
    """Contract the last ``times`` axes of a batched tensor with the rows of ``Y``."""
    for _ in range(times):
        T = np.einsum("s...a,sa->s...", T, Y)
    return T
