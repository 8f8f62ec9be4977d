"""k-ary Janossy pooling and its symmetrised, ascending-tuple form.

Pooling follows the normalisation ``1/(n-k)! * sum over S_n``.  For ``k == n``
and a permutation invariant ``f`` this yields ``n! * f(X)``, not ``f(X)``; the
code keeps the normalisation as written and does not special-case ``k == n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cpwl import AffineMap, ExplicitPartition, StabilityRadius, is_exact

MAX_SN_ENUMERATION = 8


@dataclass(frozen=True)
class PoolingSpec:
    f: object
    k: int
    n: int
    d: int = 1

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.f.dim_in != self.k * self.d:
            raise ValueError(f"f takes {self.f.dim_in} inputs, expected k*d = {self.k * self.d}")


def _as_tuple_array(X, n: int, d: int):
    if is_exact(X):
        arr = X.reshape(n, d)
    else:
        arr = np.asarray(X, dtype=float).reshape(-1, d)
    if arr.shape[0] != n:
        raise ValueError(f"arity mismatch: expected {n} points, got {arr.shape[0]}")
    return arr


def _sum_rows(values):
    """Order independent column sums: exactly rounded for floats, exact for Fractions."""
    if is_exact(values):
        return np.array([sum(col, start=0) for col in values.T], dtype=object)
    return np.array([math.fsum(col) for col in np.asarray(values, float).T])


def _evaluate_rows(f, rows):
    if is_exact(rows):
        return np.array([f.evaluate(r) for r in rows], dtype=object)
    return f.evaluate_many(rows)


def janossy_pool(spec: PoolingSpec, X):
    """Pooled value via the ordered distinct k-tuples; each appears ``(n-k)!`` times in S_n."""
    pts = _as_tuple_array(X, spec.n, spec.d)
    idx = list(itertools.permutations(range(spec.n), spec.k))
    rows = pts[np.array(idx)].reshape(len(idx), spec.k * spec.d)
    return _sum_rows(_evaluate_rows(spec.f, rows))


def janossy_pool_sn(spec: PoolingSpec, X):
    """Literal S_n enumeration divided by ``(n-k)!``. Oracle only (``n <= 8``)."""
    if spec.n > MAX_SN_ENUMERATION:
        raise ValueError(f"S_n enumeration limited to n <= {MAX_SN_ENUMERATION}")
    pts = _as_tuple_array(X, spec.n, spec.d)
    perms = np.array(list(itertools.permutations(range(spec.n))))
    rows = pts[perms[:, :spec.k]].reshape(len(perms), spec.k * spec.d)
    total = _sum_rows(_evaluate_rows(spec.f, rows))
    denom = math.factorial(spec.n - spec.k)
    if is_exact(total):
        return total / denom
    return total / float(denom)


def _block_perm_matrix(perm, d: int) -> np.ndarray:
    k = len(perm)
    P = np.zeros((k * d, k * d))
    for slot, src in enumerate(perm):
        P[slot * d:(slot + 1) * d, src * d:(src + 1) * d] = np.eye(d)
    return P


class Symmetrized:
    """``fhat(x_1..x_k) = sum over S_k of f(x_pi(1)..x_pi(k))``, itself CPwL.

    The region id is the tuple of base region ids at each permuted input; that
    tuple labels the cell of the common refinement of the permuted partitions.
    """

    def __init__(self, f, k: int, d: int = 1):
        if f.dim_in != k * d:
            raise ValueError(f"arity mismatch: f takes {f.dim_in} inputs, expected {k * d}")
        self.base = f
        self.k = k
        self.d = d
        self.perms = tuple(itertools.permutations(range(k)))
        self._index = [np.concatenate([np.arange(p * d, (p + 1) * d) for p in perm]) for perm in self.perms]

    @property
    def dim_in(self) -> int:
        return self.k * self.d

    @property
    def dim_out(self) -> int:
        return self.base.dim_out

    def permuted(self, x):
        x = x if is_exact(x) else np.asarray(x, dtype=float).reshape(self.dim_in)
        return [x[ix] for ix in self._index]

    def evaluate(self, x):
        vals = [self.base.evaluate(z) for z in self.permuted(x)]
        if is_exact(vals[0]):
            return np.array([sum(col, start=0) for col in zip(*vals)], dtype=object)
        return np.array([math.fsum(col) for col in zip(*vals)])

    def evaluate_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.dim_in)
        stacked = np.stack([self.base.evaluate_many(X[:, ix]) for ix in self._index])
        flat = stacked.reshape(len(self._index), -1)
        # same exactly rounded sum as evaluate(), so batch and scalar paths agree bitwise
        return np.fromiter(map(math.fsum, flat.T), float, flat.shape[1]).reshape(stacked.shape[1:])

    def region_id(self, x) -> tuple:
        return tuple(self.base.region_id(z) for z in self.permuted(x))

    def local_affine(self, x) -> tuple[AffineMap, tuple]:
        A = np.zeros((self.dim_out, self.dim_in))
        b = np.zeros(self.dim_out)
        rid = []
        for perm, z in zip(self.perms, self.permuted(x)):
            law, r = self.base.local_affine(z)
            A += law.A @ _block_perm_matrix(perm, self.d)
            b += law.b
            rid.append(r)
        return AffineMap(A, b), tuple(rid)

    def stability_radius(self, x) -> StabilityRadius:
        radii = [self.base.stability_radius(z) for z in self.permuted(x)]
        r = min(s.radius for s in radii)
        return StabilityRadius(r, r == 0.0)

    def lipschitz_bound(self) -> float:
        return len(self.perms) * self.base.lipschitz_bound()

    @property
    def is_explicit(self) -> bool:
        return isinstance(self.base, ExplicitPartition)


def symmetrize(f, k: int, d: int = 1) -> Symmetrized:
    return Symmetrized(f, k, d)


def janossy_pool_ascending(fhat, k: int, X, d: int = 1):
    """``sum over i_1 < ... < i_k of fhat(x_i1, ..., x_ik)`` for a permutation invariant ``fhat``."""
    if fhat.dim_in != k * d:
        raise ValueError(f"arity mismatch: fhat takes {fhat.dim_in} inputs, expected {k * d}")
    exact = is_exact(X)
    pts = X.reshape(-1, d) if exact else np.asarray(X, dtype=float).reshape(-1, d)
    n = pts.shape[0]
    if n < k:
        raise ValueError(f"arity mismatch: need at least k={k} points, got {n}")
    idx = np.array(list(itertools.combinations(range(n), k)))
    rows = pts[idx].reshape(len(idx), k * d)
    return _sum_rows(_evaluate_rows(fhat, rows))


@dataclass(frozen=True)
class InvarianceReport:
    max_deviation: float
    scale: float
    trials: int

    def ok(self, tol: float = 1e-9) -> bool:
        return self.max_deviation <= tol * self.scale


def invariance_check(spec: PoolingSpec, X, trials: int = 100, rng: np.random.Generator | None = None,
                     pool: Callable | None = None) -> InvarianceReport:
    """Max l-inf deviation of the pooled value over random reorderings of ``X``."""
    rng = np.random.default_rng(0) if rng is None else rng
    pool = janossy_pool if pool is None else pool
    pts = _as_tuple_array(X, spec.n, spec.d)
    ref = np.asarray(pool(spec, pts), dtype=float)
    worst = 0.0
    for _ in range(trials):
        out = np.asarray(pool(spec, pts[rng.permutation(spec.n)]), dtype=float)
        worst = max(worst, float(np.abs(out - ref).max()))
    return InvarianceReport(worst, max(1.0, float(np.abs(ref).max())), trials)
