"""Multisets of points, the l-infinity Wasserstein distance and separation statistics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

MAX_BRUTEFORCE_N = 8


class Multiset:
    """An unordered collection of ``n`` points in ``R^d``.

    Points are stored as an ``(n, d)`` float array in the order given; equality
    and hashing go through the lexicographically sorted canonical form.
    """

    __slots__ = ("_points",)

    def __init__(self, points, d: int | None = None):
        arr = np.asarray(points, dtype=float)
        if arr.ndim == 1:
            if d not in (None, 1) and arr.size:
                raise ValueError("flat point list is only valid for d=1")
            arr = arr.reshape(-1, 1)
        elif arr.ndim != 2:
            raise ValueError(f"points must form an (n, d) array, got shape {arr.shape}")
        if arr.size == 0:
            arr = np.zeros((0, d if d is not None else max(arr.shape[1], 1)))
        elif d is not None and arr.shape[1] != d:
            raise ValueError(f"dimension mismatch: expected d={d}, got {arr.shape[1]}")
        if arr.shape[1] < 1:
            raise ValueError("points need at least one coordinate")
        if not np.all(np.isfinite(arr)):
            raise ValueError("multiset elements must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        self._points = arr

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> "Multiset":
        rows = [np.atleast_1d(np.asarray(r, dtype=float)) for r in rows]
        dims = {r.shape for r in rows}
        if len(dims) > 1:
            raise ValueError(f"dimension mismatch among elements: {sorted(dims)}")
        return cls(np.stack(rows) if rows else np.zeros((0, 1)))

    @classmethod
    def empty(cls, d: int) -> "Multiset":
        return cls(np.zeros((0, d)), d=d)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def d(self) -> int:
        return self._points.shape[1]

    def canonical(self) -> "Multiset":
        return Multiset(_lexsorted(self._points))

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        return iter(self._points)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Multiset):
            return NotImplemented
        if self._points.shape != other._points.shape:
            return False
        return bool(np.array_equal(_lexsorted(self._points), _lexsorted(other._points)))

    def __hash__(self) -> int:
        return hash((self._points.shape, _lexsorted(self._points).tobytes()))

    def __repr__(self) -> str:
        return f"Multiset(n={self.n}, d={self.d}, points={self._points.tolist()})"


def _lexsorted(points: np.ndarray) -> np.ndarray:
    if points.shape[0] <= 1:
        return points.copy()
    # np.lexsort treats its last key as primary
    order = np.lexsort(points.T[::-1])
    return points[order]


def as_multiset(A) -> Multiset:
    return A if isinstance(A, Multiset) else Multiset(A)


def canonicalize(A) -> Multiset:
    return as_multiset(A).canonical()


def _check_pair(A: Multiset, B: Multiset) -> None:
    if A.n != B.n or A.d != B.d:
        raise ValueError(f"size/dimension mismatch: ({A.n}, {A.d}) vs ({B.n}, {B.d})")


def linf_cost_matrix(A: Multiset, B: Multiset) -> np.ndarray:
    return np.max(np.abs(A.points[:, None, :] - B.points[None, :, :]), axis=2)


def _matched_cost(cost: np.ndarray, perm: Sequence[int]) -> float:
    # fsum is exactly rounded, so equal-cost matchings give bit-identical totals
    return math.fsum(cost[i, j] for i, j in enumerate(perm))


def optimal_matching(A, B) -> np.ndarray:
    """Return ``perm`` with ``A[i]`` matched to ``B[perm[i]]`` at minimal total l-inf cost."""
    A, B = as_multiset(A), as_multiset(B)
    _check_pair(A, B)
    if A.n == 0:
        return np.zeros(0, dtype=int)
    rows, cols = linear_sum_assignment(linf_cost_matrix(A, B))
    perm = np.empty(A.n, dtype=int)
    perm[rows] = cols
    return perm


def _polish(cost: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Apply exactly-evaluated improving 2-swaps; removes last-ulp ties left by the float solver."""
    perm = perm.copy()
    improved = True
    while improved:
        improved = False
        for i, j in itertools.combinations(range(len(perm)), 2):
            a, b = perm[i], perm[j]
            if math.fsum([cost[i, b], cost[j, a], -cost[i, a], -cost[j, b]]) < 0:
                perm[i], perm[j] = b, a
                improved = True
    return perm


def wasserstein(A, B) -> float:
    """Assignment distance ``min_sigma sum_i ||a_i - b_sigma(i)||_inf``.

    Both inputs are canonicalised and put in a fixed order first, so the value
    is bitwise symmetric and independent of element order.
    """
    A, B = canonicalize(A), canonicalize(B)
    _check_pair(A, B)
    if A.n == 0:
        return 0.0
    if A.points.tobytes() > B.points.tobytes():
        A, B = B, A
    cost = linf_cost_matrix(A, B)
    return _matched_cost(cost, _polish(cost, optimal_matching(A, B)))


def wasserstein_bruteforce(A, B) -> float:
    """Exact minimum over all ``n!`` matchings. Test oracle for :func:`wasserstein`."""
    A, B = as_multiset(A), as_multiset(B)
    _check_pair(A, B)
    if A.n > MAX_BRUTEFORCE_N:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTEFORCE_N}, got n={A.n}")
    if A.n == 0:
        return 0.0
    cost = linf_cost_matrix(A, B)
    return min(_matched_cost(cost, perm) for perm in itertools.permutations(range(A.n)))


def matched_max_error(A, B) -> float:
    """Largest per-element l-inf error after optimal matching."""
    A, B = as_multiset(A), as_multiset(B)
    _check_pair(A, B)
    if A.n == 0:
        return 0.0
    perm = optimal_matching(A, B)
    return float(np.max(np.abs(A.points - B.points[perm])))


def multisets_close(A, B, tol: float = 1e-9) -> bool:
    A, B = as_multiset(A), as_multiset(B)
    if A.n != B.n or A.d != B.d:
        return False
    return matched_max_error(A, B) <= tol


def _pairwise_linf(points: np.ndarray) -> np.ndarray:
    return np.max(np.abs(points[:, None, :] - points[None, :, :]), axis=2)


def min_separation(A) -> float:
    """r(A): smallest l-inf distance between two distinct-index elements."""
    A = as_multiset(A)
    if A.n < 2:
        raise ValueError("min_separation needs at least two elements")
    dist = _pairwise_linf(A.points)
    iu = np.triu_indices(A.n, k=1)
    return float(dist[iu].min())


def max_pairwise(A) -> float:
    A = as_multiset(A)
    if A.n < 2:
        raise ValueError("max_pairwise needs at least two elements")
    return float(_pairwise_linf(A.points).max())


@dataclass(frozen=True)
class SeparationStat:
    min_sep: float
    max_pairwise: float
    normalized: float


@dataclass(frozen=True)
class SeparationReport:
    per_multiset: tuple[SeparationStat, ...]
    R_D: float

    @property
    def normalized(self) -> np.ndarray:
        return np.array([s.normalized for s in self.per_multiset])

    @property
    def min_normalized(self) -> float:
        return float(self.normalized.min())


def domain_separation(D: Iterable) -> SeparationReport:
    stats = []
    for A in D:
        A = as_multiset(A)
        r, big = min_separation(A), max_pairwise(A)
        stats.append(SeparationStat(r, big, r / big if big > 0 else 0.0))
    if not stats:
        raise ValueError("empty dataset")
    return SeparationReport(tuple(stats), min(s.min_sep for s in stats))
