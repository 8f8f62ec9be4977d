"""Injective sum-pooling encoder for multisets with separated elements.

Space is tiled by closed cubes of side ``s = R/2``.  Each active cube ``Q``
contributes a ``(d+1)``-block: an indicator that is 1 on ``Q`` and decays
linearly to 0 across an l-inf margin of width ``mu``, and coordinates relative
to the cube centre that are clipped to a tent of height ``(s/2) * indicator``.
Both are CPwL in ``x``.  Whenever elements are at least ``s + 2*mu`` apart,
a cube whose summed indicator equals 1 holds exactly one element, and that
block's coordinate sum is the element's offset from the centre.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .multiset import Multiset, as_multiset, domain_separation, min_separation, wasserstein

IND_TOL = 1e-6
MIN_PAIR_DISTANCE = 1e-9


@dataclass(frozen=True, eq=False)
class GridCodec:
    R: float
    margin: float
    anchor: np.ndarray
    active: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"separation R must be positive, got {self.R}")
        if not 0 < self.margin < self.R / 4:
            raise ValueError(f"margin must lie in (0, R/4) = (0, {self.R / 4}), got {self.margin}")
        anchor = np.atleast_1d(np.asarray(self.anchor, dtype=float))
        active = tuple(sorted({tuple(int(i) for i in q) for q in self.active}))
        if any(len(q) != anchor.size for q in active):
            raise ValueError("cube indices must match the anchor dimension")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "active", active)

    @property
    def s(self) -> float:
        return self.R / 2

    @property
    def d(self) -> int:
        return self.anchor.size

    @property
    def m(self) -> int:
        return len(self.active) * (self.d + 1)

    @cached_property
    def block_of(self) -> dict[tuple[int, ...], int]:
        return {q: i for i, q in enumerate(self.active)}

    @cached_property
    def _active_array(self) -> np.ndarray:
        return np.array(self.active, dtype=np.int64).reshape(-1, self.d)

    def cube_bounds(self, Q) -> tuple[np.ndarray, np.ndarray]:
        Q = np.asarray(Q, dtype=np.int64)
        return self.anchor + Q * self.s, self.anchor + (Q + 1) * self.s

    def center(self, Q) -> np.ndarray:
        lo, hi = self.cube_bounds(Q)
        return (lo + hi) / 2

    def cube_index(self, x) -> tuple[int, ...]:
        return tuple(int(i) for i in np.floor((np.asarray(x, float) - self.anchor) / self.s))

    def blocks(self, E) -> np.ndarray:
        return np.asarray(E, dtype=float).reshape(len(self.active), self.d + 1)


def _box_of(box, dataset) -> tuple[np.ndarray, np.ndarray]:
    if box is not None:
        lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    else:
        pts = np.vstack([as_multiset(A).points for A in dataset])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("unbounded domain")
    if np.any(lo > hi):
        raise ValueError("empty bounding box")
    return lo, hi


def build_codec(R: float | None = None, box=None, dataset=None, margin: float | None = None,
                anchor=None) -> GridCodec:
    """Activate every cube whose closed body meets the box inflated by the margin.

    With ``dataset`` given, the box is its bounding box and ``R`` defaults to
    the dataset's minimum separation.
    """
    if box is None and dataset is None:
        raise ValueError("need a bounding box or a dataset")
    if R is None:
        if dataset is None:
            raise ValueError("R is required without a dataset")
        R = domain_separation(dataset).R_D
    if not R > 0:
        raise ValueError(f"separation R must be positive, got {R}")
    lo, hi = _box_of(box, dataset)
    mu = R / 8 if margin is None else float(margin)
    anchor = np.zeros(lo.size) if anchor is None else np.atleast_1d(np.asarray(anchor, float))
    s = R / 2
    axes = []
    for a, l, h in zip(anchor, lo, hi):
        first = math.floor((l - mu - a) / s) - 1
        last = math.floor((h + mu - a) / s) + 1
        axes.append([i for i in range(first, last + 1)
                     if a + i * s <= h + mu and a + (i + 1) * s >= l - mu])
    return GridCodec(R, mu, anchor, tuple(itertools.product(*axes)))


def _indicator(lo: np.ndarray, hi: np.ndarray, X: np.ndarray, mu: float) -> np.ndarray:
    dist = np.maximum(0.0, np.maximum(lo - X, X - hi).max(axis=-1))
    return np.maximum(0.0, 1.0 - dist / mu)


def _coords(lo: np.ndarray, hi: np.ndarray, X: np.ndarray, t: np.ndarray, half: float) -> np.ndarray:
    rel = np.clip(X - (lo + hi) / 2, -half, half)
    cap = half * t[..., None]
    return np.maximum(-cap, np.minimum(rel, cap))


def f_ind(codec: GridCodec, Q, x):
    """Indicator of cube ``Q``; ``x`` is one point or an ``(N, d)`` batch."""
    lo, hi = codec.cube_bounds(Q)
    t = _indicator(lo, hi, np.asarray(x, float), codec.margin)
    return float(t) if t.ndim == 0 else t


def f_coords(codec: GridCodec, Q, x) -> np.ndarray:
    lo, hi = codec.cube_bounds(Q)
    x = np.asarray(x, float)
    t = _indicator(lo, hi, x, codec.margin)
    return _coords(lo, hi, x, np.asarray(t), codec.s / 2)


def f_features(codec: GridCodec, Q, x) -> np.ndarray:
    """The ``(d+1)``-block of cube ``Q`` at a single point."""
    return np.concatenate([[f_ind(codec, Q, x)], f_coords(codec, Q, x)])


def encode(codec: GridCodec, A) -> np.ndarray:
    """Sum over elements of the concatenated per-cube feature blocks."""
    A = as_multiset(A)
    d = codec.d
    if A.d != d:
        raise ValueError(f"dimension mismatch: codec d={d}, multiset d={A.d}")
    E = np.zeros(codec.m)
    if A.n == 0:
        return E
    X = A.points
    base = np.floor((X - codec.anchor) / codec.s).astype(np.int64)
    offs = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)
    cubes = base[:, None, :] + offs[None, :, :]
    lo = codec.anchor + cubes * codec.s
    hi = codec.anchor + (cubes + 1) * codec.s
    Xb = np.broadcast_to(X[:, None, :], cubes.shape)
    t = _indicator(lo, hi, Xb, codec.margin)
    coords = _coords(lo, hi, Xb, t, codec.s / 2)
    hit = t > 0
    targets, values = [], []
    for (i, j) in zip(*np.nonzero(hit)):
        q = tuple(int(v) for v in cubes[i, j])
        pos = codec.block_of.get(q)
        if pos is None:
            raise ValueError(f"element {X[i].tolist()} outside the covered region (cube {q} inactive)")
        start = pos * (d + 1)
        targets.extend(range(start, start + d + 1))
        values.append(t[i, j])
        values.extend(coords[i, j])
    targets = np.array(targets, dtype=np.int64)
    values = np.array(values)
    # sorted accumulation makes the sum independent of element order
    order = np.lexsort((values, targets))
    np.add.at(E, targets[order], values[order])
    return E


def decode(codec: GridCodec, E, n: int | None = None, ind_tol: float = IND_TOL) -> Multiset:
    """Recover the multiset from blocks whose indicator is 1, merging boundary duplicates."""
    E = np.asarray(E, dtype=float)
    if E.shape != (codec.m,):
        raise ValueError(f"encoding must have length {codec.m}, got {E.shape}")
    blocks = codec.blocks(E)
    miss = np.abs(blocks[:, 0] - 1.0)
    hits = np.flatnonzero(miss <= ind_tol)
    if hits.size == 0:
        if np.any(E != 0):
            raise ValueError("no cube has indicator 1 in a nonzero encoding: "
                             "separation violated or encoding corrupted")
        if n not in (None, 0):
            raise ValueError(f"recovered 0 elements, expected {n}")
        return Multiset.empty(codec.d)
    dedup = codec.s / 4
    kept: list[np.ndarray] = []
    for b in hits[np.argsort(miss[hits], kind="stable")]:
        p = blocks[b, 1:] + codec.center(codec.active[b])
        if all(np.max(np.abs(p - q)) > dedup for q in kept):
            kept.append(p)
    if n is not None and len(kept) != n:
        raise ValueError(f"recovered {len(kept)} elements, expected {n}")
    return Multiset(np.array(kept)).canonical()


def check_separation(codec: GridCodec, A) -> bool:
    A = as_multiset(A)
    if A.n < 2:
        return True
    return min_separation(A) >= codec.s + 2 * codec.margin


@dataclass(frozen=True)
class BiLipEstimate:
    c_low: float
    C_high: float
    pairs: int
    ratios: np.ndarray


def bilip_estimate(codec: GridCodec, sampler: Callable[[], tuple], trials: int) -> BiLipEstimate:
    """Empirical min/max of ``||F(A) - F(B)||_inf / d_W(A, B)`` over sampled pairs."""
    ratios = []
    for _ in range(trials):
        A, B = sampler()
        dw = wasserstein(A, B)
        if dw < MIN_PAIR_DISTANCE:
            continue
        ratios.append(float(np.max(np.abs(encode(codec, A) - encode(codec, B)))) / dw)
    if not ratios:
        raise ValueError("degenerate sampler: every pair was (numerically) identical")
    r = np.array(ratios)
    return BiLipEstimate(float(r.min()), float(r.max()), r.size, r)


def dimension_profile(Rs: Sequence[float], box) -> list[tuple[float, int, int]]:
    """``(R, |I|, m)`` for each separation on a fixed box."""
    out = []
    for R in Rs:
        c = build_codec(R, box=box)
        out.append((R, len(c.active), c.m))
    return out
