"""Random functions, separated multisets and fixed fixtures used by the tests and the CLI."""

from __future__ import annotations

import numpy as np

from .cpwl import AffineMap, ExplicitPartition, ReluNet
from .multiset import Multiset

# C-order cell labels of the 2x2 grid on [0,1]^2 (first axis varies slowest)
FOUR_SQUARES = ("bottom-left", "top-left", "bottom-right", "top-right")


def make_rng(seed: int = 42) -> np.random.Generator:
    """Counter-based generator (Philox) so streams agree across platforms."""
    return np.random.Generator(np.random.Philox(int(seed)))


def hinge_grid_partition(edges, linear, offset, hinges) -> ExplicitPartition:
    """Grid partition of ``x -> linear @ x + offset + sum_c hinges[axis][c] * max(0, x_axis - cut_c)``.

    ``hinges[axis]`` has one ``m``-vector per interior cut of that axis.  The
    result is continuous and affine on every grid cell.
    """
    edges = [np.asarray(e, dtype=float) for e in edges]
    linear = np.atleast_2d(np.asarray(linear, dtype=float))
    offset = np.atleast_1d(np.asarray(offset, dtype=float))
    shape = [len(e) - 1 for e in edges]
    maps = []
    for idx in np.ndindex(*shape):
        A = linear.copy()
        b = offset.copy()
        for axis, i in enumerate(idx):
            for c, cut in enumerate(edges[axis][1:-1]):
                if cut <= edges[axis][i]:
                    A[:, axis] += hinges[axis][c]
                    b -= np.asarray(hinges[axis][c]) * cut
        maps.append(AffineMap(A, b))
    return ExplicitPartition.grid(edges, maps)


def four_square_partition(rng: np.random.Generator | None = None, m: int = 1) -> ExplicitPartition:
    """``[0,1]^2`` split at 1/2 on both axes, with continuous pieces (random if ``rng`` given)."""
    edges = [[0.0, 0.5, 1.0], [0.0, 0.5, 1.0]]
    if rng is None:
        linear, offset = np.array([[1.0, 2.0]]), np.array([0.5])
        hinges = [[np.array([3.0])], [np.array([-1.5])]]
    else:
        linear, offset = rng.normal(size=(m, 2)), rng.normal(size=m)
        hinges = [[rng.normal(size=m)], [rng.normal(size=m)]]
    return hinge_grid_partition(edges, linear, offset, hinges)


def random_grid_cpwl(rng: np.random.Generator, k: int, resolution: int | tuple[int, ...],
                     m: int = 1, uniform: bool = False) -> ExplicitPartition:
    """Continuous CPwL function on a random axis-aligned grid of ``[0,1]^k``."""
    res = (resolution,) * k if np.isscalar(resolution) else tuple(resolution)
    edges = []
    for r in res:
        if uniform:
            cuts = np.linspace(0.0, 1.0, r + 1)[1:-1]
        else:
            cuts = np.sort(rng.uniform(0.05, 0.95, r - 1))
        edges.append(np.concatenate([[0.0], cuts, [1.0]]))
    hinges = [[rng.normal(size=m) for _ in range(len(e) - 2)] for e in edges]
    return hinge_grid_partition(edges, rng.normal(size=(m, k)), rng.normal(size=m), hinges)


def random_relu(rng: np.random.Generator, dim_in: int, max_width: int = 8, max_depth: int = 3,
                dim_out: int = 1) -> ReluNet:
    depth = int(rng.integers(1, max_depth + 1))
    widths = [int(w) for w in rng.integers(1, max_width + 1, size=depth)]
    return ReluNet.random(rng, dim_in, widths, dim_out)


def random_separated_multiset(rng: np.random.Generator, n: int, d: int, R: float, lo=0.0, hi=1.0,
                              max_attempts: int = 4000, strict: bool = False) -> Multiset:
    """Dart throwing: uniform candidates kept when at l-inf distance >= R from all kept points.

    Stops early when the box jams; ``strict`` turns a short result into an error.
    """
    lo = np.broadcast_to(np.asarray(lo, float), (d,))
    hi = np.broadcast_to(np.asarray(hi, float), (d,))
    pts = np.empty((0, d))
    for _ in range(max_attempts):
        if len(pts) == n:
            break
        c = rng.uniform(lo, hi)
        if len(pts) == 0 or np.min(np.max(np.abs(pts - c), axis=1)) >= R:
            pts = np.vstack([pts, c])
    if strict and len(pts) < n:
        raise RuntimeError(f"placed only {len(pts)} of {n} points at separation {R}")
    return Multiset(pts, d=d)


def separated_pair_sampler(rng: np.random.Generator, n: int, d: int, R: float, lo=0.0, hi=1.0,
                           local_fraction: float = 0.5):
    """Pairs of ``R``-separated multisets; some independent, some local perturbations of each other."""
    lo_v = np.broadcast_to(np.asarray(lo, float), (d,))
    hi_v = np.broadcast_to(np.asarray(hi, float), (d,))

    def fresh() -> Multiset:
        return random_separated_multiset(rng, n, d, R, lo, hi, strict=True)

    def perturb(A: Multiset) -> Multiset | None:
        for _ in range(100):
            pts = A.points.copy()
            moved = rng.random(n) < max(1.0 / n, rng.random())
            eta = 10 ** rng.uniform(-4, np.log10(R))
            pts[moved] += rng.uniform(-eta, eta, (int(moved.sum()), d))
            if np.any(pts < lo_v) or np.any(pts > hi_v):
                continue
            dist = np.max(np.abs(pts[:, None] - pts[None]), axis=2)
            np.fill_diagonal(dist, np.inf)
            if dist.min() >= R:
                return Multiset(pts)
        return None

    def sample() -> tuple[Multiset, Multiset]:
        A = fresh()
        if rng.random() < local_fraction:
            B = perturb(A)
            if B is not None:
                return A, B
        return A, fresh()

    return sample


def planted_separation_dataset(rng: np.random.Generator, count: int, n: int, ratio: float = 0.1,
                               d: int = 3) -> list[Multiset]:
    """Multisets in ``[0,1]^d`` whose normalised separation is at least ``ratio``; exactly one hits it.

    Every multiset contains two opposite corners, so its diameter is exactly 1;
    the planted one also carries a pair at l-inf distance ``ratio``.
    """
    if n < 4:
        raise ValueError("need n >= 4 (two corners plus a planted pair)")
    out = []
    for j in range(count):
        pts = [np.zeros(d), np.ones(d)]
        if j == 0:
            p = rng.uniform(0.3, 0.6, d)
            q = p.copy()
            q[0] = p[0] + ratio
            pts += [p, q]
        while len(pts) < n:
            c = rng.uniform(0.0, 1.0, d)
            if min(np.max(np.abs(c - x)) for x in pts) >= 1.5 * ratio:
                pts.append(c)
        out.append(Multiset(np.array(pts)))
    order = rng.permutation(count)
    return [out[i] for i in order]
