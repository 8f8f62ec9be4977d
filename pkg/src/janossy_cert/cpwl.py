"""Continuous piecewise-linear functions: explicit polytope partitions and ReLU networks.

Both representations expose the same surface (``evaluate``, ``evaluate_many``,
``local_affine``, ``region_id``, ``stability_radius``) so the pooling and
witness code never branches on the concrete type except where exact cell
geometry is needed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linprog

MEMBER_TOL = 1e-12
CONTINUITY_TOL = 1e-9
RADIUS_SAFETY = 1.0 - 1e-9
MAX_HALVINGS = 60


def to_exact(arr) -> np.ndarray:
    """Convert a float array to an object array of exact Fractions."""
    arr = np.asarray(arr)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = v if isinstance(v, Fraction) else Fraction(float(v))
    return out


def is_exact(x) -> bool:
    return isinstance(x, np.ndarray) and x.dtype == object


class StabilityRadius(NamedTuple):
    radius: float
    boundary: bool


@dataclass(frozen=True, eq=False)
class AffineMap:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"affine map shape mismatch: A {A.shape}, b {b.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("affine map entries must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim_in(self) -> int:
        return self.A.shape[1]

    @property
    def dim_out(self) -> int:
        return self.A.shape[0]

    @cached_property
    def A_exact(self) -> np.ndarray:
        return to_exact(self.A)

    @cached_property
    def b_exact(self) -> np.ndarray:
        return to_exact(self.b)

    def apply(self, x):
        if is_exact(x):
            return self.A_exact.dot(x) + self.b_exact
        return self.A @ np.asarray(x, dtype=float) + self.b

    def apply_many(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.A.T + self.b

    def __eq__(self, other):
        if not isinstance(other, AffineMap):
            return NotImplemented
        return np.array_equal(self.A, other.A) and np.array_equal(self.b, other.b)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class HPolytope:
    """``{x : normals @ x + offsets >= 0}``."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        N = np.atleast_2d(np.asarray(self.normals, dtype=float))
        c = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if N.shape[0] != c.shape[0]:
            raise ValueError("one offset per normal required")
        object.__setattr__(self, "normals", N)
        object.__setattr__(self, "offsets", c)

    @classmethod
    def box(cls, lo, hi) -> "HPolytope":
        lo, hi = np.atleast_1d(np.asarray(lo, float)), np.atleast_1d(np.asarray(hi, float))
        eye = np.eye(lo.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([-lo, hi]))

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @cached_property
    def normals_exact(self) -> np.ndarray:
        return to_exact(self.normals)

    @cached_property
    def offsets_exact(self) -> np.ndarray:
        return to_exact(self.offsets)

    def slack(self, x):
        if is_exact(x):
            return self.normals_exact.dot(x) + self.offsets_exact
        return self.normals @ np.asarray(x, dtype=float) + self.offsets

    def contains(self, x, tol: float = MEMBER_TOL) -> bool:
        if is_exact(x):
            return all(s >= 0 for s in self.slack(x))
        return bool(np.all(self.slack(x) >= -tol))

    def interior_contains(self, x, tol: float = MEMBER_TOL) -> bool:
        if is_exact(x):
            return all(s > 0 for s in self.slack(x))
        return bool(np.all(self.slack(x) > tol))

    def linf_clearance(self, x) -> float:
        """Smallest l-inf distance from ``x`` to a facet hyperplane (negative if outside)."""
        norms = np.abs(self.normals).sum(axis=1)
        keep = norms > 0
        return float(np.min(self.slack(np.asarray(x, float))[keep] / norms[keep]))

    @cached_property
    def box_bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        """``(lo, hi)`` when every constraint is axis-aligned, else ``None``."""
        nz = self.normals != 0
        if not np.all(nz.sum(axis=1) == 1):
            return None
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        for row, off in zip(self.normals, self.offsets):
            i = int(np.flatnonzero(row)[0])
            a = row[i]
            if a > 0:
                lo[i] = max(lo[i], -off / a)
            else:
                hi[i] = min(hi[i], off / -a)
        return lo, hi


def l1_distance_lp(poly: HPolytope, v) -> float:
    """Exact ``min_{y in poly} ||y - v||_1`` as a linear program."""
    v = np.asarray(v, dtype=float)
    k = v.size
    eye = np.eye(k)
    # variables [y, t]; minimise sum(t) with t >= |y - v|
    c = np.concatenate([np.zeros(k), np.ones(k)])
    A_ub = np.vstack([
        np.hstack([eye, -eye]),
        np.hstack([-eye, -eye]),
        np.hstack([-poly.normals, np.zeros((poly.normals.shape[0], k))]),
    ])
    b_ub = np.concatenate([v, -v, poly.offsets])
    bounds = [(None, None)] * k + [(0, None)] * k
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 2:
        raise ValueError("infeasible cell")
    if not res.success:
        raise RuntimeError(f"LP failed: {res.message}")
    return max(0.0, float(res.fun))


def l1_distance_box(lo: np.ndarray, hi: np.ndarray, v) -> float:
    v = np.asarray(v, dtype=float)
    if np.any(lo > hi):
        raise ValueError("infeasible cell")
    return float(np.sum(np.maximum(0.0, lo - v) + np.maximum(0.0, v - hi)))


class ExplicitPartition:
    """A CPwL function given cell by cell over a working box.

    ``cells`` is a sequence of ``(HPolytope, AffineMap)``; the box defaults to
    ``[0, 1]^k``.  Boundary points take the law of the lowest-index cell.
    """

    def __init__(self, cells: Sequence[tuple[HPolytope, AffineMap]], lo=None, hi=None):
        if not cells:
            raise ValueError("a partition needs at least one cell")
        self.cells = tuple((p, f) for p, f in cells)
        k = self.cells[0][0].dim
        m = self.cells[0][1].dim_out
        for p, f in self.cells:
            if p.dim != k or f.dim_in != k or f.dim_out != m:
                raise ValueError("inconsistent cell dimensions")
        self.lo = np.zeros(k) if lo is None else np.asarray(lo, dtype=float).reshape(k)
        self.hi = np.ones(k) if hi is None else np.asarray(hi, dtype=float).reshape(k)

    @classmethod
    def grid(cls, edges: Sequence[Sequence[float]], maps: Sequence[AffineMap]) -> "ExplicitPartition":
        """Axis-aligned grid; ``maps`` are listed in C order over the per-axis intervals."""
        edges = [np.asarray(e, dtype=float) for e in edges]
        shape = tuple(len(e) - 1 for e in edges)
        if len(maps) != int(np.prod(shape)):
            raise ValueError(f"expected {int(np.prod(shape))} affine maps, got {len(maps)}")
        cells = []
        for idx, f in zip(itertools.product(*[range(s) for s in shape]), maps):
            lo = [e[i] for e, i in zip(edges, idx)]
            hi = [e[i + 1] for e, i in zip(edges, idx)]
            cells.append((HPolytope.box(lo, hi), f))
        return cls(cells, lo=[e[0] for e in edges], hi=[e[-1] for e in edges])

    @property
    def dim_in(self) -> int:
        return self.lo.size

    @property
    def dim_out(self) -> int:
        return self.cells[0][1].dim_out

    def __len__(self) -> int:
        return len(self.cells)

    def locate(self, v, tol: float = MEMBER_TOL) -> list[int]:
        return [i for i, (p, _) in enumerate(self.cells) if p.contains(v, tol)]

    def _first_cell(self, x) -> int:
        for i, (p, _) in enumerate(self.cells):
            if p.contains(x):
                return i
        raise ValueError(f"point {list(np.asarray(x).tolist())} lies outside every cell")

    def region_id(self, x) -> int:
        return self._first_cell(x)

    def local_affine(self, x) -> tuple[AffineMap, int]:
        i = self._first_cell(x)
        return self.cells[i][1], i

    def evaluate(self, x):
        x = x if is_exact(x) else np.asarray(x, dtype=float).reshape(self.dim_in)
        return self.cells[self._first_cell(x)][1].apply(x)

    def evaluate_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.array([self.evaluate(x) for x in X]).reshape(len(X), self.dim_out)

    def l1_distance_to_cell(self, v, cell: int, method: str = "auto") -> float:
        poly = self.cells[cell][0]
        if poly.contains(v):
            return 0.0
        bounds = poly.box_bounds
        if method == "box" or (method == "auto" and bounds is not None):
            if bounds is None:
                raise ValueError("cell is not axis-aligned")
            return l1_distance_box(*bounds, v)
        return l1_distance_lp(poly, v)

    def foreign_l1_distance(self, v) -> float:
        """Minimum l1 distance from ``v`` to the cells that do not contain it (inf if none)."""
        v = np.asarray(v, dtype=float)
        inside = set(self.locate(v))
        # per-constraint violation / ||a||_inf bounds the l1 distance from below
        candidates = []
        for i, (p, _) in enumerate(self.cells):
            if i in inside:
                continue
            viol = np.maximum(0.0, -p.slack(v)) / np.abs(p.normals).max(axis=1)
            candidates.append((float(viol.max()), i))
        candidates.sort()
        best = np.inf
        for lower, i in candidates:
            if lower >= best:
                break
            best = min(best, self.l1_distance_to_cell(v, i))
        return best

    def box_clearance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(min(np.min(x - self.lo), np.min(self.hi - x)))

    def stability_radius(self, x) -> StabilityRadius:
        """l-inf radius on which the containing cell is unique and unchanged."""
        x = np.asarray(x, dtype=float)
        if len(self.locate(x)) != 1:
            return StabilityRadius(0.0, True)
        r = 0.5 * self.foreign_l1_distance(x) / self.dim_in
        r = min(r, self.box_clearance(x))
        r = max(r, 0.0) * RADIUS_SAFETY
        return StabilityRadius(r, r == 0.0)

    def lipschitz_bound(self) -> float:
        return max(float(np.abs(f.A).sum(axis=1).max()) for _, f in self.cells)


class ReluNet:
    """Feed-forward network with ReLU between consecutive affine layers."""

    def __init__(self, layers: Sequence[AffineMap]):
        if not layers:
            raise ValueError("a network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.dim_out != b.dim_in:
                raise ValueError(f"layer dimension mismatch: {a.dim_out} -> {b.dim_in}")
        self.layers = tuple(layers)

    @classmethod
    def random(cls, rng: np.random.Generator, dim_in: int, widths: Sequence[int],
               dim_out: int = 1, scale: float = 1.0) -> "ReluNet":
        dims = [dim_in, *widths, dim_out]
        layers = []
        for a, b in zip(dims, dims[1:]):
            layers.append(AffineMap(rng.normal(0.0, scale, (b, a)) / np.sqrt(a),
                                    rng.normal(0.0, scale, b)))
        return cls(layers)

    @property
    def dim_in(self) -> int:
        return self.layers[0].dim_in

    @property
    def dim_out(self) -> int:
        return self.layers[-1].dim_out

    def evaluate(self, x):
        h = x if is_exact(x) else np.asarray(x, dtype=float).reshape(self.dim_in)
        for layer in self.layers[:-1]:
            z = layer.apply(h)
            h = np.where(z > 0, z, 0) if is_exact(z) else np.maximum(z, 0.0)
        return self.layers[-1].apply(h)

    def evaluate_many(self, X) -> np.ndarray:
        h = np.asarray(X, dtype=float).reshape(-1, self.dim_in)
        for layer in self.layers[:-1]:
            h = np.maximum(layer.apply_many(h), 0.0)
        return self.layers[-1].apply_many(h)

    def preactivations(self, x) -> list[np.ndarray]:
        h = np.asarray(x, dtype=float).reshape(self.dim_in)
        pre = []
        for layer in self.layers[:-1]:
            z = layer.apply(h)
            pre.append(z)
            h = np.maximum(z, 0.0)
        return pre

    def region_id(self, x) -> tuple[tuple[bool, ...], ...]:
        # a zero preactivation counts as inactive: the lexicographically smallest pattern
        return tuple(tuple(bool(v) for v in z > 0) for z in self.preactivations(x))

    def local_affine(self, x) -> tuple[AffineMap, tuple]:
        pattern = self.region_id(x)
        J = np.eye(self.dim_in)
        c = np.zeros(self.dim_in)
        for layer, mask in zip(self.layers[:-1], pattern):
            m = np.asarray(mask, dtype=float)
            J = m[:, None] * (layer.A @ J)
            c = m * (layer.A @ c + layer.b)
        last = self.layers[-1]
        return AffineMap(last.A @ J, last.A @ c + last.b), pattern

    def margin_radius(self, x) -> float:
        """Layerwise bound ``min |pre| / ||effective row||_1`` (exact l-inf hyperplane distance)."""
        h = np.asarray(x, dtype=float).reshape(self.dim_in)
        J = np.eye(self.dim_in)
        r = np.inf
        for layer in self.layers[:-1]:
            z = layer.apply(h)
            rows = layer.A @ J
            norms = np.abs(rows).sum(axis=1)
            live = norms > 0
            if np.any(live):
                r = min(r, float(np.min(np.abs(z[live]) / norms[live])))
            mask = z > 0
            J = mask[:, None] * rows
            h = np.maximum(z, 0.0)
        return r

    def stability_radius(self, x, probes: bool = True) -> StabilityRadius:
        x = np.asarray(x, dtype=float).reshape(self.dim_in)
        r = self.margin_radius(x) * RADIUS_SAFETY
        if r == 0.0:
            return StabilityRadius(0.0, True)
        if not np.isfinite(r):
            r = 1.0
        if probes:
            r = self._verify_radius(x, r)
        return StabilityRadius(r, r == 0.0)

    def _verify_radius(self, x: np.ndarray, r: float) -> float:
        base = self.region_id(x)
        k = self.dim_in
        dirs = np.vstack([np.eye(k), -np.eye(k), np.ones((1, k)), -np.ones((1, k))])
        for _ in range(MAX_HALVINGS):
            if all(self.region_id(x + r * u) == base for u in dirs):
                return r
            r *= 0.5
        return 0.0

    def lipschitz_bound(self) -> float:
        return float(np.prod([np.abs(l.A).sum(axis=1).max() for l in self.layers]))


CPwLFunction = ExplicitPartition | ReluNet


# Module-level entry points mirroring the method surface.

def evaluate(f, x):
    return f.evaluate(x)


def local_affine(f, x):
    return f.local_affine(x)


def locate(P: ExplicitPartition, v) -> list[int]:
    cells = P.locate(v)
    if not cells:
        raise ValueError("point lies outside the covering")
    return cells


def l1_distance_to_cell(P: ExplicitPartition, v, cell: int) -> float:
    return P.l1_distance_to_cell(v, cell)


def stability_radius(f, x) -> StabilityRadius:
    return f.stability_radius(x)


@dataclass
class ContinuityReport:
    violations: list[str] = field(default_factory=list)
    max_excess: float = 0.0
    segments: int = 0
    facets: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def continuity_check(f, n_samples: int = 200, rng: np.random.Generator | None = None,
                     steps: int = 256, lo=None, hi=None) -> ContinuityReport:
    """Sample random segments for jumps beyond ``L * step``; check facet agreement for partitions."""
    rng = np.random.default_rng(0) if rng is None else rng
    k = f.dim_in
    if isinstance(f, ExplicitPartition):
        lo, hi = f.lo, f.hi
    lo = np.zeros(k) if lo is None else np.asarray(lo, float)
    hi = np.ones(k) if hi is None else np.asarray(hi, float)
    L = f.lipschitz_bound()
    report = ContinuityReport()
    ts = np.linspace(0.0, 1.0, steps + 1)[:, None]
    for _ in range(n_samples):
        a, b = rng.uniform(lo, hi), rng.uniform(lo, hi)
        pts = a + ts * (b - a)
        vals = f.evaluate_many(pts)
        scale = max(1.0, float(np.abs(vals).max()))
        jumps = np.abs(np.diff(vals, axis=0)).max(axis=1)
        allowed = L * np.abs(np.diff(pts, axis=0)).max(axis=1) * (1 + CONTINUITY_TOL) + CONTINUITY_TOL * scale
        excess = jumps - allowed
        report.segments += 1
        worst = int(np.argmax(excess))
        if excess[worst] > 0:
            report.max_excess = max(report.max_excess, float(excess[worst]))
            report.violations.append(
                f"jump {jumps[worst]:.3g} between {pts[worst].tolist()} and {pts[worst + 1].tolist()}")
    if isinstance(f, ExplicitPartition):
        _facet_agreement(f, report, rng)
    return report


def _facet_point(poly: HPolytope, j: int, lo, hi) -> np.ndarray | None:
    """A relatively interior point of facet ``j`` (max-min slack of the other constraints)."""
    k = poly.dim
    norms = np.linalg.norm(poly.normals, axis=1)
    others = [i for i in range(len(norms)) if i != j and norms[i] > 0]
    # variables [x, s]; maximise s
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-poly.normals[others], norms[others, None]])
    b_ub = poly.offsets[others]
    A_eq = np.hstack([poly.normals[j:j + 1], np.zeros((1, 1))])
    b_eq = -poly.offsets[j:j + 1]
    bounds = [(l, h) for l, h in zip(lo, hi)] + [(None, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if not res.success or res.x[-1] <= MEMBER_TOL:
        return None
    return res.x[:k]


def _facet_agreement(P: ExplicitPartition, report: ContinuityReport, rng) -> None:
    for i, (poly, f) in enumerate(P.cells):
        for j in range(poly.normals.shape[0]):
            p = _facet_point(poly, j, P.lo, P.hi)
            if p is None:
                continue
            report.facets += 1
            for o in P.locate(p, tol=1e-9):
                if o == i:
                    continue
                a, b = f.apply(p), P.cells[o][1].apply(p)
                scale = max(1.0, float(np.abs(a).max()))
                gap = float(np.abs(a - b).max())
                if gap > CONTINUITY_TOL * scale:
                    report.max_excess = max(report.max_excess, gap)
                    report.violations.append(f"cells {i} and {o} disagree by {gap:.3g} at {p.tolist()}")
