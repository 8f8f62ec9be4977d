"""Constructive non-injectivity of CPwL Janossy pooling.

The pipeline is: symmetrise ``f``, find a strictly decreasing ``w`` whose
ascending k-subvectors share one linear region of the symmetrised function
(:func:`nested_point`), pick a perturbation ``delta`` from the null space of
the ascending-tuple sum system (:func:`collision_delta`), and check that
``w`` and ``w + delta`` pool to the same value (:func:`verify_collision`).

Symbol names: ``rho`` is the ratio ``min eps_i / eps_{i-1}`` and ``delta``
the collision perturbation; ``mu`` in :mod:`grid_codec` is the margin width.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any

import numpy as np

from .cpwl import AffineMap, ExplicitPartition, ReluNet, is_exact, to_exact
from .janossy import PoolingSpec, Symmetrized, janossy_pool, janossy_pool_ascending, janossy_pool_sn, symmetrize
from .multiset import Multiset

DEFAULT_X0 = 0.25
RETRY_SEED = 20250117
MAX_SEEDS = 16
TUPLE_RESIDUAL_TOL = 1e-12


class NestedPointError(RuntimeError):
    """No positive epsilon could be found at some chain point."""


class CollisionError(RuntimeError):
    pass


# -- geometry dispatch ------------------------------------------------------

def _explicit_base(P) -> ExplicitPartition | None:
    if isinstance(P, ExplicitPartition):
        return P
    if isinstance(P, Symmetrized) and isinstance(P.base, ExplicitPartition):
        return P.base
    return None


def _working_box(P) -> tuple[np.ndarray, np.ndarray]:
    base = _explicit_base(P)
    if base is not None:
        return base.lo, base.hi
    return np.zeros(P.dim_in), np.ones(P.dim_in)


def _permuted(P, v) -> list:
    return P.permuted(v) if isinstance(P, Symmetrized) else [np.asarray(v, dtype=float)]


def poly(P, v):
    """Cells containing ``v``: a frozenset, or a tuple of frozensets (one per permutation) for a
    symmetrised explicit partition. ``None`` when a network point sits on a region boundary."""
    base = _explicit_base(P)
    if base is not None:
        sets = tuple(frozenset(base.locate(z)) for z in _permuted(P, v))
        return sets if isinstance(P, Symmetrized) else sets[0]
    if P.stability_radius(v).radius <= 0:
        return None
    return frozenset([P.region_id(v)])


def _poly_subset(a, b) -> bool:
    if isinstance(a, tuple):
        return all(x <= y for x, y in zip(a, b))
    return a <= b


def _single_cell(p):
    if isinstance(p, tuple):
        if any(len(s) != 1 for s in p):
            return None
        return tuple(next(iter(s)) for s in p)
    return next(iter(p)) if len(p) == 1 else None


def _clearance_eps(P, v) -> float:
    """Radius of an l1 ball around ``v`` meeting no region that excludes ``v``."""
    base = _explicit_base(P)
    if base is not None:
        return 0.5 * min(base.foreign_l1_distance(z) for z in _permuted(P, v))
    # l-inf stability radius; the l1 ball of that radius sits inside the l-inf ball
    return P.stability_radius(v).radius


def _interior_cells(P, z) -> list:
    base = _explicit_base(P)
    out = []
    for zz in _permuted(P, z):
        out.append({i for i, (p, _) in enumerate(base.cells) if p.interior_contains(zz)})
    return out


# -- nested point -----------------------------------------------------------

@dataclass(frozen=True)
class NestedPointCert:
    x: float
    eps: tuple[float, ...]
    v_chain: tuple[tuple[float, ...], ...]
    rho: float
    y: tuple[float, ...]
    w: tuple[float, ...]
    cell: Any
    k: int
    n: int

    @property
    def w_array(self) -> np.ndarray:
        return np.array(self.w)


@dataclass
class NestedCheck:
    ok: bool
    cell: Any = None
    clearance: float = 0.0
    tuples: list[tuple[tuple[int, ...], Any]] = field(default_factory=list)
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def check_nested(w, k: int, P) -> NestedCheck:
    """Is there one cell whose interior holds every ascending k-subvector of ``w``?"""
    exact = is_exact(w)
    w = w if exact else np.asarray(w, dtype=float)
    n = len(w)
    if n < k:
        return NestedCheck(False, reason=f"need at least k={k} entries")
    if any(not (w[i] > w[i + 1]) for i in range(n - 1)):
        return NestedCheck(False, reason="w is not strictly decreasing")
    subs = [(idx, w[list(idx)]) for idx in itertools.combinations(range(n), k)]
    base = _explicit_base(P)
    if base is not None:
        per_tuple = [(idx, _interior_cells(P, z)) for idx, z in subs]
        n_perm = len(per_tuple[0][1])
        common = [set.intersection(*[cells[j] for _, cells in per_tuple]) for j in range(n_perm)]
        tuples = [(idx, tuple(sorted(c) for c in cells)) for idx, cells in per_tuple]
        if any(not c for c in common):
            return NestedCheck(False, tuples=tuples, reason="no common interior cell")
        chosen = tuple(min(c) for c in common)
        clearance = min(
            base.cells[chosen[j]][0].linf_clearance(np.asarray(zz, dtype=float))
            for _, z in subs for j, zz in enumerate(_permuted(P, z)))
        cell = chosen if isinstance(P, Symmetrized) else chosen[0]
        return NestedCheck(True, cell, clearance, tuples)
    zs = [(idx, np.asarray(z, dtype=float)) for idx, z in subs]
    ids = [(idx, P.region_id(z)) for idx, z in zs]
    radii = [P.stability_radius(z).radius for _, z in zs]
    if len({r for _, r in ids}) != 1:
        return NestedCheck(False, tuples=ids, reason="subvectors lie in different regions")
    if min(radii) <= 0:
        return NestedCheck(False, tuples=ids, reason="a subvector lies on a region boundary")
    return NestedCheck(True, ids[0][1], min(radii), ids)


def nested_point(P, n: int, x0: float | None = None) -> NestedPointCert:
    """Build ``w`` in ``(0,1)^n``, strictly decreasing, with all ascending k-subvectors in one cell."""
    k = P.dim_in
    if not n > k >= 1:
        raise ValueError(f"need n > k >= 1, got n={n}, k={k}")
    x = DEFAULT_X0 if x0 is None else float(x0)
    lo, hi = _working_box(P)
    if not np.all((lo < x) & (x < hi)):
        raise ValueError(f"seed x0={x} outside the open working box")
    v = np.full(k, x)
    chain = [v.copy()]
    polys = [poly(P, v)]
    if polys[0] is None:
        raise NestedPointError(f"seed x0={x} sits on a region boundary")
    eps: list[float] = []
    for i in range(k):
        e = min(_clearance_eps(P, v), float(np.min(v - lo)), float(np.min(hi - v)))
        if eps:
            e = min(e, eps[-1] / 2)
        if not e > 0:
            raise NestedPointError(f"no positive epsilon at chain point {i}: {v.tolist()}")
        eps.append(e)
        v = v.copy()
        v[i] += e / 2
        p = poly(P, v)
        if p is None or not _poly_subset(p, polys[-1]):
            raise NestedPointError(f"inclusion chain broken at step {i + 1}")
        chain.append(v)
        polys.append(p)
    cell = _single_cell(polys[-1])
    if cell is None:
        raise NestedPointError("final chain point is not in a single cell")
    rho = min((eps[i] / eps[i - 1] for i in range(1, k)), default=0.5)
    y = [eps[0] / 4 * rho ** i for i in range(n)]
    w = tuple(x + yi for yi in y)
    cert = NestedPointCert(x, tuple(eps), tuple(tuple(float(t) for t in c) for c in chain), rho, tuple(y), w, cell, k, n)
    check = check_nested(np.array(w), k, P)
    if not check.ok:
        raise NestedPointError(f"constructed point failed verification: {check.reason}")
    if check.cell != cell:
        raise NestedPointError(f"subvectors landed in cell {check.cell}, expected {cell}")
    return cert


def poly_chain(P, cert: NestedPointCert) -> list:
    return [poly(P, np.array(v)) for v in cert.v_chain]


def inclusion_chain_holds(P, cert: NestedPointCert) -> bool:
    chain = poly_chain(P, cert)
    return all(p is not None for p in chain) and all(
        _poly_subset(b, a) for a, b in zip(chain, chain[1:]))


def alpha_coefficients(cert: NestedPointCert) -> np.ndarray:
    """Convex weights writing ``(x + y_1, ..., x + y_k)`` over the chain ``v_0..v_k``."""
    k, eps, y = cert.k, cert.eps, cert.y
    q = [2 * y[i] / eps[i] for i in range(k)]
    return np.array([1 - q[0]] + [q[i] - q[i + 1] for i in range(k - 1)] + [q[k - 1]])


def alpha_identity_errors(cert: NestedPointCert) -> tuple[float, float, float]:
    """(most negative weight, |sum - 1|, reconstruction l-inf error)."""
    a = alpha_coefficients(cert)
    target = cert.x + np.array(cert.y[:cert.k])
    recon = a @ np.array(cert.v_chain)
    return float(min(0.0, a.min())), abs(math.fsum(a) - 1.0), float(np.abs(recon - target).max())


# -- ascending-tuple linear system ------------------------------------------

def tuple_system_coeffs(n: int, k: int) -> np.ndarray:
    """Entry ``(j, i)``: number of ascending k-tuples putting index ``i`` in slot ``j``."""
    if not n > k >= 1:
        raise ValueError(f"need n > k >= 1, got n={n}, k={k}")
    rows = [[math.comb(i - 1, j - 1) * math.comb(n - i, k - j) for i in range(1, n + 1)]
            for j in range(1, k + 1)]
    big = max(max(r) for r in rows) >= 2 ** 62
    return np.array(rows, dtype=object if big else np.int64)


def nullspace_rational(M) -> list[list[Fraction]]:
    """Basis of ``{x : M x = 0}`` by fraction-exact Gauss-Jordan elimination."""
    m = [[Fraction(int(v)) if not isinstance(v, Fraction) else v for v in row] for row in M]
    n_rows, n_cols = len(m), len(m[0])
    pivots = []
    r = 0
    for c in range(n_cols):
        piv = next((i for i in range(r, n_rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        m[r] = [v / p for v in m[r]]
        for i in range(n_rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    free = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * n_cols
        vec[fc] = Fraction(1)
        for row, pc in zip(m, pivots):
            vec[pc] = -row[fc]
        basis.append(vec)
    return basis


def collision_direction(n: int, k: int) -> list[Fraction]:
    """Null vector of the tuple system, scaled to max |entry| = 1, first nonzero positive."""
    vec = nullspace_rational(tuple_system_coeffs(n, k).tolist())[0]
    top = max(abs(v) for v in vec)
    sign = 1 if next(v for v in vec if v != 0) > 0 else -1
    return [sign * v / top for v in vec]


def collision_delta(n: int, k: int, radius: float, exact: bool = False) -> np.ndarray:
    """Nonzero ``delta`` with zero ascending-tuple sums and ``||delta||_inf = radius / 2``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    direction = collision_direction(n, k)
    if exact:
        half = Fraction(radius) / 2
        return np.array([v * half for v in direction], dtype=object)
    return np.array([float(v) for v in direction]) * (radius / 2)


def tuple_residual(n: int, k: int, delta):
    M = tuple_system_coeffs(n, k)
    if is_exact(delta):
        return [sum((int(a) * d for a, d in zip(row, delta)), start=Fraction(0)) for row in M.tolist()]
    return M.astype(float) @ np.asarray(delta, dtype=float)


# -- collision certificates -------------------------------------------------

@dataclass(frozen=True)
class CollisionCert:
    nested: NestedPointCert
    delta: np.ndarray
    radius: float
    F_w: np.ndarray
    F_wd: np.ndarray
    exact: bool = False
    tol: float = 1e-9
    lift: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def k(self) -> int:
        return self.nested.k

    @property
    def n(self) -> int:
        return self.nested.n

    def points(self):
        """``(w, w + delta)``; Fractions in exact mode."""
        w = to_exact(np.array(self.nested.w)) if self.exact else np.array(self.nested.w)
        return w, w + self.delta


def precompose(f, alpha, beta, k: int) -> ReluNet:
    """``f o g^(k)`` with ``g(t) = (1 - t) alpha + t beta``, folded into the first layer."""
    if not isinstance(f, ReluNet):
        raise TypeError("segment lifting is implemented for ReLU networks")
    alpha, beta = np.atleast_1d(np.asarray(alpha, float)), np.atleast_1d(np.asarray(beta, float))
    d = alpha.size
    if f.dim_in != k * d:
        raise ValueError(f"f takes {f.dim_in} inputs, expected k*d = {k * d}")
    G = np.zeros((k * d, k))
    for i in range(k):
        G[i * d:(i + 1) * d, i] = beta - alpha
    g0 = np.tile(alpha, k)
    first = f.layers[0]
    return ReluNet([AffineMap(first.A @ G, first.A @ g0 + first.b), *f.layers[1:]])


def _scale(F) -> float:
    return max(1.0, float(np.max(np.abs(np.asarray(F, dtype=float)))))


def find_collision(f, k: int, n: int, x0: float | None = None, exact: bool = False,
                   tol: float = 1e-9, min_delta: float = 1e-6, max_seeds: int = MAX_SEEDS) -> CollisionCert:
    """Search seeds for a verified collision; prefers the first with ``||delta||_inf >= min_delta``."""
    if not n > k >= 1:
        raise ValueError(f"need n > k >= 1, got n={n}, k={k}")
    if f.dim_in != k:
        raise ValueError(f"f must take k={k} scalar inputs, got {f.dim_in}")
    fhat = symmetrize(f, k)
    lo, hi = _working_box(fhat)
    rng = np.random.default_rng(RETRY_SEED)
    seeds = [DEFAULT_X0 if x0 is None else x0]
    seeds += list(rng.uniform(0.05, 0.95, max_seeds - 1) * (hi[0] - lo[0]) + lo[0])
    best, failures = None, []
    for s in seeds:
        try:
            nested = nested_point(fhat, n, s)
        except NestedPointError as exc:
            failures.append(f"x0={s:.6g}: {exc}")
            continue
        w = np.array(nested.w)
        subs = [w[list(idx)] for idx in itertools.combinations(range(n), k)]
        stab = min(fhat.stability_radius(z).radius for z in subs)
        gap = float(np.min(w[:-1] - w[1:]))
        radius = min(stab, gap) / 2
        if not radius > 0:
            failures.append(f"x0={s:.6g}: zero stability radius")
            continue
        delta = collision_delta(n, k, radius, exact)
        wx = to_exact(w) if exact else w
        F_w = janossy_pool_ascending(fhat, k, wx)
        F_wd = janossy_pool_ascending(fhat, k, wx + delta)
        cert = CollisionCert(nested, delta, radius, F_w, F_wd, exact, tol)
        report = verify_collision(f, k, cert)
        if not report.ok:
            failures.append(f"x0={s:.6g}: {'; '.join(report.failures)}")
            continue
        size = float(np.max(np.abs(np.asarray(delta, dtype=float))))
        if size >= min_delta:
            return cert
        if best is None or size > best[0]:
            best = (size, cert)
    if best is not None:
        return best[1]
    raise CollisionError("no verified collision found:\n  " + "\n  ".join(failures))


def lift_collision(cert: CollisionCert, alpha, beta) -> tuple[Multiset, Multiset]:
    """Map both 1-D multisets onto the segment from ``alpha`` to ``beta`` in ``R^d``."""
    alpha, beta = np.atleast_1d(np.asarray(alpha, float)), np.atleast_1d(np.asarray(beta, float))
    if np.array_equal(alpha, beta):
        raise ValueError("alpha and beta must differ")
    w, wd = (np.asarray(p, dtype=float) for p in cert.points())
    g = lambda t: (1 - t)[:, None] * alpha + t[:, None] * beta
    return Multiset(g(w)), Multiset(g(wd))


def find_lifted_collision(f, k: int, n: int, alpha, beta, **kwargs) -> CollisionCert:
    """Collision for a network on ``(R^d)^k`` via its restriction to a segment."""
    cert = find_collision(precompose(f, alpha, beta, k), k, n, **kwargs)
    return replace(cert, lift=(np.atleast_1d(np.asarray(alpha, float)), np.atleast_1d(np.asarray(beta, float))))


@dataclass
class VerificationReport:
    checks: dict[str, bool] = field(default_factory=dict)
    details: dict[str, str] = field(default_factory=dict)
    canonical_gap: float = 0.0

    @property
    def ok(self) -> bool:
        return bool(self.checks) and all(self.checks.values())

    @property
    def failures(self) -> list[str]:
        return [f"{name}: {self.details.get(name, 'failed')}" for name, ok in self.checks.items() if not ok]

    def record(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks[name] = bool(ok)
        if detail:
            self.details[name] = detail


def verify_collision(f, k: int, cert: CollisionCert, tol: float | None = None) -> VerificationReport:
    """Re-derive every claim of ``cert`` independently of the path that built it."""
    tol = cert.tol if tol is None else tol
    rep = VerificationReport()
    n = cert.n
    f1 = f if cert.lift is None else precompose(f, *cert.lift, k)
    if f1.dim_in != k or cert.k != k:
        rep.record("arity", False, f"function/cert arity mismatch (k={k}, cert k={cert.k})")
        return rep
    fhat = symmetrize(f1, k)
    w, wd = cert.points()
    delta = cert.delta
    dmax = float(np.max(np.abs(np.asarray(delta, dtype=float))))
    rep.record("delta_nonzero", any(v != 0 for v in delta), "delta is zero")
    rep.record("within_radius", dmax <= cert.radius, f"||delta||={dmax:.3g} > radius={cert.radius:.3g}")

    A = Multiset(np.asarray(w, dtype=float))
    B = Multiset(np.asarray(wd, dtype=float))
    rep.canonical_gap = float(np.max(np.abs(A.canonical().points - B.canonical().points)))
    rep.record("multisets_distinct", A != B, "w and w + delta are the same multiset")

    res = tuple_residual(n, k, delta)
    if cert.exact:
        rep.record("tuple_residual", all(r == 0 for r in res), f"residual {[str(r) for r in res]}")
    else:
        worst = float(np.max(np.abs(res)))
        rep.record("tuple_residual", worst <= TUPLE_RESIDUAL_TOL, f"residual {worst:.3g}")

    chk = check_nested(np.asarray(w, dtype=float), k, fhat)
    rep.record("nested", chk.ok and chk.cell == cert.nested.cell,
               chk.reason or f"cell {chk.cell} differs from certified {cert.nested.cell}")
    chk_d = check_nested(np.asarray(wd, dtype=float), k, fhat)
    rep.record("perturbed_nested", chk_d.ok and chk_d.cell == cert.nested.cell,
               chk_d.reason or "w + delta leaves the certified cell")

    spec = PoolingSpec(f1, k, n)
    pool = janossy_pool_sn if n <= 7 else janossy_pool
    Fa, Fb = pool(spec, w), pool(spec, wd)
    scale = _scale(Fa)
    if cert.exact:
        rep.record("pooled_equal", all(a == b for a, b in zip(Fa, Fb)), "exact pooled values differ")
        rep.record("stored_values", all(a == b for a, b in zip(Fa, cert.F_w))
                   and all(a == b for a, b in zip(Fb, cert.F_wd)), "stored pooled values do not match")
    else:
        gap = float(np.max(np.abs(np.asarray(Fa, float) - np.asarray(Fb, float))))
        rep.record("pooled_equal", gap <= tol * scale, f"pooled gap {gap:.3g} > {tol * scale:.3g}")
        stored = max(float(np.max(np.abs(np.asarray(Fa, float) - np.asarray(cert.F_w, float)))),
                     float(np.max(np.abs(np.asarray(Fb, float) - np.asarray(cert.F_wd, float)))))
        rep.record("stored_values", stored <= tol * scale, f"stored values off by {stored:.3g}")

    if cert.lift is not None:
        LA, LB = lift_collision(cert, *cert.lift)
        d = LA.d
        rep.record("lift_distinct", LA != LB, "lifted multisets coincide")
        spec_d = PoolingSpec(f, k, n, d)
        Ga, Gb = janossy_pool(spec_d, LA.points), janossy_pool(spec_d, LB.points)
        gap = float(np.max(np.abs(Ga - Gb)))
        rep.record("lift_pooled_equal", gap <= tol * _scale(Ga), f"lifted pooled gap {gap:.3g}")
    return rep
