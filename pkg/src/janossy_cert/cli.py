"""Command line entry point: ``janossy-cert <subcommand> [flags]``.

Every subcommand prints a comma-delimited ``check,status,detail`` report and
exits 0 only when all of its checks pass.  Randomness comes from one Philox
stream seeded by ``--seed``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .formats import (
    emit_certificate,
    emit_histogram,
    load_certificate,
    load_encodings,
    load_function,
    load_multisets,
    parse_xyz,
    save_encodings,
    save_multisets,
)
from .grid_codec import bilip_estimate, build_codec, check_separation, decode, encode
from .janossy import PoolingSpec, invariance_check, janossy_pool, janossy_pool_sn
from .multiset import domain_separation, multisets_close
from .synthetic import (
    make_rng,
    planted_separation_dataset,
    random_grid_cpwl,
    random_relu,
    separated_pair_sampler,
)
from .witness import CollisionError, find_collision, find_lifted_collision, verify_collision


class Report:
    def __init__(self):
        self.rows: list[tuple[str, bool | None, str]] = []

    def info(self, name: str, detail) -> None:
        self.rows.append((name, None, str(detail)))

    def check(self, name: str, ok: bool, detail="") -> bool:
        self.rows.append((name, bool(ok), str(detail)))
        return ok

    @property
    def ok(self) -> bool:
        return all(ok is not False for _, ok, _ in self.rows)

    def emit(self, out=None) -> int:
        out = sys.stdout if out is None else out
        print("check,status,detail", file=out)
        for name, ok, detail in self.rows:
            status = "info" if ok is None else ("pass" if ok else "FAIL")
            print(f"{name},{status},{detail.replace(',', ';')}", file=out)
        failures = [name for name, ok, _ in self.rows if ok is False]
        if failures:
            print(f"# failed: {' '.join(failures)}", file=out)
        return 0 if self.ok else 1


def _load_dataset(path: str):
    p = Path(path)
    if p.is_dir() or p.suffix == ".xyz":
        ds = parse_xyz(p)
        return ds.multisets(), [r.name for r in ds.records]
    return load_multisets(p)


def cmd_witness(args) -> int:
    rep = Report()
    rng = make_rng(args.seed)
    k, dim = args.k, args.dim
    n = args.n if args.n is not None else k + 1
    if args.function:
        f = load_function(args.function)
    elif args.rational:
        f = random_grid_cpwl(rng, k * dim, int(rng.integers(2, 5)))
    else:
        f = random_relu(rng, k * dim)
    rep.info("function", f"{type(f).__name__} on R^{f.dim_in}")
    try:
        if dim > 1:
            alpha, beta = rng.uniform(0, 1, dim), rng.uniform(0, 1, dim)
            cert = find_lifted_collision(f, k, n, alpha, beta, exact=args.rational, tol=args.tol)
        else:
            cert = find_collision(f, k, n, exact=args.rational, tol=args.tol)
    except (CollisionError, TypeError, ValueError) as exc:
        rep.check("collision_found", False, exc)
        return rep.emit()
    report = verify_collision(f, k, cert)
    for name, ok in report.checks.items():
        rep.check(name, ok, report.details.get(name, "") if not ok else "")
    rep.info("w", list(cert.nested.w))
    rep.info("delta", [str(v) for v in cert.delta])
    rep.info("canonical_gap", report.canonical_gap)
    path = emit_certificate(cert, args.out, function=f)
    rep.info("certificate", path)
    return rep.emit()


def cmd_verify(args) -> int:
    rep = Report()
    cert, f = load_certificate(args.cert)
    if args.function:
        f = load_function(args.function)
    if f is None:
        rep.check("function", False, "certificate carries no function; pass --function")
        return rep.emit()
    report = verify_collision(f, cert.k, cert, tol=args.tol)
    for name, ok in report.checks.items():
        rep.check(name, ok, report.details.get(name, "") if not ok else "")
    return rep.emit()


def cmd_encode(args) -> int:
    rep = Report()
    data, names = _load_dataset(args.input)
    codec = build_codec(args.separation, dataset=data, margin=args.margin)
    rep.info("R", codec.R)
    rep.info("margin", codec.margin)
    rep.info("active_cubes", len(codec.active))
    rep.info("m", codec.m)
    bad = [i for i, A in enumerate(data) if not check_separation(codec, A)]
    rep.check("separation", not bad, f"{len(bad)} multisets closer than s + 2*margin" if bad else "")
    path = save_encodings(codec, [encode(codec, A) for A in data], args.out, names)
    rep.info("encodings", path)
    return rep.emit()


def cmd_decode(args) -> int:
    rep = Report()
    codec, encodings, names = load_encodings(args.input)
    decoded, errors = [], []
    for i, E in enumerate(encodings):
        try:
            decoded.append(decode(codec, E))
        except ValueError as exc:
            errors.append(f"{i}: {exc}")
    rep.check("decoded", not errors, "; ".join(errors))
    if args.reference and not errors:
        ref, _ = _load_dataset(args.reference)
        mism = [i for i, (A, B) in enumerate(zip(ref, decoded)) if not multisets_close(A, B, args.tol)]
        rep.check("round_trip", not mism and len(ref) == len(decoded), f"mismatched {mism}" if mism else "")
    if not errors:
        rep.info("multisets", save_multisets(decoded, args.out, names))
    return rep.emit()


def cmd_separation(args) -> int:
    rep = Report()
    if args.input:
        data, _ = _load_dataset(args.input)
    else:
        data = planted_separation_dataset(make_rng(args.seed), args.synthetic, args.n or 12,
                                          args.planted, args.dim)
    sep = domain_separation(data)
    rep.info("multisets", len(data))
    rep.info("R_D", sep.R_D)
    hist = emit_histogram(sep.normalized, args.bins, args.out, xlabel="min / max pairwise distance",
                          title="normalised separation")
    rep.info("min_normalized", repr(hist.min))
    rep.info("mean_normalized", hist.mean)
    rep.info("histogram", Path(args.out).with_suffix(".csv"))
    if args.threshold is not None:
        rep.check("threshold", hist.min >= args.threshold, f"min {hist.min} vs {args.threshold}")
    return rep.emit()


def cmd_bilip(args) -> int:
    rep = Report()
    rng = make_rng(args.seed)
    hi = args.box
    codec = build_codec(args.separation, box=(np.zeros(args.dim), np.full(args.dim, hi)), margin=args.margin)
    sampler = separated_pair_sampler(rng, args.n, args.dim, args.separation, 0.0, hi)
    est = bilip_estimate(codec, sampler, args.trials)
    rep.info("pairs", est.pairs)
    rep.info("c_low", repr(est.c_low))
    rep.info("C_high", repr(est.C_high))
    rep.check("lower_positive", est.c_low > 0, est.c_low)
    rep.check("upper_finite", np.isfinite(est.C_high), est.C_high)
    emit_histogram(est.ratios, 40, args.out, xlabel="||F(A) - F(B)||_inf / d_W(A, B)", title="bi-Lipschitz ratios")
    rep.info("histogram", Path(args.out).with_suffix(".csv"))
    return rep.emit()


def cmd_invariance(args) -> int:
    rep = Report()
    rng = make_rng(args.seed)
    n = args.n if args.n is not None else args.k + 1
    f = random_relu(rng, args.k * args.dim)
    spec = PoolingSpec(f, args.k, n, args.dim)
    X = rng.uniform(0, 1, (n, args.dim))
    res = invariance_check(spec, X, args.trials, rng)
    rep.check("invariance", res.ok(args.tol), f"max deviation {res.max_deviation:.3g} (scale {res.scale:.3g})")
    if n <= 7:
        a, b = janossy_pool(spec, X), janossy_pool_sn(spec, X)
        gap = float(np.max(np.abs(a - b)))
        rep.check("sn_enumeration", gap <= args.tol * res.scale, f"gap {gap:.3g}")
    return rep.emit()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="janossy-cert", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--seed", type=int, default=42, help="64-bit seed for the Philox stream")
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--out", default=out_default)
        return sp

    w = common(sub.add_parser("witness", help="build and verify a collision certificate"), "witness.json")
    w.add_argument("--k", type=int, default=2)
    w.add_argument("--n", type=int, default=None, help="multiset size (default k+1)")
    w.add_argument("--dim", type=int, default=1)
    w.add_argument("--rational", action="store_true", help="exact rational arithmetic (grid partitions)")
    w.add_argument("--function", help="JSON function file; random if omitted")
    w.set_defaults(func=cmd_witness)

    v = common(sub.add_parser("verify", help="re-verify a certificate file"), "")
    v.add_argument("cert")
    v.add_argument("--function", help="override the embedded function")
    v.set_defaults(func=cmd_verify)

    e = common(sub.add_parser("encode", help="encode multisets with the grid codec"), "encodings.json")
    e.add_argument("input", help="XYZ file/directory or multisets JSON")
    e.add_argument("--separation", type=float, default=None, help="R (default: dataset minimum)")
    e.add_argument("--margin", type=float, default=None)
    e.set_defaults(func=cmd_encode)

    d = common(sub.add_parser("decode", help="decode an encodings file"), "decoded.json")
    d.add_argument("input")
    d.add_argument("--reference", help="original multisets to compare against")
    d.set_defaults(func=cmd_decode)

    s = common(sub.add_parser("separation", help="separation statistics and histogram"), "separation.csv")
    s.add_argument("input", nargs="?", help="XYZ file/directory or multisets JSON")
    s.add_argument("--synthetic", type=int, default=1000, help="planted dataset size when no input")
    s.add_argument("--planted", type=float, default=0.1)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--dim", type=int, default=3)
    s.add_argument("--bins", type=int, default=20)
    s.add_argument("--threshold", type=float, default=None)
    s.set_defaults(func=cmd_separation)

    b = common(sub.add_parser("bilip", help="empirical bi-Lipschitz ratios"), "bilip.csv")
    b.add_argument("--separation", type=float, default=0.5)
    b.add_argument("--margin", type=float, default=None)
    b.add_argument("--dim", type=int, default=2)
    b.add_argument("--n", type=int, default=8)
    b.add_argument("--trials", type=int, default=10_000)
    b.add_argument("--box", type=float, default=2.0, help="side of the sampling box [0, box]^dim")
    b.set_defaults(func=cmd_bilip)

    i = common(sub.add_parser("invariance", help="permutation invariance of pooling"), "")
    i.add_argument("--k", type=int, default=2)
    i.add_argument("--n", type=int, default=None)
    i.add_argument("--dim", type=int, default=1)
    i.add_argument("--trials", type=int, default=1000)
    i.set_defaults(func=cmd_invariance)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
