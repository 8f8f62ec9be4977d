"""File formats: XYZ geometry input, JSON documents for functions/certificates/codecs, histograms.

All JSON documents carry ``format_version``.  Floats are written in Python's
shortest round-trip form and exact rationals as ``"p/q"`` strings, so every
document reloads to an equal value.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import __version__
from .cpwl import AffineMap, ExplicitPartition, HPolytope, ReluNet
from .grid_codec import GridCodec
from .multiset import Multiset
from .plotting import histogram_figure
from .witness import CollisionCert, NestedPointCert, check_nested, verify_collision

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


class XyzFormatError(FormatError):
    def __init__(self, origin: str, line: int, message: str):
        super().__init__(f"{origin}:{line}: {message}")
        self.origin = origin
        self.line = line


# -- XYZ --------------------------------------------------------------------

@dataclass(frozen=True)
class XyzRecord:
    name: str
    multiset: Multiset
    labels: tuple[str, ...]


@dataclass(frozen=True)
class XyzDataset:
    records: tuple[XyzRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def multisets(self) -> list[Multiset]:
        return [r.multiset for r in self.records]


def _xyz_float(tok: str, origin: str, lineno: int) -> float:
    try:
        # QM9 writes exponents as "*^"
        v = float(tok.replace("*^", "e"))
    except ValueError:
        raise XyzFormatError(origin, lineno, f"non-numeric coordinate {tok!r}") from None
    if not np.isfinite(v):
        raise XyzFormatError(origin, lineno, f"non-finite coordinate {tok!r}")
    return v


def parse_xyz_text(text: str, origin: str = "<string>", trailer_lines: int = 0) -> list[XyzRecord]:
    """Parse concatenated XYZ records: count line, comment line, ``count`` lines of ``label x y z``.

    ``trailer_lines`` skips that many lines after each record's atoms (3 for raw QM9 files).
    """
    lines = text.splitlines()
    records = []
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        head = lines[i].split()
        try:
            count = int(head[0])
            if len(head) != 1 or count < 1:
                raise ValueError
        except ValueError:
            raise XyzFormatError(origin, i + 1, f"malformed atom count {lines[i].strip()!r}") from None
        if i + 1 >= len(lines):
            raise XyzFormatError(origin, i + 2, "truncated record: missing comment line")
        name = lines[i + 1].strip()
        labels, coords = [], []
        for j in range(count):
            lineno = i + 3 + j
            if lineno > len(lines):
                raise XyzFormatError(origin, lineno, f"truncated record: expected {count} atoms, found {j}")
            toks = lines[lineno - 1].split()
            if len(toks) < 4:
                # a blank or bare-count line means the next record started early
                if not toks or (len(toks) == 1 and toks[0].isdigit()):
                    raise XyzFormatError(origin, lineno, f"truncated record: expected {count} atoms, found {j}")
                raise XyzFormatError(origin, lineno, f"expected 'label x y z', got {lines[lineno - 1]!r}")
            labels.append(toks[0])
            coords.append([_xyz_float(t, origin, lineno) for t in toks[1:4]])
        records.append(XyzRecord(name, Multiset(np.array(coords)), tuple(labels)))
        i += 2 + count + trailer_lines
    return records


def parse_xyz(source, trailer_lines: int = 0) -> XyzDataset:
    """Read one XYZ file or every ``*.xyz`` file of a directory (sorted by name)."""
    source = Path(source)
    if not source.exists():
        raise FileNotFoundError(source)
    files = sorted(source.glob("*.xyz")) if source.is_dir() else [source]
    records = []
    for f in files:
        records.extend(parse_xyz_text(f.read_text(), str(f), trailer_lines))
    return XyzDataset(tuple(records))


# -- scalar encoding --------------------------------------------------------

def _enc(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, np.ndarray):
        return [_enc(x) for x in v.tolist()] if v.dtype != object else [_enc(x) for x in v]
    if isinstance(v, (list, tuple, frozenset, set)):
        items = sorted(v) if isinstance(v, (set, frozenset)) else v
        return [_enc(x) for x in items]
    raise TypeError(f"cannot encode {type(v).__name__}")


def _dec_scalar(v):
    if isinstance(v, str):
        return Fraction(v)
    return v


def _dec_vec(vals) -> np.ndarray:
    out = [_dec_scalar(v) for v in vals]
    if any(isinstance(v, Fraction) for v in out):
        return np.array(out, dtype=object)
    return np.array(out, dtype=float)


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


def _dump(doc: dict, path) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(doc, indent=1) + "\n")
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc
    return path


def _load(path, kind: str) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {doc.get('format_version')!r}")
    if doc.get("kind") != kind:
        raise FormatError(f"expected a {kind!r} document, got {doc.get('kind')!r}")
    return doc


# -- functions --------------------------------------------------------------

def function_to_dict(f) -> dict:
    if isinstance(f, ReluNet):
        return {"type": "relu", "layers": [{"A": _enc(l.A), "b": _enc(l.b)} for l in f.layers]}
    if isinstance(f, ExplicitPartition):
        return {
            "type": "partition",
            "lo": _enc(f.lo),
            "hi": _enc(f.hi),
            "cells": [{"normals": _enc(p.normals), "offsets": _enc(p.offsets), "A": _enc(a.A), "b": _enc(a.b)}
                      for p, a in f.cells],
        }
    raise TypeError(f"cannot serialise {type(f).__name__}")


def function_from_dict(doc: dict):
    kind = doc.get("type")
    if kind == "relu":
        return ReluNet([AffineMap(np.array(l["A"], float), np.array(l["b"], float)) for l in doc["layers"]])
    if kind == "partition":
        cells = [(HPolytope(np.array(c["normals"], float), np.array(c["offsets"], float)),
                  AffineMap(np.array(c["A"], float), np.array(c["b"], float))) for c in doc["cells"]]
        return ExplicitPartition(cells, lo=doc["lo"], hi=doc["hi"])
    raise FormatError(f"unknown function type {kind!r}")


def save_function(f, path) -> Path:
    return _dump({"format_version": FORMAT_VERSION, "kind": "function", **function_to_dict(f)}, path)


def load_function(path):
    return function_from_dict(_load(path, "function"))


# -- certificates -----------------------------------------------------------

def _nested_to_dict(c: NestedPointCert) -> dict:
    return {"k": c.k, "n": c.n, "x": c.x, "eps": _enc(c.eps), "v_chain": _enc(c.v_chain), "rho": c.rho,
            "y": _enc(c.y), "w": _enc(c.w), "cell": _enc(c.cell)}


def _nested_from_dict(d: dict) -> NestedPointCert:
    return NestedPointCert(
        x=float(d["x"]), eps=tuple(d["eps"]), v_chain=tuple(tuple(v) for v in d["v_chain"]),
        rho=float(d["rho"]), y=tuple(d["y"]), w=tuple(d["w"]), cell=_freeze(d["cell"]),
        k=int(d["k"]), n=int(d["n"]))


def certificate_to_dict(cert, function=None) -> dict:
    doc: dict[str, Any] = {"format_version": FORMAT_VERSION, "library_version": __version__}
    if isinstance(cert, NestedPointCert):
        doc.update(kind="nested_point", arithmetic="float", nested=_nested_to_dict(cert))
    elif isinstance(cert, CollisionCert):
        doc.update(
            kind="collision",
            arithmetic="rational" if cert.exact else "float",
            tolerances={"pooled": cert.tol, "tuple_residual": 1e-12, "membership": 1e-12},
            nested=_nested_to_dict(cert.nested),
            delta=_enc(cert.delta),
            radius=cert.radius,
            F_w=_enc(cert.F_w),
            F_wd=_enc(cert.F_wd),
            lift=None if cert.lift is None else {"alpha": _enc(cert.lift[0]), "beta": _enc(cert.lift[1])},
        )
    else:
        raise TypeError(f"not a certificate: {type(cert).__name__}")
    doc["function"] = None if function is None else function_to_dict(function)
    return doc


def certificate_from_dict(doc: dict):
    """Return ``(cert, function_or_None)``."""
    f = None if doc.get("function") is None else function_from_dict(doc["function"])
    nested = _nested_from_dict(doc["nested"])
    if doc["kind"] == "nested_point":
        return nested, f
    exact = doc["arithmetic"] == "rational"
    delta = _dec_vec(doc["delta"])
    if exact and delta.dtype != object:
        delta = np.array([Fraction(v) for v in delta], dtype=object)
    lift = None
    if doc.get("lift"):
        lift = (np.array(doc["lift"]["alpha"], float), np.array(doc["lift"]["beta"], float))
    cert = CollisionCert(nested, delta, float(doc["radius"]), _dec_vec(doc["F_w"]), _dec_vec(doc["F_wd"]),
                         exact, float(doc["tolerances"]["pooled"]), lift)
    return cert, f


def emit_certificate(cert, path, function=None) -> Path:
    return _dump(certificate_to_dict(cert, function), path)


class CertificateError(FormatError):
    pass


def load_certificate(path, verify: bool = False):
    """Return ``(cert, function_or_None)``; with ``verify`` an invalid certificate raises."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {doc.get('format_version')!r}")
    if doc.get("kind") not in ("collision", "nested_point"):
        raise FormatError(f"not a certificate document: kind={doc.get('kind')!r}")
    cert, f = certificate_from_dict(doc)
    if verify:
        if f is None:
            raise CertificateError(f"{path}: no embedded function to verify against")
        if isinstance(cert, NestedPointCert):
            chk = check_nested(np.array(cert.w), cert.k, f)
            if not chk.ok or chk.cell != cert.cell:
                raise CertificateError(f"{path}: nested point rejected: {chk.reason or 'cell mismatch'}")
        else:
            rep = verify_collision(f, cert.k, cert)
            if not rep.ok:
                raise CertificateError(f"{path}: " + "; ".join(rep.failures))
    return cert, f


# -- codecs, encodings, multisets ------------------------------------------

def codec_to_dict(codec: GridCodec) -> dict:
    return {"R": codec.R, "margin": codec.margin, "anchor": _enc(codec.anchor), "active": _enc(codec.active)}


def codec_from_dict(d: dict) -> GridCodec:
    return GridCodec(float(d["R"]), float(d["margin"]), np.array(d["anchor"], float),
                     tuple(tuple(q) for q in d["active"]))


def save_codec(codec: GridCodec, path) -> Path:
    return _dump({"format_version": FORMAT_VERSION, "kind": "grid_codec", **codec_to_dict(codec)}, path)


def load_codec(path) -> GridCodec:
    return codec_from_dict(_load(path, "grid_codec"))


def save_encodings(codec: GridCodec, encodings: Iterable[np.ndarray], path, names=None) -> Path:
    encodings = [np.asarray(e, float) for e in encodings]
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "encoding",
        "codec": codec_to_dict(codec),
        "layout": {"block_size": codec.d + 1, "fields": ["ind"] + [f"c{i}" for i in range(codec.d)],
                   "blocks": _enc(codec.active)},
        "names": list(names) if names is not None else None,
        "encodings": [_enc(e) for e in encodings],
    }
    return _dump(doc, path)


def load_encodings(path) -> tuple[GridCodec, list[np.ndarray], list[str] | None]:
    doc = _load(path, "encoding")
    codec = codec_from_dict(doc["codec"])
    return codec, [np.array(e, float) for e in doc["encodings"]], doc.get("names")


def save_multisets(multisets: Iterable[Multiset], path, names=None) -> Path:
    doc = {"format_version": FORMAT_VERSION, "kind": "multisets", "names": None if names is None else list(names),
           "multisets": [_enc(np.asarray(A.points)) for A in multisets]}
    return _dump(doc, path)


def load_multisets(path) -> tuple[list[Multiset], list[str] | None]:
    doc = _load(path, "multisets")
    return [Multiset(np.array(m, float)) for m in doc["multisets"]], doc.get("names")


# -- histograms -------------------------------------------------------------

@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    min: float
    max: float
    mean: float


def histogram(values, bins: int) -> Histogram:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no values to histogram")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    return Histogram(edges, counts, float(v.min()), float(v.max()), float(v.mean()))


def emit_histogram(values, bins: int, path, xlabel: str = "value", title: str = "") -> Histogram:
    """Write ``<stem>.csv`` (bin edges and counts) and ``<stem>.svg`` next to it."""
    h = histogram(values, bins)
    stem = Path(path).with_suffix("")
    stem.parent.mkdir(parents=True, exist_ok=True)
    with open(stem.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_left", "bin_right", "count"])
        for a, b, c in zip(h.edges[:-1], h.edges[1:], h.counts):
            w.writerow([repr(float(a)), repr(float(b)), int(c)])
        w.writerow(["#min", repr(h.min), ""])
        w.writerow(["#max", repr(h.max), ""])
        w.writerow(["#mean", repr(h.mean), ""])
    histogram_figure(h.edges, h.counts, stem.with_suffix(".svg"), xlabel=xlabel, title=title, marker=h.min)
    return h


def read_histogram_csv(path) -> Histogram:
    edges, counts, stats = [], [], {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row[0] == "bin_left":
                continue
            if row[0].startswith("#"):
                stats[row[0][1:]] = float(row[1])
                continue
            if not edges:
                edges.append(float(row[0]))
            edges.append(float(row[1]))
            counts.append(int(row[2]))
    return Histogram(np.array(edges), np.array(counts), stats["min"], stats["max"], stats["mean"])
