import json
from fractions import Fraction

import numpy as np
import pytest

from janossy_cert.formats import (
    CertificateError,
    FormatError,
    XyzFormatError,
    emit_certificate,
    emit_histogram,
    load_certificate,
    load_codec,
    load_encodings,
    load_function,
    load_multisets,
    parse_xyz,
    parse_xyz_text,
    read_histogram_csv,
    save_codec,
    save_encodings,
    save_function,
    save_multisets,
)
from janossy_cert.grid_codec import build_codec, encode
from janossy_cert.multiset import Multiset, domain_separation
from janossy_cert.synthetic import (
    four_square_partition,
    make_rng,
    planted_separation_dataset,
    random_grid_cpwl,
    random_relu,
)
from janossy_cert.witness import find_collision, nested_point, verify_collision

WATER = """3
water
O  0.000000  0.000000  0.117300
H  0.000000  0.757200 -0.469200
H  0.000000 -0.757200 -0.469200
"""


def test_parse_water():
    (rec,) = parse_xyz_text(WATER)
    assert rec.name == "water" and rec.labels == ("O", "H", "H")
    assert rec.multiset.n == 3 and rec.multiset.d == 3
    assert rec.multiset.points[1, 1] == 0.7572


def test_parse_two_records_and_qm9_exponent():
    text = WATER + "2\nh2\nH 0 0 0\nH 7.4*^-1 0 0\n"
    recs = parse_xyz_text(text)
    assert len(recs) == 2
    assert recs[1].multiset.points[1, 0] == 0.74


def test_truncated_record_line_number():
    text = "5\nshort\n" + "C 0 0 0\n" * 4 + "3\nnext\n"
    with pytest.raises(XyzFormatError) as exc:
        parse_xyz_text(text)
    assert exc.value.line == 7 and "truncated" in str(exc.value)
    with pytest.raises(XyzFormatError) as exc:
        parse_xyz_text("5\nshort\n" + "C 0 0 0\n" * 4)
    assert exc.value.line == 7


@pytest.mark.parametrize("text, line, needle", [
    ("x\nbad\n", 1, "count"),
    ("1\nc\nC 0 zero 0\n", 3, "non-numeric"),
    ("1\nc\nC 0 0\n", 3, "label x y z"),
    ("1\nc\nC 0 nan 0\n", 3, "non-finite"),
])
def test_xyz_errors(text, line, needle):
    with pytest.raises(XyzFormatError) as exc:
        parse_xyz_text(text)
    assert exc.value.line == line and needle in str(exc.value)


def test_parse_directory(tmp_path):
    (tmp_path / "b.xyz").write_text(WATER)
    (tmp_path / "a.xyz").write_text("1\nhe\nHe 0 0 0\n")
    ds = parse_xyz(tmp_path)
    assert [r.name for r in ds.records] == ["he", "water"]
    with pytest.raises(FileNotFoundError):
        parse_xyz(tmp_path / "missing.xyz")


def test_function_round_trip(tmp_path, rng):
    for f in (random_relu(rng, 3), random_grid_cpwl(rng, 2, 3)):
        g = load_function(save_function(f, tmp_path / "f.json"))
        x = rng.uniform(0, 1, f.dim_in)
        assert np.array_equal(f.evaluate(x), g.evaluate(x))


def test_nested_cert_round_trip(tmp_path):
    P = four_square_partition()
    cert = nested_point(P, 3)
    p = emit_certificate(cert, tmp_path / "n.json", function=P)
    back, f = load_certificate(p, verify=True)
    assert back == cert


def test_collision_cert_round_trip_and_determinism(tmp_path, rng):
    f = random_relu(rng, 2)
    cert = find_collision(f, 2, 4)
    a = emit_certificate(cert, tmp_path / "a.json", function=f).read_bytes()
    b = emit_certificate(cert, tmp_path / "b.json", function=f).read_bytes()
    assert a == b
    back, g = load_certificate(tmp_path / "a.json", verify=True)
    assert np.array_equal(back.delta, cert.delta) and back.nested == cert.nested
    assert verify_collision(g, 2, back).ok
    doc = json.loads(a)
    assert doc["format_version"] == 1 and doc["arithmetic"] == "float"


def test_rational_cert_round_trip_and_tamper(tmp_path, rng):
    P = random_grid_cpwl(rng, 2, 3)
    cert = find_collision(P, 2, 4, exact=True)
    path = emit_certificate(cert, tmp_path / "r.json", function=P)
    back, _ = load_certificate(path, verify=True)
    assert all(isinstance(v, Fraction) for v in back.delta)
    assert list(back.delta) == list(cert.delta)
    doc = json.loads(path.read_text())
    num, den = doc["delta"][0].split("/")
    doc["delta"][0] = f"{int(num) + 1}/{den}"
    path.write_text(json.dumps(doc))
    with pytest.raises(CertificateError):
        load_certificate(path, verify=True)


def test_float_cert_tamper(tmp_path, rng):
    f = random_relu(rng, 2)
    path = emit_certificate(find_collision(f, 2, 4), tmp_path / "c.json", function=f)
    doc = json.loads(path.read_text())
    s = repr(doc["delta"][1])
    digit = next(i for i, ch in enumerate(s) if ch in "123456789")
    doc["delta"][1] = float(s[:digit] + str(int(s[digit]) % 9 + 1) + s[digit + 1:])
    path.write_text(json.dumps(doc))
    with pytest.raises(CertificateError):
        load_certificate(path, verify=True)


def test_version_and_kind_checks(tmp_path):
    p = tmp_path / "x.json"
    p.write_text(json.dumps({"format_version": 99, "kind": "collision"}))
    with pytest.raises(FormatError):
        load_certificate(p)
    p.write_text(json.dumps({"format_version": 1, "kind": "grid_codec"}))
    with pytest.raises(FormatError):
        load_certificate(p)


def test_codec_and_encodings_round_trip(tmp_path):
    c = build_codec(0.5, box=([0.0, 0.0], [1.0, 1.0]))
    c2 = load_codec(save_codec(c, tmp_path / "c.json"))
    assert c2.active == c.active and c2.R == c.R and c2.margin == c.margin
    A = Multiset([[0.1, 0.2], [0.9, 0.7]])
    E = encode(c, A)
    c3, encs, names = load_encodings(save_encodings(c, [E], tmp_path / "e.json", ["a"]))
    assert np.array_equal(encs[0], E) and names == ["a"]


def test_multisets_round_trip_bit_exact(tmp_path, rng):
    data = [Multiset(rng.normal(size=(4, 3))) for _ in range(3)]
    back, names = load_multisets(save_multisets(data, tmp_path / "m.json"))
    assert names is None
    assert all(np.array_equal(a.points, b.points) for a, b in zip(data, back))


def test_histogram_files(tmp_path):
    h = emit_histogram([0.5], 1, tmp_path / "one.csv")
    assert list(h.counts) == [1]
    assert (tmp_path / "one.svg").read_text().lstrip().startswith("<?xml")
    vals = make_rng(1).uniform(0, 1, 500)
    h = emit_histogram(vals, 10, tmp_path / "u.csv")
    assert h.counts.sum() == 500 and np.all(np.diff(h.edges) > 0)
    back = read_histogram_csv(tmp_path / "u.csv")
    assert np.array_equal(back.edges, h.edges) and back.min == h.min
    with pytest.raises(ValueError):
        emit_histogram([], 3, tmp_path / "e.csv")


def test_histogram_min_matches_separation(tmp_path):
    data = planted_separation_dataset(make_rng(5), 1000, 8, 0.1)
    rep = domain_separation(data)
    h = emit_histogram(rep.normalized, 20, tmp_path / "s.csv")
    assert h.min == rep.min_normalized
    assert read_histogram_csv(tmp_path / "s.csv").min == rep.min_normalized
