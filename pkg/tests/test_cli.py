import json

import pytest

from janossy_cert.cli import main
from janossy_cert.formats import save_multisets
from janossy_cert.multiset import Multiset

from test_formats import WATER


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_witness_verify_round_trip(workdir, capsys):
    code, out = run(capsys, "witness", "--k", "2", "--n", "4", "--out", "w.json")
    assert code == 0 and "FAIL" not in out
    code, out = run(capsys, "verify", "w.json")
    assert code == 0 and "pooled_equal,pass" in out


def test_witness_deterministic(workdir, capsys):
    run(capsys, "witness", "--seed", "7", "--out", "a.json")
    run(capsys, "witness", "--seed", "7", "--out", "b.json")
    assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes()


def test_witness_rational_and_lifted(workdir, capsys):
    code, _ = run(capsys, "witness", "--rational", "--k", "2", "--n", "3", "--out", "r.json")
    assert code == 0
    assert json.loads((workdir / "r.json").read_text())["arithmetic"] == "rational"
    code, out = run(capsys, "witness", "--dim", "2", "--out", "l.json")
    assert code == 0 and "lift_pooled_equal,pass" in out


def test_verify_tampered_fails(workdir, capsys):
    run(capsys, "witness", "--rational", "--out", "r.json")
    doc = json.loads((workdir / "r.json").read_text())
    num, den = doc["delta"][0].split("/")
    doc["delta"][0] = f"{int(num) + 1}/{den}"
    (workdir / "r.json").write_text(json.dumps(doc))
    code, out = run(capsys, "verify", "r.json")
    assert code == 1 and "# failed:" in out and "tuple_residual" in out


def test_encode_decode_xyz(workdir, capsys):
    (workdir / "m.xyz").write_text(WATER + "2\nh2\nH 0 0 0\nH 0.74 0 0\n")
    code, out = run(capsys, "encode", "m.xyz", "--out", "e.json")
    assert code == 0
    code, out = run(capsys, "decode", "e.json", "--reference", "m.xyz", "--out", "d.json")
    assert code == 0 and "round_trip,pass" in out


def test_encode_rejects_tight_separation(workdir, capsys):
    save_multisets([Multiset([[0.0], [1.0]]), Multiset([[0.0], [0.1]])], workdir / "m.json")
    code, out = run(capsys, "encode", "m.json", "--separation", "1.0")
    assert code == 1 and "separation,FAIL" in out


def test_separation_synthetic(workdir, capsys):
    code, out = run(capsys, "separation", "--synthetic", "200", "--n", "6", "--threshold", "0.1",
                    "--out", "s.csv")
    assert code == 0
    assert (workdir / "s.csv").exists() and (workdir / "s.svg").exists()
    code, out = run(capsys, "separation", "--synthetic", "200", "--n", "6", "--threshold", "0.2",
                    "--out", "s.csv")
    assert code == 1 and "threshold" in out


def test_bilip_and_invariance(workdir, capsys):
    code, out = run(capsys, "bilip", "--trials", "100", "--n", "4", "--out", "b.csv")
    assert code == 0 and (workdir / "b.svg").exists()
    code, out = run(capsys, "invariance", "--k", "2", "--n", "5", "--trials", "100")
    assert code == 0 and "sn_enumeration,pass" in out


def test_bad_subcommand():
    with pytest.raises(SystemExit):
        main(["nope"])
