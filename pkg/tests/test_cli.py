import json

import pytest

from qumodechem import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_malformed_word_exits_2(capsys):
    code, _, err = run(capsys, "compile", "ZQ")
    assert code == 2 and "ZQ" in err


def test_unknown_flag_exits_2(capsys):
    assert run(capsys, "fci", "--R", "0.7414", "--bogus")[0] == 2
    assert run(capsys, "nosuchcommand")[0] == 2


def test_identity_compile(tmp_path, capsys):
    out = tmp_path / "i.json"
    code, text, _ = run(capsys, "compile", "IIII", "--out", str(out))
    assert code == 0 and "loss=0.000e+00" in text
    data = json.loads(out.read_text())
    assert data["entries"]["IIII"]["loss"] == 0.0
    assert data["metadata"]["endianness"] == "qubit0-msb"


def test_compile_is_byte_reproducible_and_verifiable(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run(capsys, "compile", "XZ", "--depth", "8", "--seed", "2", "--out", str(p))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    code, text, _ = run(capsys, "library", "verify", str(a))
    assert code == 0 and json.loads(text)["words"]["XZ"]["ok"]


def test_compile_non_convergence_exits_3(tmp_path, capsys):
    out = tmp_path / "n.json"
    code, _, _ = run(capsys, "compile", "XY", "--depth", "1", "--restarts", "1", "--max-iter", "5", "--out", str(out))
    assert code == 3 and out.exists()


def test_fci_and_config_override(tmp_path, capsys):
    code, text, _ = run(capsys, "fci", "--R", "0.7414")
    assert code == 0 and json.loads(text)["E_fci_hartree"] == pytest.approx(-1.13727017466, abs=1e-9)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"molecule": "h4", "R": 1.0}))
    code, text, _ = run(capsys, "fci", "--config", str(cfg))
    assert code == 0 and json.loads(text)["molecule"] == "h4"
    code, text, _ = run(capsys, "fci", "--config", str(cfg), "--molecule", "h2", "--R", "0.7414")
    assert json.loads(text)["molecule"] == "h2"
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run(capsys, "fci", "--R", "0.7414", "--config", str(cfg))[0] == 2


def test_missing_fixture_exits_4(capsys):
    assert run(capsys, "fci", "--R", "0.8123")[0] == 4
    assert run(capsys, "pes", "--geometries", "0.7414,0.8123", "--mapping", "pauli")[0] == 4


def test_empty_pes_is_header_only(tmp_path, capsys):
    out = tmp_path / "pes.csv"
    assert run(capsys, "pes", "--geometries", "", "--out", str(out))[0] == 0
    assert out.read_text() == "R_angstrom,E_vqe_hartree,E_fci_hartree,abs_error_hartree\n"


def test_pes_dms_strict_and_reproducible(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        code, _, _ = run(capsys, "pes", "--mapping", "dms", "--ansatz", "DmsQutrit", "--depth", "0",
                         "--geometries", "0.5,1.5", "--strict", "--out", str(p))
        assert code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert len(paths[0].read_text().splitlines()) == 3


def test_vqe_command(capsys):
    code, text, _ = run(capsys, "vqe", "--R", "0.7414", "--mapping", "pauli", "--ansatz", "SnapDisp",
                        "--depth", "4", "--restarts", "2")
    data = json.loads(text)
    assert code == 0 and data["abs_error_hartree"] <= 1.6e-3
    assert len(data["params"]) == 68 and data["term_values"]


def test_dms_export(capsys):
    code, text, _ = run(capsys, "dms", "export", "--R", "0.7414")
    data = json.loads(text)
    assert code == 0 and len(data["matrix"]) == 6 and data["determinants"][0] == [0, 1]


def test_library_build_small(tmp_path, capsys):
    out = tmp_path / "lib.json"
    code, _, _ = run(capsys, "library", "build", "--max-qubits", "1", "--depth", "4", "--threads", "1", "--out", str(out))
    assert code == 0
    assert sorted(json.loads(out.read_text())["entries"]) == ["X", "Y", "Z"]
