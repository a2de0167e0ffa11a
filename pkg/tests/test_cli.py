import json
from fractions import Fraction

import pytest

from udseq import io
from udseq.cli import main
from udseq.instances import escaping_family, geometric_decomposition, grid_target, product_4x4

TWO = {"label": "two", "points": ["a", "b"], "dist": [[0, 1], [1, 0]]}


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def two_files(tmp_path):
    s = write(tmp_path / "s.json", TWO)
    a = write(tmp_path / "a.json", {"space": "two", "atoms": [[0, 1]]})
    b = write(tmp_path / "b.json", {"space": "two", "atoms": [[0, "1/2"], [1, "1/2"]]})
    return s, a, b


def test_kr_prints_fixed_digits(two_files, tmp_path, capsys):
    s, a, b = two_files
    plan = tmp_path / "plan.json"
    assert main(["kr", "--space", s, "--mu", a, "--nu", b, "--dual", "--plan", str(plan)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["0.500000000000", "dual 0.500000000000"]
    # half the mass stays at a, half moves to b
    assert json.loads(plan.read_text())["flows"] == [[0, 0, "1/2"], [0, 1, "1/2"]]


def test_kr_input_error_exit_code(two_files, tmp_path, capsys):
    s, a, _ = two_files
    bad = write(tmp_path / "bad.json", {"space": "two", "atoms": [[0, -0.1]]})
    assert main(["kr", "--space", s, "--mu", a, "--nu", bad]) == 2
    assert "atoms[0][1]" in capsys.readouterr().err


def test_kr_non_probability_is_input_error(two_files, tmp_path):
    s, a, _ = two_files
    half = write(tmp_path / "h.json", {"space": "two", "atoms": [[0, "1/2"]]})
    assert main(["kr", "--space", s, "--mu", a, "--nu", half]) == 2


def test_unknown_flag_rejected(two_files):
    s, a, b = two_files
    with pytest.raises(SystemExit) as info:
        main(["kr", "--space", s, "--mu", a, "--nu", b, "--bogus"])
    assert info.value.code == 2


@pytest.mark.parametrize("method", ["greedy", "quota", "blocks"])
def test_gen_and_verify(tmp_path, method, capsys):
    t = grid_target(3)
    target = tmp_path / "t.json"
    io.write_json(target, io.measure_to_json(t))
    seq = tmp_path / "seq.json"
    assert main(["gen", "--method", method, "--target", str(target), "--n", "90", "--out", str(seq)]) == 0
    assert len(json.loads(seq.read_text())["ids"]) == 90
    report = tmp_path / "r.csv"
    summary = tmp_path / "s.json"
    code = main(["verify", "--target", str(target), "--seq", str(seq), "--checkpoints", "9,45,90",
                 "--tol", "0.05", "--report", str(report), "--summary", str(summary)])
    rows = report.read_text().splitlines()
    assert rows[0] == "n,kr_distance" and len(rows) == 4
    assert code == (0 if io.read_summary(summary)["verdict"] else 1)
    if method == "quota":
        assert code == 0 and rows[-1] == "90,0.000000000000"


def test_verify_failure_exit_code(two_files, tmp_path):
    _, _, b = two_files
    target = write(tmp_path / "t.json", {"space": TWO, "atoms": [[0, "1/2"], [1, "1/2"]]})
    seq = write(tmp_path / "q.json", {"space": TWO, "ids": [0, 0, 0, 0]})
    assert main(["verify", "--target", target, "--seq", seq, "--checkpoints", "2,4", "--tol", "0.1"]) == 1
    assert main(["verify", "--target", target, "--seq", seq, "--checkpoints", "2,8", "--tol", "0.1"]) == 2


def test_glue_and_tight(tmp_path, capsys):
    d = geometric_decomposition(size=12, horizon=40)
    path = tmp_path / "d.json"
    io.write_json(path, io.decomposition_to_json(d))
    out = tmp_path / "nu.json"
    assert main(["glue", "--decomp", str(path), "--n", "10", "--out", str(out), "--eps", "0.25,0.1"]) == 0
    nu = io.measure_from_json(json.loads(out.read_text()))
    assert nu.mass == 1
    cert = tmp_path / "cert.json"
    assert main(["tight", "--decomp", str(path), "--eps", "0.25,0.1", "--horizon", "40", "--cert", str(cert)]) == 0
    doc = io.read_summary(cert)
    assert doc["verdict"] and [e["bound"] for e in doc["entries"]] == [Fraction(1, 16), Fraction(1, 32)]
    assert main(["tight", "--decomp", str(path), "--eps", "0.1", "--horizon", "41", "--cert", str(cert)]) == 3


def test_tight_escaping_mass(tmp_path):
    d = escaping_family(20)
    path = tmp_path / "d.json"
    io.write_json(path, io.decomposition_to_json(d))
    cert = tmp_path / "cert.json"
    assert main(["tight", "--decomp", str(path), "--eps", "0.1", "--horizon", "20", "--cert", str(cert)]) == 1
    assert json.loads(cert.read_text())["verdict"] is False


def test_product(tmp_path):
    nu, k = product_4x4()
    kp = tmp_path / "k.json"
    mp = tmp_path / "nu.json"
    io.write_json(kp, io.kernel_to_json(k))
    io.write_json(mp, io.measure_to_json(nu, inline_space=False))
    out, rep, summ = tmp_path / "mu.json", tmp_path / "r.csv", tmp_path / "s.json"
    code = main(["product", "--marginal", str(mp), "--kernel", str(kp), "--levels", "6", "--eps", "0.25",
                 "--out", str(out), "--report", str(rep), "--summary", str(summ)])
    assert code == 0
    lines = rep.read_text().splitlines()
    assert lines[0] == "level,m_n,leakage,sup_kernel_gap,marginal_err,product_err"
    assert len(lines) == 1 + 5
    assert io.read_summary(summ)["constants"]["product_convergence"]["factor"] == 6
    assert [lv["level"] for lv in json.loads(out.read_text())["levels"]] == [2, 3, 4, 5, 6]


def test_selftest_is_deterministic(tmp_path, capsys):
    assert main(["selftest", "--seed", "7", "--count", "5"]) == 0
    first = capsys.readouterr().out
    assert main(["selftest", "--seed", "7", "--count", "5"]) == 0
    assert capsys.readouterr().out == first
    assert first.startswith("check,instances,worst,tolerance,passed\n")
