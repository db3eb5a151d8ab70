import math
import subprocess
import sys

import numpy as np
import pytest

from maxblow.cli import RunConfig, UsageError, build_exponent, main, parse_window, read_point_csv
from maxblow.counterexample import SweepResult
from maxblow.errors import NonpositiveTolerance
from maxblow.space import (
    RadiusWindow,
    SpaceDescriptor,
    doubling_certificate,
    gen_dyadic_interval,
    save_space,
)

import oracles


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def kv(text):
    return dict(line.split("=", 1) for line in text.strip().split("\n"))


def write_function(path, values):
    path.write_text("point,value\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(values)))
    return str(path)


def two_points(tmp_path, weights=(1.0, 1.0)):
    sp = SpaceDescriptor(weight=np.array(weights), coords=np.array([0.0, 1.0]), metric="l2")
    path = tmp_path / "two.txt"
    save_space(sp, path)
    return str(path)


# -- config and parsing ----------------------------------------------------------

def test_run_config_invariants():
    with pytest.raises(UsageError):
        RunConfig("space")
    with pytest.raises(UsageError):
        RunConfig("space", gen="dyadic:3", file="x")
    for tol in (0.0, -1.0, 2e-3):
        with pytest.raises(NonpositiveTolerance):
            RunConfig("space", gen="dyadic:3", tol=tol)
    assert RunConfig("space", gen="dyadic:3", tol=1e-3).tol == 1e-3


def test_parse_window():
    w = parse_window("0.125:1:4")
    assert w.grid == (0.125, 0.25, 0.5, 1.0)
    for bad in ("1:2", "a:1:3", "0.1:1:x"):
        with pytest.raises(UsageError):
            parse_window(bad)


def test_builtin_exponents():
    sp = gen_dyadic_interval(3)
    assert build_exponent("const:1.5", sp).values.tolist() == [1.5] * 8
    p = build_exponent("twopiece:1,2,0.5", sp).values
    assert p.tolist() == [1.0] * 4 + [2.0] * 4
    for bad in ("const:x", "twopiece:1,2"):
        with pytest.raises(UsageError):
            build_exponent(bad, sp)


def test_read_point_csv(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("point,value\n1,2.5\n0,1\n")
    assert read_point_csv(path, 2).tolist() == [1.0, 2.5]
    bad = {
        "value,point\n0,1\n1,1\n": "header",
        "point,value\n0,1\n": "missing",
        "point,value\n0,1\n0,2\n1,1\n": "repeated",
        "point,value\n0,1\n2,1\n": "range",
        "point,value\n0,x\n1,1\n": "expected",
        "point,value\n0,inf\n1,1\n": "allowed",
    }
    for text, word in bad.items():
        path.write_text(text)
        with pytest.raises(UsageError, match=word):
            read_point_csv(path, 2)
    path.write_text("point,value\n0,inf\n1,1\n")
    assert read_point_csv(path, 2, allow_inf=True)[0] == math.inf


# -- space -----------------------------------------------------------------------

def test_space_check_dyadic10(capsys):
    code, out, _ = run(capsys, "space", "--gen", "dyadic:10", "--check", "--window", "0.002:0.5:8")
    assert code == 0
    rec = kv(out)
    sp = gen_dyadic_interval(10)
    win = RadiusWindow.geometric(0.002, 0.5, 8)
    cert = doubling_certificate(sp, win)
    assert float(rec["a_const"]) == pytest.approx(cert.a_const, rel=1e-11)
    assert float(rec["delta_const"]) == pytest.approx(cert.delta_const, rel=1e-11)
    a, d = oracles.brute_doubling(sp.coords[:, 0], sp.weight, win.grid)
    assert float(rec["a_const"]) == pytest.approx(a, rel=1e-11)
    assert float(rec["delta_const"]) == pytest.approx(d, rel=1e-11)
    # a_const is near the continuum value 2; delta stays below 1 but the
    # boundary cells pull it above the continuum value 1/2 (see the README)
    assert abs(float(rec["a_const"]) - 2) <= 0.25 * 2
    assert 0 < float(rec["delta_const"]) < 1
    assert rec["reverse_doubling"] == "true"
    assert rec["n"] == "1024" and rec["c0"] == "1" and rec["c1"] == "2"


def test_space_errors(capsys, tmp_path):
    code, _, err = run(capsys, "space", "--gen", "dyadic:0")
    assert code == 1 and "DepthOutOfRange" in err
    bad = tmp_path / "bad.txt"
    bad.write_text("space v1 n=2\nw 0 1\nw 1 1\nd 0 1 1\nd 0 0 1\n")
    code, _, err = run(capsys, "space", "--file", str(bad))
    assert code == 2 and "NonzeroDiagonal" in err
    code, _, err = run(capsys, "space", "--file", str(tmp_path / "missing.txt"))
    assert code == 1
    code, _, err = run(capsys, "space", "--gen", "cantor:3")
    assert code == 1 and "UsageError" in err


def test_space_reverse_doubling_failure(capsys, tmp_path):
    path = tmp_path / "one.txt"
    save_space(SpaceDescriptor(weight=np.ones(1), coords=np.zeros(1), metric="l2"), path)
    code, out, _ = run(capsys, "space", "--file", str(path), "--check", "--window", "0.25:0.5:2")
    assert code == 2
    assert kv(out)["reverse_doubling"] == "false"


def test_space_out_file(capsys, tmp_path):
    out = tmp_path / "space.txt"
    code, stdout, _ = run(capsys, "space", "--gen", "torus:2:4", "--out", str(out))
    assert code == 0 and stdout == ""
    assert kv(out.read_text()) == {"n": "16", "total_measure": "1"}


# -- norm ------------------------------------------------------------------------

def test_norm_examples(capsys, tmp_path):
    space = two_points(tmp_path)
    f = write_function(tmp_path / "f.csv", [3.0, 4.0])
    code, out, _ = run(capsys, "norm", "--file", space, "--exponent", "const:2", "--function", f)
    assert code == 0
    rec = dict(tok.split("=") for tok in out.split())
    assert float(rec["norm"]) == pytest.approx(5, rel=1e-9)
    p = tmp_path / "p.csv"
    p.write_text("point,value\n0,1\n1,2\n")
    f = write_function(tmp_path / "g.csv", [1.0, 1.0])
    code, out, _ = run(capsys, "norm", "--file", space, "--exponent", str(p), "--function", f)
    assert code == 0
    rec = dict(tok.split("=") for tok in out.split())
    assert float(rec["norm"]) == pytest.approx(oracles.GOLDEN, rel=1e-9)
    assert float(rec["lo"]) < oracles.GOLDEN <= float(rec["hi"]) * (1 + 1e-11)


def test_norm_errors(capsys, tmp_path):
    space = two_points(tmp_path)
    code, _, err = run(capsys, "norm", "--file", space, "--exponent", "const:2",
                       "--function", str(tmp_path / "nope.csv"))
    assert code == 1 and "error:" in err
    f = write_function(tmp_path / "f.csv", [3.0, 4.0])
    code, _, err = run(capsys, "norm", "--file", space, "--exponent", "const:0.5", "--function", f)
    assert code == 1


# -- maximal ---------------------------------------------------------------------

def test_maximal_constant(capsys, tmp_path):
    f = write_function(tmp_path / "f.csv", [1.0] * 16)
    code, out, _ = run(capsys, "maximal", "--gen", "torus:2:4", "--function", f)
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "point,f,Mf,argmax_center,argmax_threshold"
    assert len(lines) == 17
    assert all(line.split(",")[2] == "1" for line in lines[1:])


def test_maximal_fast_refuses_torus(capsys, tmp_path):
    f = write_function(tmp_path / "f.csv", [1.0] * 16)
    code, _, err = run(capsys, "maximal", "--gen", "torus:2:4", "--function", f, "--fast")
    assert code == 1 and "NotIntervalStructured" in err


def test_maximal_fast_is_byte_identical(capsys, tmp_path):
    rng = np.random.default_rng(12)
    for gen, n in (("dyadic:7", 128), ("power:6:1.5", 64)):
        f = write_function(tmp_path / "f.csv", (rng.random(n) * (rng.random(n) < 0.6)).tolist())
        slow, fast = tmp_path / "slow.csv", tmp_path / "fast.csv"
        assert run(capsys, "maximal", "--gen", gen, "--function", f, "--out", str(slow))[0] == 0
        assert run(capsys, "maximal", "--gen", gen, "--function", f, "--fast", "--out", str(fast))[0] == 0
        assert slow.read_bytes() == fast.read_bytes()


# -- sweep -----------------------------------------------------------------------

def parse_csv(text):
    lines = text.strip().split("\n")
    assert lines[0] == SweepResult.CSV_HEADER
    cols = lines[0].split(",")
    return [dict(zip(cols, map(float, line.split(",")))) for line in lines[1:]]


def test_sweep_small_round_trip(capsys, tmp_path):
    reports = tmp_path / "rep"
    argv = ["sweep", "--gen", "dyadic:9", "--exponent", "const:1", "--k", "1,4",
            "--reports", str(reports)]
    code, out, err = run(capsys, *argv)
    assert err.strip().endswith("growth_verified=true") or err.strip().endswith("growth_verified=false")
    rows = parse_csv(out)
    assert [r["k"] for r in rows] == [1, 4]
    for r in rows:
        assert r["ratio"] >= r["certified_ratio"] - 1e-9
    rec = kv((reports / "report_k4.txt").read_text())
    assert rec["k"] == "4" and rec["mode"] == "density"
    assert float(rec["ratio"]) == pytest.approx(rows[1]["ratio"], rel=1e-11)
    # determinism: the same command gives the same bytes
    code2, out2, _ = run(capsys, *argv)
    assert (code2, out2) == (code, out)


def test_sweep_empty_sublevel(capsys):
    code, out, err = run(capsys, "sweep", "--gen", "dyadic:8", "--exponent", "const:2", "--k", "1")
    assert code == 1 and "EmptySublevelSet" in err and out == ""


def test_sweep_bad_k(capsys):
    code, _, err = run(capsys, "sweep", "--gen", "dyadic:6", "--exponent", "const:1", "--k", "2,1")
    assert code == 1
    code, _, err = run(capsys, "sweep", "--gen", "dyadic:6", "--exponent", "const:1", "--k", "a")
    assert code == 1 and "UsageError" in err


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "maxblow.cli", "space", "--gen", "dyadic:3"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout == "n=8\ntotal_measure=1\n"


@pytest.mark.slow
def test_sweep_dyadic14_const1(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, stdout, err = run(capsys, "sweep", "--gen", "dyadic:14", "--exponent", "const:1",
                            "--k", "1,2,4,8", "--out", str(out))
    assert code == 0 and stdout == ""
    assert err.strip() == "growth_verified=true"
    ratios = [r["ratio"] for r in parse_csv(out.read_text())]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


@pytest.mark.slow
def test_sweep_dyadic14_usc_twopiece(capsys, tmp_path):
    reports = tmp_path / "rep"
    code, stdout, err = run(capsys, "sweep", "--gen", "dyadic:14", "--exponent", "twopiece:1,2,0.5",
                            "--mode", "usc", "--reports", str(reports))
    assert code == 0 and err.strip() == "growth_verified=true"
    assert len(parse_csv(stdout)) == 4
    x = gen_dyadic_interval(14).coords[:, 0]
    for k in (1, 2, 4, 8):
        rec = kv((reports / f"report_k{k}.txt").read_text())
        assert rec["mode"] == "usc"
        center, radius, _ = rec["density_point"].split()
        members = oracles.ball_mask(x, int(center), float(radius))
        assert np.all(x[members] < 0.5)
