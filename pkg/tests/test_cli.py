import json
import subprocess
import sys

import numpy as np
import pytest

from grasstensor import cli
from grasstensor import io as gio


def run(*argv):
    return cli.main([str(a) for a in argv])


def load(path):
    return json.loads(path.read_text())


def test_approx_bundled_sample(tmp_path):
    assert run("approx", "--ranks", "1,1,1", "--out", tmp_path) == 0
    res = load(tmp_path / "result.json")
    assert res["status"] == "converged"
    assert res["ranks"] == [1, 1, 1]
    assert (tmp_path / "trace.csv").read_text().startswith("iter,rho,relgrad,alpha,millis\n")


def test_cluster_bundled_two_planes(tmp_path):
    assert run("cluster", "--out", tmp_path) == 0
    res = load(tmp_path / "result.json")
    assert res["err"] < 1e-4
    assert len(res["assignments"]) == 400


def test_select_bundled_2x2(tmp_path):
    assert run("select", "--out", tmp_path) == 0
    res = load(tmp_path / "result.json")
    assert res["rows"] == [1] and res["cols"] == [1]
    assert res["value"] == 4.0


def test_entangle_bundled_bell(tmp_path):
    assert run("entangle", "--out", tmp_path) == 0
    res = load(tmp_path / "result.json")
    assert abs(res["delta"] - (2 - np.sqrt(2))) < 1e-8


def test_bench_deterministic_and_ordered(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("bench", "--out", a) == 0
    assert run("bench", "--out", b) == 0
    for name in ("trace_newton.csv", "trace_rcg.csv", "trace_hooi.csv", "result.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    res = load(a / "result.json")["methods"]
    assert all(m["status"] == "converged" for m in res.values())
    assert res["newton"]["iterations"] <= res["rcg"]["iterations"]
    rhos = [float(r["rho"]) for r in gio.read_trace_csv(a / "trace_hooi.csv")]
    assert all(y >= x - 1e-12 * abs(x) for x, y in zip(rhos, rhos[1:]))


def test_timing_flag_fills_millis(tmp_path):
    assert run("approx", "--out", tmp_path, "--timing") == 0
    rows = gio.read_trace_csv(tmp_path / "trace.csv")
    assert all(r["millis"] != "" for r in rows)


def test_csv_format(tmp_path):
    assert run("select", "--out", tmp_path, "--format", "csv") == 0
    text = (tmp_path / "result.csv").read_text()
    assert text.startswith("key,value\n")
    assert "value,4.0" in text


def test_config_precedence(tmp_path):
    T = np.random.default_rng(0).standard_normal((5, 5, 5))
    gio.write_gten(tmp_path / "t.gten", T)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "rcg", "max_iter": 1, "warm_hooi": 0, "ranks": "2,2,2"}))
    out = tmp_path / "o1"
    assert run("approx", "--input", tmp_path / "t.gten", "--config", cfg, "--out", out) == 2
    res = load(out / "result.json")
    assert res["method"] == "rcg" and res["status"] == "maxIter" and res["ranks"] == [2, 2, 2]
    out = tmp_path / "o2"
    assert run("approx", "--input", tmp_path / "t.gten", "--config", cfg, "--max-iter", "500",
               "--out", out) == 0
    assert load(out / "result.json")["status"] == "converged"


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert run("approx", "--config", cfg, "--out", tmp_path / "o") == 1
    assert "unknown option" in capsys.readouterr().err


def test_malformed_input_reports_line_and_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "points.csv"
    bad.write_text("1,2,3\n4,5,6\n7,8\n")
    out = tmp_path / "out"
    assert run("cluster", "--input", bad, "--out", out) == 1
    assert "points.csv:3" in capsys.readouterr().err
    assert not out.exists()


def test_dimension_mismatch_is_error(tmp_path, capsys):
    assert run("approx", "--ranks", "1,1", "--out", tmp_path / "o") == 1
    assert "ranks" in capsys.readouterr().err
    assert run("approx", "--ranks", "3,1,1", "--out", tmp_path / "o") == 1


def test_truth_mismatch_is_error(tmp_path):
    truth = tmp_path / "n.csv"
    truth.write_text("1,0\n0,1\n")
    assert run("cluster", "--truth", truth, "--out", tmp_path / "o") == 1


def test_check_passes_and_corrupted_tolerance_fails(capsys):
    assert run("check") == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == len(cli.checks.CHECKS)
    assert run("check", "--tol-scale", "1e-30") == 1
    out = capsys.readouterr().out
    assert "FAIL partial-trace-dense-oracle" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "grasstensor", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("approx", "entangle", "cluster", "select", "bench", "check"):
        assert cmd in proc.stdout


def test_bad_flag_exits_with_usage_error():
    with pytest.raises(SystemExit) as info:
        run("approx", "--ranks", "a,b")
    assert info.value.code == 1
