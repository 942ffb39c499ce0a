import json
import subprocess
import sys

import pytest

from oddlab.cli import main, verify_all
from oddlab.experiments import CATALOG, load_config, render_json, run_config, validate_report
from oddlab.errors import ConfigurationError


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list_covers_catalog(capsys):
    code, out, _ = _run(["list", "--json"], capsys)
    assert code == 0
    entries = json.loads(out)
    names = [e["name"] for e in entries]
    assert len(entries) >= 12 and "example6" in names
    assert all(e["anchors"] and e["description"] for e in entries)
    code, out, _ = _run(["list"], capsys)
    assert code == 0 and len(out.splitlines()) == len(entries)


def test_run_catalog_entry_passes(tmp_path, capsys):
    cfg = _write(tmp_path, {"catalog": "example6"})
    code, out, _ = _run(["run", "--config", cfg], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["pass"] and validate_report(rep) == []
    ir = rep["checks"][0]["index_reports"][0]
    assert ir["lhs"] == 1 and ir["rhs_total"] == {"num": 1, "log2_den": 0}


def test_run_failing_expectation_exits_one(tmp_path, capsys):
    cfg = _write(tmp_path, {"name": "wrong", "manifold": "t2", "truncation": 2, "operator": "dirac",
                            "checks": ["dirac-eta"], "expected": {"eta": 2}})
    out = tmp_path / "r.json"
    code, _, _ = _run(["run", "--config", cfg, "--out", str(out)], capsys)
    assert code == 1
    rep = json.loads(out.read_text())
    assert not rep["pass"] and validate_report(rep) == []


@pytest.mark.parametrize("obj", [
    {"name": "x", "manifold": "t2", "truncation": 0, "operator": "dirac", "checks": ["dirac-eta"]},
    {"name": "x", "manifold": "t3", "truncation": 1, "checks": ["dirac-eta"]},
    {"name": "x", "manifold": "t2", "truncation": 1, "checks": ["no-such-check"]},
    {"name": "x", "manifold": "s1", "truncation": 1, "checks": ["example6"]},
    {"name": "x", "manifold": "t2", "truncation": 1, "checks": ["dirac-eta"], "tolerances": {"rank_tol": -1}},
    {"name": "x", "manifold": "t2", "truncation": 1, "checks": ["dirac-eta"], "bogus": 1},
])
def test_configuration_errors_exit_two(tmp_path, capsys, obj):
    code, _, err = _run(["run", "--config", _write(tmp_path, obj)], capsys)
    assert code == 2 and "configuration error" in err


def test_unreadable_config_and_bad_arguments(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _run(["run", "--config", str(bad)], capsys)[0] == 2
    assert _run(["run", "--config", str(tmp_path / "missing.json")], capsys)[0] == 2
    assert _run(["frobnicate"], capsys)[0] == 2


def test_reports_are_byte_identical(tmp_path, capsys):
    cfg = _write(tmp_path, {"catalog": "thmn-properties"})
    a = _run(["run", "--config", cfg], capsys)[1]
    b = _run(["run", "--config", cfg], capsys)[1]
    assert a == b
    assert "wall_clock" not in a
    timed = _run(["run", "--config", cfg, "--timing"], capsys)[1]
    assert "wall_clock_s" in timed


def test_overrides_are_echoed(tmp_path, capsys):
    cfg = _write(tmp_path, {"catalog": "dirac-eta"})
    code, out, _ = _run(["run", "--config", cfg, "--truncation", "2", "--seed", "5"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["overrides"] == {"seed": 5, "truncation": 2}
    assert rep["config"]["truncation"] == 2


def test_csv_output(tmp_path, capsys):
    cfg = _write(tmp_path, {"catalog": "hardy-toeplitz"})
    code, out, _ = _run(["run", "--config", cfg, "--format", "csv"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "run,check,item,lhs,rhs_total,pass"
    assert any(line.startswith("hardy-toeplitz,hardy-toeplitz,shift1-K8,-1,-1/2^0,True") for line in lines)


def test_load_config_variants(tmp_path):
    assert load_config({"name": "d", "manifold": "t2", "truncation": 1, "checks": ["dirac-eta"]}).seed == 0
    with pytest.raises(ConfigurationError):
        load_config(_write(tmp_path, {"catalog": "nope"}))


def test_verify_all_is_deterministic_across_threads():
    serial = verify_all(0)
    threaded = verify_all(4)
    assert render_json(serial) == render_json(threaded)
    assert validate_report(serial) == []
    assert serial["pass"]
    assert [r["config"]["name"] for r in serial["runs"]] == list(CATALOG)


def test_verify_all_cli(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ODDLAB_THREADS", "2")
    out = tmp_path / "all.json"
    code, _, err = _run(["verify-all", "--out", str(out)], capsys)
    assert code == 0
    assert err.count("PASS") == len(CATALOG) and "FAIL" not in err
    monkeypatch.setenv("ODDLAB_THREADS", "many")
    assert _run(["verify-all", "--out", str(out)], capsys)[0] == 2


def test_validate_report_catches_inconsistent_totals():
    rep = run_config(load_config({"name": "e", "manifold": "t2", "truncation": 2,
                                  "operator": "multiplier:k1+I*k2", "checks": ["example6"]}))
    ir = rep["checks"][0]["index_reports"][0]
    ir["rhs_total"] = {"num": 7, "log2_den": 0}
    assert any("rhs_total" in p for p in validate_report(rep))


def test_console_script_module_entry():
    res = subprocess.run([sys.executable, "-m", "oddlab.cli", "list", "--json"], capture_output=True, text=True)
    assert res.returncode == 0 and "example6" in res.stdout
