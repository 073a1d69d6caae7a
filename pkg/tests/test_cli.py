import json

import pytest

from yamabe.cli import compare_reports, main, run, validate_config
from yamabe.errors import ConfigError, SchemaMismatchError


def _write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def _report(capsys, argv):
    code = main(argv + ["--json"])
    return code, json.loads(capsys.readouterr().out)


def test_invariant_round_sphere(capsys):
    code, doc = _report(capsys, ["invariant", "--grid", "512"])
    assert code == 0 and doc["status"] == "pass"
    assert doc["results"]["mu_estimate"] == pytest.approx(5.4779, abs=1e-4)
    assert doc["results"]["mu_lt_Kinv2"] is False
    assert "wall_time_s" not in doc


def test_bootstrap_report(capsys):
    code, doc = _report(capsys, ["bootstrap"])
    assert code == 0
    assert doc["results"]["sequence"] == [[4, 1], [12, 1]]
    assert doc["results"]["terminal"] == "SobolevH2p"


def test_bootstrap_config(tmp_path, capsys):
    cfg = _write(tmp_path, "b.json", {"params": {"n": 3, "p": "2"}})
    code, doc = _report(capsys, ["bootstrap", "--config", str(cfg)])
    assert code == 0 and doc["results"]["terminal"] == "LInfinityRoute"


def test_invalid_factor_lists_every_error(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.json", {"factor": {"alpha": 1.5, "mexp": 1.0}, "bogus": 1,
                                        "grid": {"nodes": 0}})
    assert main(["invariant", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "(0, 1)" in err and "bogus" in err and "grid.nodes" in err


def test_validate_config_raises():
    with pytest.raises(ConfigError) as exc:
        validate_config({"experiment": "solve", "params": {"nope": 1}}, "invariant")
    assert len(exc.value.violations) >= 2
    with pytest.raises(ConfigError):
        validate_config({}, "not-an-experiment")


def test_unreadable_config(tmp_path):
    path = tmp_path / "x.json"
    path.write_text("{not json")
    assert main(["solve", "--config", str(path)]) == 2


def test_failing_assertion_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "a.json", {"grid": {"nodes": 128},
                                      "assertions": [{"path": "results.mu_estimate", "lt": 5.0},
                                                     {"path": "results.mu_estimate", "approx": 5.4779,
                                                      "rtol": 1e-3}]})
    code, doc = _report(capsys, ["invariant", "--config", str(cfg)])
    assert code == 1 and doc["status"] == "fail"
    assert [a["passed"] for a in doc["assertions"]] == [False, True]


def test_missing_assertion_path():
    cfg = validate_config({"assertions": [{"path": "results.nothing", "equals": 1}]}, "bootstrap")
    rep = run(cfg)
    assert not rep.passed and rep.assertions[0]["reason"] == "path not found"


def test_numeric_failure_is_reported(tmp_path, capsys):
    cfg = _write(tmp_path, "g.json", {"manifold": {"kind": "flat_torus", "n": 3},
                                      "potential": {"constant": -1.0}, "grid": {"nodes": 8}})
    code, doc = _report(capsys, ["green", "--config", str(cfg)])
    assert code == 1 and doc["failure"]["type"] == "NotCoerciveError"


def test_determinism_and_compare(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["invariant", "--grid", "128", "--out", str(out)]) == 0
    assert (a / "invariant.json").read_bytes() == (b / "invariant.json").read_bytes()
    assert compare_reports(a / "invariant.json", b / "invariant.json") == []
    assert main(["compare", str(a / "invariant.json"), str(b / "invariant.json")]) == 0


def test_compare_localizes_grid_change(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["invariant", "--grid", "128", "--out", str(a)])
    main(["invariant", "--grid", "256", "--out", str(b)])
    diffs = compare_reports(a / "invariant.json", b / "invariant.json",
                            tolerances={"results.mu_estimate": 1e-4, "results.h_tilde": 1e-4,
                                        "results.functional_at_one": 1e-10})
    paths = {d["path"] for d in diffs}
    assert "config.grid.nodes" in paths and "grid.node_count" in paths
    assert "results.mu_estimate" not in paths
    assert all(p.startswith(("config.grid", "grid.", "results.")) for p in paths)
    assert main(["compare", str(a / "invariant.json"), str(b / "invariant.json")]) == 1


def test_compare_schema_mismatch(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["invariant", "--grid", "64", "--out", str(a)])
    main(["bootstrap", "--out", str(b)])
    with pytest.raises(SchemaMismatchError):
        compare_reports(a / "invariant.json", b / "bootstrap.json")
    assert main(["compare", str(a / "invariant.json"), str(b / "bootstrap.json")]) == 2


def test_out_writes_profiles(tmp_path):
    assert main(["solve", "--grid", "128", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "solve.json").exists()
    assert list(tmp_path.glob("solve_*.csv"))


def test_timing_flag(capsys, tmp_path):
    cfg = _write(tmp_path, "t.json", {"timing": True})
    _, doc = _report(capsys, ["bootstrap", "--config", str(cfg)])
    assert doc["wall_time_s"] >= 0


def test_seed_flag_recorded(capsys):
    _, doc = _report(capsys, ["bootstrap", "--seed", "17"])
    assert doc["config"]["seed"] == 17
