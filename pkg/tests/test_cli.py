import json
from pathlib import Path

import numpy as np
import pytest

from cyclic_inference import cli, experiments


def run_cli(*args):
    return cli.main(list(args))


def read_report(outdir):
    return json.loads((Path(outdir) / "report.json").read_text())


def dir_bytes(outdir):
    return {p.name: p.read_bytes() for p in sorted(Path(outdir).iterdir())}


def test_registry_covers_every_suite():
    assert set(experiments.ALL_NAMES) == {
        "vn-equiv", "kernel-converge", "em-kernel", "maxcal",
        "markov-sym", "bp-chain", "cycle-born", "cycle-update",
        "bernstein", "clamp", "first-person", "energetics",
    }
    assert experiments.RNG_ALGORITHM == "philox4x64"


def test_single_suite_writes_report_and_tables(tmp_path, capsys):
    out = tmp_path / "born"
    code = run_cli("cycle-born", "--n", "5", "--q", "3", "--instances", "10",
                   "--seed", "7", "--out", str(out))
    assert code == 0
    report = read_report(out)
    assert report["passed"] is True
    assert report["rng"] == "philox4x64"
    assert report["config"]["seed"] == 7
    (entry,) = report["experiments"]
    assert entry["name"] == "cycle-born"
    assert (out / entry["tables"]["trials"]).exists()
    assert (out / entry["tables"]["matrix"]).exists()
    lines = capsys.readouterr().out.splitlines()
    assert any(line.startswith("PASS cycle-born:born_diagonal") for line in lines)


def test_matrix_dump_columns(tmp_path):
    out = tmp_path / "born"
    assert run_cli("cycle-born", "--instances", "2", "--out", str(out)) == 0
    header = (out / "cycle-born__matrix.csv").read_text().splitlines()[0]
    assert header == "site,row,col,value"


def test_reports_are_byte_identical_for_equal_configs(tmp_path):
    args = ("cycle-update", "--instances", "5", "--seed", "13")
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(*args, "--out", str(a)) == 0
    assert run_cli(*args, "--out", str(b)) == 0
    assert dir_bytes(a) == dir_bytes(b)


def test_seed_changes_the_data(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("cycle-born", "--instances", "5", "--seed", "1",
                   "--out", str(a)) == 0
    assert run_cli("cycle-born", "--instances", "5", "--seed", "2",
                   "--out", str(b)) == 0
    assert (a / "cycle-born__trials.csv").read_bytes() \
        != (b / "cycle-born__trials.csv").read_bytes()


def test_worker_processes_do_not_change_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("bp-chain", "--instances", "6", "--seed", "3",
                   "--jobs", "1", "--out", str(a)) == 0
    assert run_cli("bp-chain", "--instances", "6", "--seed", "3",
                   "--jobs", "2", "--out", str(b)) == 0
    assert dir_bytes(a) == dir_bytes(b)


def test_tolerance_override_can_force_failure(tmp_path):
    out = tmp_path / "f"
    code = run_cli("vn-equiv", "--instances", "2", "--tol.rk4=1e-30",
                   "--out", str(out))
    assert code == 1
    report = read_report(out)            # report still written in full
    assert report["passed"] is False
    checks = {c["name"]: c for c in report["experiments"][0]["checks"]}
    assert checks["rk4_deviation"]["passed"] is False
    assert checks["rk4_deviation"]["bound_high"] == 1e-30
    assert report["experiments"][0]["summary"]["tolerances"]["rk4"] == 1e-30


def test_unknown_tolerance_is_a_config_error(tmp_path, capsys):
    assert run_cli("vn-equiv", "--tol.nope=1", "--out", str(tmp_path)) == 2
    assert "unknown tolerance" in capsys.readouterr().err


def test_malformed_tolerance_flag(tmp_path, capsys):
    assert run_cli("vn-equiv", "--tol.rk4", "--out", str(tmp_path)) == 2
    assert run_cli("vn-equiv", "--tol.rk4=abc", "--out", str(tmp_path)) == 2
    assert not (tmp_path / "report.json").exists()


def test_unknown_suite_exits_two():
    with pytest.raises(SystemExit) as exc:
        run_cli("teleport")
    assert exc.value.code == 2


def test_bad_seed_and_jobs(tmp_path):
    assert run_cli("energetics", "--seed", "-1", "--out", str(tmp_path)) == 2
    assert run_cli("energetics", "--jobs", "0", "--out", str(tmp_path)) == 2


def test_env_var_overrides_out_flag(tmp_path, monkeypatch):
    env_dir = tmp_path / "env"
    monkeypatch.setenv("CYCLIC_INFERENCE_OUT", str(env_dir))
    assert run_cli("energetics", "--out", str(tmp_path / "flag")) == 0
    assert (env_dir / "report.json").exists()
    assert not (tmp_path / "flag").exists()


def test_input_payload_runs_explicit_generator(tmp_path):
    payload = tmp_path / "j.json"
    payload.write_text(json.dumps(
        {"j": [[0.0, 1.0], [-1.0, 0.0]], "p0": [0.6, 0.4]}))
    out = tmp_path / "out"
    assert run_cli("vn-equiv", "--input", str(payload), "--out", str(out)) == 0
    report = read_report(out)
    assert report["config"]["payload"]["p0"] == [0.6, 0.4]
    rows = (out / "vn-equiv__trials.csv").read_text().splitlines()
    assert len(rows) == 2                # header plus the single payload trial


def test_malformed_input_is_a_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    assert run_cli("vn-equiv", "--input", str(bad)) == 2
    assert "malformed JSON" in capsys.readouterr().err
    listy = tmp_path / "list.json"
    listy.write_text("[1, 2]")
    assert run_cli("vn-equiv", "--input", str(listy)) == 2
    missing_key = tmp_path / "nokey.json"
    missing_key.write_text('{"matrix": [[1]]}')
    assert run_cli("vn-equiv", "--input", str(missing_key)) == 2


def test_plots_flag_renders_figures(tmp_path):
    out = tmp_path / "plots"
    assert run_cli("em-kernel", "--plots", "--out", str(out)) == 0
    report = read_report(out)
    assert report["figures"]
    for name in report["figures"]:
        assert (out / name).stat().st_size > 0
    # the data-only default writes no figures key and no PNGs
    plain = tmp_path / "plain"
    assert run_cli("em-kernel", "--out", str(plain)) == 0
    assert "figures" not in read_report(plain)
    assert not list(plain.glob("*.png"))


def test_energetics_report_carries_the_named_fields(tmp_path):
    out = tmp_path / "e"
    assert run_cli("energetics", "--out", str(out)) == 0
    summary = read_report(out)["experiments"][0]["summary"]
    assert summary["E_photon"] == pytest.approx(3.8961292482e-19, rel=1e-10)
    assert summary["E_HSP_mean"] == pytest.approx(3.9e-17, rel=1e-12)
    assert summary["gap"] == pytest.approx(1.56e-18, rel=1e-12)
    assert summary["ratio"] == pytest.approx(4.004, abs=5e-3)
    assert summary["detection_probability"] == 0.516
    assert summary["detection_uncertainty"] == 0.010


def test_all_aggregates_everything_and_fails_late(tmp_path):
    out = tmp_path / "all"
    code = run_cli("all", "--seed", "5", "--tol.born=1e-30",
                   "--out", str(out))
    assert code == 1
    report = read_report(out)
    names = [e["name"] for e in report["experiments"]]
    assert names == list(experiments.ALL_NAMES)
    by_name = {e["name"]: e for e in report["experiments"]}
    assert by_name["cycle-born"]["passed"] is False
    # the failing suite did not stop the ones after it
    assert by_name["energetics"]["passed"] is True
    assert (out / "energetics__energies.csv").exists()


def test_aborted_suite_fails_without_stopping_the_rest(tmp_path, monkeypatch):
    from cyclic_inference.errors import CyclicInferenceError

    def explode(seed, tol, params, jobs=1):
        raise CyclicInferenceError("negative factor entry")

    broken = experiments.ExperimentDef(runner=explode, tolerances={})
    monkeypatch.setitem(experiments.EXPERIMENTS, "bernstein", broken)
    out = tmp_path / "abort"
    code = run_cli("all", "--seed", "11", "--out", str(out))
    assert code == 1
    report = read_report(out)
    by_name = {e["name"]: e for e in report["experiments"]}
    assert by_name["bernstein"]["passed"] is False
    assert by_name["bernstein"]["checks"][0]["name"] == "completed"
    assert "negative factor entry" in by_name["bernstein"]["checks"][0]["note"]
    assert by_name["clamp"]["passed"] is True       # later suites still ran


def test_stream_is_keyed_by_seed_and_index():
    a = experiments._stream(7, 1).normal(size=3)
    b = experiments._stream(7, 1).normal(size=3)
    c = experiments._stream(7, 2).normal(size=3)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_runner_payload_validation():
    with pytest.raises(ValueError):
        experiments.run_experiment("vn-equiv", 0, params={"payload": {}})
    with pytest.raises(ValueError):
        experiments.run_experiment("first-person", 0, params={"payload": {}})
    with pytest.raises(ValueError):
        experiments.run_experiment("maxcal", 0, params={"payload": {}})
    with pytest.raises(ValueError):
        experiments.run_experiment("cycle-born", 0, params={"instances": 0})
    with pytest.raises(ValueError):
        experiments.run_experiment("markov-sym", 0,
                                   params={"payload": {"gamma": -1.0}})


def test_experiment_results_report_effective_tolerances():
    res = experiments.run_experiment("energetics", 0,
                                     tol_overrides={"ratio_hi": 5.0})
    assert res.summary["tolerances"]["ratio_hi"] == 5.0
    assert res.passed
