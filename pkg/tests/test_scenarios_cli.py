import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from proxyifm.errors import (
    EngineSourceMismatchError,
    ParseError,
    UnknownSchemaVersionError,
    UnresolvedElementIdError,
)
from proxyifm.runner import emit, run, sweep_table
from proxyifm.scenarios import (
    GOLDEN_SCENARIOS,
    list_builtin_scenarios,
    load_scenario,
)

from conftest import ALPHA_SQ


def test_all_golden_scenarios_ship_and_load():
    assert sorted(GOLDEN_SCENARIOS) == list_builtin_scenarios()
    for name in GOLDEN_SCENARIOS:
        scenario = load_scenario(name)
        assert scenario.scenario_id == name
        assert scenario.schema_version == "proxy-ifm/1"
        assert scenario.description


def test_fig2_open_golden_parameters():
    scenario = load_scenario("fig2_open")
    assert scenario.source.n_pulses == 10
    assert scenario.source.alpha_squared == pytest.approx(ALPHA_SQ)
    assert scenario.engine() == "coherent"


def test_empty_file_is_a_parse_error(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    with pytest.raises(ParseError) as err:
        load_scenario(p)
    assert err.value.line is not None


def test_unknown_schema_rejected(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"schema": "proxy-ifm/99"}))
    with pytest.raises(UnknownSchemaVersionError):
        load_scenario(p)


def _golden_doc(name):
    from proxyifm.scenarios import builtin_scenario_path
    return json.loads(builtin_scenario_path(name).read_text())


def test_missing_obstacle_id_rejected(tmp_path):
    doc = _golden_doc("fig2_open")
    doc["obstacles"] = {"no_such_obstacle": True}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(UnresolvedElementIdError):
        load_scenario(p)


def test_missing_trigger_id_rejected(tmp_path):
    doc = _golden_doc("fig2_blocked")
    doc["analysis"] = {"trigger": "D9"}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(UnresolvedElementIdError):
        load_scenario(p)


def test_missing_sweep_target_rejected(tmp_path):
    doc = _golden_doc("fringe_sweep")
    doc["sweep"] = {"delay_phase": {"element": "ghost", "field": "phase"}}
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(UnresolvedElementIdError):
        load_scenario(p)


def test_run_fig2_blocked_reports_no_interaction():
    report = run(load_scenario("fig2_blocked"), mode="exact")
    cond = dict(report.tables["conditionals"].rows)
    assert cond["trigger_terminal"] == "D2"
    assert cond["p_no_interaction"] == pytest.approx(math.exp(-0.05), abs=1e-12)


def test_run_tensor_sum_blocked_outcome_table():
    report = run(load_scenario("fig2_tensor_sum_blocked"), mode="exact")
    p = dict(report.tables["p_outcome"].rows)
    assert p["obstacle_l"] == pytest.approx(0.5, abs=1e-12)
    assert p["D1"] == pytest.approx(0.25, abs=1e-12)
    assert p["D2"] == pytest.approx(0.25, abs=1e-12)


def test_run_hom_pair_has_no_coincidence_row():
    report = run(load_scenario("hom_pair"), mode="exact", cutoff=2)
    rows = dict(report.tables["joint"].rows)
    assert "D1=1;D2=1" not in rows
    assert rows["D1=2;D2=0"] == pytest.approx(0.5, abs=1e-12)
    assert rows["D1=0;D2=2"] == pytest.approx(0.5, abs=1e-12)


def test_engine_source_mismatch():
    with pytest.raises(EngineSourceMismatchError):
        run(load_scenario("hom_pair"), engine="coherent")
    with pytest.raises(EngineSourceMismatchError):
        run(load_scenario("fig2_tensor_sum_open"), engine="coherent")


def test_fock_engine_accepts_coherent_source(tmp_path):
    # the oracle is desk-scale, so shrink the golden train before running it
    doc = _golden_doc("fig2_blocked")
    doc["pulses"]["n"] = 3
    doc["pulses"]["phases"] = [0.0] * 3
    p = tmp_path / "small.json"
    p.write_text(json.dumps(doc))
    report = run(load_scenario(p), engine="fock", mode="exact", cutoff=4)
    assert report.engine == "fock"
    assert "joint" in report.tables
    marginals = {(t, b): v for t, b, v in report.tables["marginals"].rows}
    assert marginals[("obstacle_l", 1)] == pytest.approx(0.05, abs=1e-4)


def test_emit_csv_byte_stable(tmp_path):
    scenario = load_scenario("fig2_blocked")
    r1 = run(scenario, mode="exact")
    r2 = run(scenario, mode="exact")
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit(r1, "csv", p1)
    emit(r2, "csv", p2)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header == "terminal,bin,re,im,mean_n,p_click"


def test_emit_jsonl_event_records(tmp_path):
    scenario = load_scenario("fig2_blocked")
    report = run(scenario, mode="mc", shots=2000, seed=99)
    path = tmp_path / "events.jsonl"
    emit(report, "jsonl", path)
    lines = path.read_text().splitlines()
    assert lines
    first = json.loads(lines[0])
    assert set(first) == {"shot", "terminal", "bin"}
    # deterministic replay
    report2 = run(scenario, mode="mc", shots=2000, seed=99)
    path2 = tmp_path / "events2.jsonl"
    emit(report2, "jsonl", path2)
    assert path.read_bytes() == path2.read_bytes()


def test_emit_empty_event_log(tmp_path):
    scenario = load_scenario("fig2_open")
    report = run(scenario, mode="mc", shots=1, seed=1)
    # keep only an empty table to exercise the empty-file contract
    from proxyifm.runner import RunReport, Table
    empty = RunReport(scenario_id="x", engine="coherent", mode="mc",
                      tables={"events": Table(("shot", "terminal", "bin"), [])})
    csv_path = tmp_path / "empty.csv"
    emit(empty, "csv", csv_path)
    assert csv_path.read_text() == "shot,terminal,bin\n"
    jsonl_path = tmp_path / "empty.jsonl"
    emit(empty, "jsonl", jsonl_path)
    assert jsonl_path.read_text() == ""
    assert report is not None


def test_sweep_table_rows():
    scenario = load_scenario("fringe_sweep")
    values = np.linspace(0, 2 * math.pi, 32)
    table = sweep_table(scenario, "delay_phase", values)
    assert table.headers == ("phase", "p_d1", "p_d2")
    assert len(table.rows) == 32
    for phi, p1, p2 in table.rows:
        assert abs(p1 - 0.5 * (1 + math.cos(phi))) < 1e-9
        assert abs(p2 - 0.5 * (1 - math.cos(phi))) < 1e-9


def _cli(*args, env=None):
    cmd = [sys.executable, "-m", "proxyifm", *args]
    merged = dict(os.environ)
    if env:
        merged.update(env)
    return subprocess.run(cmd, capture_output=True, text=True, env=merged)


def test_cli_simulate_exit_codes(tmp_path):
    out = tmp_path / "r.csv"
    ok = _cli("simulate", "--scenario", "fig2_blocked", "--mode", "exact",
              "--out", str(out))
    assert ok.returncode == 0, ok.stderr
    assert out.exists()

    bad = _cli("simulate", "--scenario", "no_such_scenario", "--out",
               str(tmp_path / "x.csv"))
    assert bad.returncode == 2

    mismatch = _cli("simulate", "--scenario", "hom_pair", "--engine",
                    "coherent", "--out", str(tmp_path / "y.csv"))
    assert mismatch.returncode == 3


def test_cli_seed_env_override(tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    c = tmp_path / "c.jsonl"
    r1 = _cli("simulate", "--scenario", "fig2_blocked", "--mode", "mc",
              "--shots", "500", "--out", str(a), "--format", "jsonl",
              env={"PROXYIFM_SEED": "1234"})
    r2 = _cli("simulate", "--scenario", "fig2_blocked", "--mode", "mc",
              "--shots", "500", "--out", str(b), "--format", "jsonl",
              env={"PROXYIFM_SEED": "1234"})
    r3 = _cli("simulate", "--scenario", "fig2_blocked", "--mode", "mc",
              "--shots", "500", "--out", str(c), "--format", "jsonl",
              env={"PROXYIFM_SEED": "4321"})
    assert r1.returncode == r2.returncode == r3.returncode == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_cli_outdir_env_override(tmp_path):
    r = _cli("simulate", "--scenario", "fig2_open", "--mode", "exact",
             "--out", "nested.csv", env={"PROXYIFM_OUTDIR": str(tmp_path)})
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "nested.csv").exists()


def test_cli_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    r = _cli("sweep", "--scenario", "fringe_sweep", "--param", "delay_phase",
             "--from", "0", "--to", "3.141592653589793", "--steps", "5",
             "--out", str(out))
    assert r.returncode == 0, r.stderr
    lines = out.read_text().splitlines()
    assert lines[0] == "phase,p_d1,p_d2"
    assert len(lines) == 6


def test_cli_sweep_unknown_param_is_validation_error(tmp_path):
    r = _cli("sweep", "--scenario", "fringe_sweep", "--param", "nope",
             "--from", "0", "--to", "1", "--steps", "2",
             "--out", str(tmp_path / "x.csv"))
    assert r.returncode == 2


def test_cli_oracle(tmp_path):
    out = tmp_path / "joint.csv"
    r = _cli("oracle", "--scenario", "hom_pair", "--cutoff", "2",
             "--out", str(out))
    assert r.returncode == 0, r.stderr
    assert out.read_text().splitlines()[0] == "outcome_vector,probability"


def test_cli_decompose_round_trip(tmp_path):
    from proxyifm.multiport import haar_random_unitary
    u = haar_random_unitary(4, seed=17)
    upath = tmp_path / "u.csv"
    upath.write_text("\n".join(
        ",".join(f"{z.real:+.17g}{z.imag:+.17g}j" for z in row) for row in u))
    out = tmp_path / "steps.csv"
    r = _cli("decompose", "--unitary", str(upath), "--tol", "1e-10",
             "--out", str(out))
    assert r.returncode == 0, r.stderr
    lines = out.read_text().splitlines()
    assert lines[0].startswith("position,i,j,m00re")
    assert sum(1 for line in lines[1:] if line.startswith("phase_")) == 4


def test_cli_list_scenarios():
    r = _cli("list-scenarios")
    assert r.returncode == 0
    for name in GOLDEN_SCENARIOS:
        assert name in r.stdout
