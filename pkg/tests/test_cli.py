import csv
import json

import pytest

from tenantopt.cli import EXIT_INVALID, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, main

SMALL = """\
building: {name: building-1}
scenarios: [PV, CHP]
chp_capacities: [0, 10]
time_slice: {kind: first_hours, count: 48}
solver: {relative_gap: 0.0, time_limit: 60}
dispatch_days: [0, 1]
output: out
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text(SMALL)
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_validate_bundled_config(capsys):
    assert main(["validate"]) == EXIT_OK
    assert capsys.readouterr().out.strip()


def test_usage_errors(capsys, cfg):
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["sweep", "--config", str(cfg)]) == EXIT_USAGE
    assert main(["sweep", "--config", str(cfg), "--scenario", "WIND"]) == EXIT_USAGE
    assert main(["sweep", "--config", str(cfg), "--scenario", "CHP", "--chp-caps", "a,b"]) == EXIT_USAGE
    assert main(["solve", "--config", str(cfg), "--time-limit", "0"]) == EXIT_USAGE
    assert main(["cascade", "--config", str(cfg), "--units", "2", "--scenario", "PV"]) == EXIT_USAGE
    assert main(["compare-policy", "--config", str(cfg), "--vintages", "2021"]) == EXIT_USAGE
    assert main(["compare-policy", "--config", str(cfg), "--vintages", "2020,1999"]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_invalid_input(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("building: {name: building-1}\nscenarios: [WIND]\n")
    assert main(["validate", "--config", str(bad)]) == EXIT_INVALID
    assert main(["validate", "--config", str(tmp_path / "missing.yaml")]) == EXIT_INVALID
    assert "invalid input" in capsys.readouterr().err


def test_infeasible_reference_is_solver_failure(tmp_path, capsys):
    cfg = tmp_path / "tight.yaml"
    cfg.write_text(SMALL + "technology: {boiler_max_capacity: 1.0}\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_SOLVER
    assert "solver failure" in capsys.readouterr().err


def test_solve_writes_reports(cfg, tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "results.csv")
    assert {r["scenario"] for r in rows} == {"REF", "PV", "CHP"}
    assert all(r["best_flag"] == "1" for r in rows)
    ref = next(r for r in rows if r["scenario"] == "REF")
    assert float(ref["delta_npv_EUR"]) == 0.0
    assert json.loads((out / "results.json").read_text())[0]["scenario"] == rows[0]["scenario"]
    assert (out / "waterfall.csv").exists()
    assert (out / "dispatch_day_0.csv").exists() and (out / "dispatch_day_1.csv").exists()
    assert (out / "dispatch" / "CHP" / "design.json").exists()
    assert "npv_EUR" in capsys.readouterr().out


def test_sweep_rows_per_capacity_and_dump_lp(cfg, tmp_path):
    out, lp = tmp_path / "res", tmp_path / "lp"
    code = main(["sweep", "--config", str(cfg), "--out", str(out), "--scenario", "CHP",
                 "--chp-caps", "0,10,20", "--dump-lp", str(lp)])
    assert code == EXIT_OK
    chp = [r for r in _rows(out / "results.csv") if r["scenario"] == "CHP"]
    assert [float(r["chp_sweep_kWel"]) for r in chp] == [0.0, 10.0, 20.0]
    assert sum(r["best_flag"] == "1" for r in chp) == 1
    assert sorted(p.name for p in lp.iterdir()) == ["CHP_chp0.lp", "CHP_chp10.lp", "CHP_chp20.lp", "REF_chp0.lp"]


def test_sweep_output_is_byte_identical(cfg, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["sweep", "--config", str(cfg), "--out", str(out), "--scenario", "CHP"]) == EXIT_OK
    for name in ("results.csv", "results.json", "waterfall.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_kpi_reproduces_saved_run(cfg, tmp_path):
    out = tmp_path / "res"
    assert main(["solve", "--config", str(cfg), "--out", str(out), "--scenario", "CHP"]) == EXIT_OK
    solved = {r["scenario"]: r for r in _rows(out / "results.csv")}["CHP"]
    kout = tmp_path / "kpi"
    assert main(["kpi", str(out / "dispatch" / "CHP"), "--reference", str(out / "dispatch" / "REF"),
                 "--config", str(cfg), "--out", str(kout)]) == EXIT_OK
    row = _rows(kout / "results.csv")[0]
    for col in ("npv_EUR", "delta_npv_EUR", "scr_frac", "dss_frac", "delta_co2_t", "cap_chp_kWel"):
        assert float(row[col]) == pytest.approx(float(solved[col]), abs=1e-5), col


def test_cascade_and_compare_policy(cfg, tmp_path):
    out = tmp_path / "c"
    assert main(["cascade", "--config", str(cfg), "--out", str(out), "--units", "2"]) == EXIT_OK
    assert _rows(out / "results.csv")[0]["scenario"] == "CHP"
    out = tmp_path / "p"
    assert main(["compare-policy", "--config", str(cfg), "--out", str(out), "--vintages", "none,2021"]) == EXIT_OK
    deltas = _rows(out / "policy_deltas.csv")
    assert {r["scenario"] for r in deltas} == {"PV", "CHP"}
    assert (out / "TEL2021-nosubsidy" / "results.csv").exists()
    assert (out / "TEL2021" / "results.csv").exists()
