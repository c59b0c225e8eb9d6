"""Scenario ingestion, round-trips, CLI exit codes and artifacts."""

import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from nyqscale.cli import main
from nyqscale.errors import ScenarioError
from nyqscale.scenario import bundled_scenario_path, load_scenario, loads_scenario


@pytest.fixture(scope="module")
def loads_path():
    return bundled_scenario_path("n5_hydro_loads")


@pytest.fixture(scope="module")
def d0_path():
    return bundled_scenario_path("n5_hydro_d0")


@pytest.fixture(scope="module")
def wind_path():
    return bundled_scenario_path("n5_hydro_wind")


# ---------------------------------------------------------------- scenario
def test_bundled_scenarios_parse(loads_path, d0_path, wind_path):
    for p in (loads_path, d0_path, wind_path):
        scn = load_scenario(p)
        assert scn.n == 5
        # gamma/2pi must reproduce the published incidence parameters
        gamma_over_2pi = 2 * np.diag(scn.network.laplacian) / (2 * math.pi) / 1000
        assert np.allclose(gamma_over_2pi, [6.2, 10.2, 5.2, 7.5, 3.0], rtol=1e-12)


def test_scenario_inertia_conversion(loads_path):
    scn = load_scenario(loads_path)
    assert [a.inertia for a in scn.agents] == pytest.approx(
        [1360.0, 900.0, 300.0, 1320.0, 520.0]
    )
    assert sum(a.inertia for a in scn.agents) == pytest.approx(4400.0)


def test_scenario_round_trip_idempotent(loads_path):
    scn1 = load_scenario(loads_path)
    doc = scn1.to_json_dict()
    scn2 = loads_scenario(json.loads(json.dumps(doc)))
    assert scn2.to_json_dict() == doc
    assert np.allclose(scn1.network.laplacian, scn2.network.laplacian)


def test_scenario_schema_violation_paths(tmp_path):
    bad = {"name": "x", "network": {"buses": [], "lines": []}, "agents": {"buses": []}}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    with pytest.raises(ScenarioError) as err:
        load_scenario(p)
    assert any("$.network.buses" in v for v in err.value.violations)


def test_scenario_share_sum_enforced(loads_path, tmp_path):
    doc = load_scenario(loads_path).to_json_dict()
    doc["agents"]["buses"][0]["hydro"]["fcr_share"] = 0.5
    p = tmp_path / "shares.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ScenarioError) as err:
        load_scenario(p)
    assert any("FCR shares" in v for v in err.value.violations)


def test_scenario_unknown_line_bus(loads_path, tmp_path):
    doc = load_scenario(loads_path).to_json_dict()
    doc["network"]["lines"][0]["from"] = 99
    p = tmp_path / "badline.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ScenarioError) as err:
        load_scenario(p)
    assert any("unknown bus id 99" in v for v in err.value.violations)


def test_scenario_missing_file_raises():
    with pytest.raises(ScenarioError):
        load_scenario("/nonexistent/path.json")


# ---------------------------------------------------------------- cli
def test_cli_missing_file_exit_3(tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        main, ["analyze", str(tmp_path / "nope.json"), "--out-dir", str(tmp_path)]
    )
    assert res.exit_code == 3


def test_cli_analyze_fov_d0_unstable_exit_1(d0_path, tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        main,
        [
            "analyze", str(d0_path),
            "--check", "fov",
            "--contour-kind", "full-D",
            "--density", "120",
            "--out-dir", str(tmp_path),
        ],
    )
    assert res.exit_code == 1, res.output
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["result"] == "unstable"
    conds = [v["condition"] for v in report["violations"]]
    assert "pole-gate" in conds or "fov-ray" in conds
    assert (tmp_path / "loci.csv").exists()


def test_cli_analyze_decentralized_wind_stable_exit_0(wind_path, tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        main,
        [
            "analyze", str(wind_path),
            "--check", "decentralized",
            "--contour-r", "0.75",
            "--tau-max", "0.1",
            "--density", "120",
            "--out-dir", str(tmp_path),
        ],
    )
    assert res.exit_code == 0, res.output
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["result"] == "stable"
    assert len(report["per_agent"]) == 5
    # loci CSV honors the column contract
    header = (tmp_path / "loci.csv").read_text().splitlines()[0].split(",")
    assert header[0] == "omega_rad_s"
    assert "branch_1_re" in header and "vertex_5_im" in header
    assert header[-1] == "marker"


def test_cli_analyze_fov_paper_radius_passes(loads_path, tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        main,
        [
            "analyze", str(loads_path),
            "--check", "fov",
            "--contour-r", "0.45*2pi",
            "--density", "120",
            "--out-dir", str(tmp_path),
        ],
    )
    assert res.exit_code == 0, res.output


def test_cli_simulate_summary_and_traces(loads_path, tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        main,
        [
            "simulate", str(loads_path),
            "--t-end", "60",
            "--out-dir", str(tmp_path),
        ],
    )
    assert res.exit_code == 0, res.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["settling_value_hz"] == pytest.approx(-0.4, rel=0.01)
    lines = (tmp_path / "traces.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[0] == "time_s"
    assert "f_bus1_Hz" in header and "tie_bus5_MW" in header
    assert "p_hydro_bus1" in header
    assert "omega_avg_Hz" in header and "omega_coi_Hz" in header
    assert len(lines) > 100


def test_cli_simulate_dt_too_large_exit_3(loads_path, tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        main,
        ["simulate", str(loads_path), "--dt", "0.5", "--t-end", "1",
         "--out-dir", str(tmp_path)],
    )
    assert res.exit_code == 3


def test_cli_simulate_zero_disturbance_flat(loads_path, tmp_path):
    doc = load_scenario(loads_path).to_json_dict()
    doc.pop("disturbance")
    p = tmp_path / "quiet.json"
    p.write_text(json.dumps(doc))
    runner = CliRunner()
    res = runner.invoke(
        main,
        ["simulate", str(p), "--t-end", "2", "--out-dir", str(tmp_path)],
    )
    assert res.exit_code == 0, res.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["peak_deviation_hz"] == 0.0


def test_cli_export_loci_marker_present(wind_path, tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        main,
        [
            "export-loci", str(wind_path),
            "--contour-r", "0.75",
            "--density", "120",
            "--out-dir", str(tmp_path),
        ],
    )
    assert res.exit_code == 0, res.output
    rows = (tmp_path / "loci.csv").read_text().splitlines()
    header = rows[0].split(",")
    assert header[-1] == "marker"
    marked = [r for r in rows[1:] if r.endswith("pi_over_2tau")]
    assert marked, "no marker row at pi/(2 tau)"
    omega = float(marked[0].split(",")[0])
    assert omega == pytest.approx(math.pi / 0.2, rel=1e-9)
    svg = (tmp_path / "loci.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_cli_export_loci_empty_agents_exit_3(loads_path, tmp_path):
    doc = load_scenario(loads_path).to_json_dict()
    doc["agents"]["buses"] = []
    p = tmp_path / "empty.json"
    p.write_text(json.dumps(doc))
    runner = CliRunner()
    res = runner.invoke(main, ["export-loci", str(p), "--out-dir", str(tmp_path)])
    assert res.exit_code == 3
