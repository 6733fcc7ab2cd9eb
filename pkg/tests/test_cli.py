"""Command-line workflows: artifacts, determinism, exit codes."""
import csv
import json
import os

import numpy as np
import pytest

import isopulse as ip
from isopulse.cli import main


@pytest.fixture(scope="module")
def model_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "toggle.json"
    doc = ip.model_to_config(ip.toggle_switch_model(), params=ip.TOGGLE_Q_INT)
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_simulate_artifacts_and_at_times(model_config, tmp_path):
    out = tmp_path / "sim"
    code = main(["simulate", "--model", model_config, "--out", str(out),
                 "--mu", "5.0", "--tau", "8.0", "--t-end", "30",
                 "--at-times", "0,1,2", "--workers", "1"])
    assert code == 0
    header, rows = read_csv(out / "trajectory.csv")
    assert header == ["t", "x1", "x2", "u1", "u2"]
    assert len(rows) == 3
    assert [float(r[0]) for r in rows] == [0.0, 1.0, 2.0]
    manifest = json.loads((out / "manifest.json").read_text())
    names = {a["name"] for a in manifest["artifacts"]}
    emitted = set(os.listdir(out)) - {"manifest.json"}
    assert names == emitted
    assert (out / "phase.svg").exists()


def test_simulate_missing_model_exit_2(tmp_path, capsys):
    code = main(["simulate", "--model", str(tmp_path / "absent.json"),
                 "--out", str(tmp_path / "o"), "--t-end", "1"])
    assert code == 2
    assert "absent.json" in capsys.readouterr().err


def test_simulate_determinism(model_config, tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        main(["simulate", "--model", model_config, "--out", str(out),
              "--mu", "4.0", "--tau", "3.0", "--t-end", "5", "--workers", "1"])
        outs.append(out)
    for name in ("trajectory.csv", "run.json", "phase.svg"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_spectral_command(model_config, tmp_path):
    out = tmp_path / "spec"
    code = main(["spectral", "--model", model_config, "--out", str(out),
                 "--seed-box", "0,0,1100,510", "--seed-grid", "5",
                 "--workers", "1"])
    assert code == 0
    doc = json.loads((out / "spectral.json").read_text())
    assert len(doc["equilibria"]) == 3
    kinds = [e["stability"] for e in doc["equilibria"]]
    assert kinds.count("stable") == 2 and kinds.count("saddle") == 1
    stable = [e for e in doc["equilibria"] if e["stability"] == "stable"]
    assert all("spectral_data" in e for e in stable)
    spec = ip.SpectralData.from_dict(stable[-1]["spectral_data"])
    assert spec.lambda1 < 0.0


def test_design_command(model_config, tmp_path):
    out = tmp_path / "design"
    code = main(["design", "--model", model_config, "--out", str(out),
                 "--epsilon", "1e-2", "--budget", "20", "--workers", "1",
                 "--field-resolution", "7", "--no-svg"])
    assert code == 0
    doc = json.loads((out / "design.json").read_text())
    assert doc["active_constraint"] == "budget_saturated"
    assert abs(doc["mu"] * doc["tau"] - 20.0) <= 1e-9
    header, rows = read_csv(out / "r_field.csv")
    assert header == ["mu", "tau", "r", "status"]
    assert len(rows) == 49


def test_design_validation_exit_2(model_config, tmp_path, capsys):
    code = main(["design", "--model", model_config,
                 "--out", str(tmp_path / "d"), "--epsilon", "-1",
                 "--budget", "10"])
    assert code == 2


def test_design_infeasible_exit_3(model_config, tmp_path, capsys):
    # budget far below the switching threshold: every probed pulse stays
    # in the wrong basin
    code = main(["design", "--model", model_config,
                 "--out", str(tmp_path / "d3"), "--epsilon", "1e-2",
                 "--budget", "1.0", "--workers", "1", "--no-svg",
                 "--field-resolution", "0"])
    assert code == 3
    assert "infeasible" in capsys.readouterr().err.lower()


def test_spectral_field_csv(model_config, tmp_path):
    out = tmp_path / "specfield"
    code = main(["spectral", "--model", model_config, "--out", str(out),
                 "--seed-box", "0,0,1100,510", "--seed-grid", "5",
                 "--field-resolution", "8", "--field-bbox", "800,0.2,1000,1.0",
                 "--workers", "1"])
    assert code == 0
    header, rows = read_csv(out / "s1_field.csv")
    assert header == ["x1", "x2", "s1", "status"]
    assert len(rows) == 64
    statuses = {r[3] for r in rows}
    assert "converged" in statuses


def test_envelope_command(model_config, tmp_path):
    out = tmp_path / "env"
    code = main(["envelope", "--model", model_config, "--out", str(out),
                 "--q-lo", "1.8,950,1.2,1050", "--q-hi", "2.2,1050,0.7,950",
                 "--epsilon", "1e-14", "--sigma", "34",
                 "--mu-range", "2.5,6.5", "--tau-range", "6,16",
                 "--grid", "7", "--workers", "1"])
    assert code == 0
    assert (out / "t_contours.svg").exists()
    env = json.loads((out / "envelope.json").read_text())
    assert env["order_bounded"] is True
    header, rows = read_csv(out / "r_fields.csv")
    assert header == ["mu", "tau", "r", "status", "p_tag"]
    tags = {r[4] for r in rows}
    assert tags == {"p1", "p2"}
    report = json.loads((out / "intersections.json").read_text())
    assert report["count"] == 0


def test_envelope_coincident_suppressed(model_config, tmp_path):
    out = tmp_path / "env2"
    code = main(["envelope", "--model", model_config, "--out", str(out),
                 "--q-lo", "2,1000,1,1000", "--q-hi", "2,1000,1,1000",
                 "--epsilon", "1e-14", "--sigma", "30",
                 "--mu-range", "3,6", "--tau-range", "6,14",
                 "--grid", "5", "--workers", "1", "--no-svg"])
    assert code == 0
    report = json.loads((out / "intersections.json").read_text())
    assert report["suppressed"] is True


def test_regulate_command(model_config, tmp_path, capsys):
    out = tmp_path / "reg"
    code = main(["regulate", "--model", model_config, "--out", str(out),
                 "--q-true", "2,1000,1,1000",
                 "--q-lo", "1.8,950,1.2,1050", "--q-hi", "2.2,1050,0.7,950",
                 "--box", "4,4,10,10", "--delta", "1e-5",
                 "--n-anchors", "8", "--t-end", "25", "--workers", "1"])
    assert code == 0
    events = json.loads((out / "events.json").read_text())
    assert not events["failed"]
    assert len(events["events"]) >= 1
    anchors = json.loads((out / "anchors.json").read_text())
    assert len(anchors["anchors"]) == 8
    # per-channel infeasible anchors are flagged and warned about
    assert not all(anchors["feasible_down"])
    assert "infeasible" in capsys.readouterr().err
    assert (out / "phase.svg").exists()


def test_regulate_anchor_validation(model_config, tmp_path):
    code = main(["regulate", "--model", model_config,
                 "--out", str(tmp_path / "r0"),
                 "--q-true", "2,1000,1,1000",
                 "--q-lo", "1.8,950,1.2,1050", "--q-hi", "2.2,1050,0.7,950",
                 "--box", "4,4,10,10", "--n-anchors", "0", "--t-end", "5"])
    assert code == 2


def test_check_command(model_config, tmp_path):
    out = tmp_path / "check"
    code = main(["check", "--model", model_config, "--out", str(out),
                 "--q-lo", "1.8,950,1.2,1050", "--q-hi", "2.2,1050,0.7,950",
                 "--samples", "40", "--trials", "5", "--seed", "1",
                 "--workers", "1"])
    assert code == 0
    doc = json.loads((out / "check.json").read_text())
    assert doc["kamke_muller"]["passed"]
    assert doc["flow_monotonicity"]["passed"]
    assert doc["eigenfunction_decay"]["passed"]
