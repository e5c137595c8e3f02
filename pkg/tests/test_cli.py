import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from mapexp.cli import main
from mapexp.model import DenseFiniteChain, LevyTripletBiv, MapSpec
from mapexp.modelio import dump_model
from mapexp.schemas import artifact_errors

MODELS = Path(__file__).resolve().parent.parent / "models"


def run(*argv):
    return main([str(a) for a in argv])


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def drift_model(tmp_path):
    spec = MapSpec(chain=DenseFiniteChain(np.array([[0.0]])),
                   triplets={0: LevyTripletBiv(drift_xi=1.0, drift_eta=1.0)},
                   switch_laws={})
    p = tmp_path / "drift.json"
    dump_model(spec, p)
    return p


@pytest.fixture
def fast_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"n_paths": 100, "horizon": 30.0, "mesh": 0.25,
                             "ladder": [7.5, 15.0, 30.0], "seed": 7}))
    return p


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------


def test_validate_ok_model(capsys):
    assert run("validate", MODELS / "jump_two_state.json") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] is True and doc["errors"] == []
    assert artifact_errors(doc, "validate") == []


def test_validate_bad_model_is_domain_failure(capsys):
    assert run("validate", MODELS / "nonergodic.json") == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] is False
    assert any("NonErgodic" in e for e in doc["errors"])
    assert artifact_errors(doc, "validate") == []


def test_missing_model_file_is_usage_failure(capsys):
    assert run("validate", "/nonexistent/m.json") == 2


def test_malformed_model_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"spec_version": 1,,}')
    assert run("validate", bad) == 2
    err = capsys.readouterr().err
    assert "line" in err and "column" in err


def test_scenario_run_requires_id():
    with pytest.raises(SystemExit):
        run("scenario", "run")


def test_unknown_scenario_is_usage_failure(capsys):
    assert run("scenario", "run", "nosuch") == 2
    assert "nosuch" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def test_simulate_drift_model_exact(tmp_path, drift_model, capsys):
    out = tmp_path / "out"
    assert run("simulate", drift_model, "--horizon", 1.0, "--mesh", 0.1,
               "--paths", 1, "--out", out, "--seed", 5) == 0
    rows = []
    with open(out / "path_0000.csv", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                rows.append(line.strip().split(","))
    header, data = rows[0], rows[1:]
    it, ie = header.index("t"), header.index("e")
    assert len(data) == 11
    for r in data:
        t, e = float(r[it]), float(r[ie])
        assert abs(e - (1.0 - math.exp(-t))) <= 1e-12
    doc = read_json(out / "summary.json")
    assert artifact_errors(doc, "simulate_summary") == []
    assert doc["report"]["terminal"]["n_nonfinite"] == 0
    assert (out / "trajectories.svg").exists()


def test_simulate_keep_paths_limits_files(tmp_path, drift_model):
    out = tmp_path / "out"
    assert run("simulate", drift_model, "--horizon", 1.0, "--mesh", 0.5,
               "--paths", 4, "--keep-paths", 2, "--out", out) == 0
    kept = sorted(p.name for p in out.glob("path_*.csv"))
    assert kept == ["path_0000.csv", "path_0001.csv"]
    doc = read_json(out / "summary.json")
    assert doc["report"]["kept"] == kept


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------


def artifact_bytes(d: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_classify_reruns_are_byte_identical(tmp_path, fast_config):
    model = MODELS / "jump_two_state.json"
    out1, out2, out3 = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run("classify", model, "--config", fast_config, "--out", out1,
               "--threads", 1) == 0
    assert run("classify", model, "--config", fast_config, "--out", out2,
               "--threads", 1) == 0
    assert run("classify", model, "--config", fast_config, "--out", out3,
               "--threads", 3) == 0
    a, b, c = artifact_bytes(out1), artifact_bytes(out2), artifact_bytes(out3)
    assert set(a) == {"classify.json", "evidence.csv",
                      "trajectories.svg", "ladders.svg"}
    assert a == b
    assert a == c


def test_classify_artifact_passes_schema(tmp_path, fast_config):
    out = tmp_path / "out"
    assert run("classify", MODELS / "jump_two_state.json", "--config",
               fast_config, "--out", out) == 0
    doc = read_json(out / "classify.json")
    assert artifact_errors(doc, "classify") == []
    assert doc["report"]["verdict"] == "ConvergesAS"
    assert doc["manifest"]["command"] == "classify"
    # a mutated verdict must be rejected by the shipped schema
    doc["report"]["verdict"] = "MaybeConverges"
    assert artifact_errors(doc, "classify") != []


def test_classify_evidence_csv_has_manifest_header(tmp_path, fast_config):
    out = tmp_path / "out"
    run("classify", MODELS / "jump_two_state.json", "--config", fast_config,
        "--out", out)
    text = (out / "evidence.csv").read_text().splitlines()
    assert text[0].startswith("# manifest:")
    header = text[1].split(",")
    assert header == ["criterion", "state", "verdict", "value"]
    assert len(text) > 3


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def test_estimate_produces_table_and_histogram(tmp_path, capsys):
    out = tmp_path / "out"
    assert run("estimate", MODELS / "brownian_xi.json", "--paths", 300,
               "--out", out, "--seed", 9, "--format", "csv") == 0
    doc = read_json(out / "estimate.json")
    rep = doc["report"]
    assert artifact_errors(doc, "estimate") == []
    assert rep["refused"] is False
    assert rep["n_paths"] == 300
    assert rep["mean"] == pytest.approx(8.0 / 7.0, rel=0.15)
    assert len(rep["histogram"]["counts"]) == 64
    assert (out / "estimate_hist.svg").exists()
    assert (out / "histogram.csv").exists()
    assert (out / "terminals.csv").exists()


def test_estimate_refuses_divergent_model(tmp_path, capsys):
    out = tmp_path / "out"
    assert run("estimate", MODELS / "heavy_tail_single.json", "--paths", 50,
               "--out", out, "--seed", 9) == 0
    doc = read_json(out / "estimate.json")
    rep = doc["report"]
    assert artifact_errors(doc, "estimate") == []
    assert rep["refused"] is True
    assert rep["verdict"] == "DivergesInProbability"
    assert "mean" not in rep
    assert (out / "ladders.svg").exists()
    assert not (out / "estimate_hist.svg").exists()
    assert "refused" in capsys.readouterr().out


def test_estimate_horizon_heuristic(tmp_path):
    out = tmp_path / "out"
    # kappa = 1 for the drift pair: heuristic = 2 ln(1e6) / 1 ~ 27.6,
    # floored at 50
    assert run("estimate", MODELS / "drift_pair.json", "--paths", 120,
               "--out", out, "--seed", 4) == 0
    rep = read_json(out / "estimate.json")["report"]
    assert rep["horizon"] == 50.0 or rep["horizon"] == rep["heuristic_horizon"]
    assert rep["heuristic_horizon"] >= 27.0


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------


def test_scenario_list_json(capsys):
    assert run("scenario", "list", "--format", "json") == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["id"] for r in rows] == ["lev_baseline", "dufresne", "ex43",
                                       "ex44", "ex54", "degenerate_const",
                                       "degenerate_curve", "em_divergent"]
    assert all("expected_verdict" in r for r in rows)


def test_scenario_list_table(capsys):
    assert run("scenario", "list") == 0
    out = capsys.readouterr().out
    assert "lev_baseline" in out and "Degenerate" in out


def test_scenario_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    assert run("scenario", "run", "lev_baseline", "--out", out) == 0
    doc = read_json(out / "scenario_lev_baseline.json")
    assert artifact_errors(doc, "scenario") == []
    rep = doc["report"]
    assert rep["scenario"] == "lev_baseline" and rep["passed"] is True
    assert (out / "scenario_lev_baseline_evidence.csv").exists()
    assert (out / "scenario_lev_baseline_trajectories.svg").exists()
    assert (out / "scenario_lev_baseline_ladders.svg").exists()


# ---------------------------------------------------------------------------
# output directory resolution
# ---------------------------------------------------------------------------


def test_env_out_dir(tmp_path, drift_model, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv("MAPEXP_OUT", str(target))
    assert run("simulate", drift_model, "--horizon", 1.0, "--mesh", 0.5,
               "--paths", 1) == 0
    assert (target / "summary.json").exists()


def test_out_flag_beats_env(tmp_path, drift_model, monkeypatch):
    monkeypatch.setenv("MAPEXP_OUT", str(tmp_path / "ignored"))
    out = tmp_path / "flagged"
    assert run("simulate", drift_model, "--horizon", 1.0, "--mesh", 0.5,
               "--paths", 1, "--out", out) == 0
    assert (out / "summary.json").exists()
    assert not (tmp_path / "ignored").exists()
