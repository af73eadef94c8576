import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from lanepred.cli import load_config, main, CliError

SMOKE_CONFIG = """
[synth]
n_recordings = 2
duration = 45
lane_change_rate = 0.03
truck_fraction = 0.05

[train]
k_max = 4
max_expert_points = 6000
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Run the whole pipeline once; the tests inspect the artifacts."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "config.ini"
    cfg.write_text(SMOKE_CONFIG)
    out = root / "out"
    common = ["--config", str(cfg), "--out", str(out), "--seed", "1"]
    for sub in ("synth", "ingest", "prepare", "train", "predict",
                "evaluate", "context-report"):
        assert main([sub] + common) == 0, sub
    return root


def _cmd(workspace, sub, extra=()):
    return [sub, "--config", str(workspace / "config.ini"),
            "--out", str(workspace / "out"), "--seed", "1", *extra]


def read_tsv(path):
    return pd.read_csv(path, sep="\t", comment="#")


# ---------------------------------------------------------------------------
# Configuration handling

def test_load_config_defaults_without_file():
    cfg = load_config(None)
    assert cfg["train"]["hidden_units"] == 27
    assert cfg["labeling"]["n_folds"] == 6


def test_unknown_config_key_is_named(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[train]\nlerning_rate = 0.1\n")
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "train.lerning_rate" in capsys.readouterr().err


def test_unknown_config_section_is_named(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[training]\nepochs = 3\n")
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "training" in capsys.readouterr().err


def test_unparseable_config_value(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[train]\nepochs = soon\n")
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "train.epochs" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["synth", "--config", str(tmp_path / "nope.ini"),
                 "--out", str(tmp_path / "o")]) == 2
    assert "not found" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# Missing-artifact ordering

def test_predict_before_train_fails(tmp_path, capsys):
    assert main(["predict", "--out", str(tmp_path / "empty")]) == 2
    assert "prepare" in capsys.readouterr().err


def test_evaluate_before_predict_fails(workspace, tmp_path, capsys):
    out = tmp_path / "half"
    out.mkdir()
    # prepared exists but no prediction tables
    (out / "prepared.npz").write_bytes(
        (workspace / "out" / "prepared.npz").read_bytes())
    assert main(["evaluate", "--out", str(out)]) == 2
    assert "samples.tsv" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# Artifact content

def test_all_artifacts_exist(workspace):
    out = workspace / "out"
    expected = [
        "corpus/manifest_events.csv", "ingest_report.tsv", "prepared.npz",
        "schema.json", "balanced_manifest.tsv", "classifier.json",
        "expert_LCL.json", "expert_FLW.json", "expert_LCR.json",
        "samples.tsv", "predictions.tsv", "truth.tsv",
        "table1.tsv", "fig2_quantiles.tsv", "fig3_roc.tsv",
        "fig2.svg", "fig3.svg",
        "fig4_density_errors.tsv", "fig5_lc_stats.tsv", "fig4.svg", "fig5.svg",
    ]
    for rel in expected:
        assert (out / rel).exists(), rel
    for sub in ("synth", "ingest", "prepare", "train", "predict",
                "evaluate", "context_report"):
        assert (out / f"run_{sub}.json").exists(), sub


def test_tables_carry_config_hash(workspace):
    out = workspace / "out"
    manifest = json.loads((out / "run_evaluate.json").read_text())
    tag = f"# config_hash={manifest['config_hash']}"
    for name in ("ingest_report.tsv", "balanced_manifest.tsv", "samples.tsv",
                 "predictions.tsv", "truth.tsv", "table1.tsv"):
        first = (out / name).read_text().splitlines()[0]
        assert first == tag, name
    clf = json.loads((out / "classifier.json").read_text())
    assert clf["config_hash"] == manifest["config_hash"]


def test_ingest_report_is_clean(workspace):
    report = read_tsv(workspace / "out" / "ingest_report.tsv")
    assert len(report) == 2
    assert (report["n_violations"] == 0).all()


def test_metrics_table_sane(workspace):
    table = read_tsv(workspace / "out" / "table1.tsv")
    metrics = dict(zip(table["metric"], table["value"]))
    for key in ("auc_lcl", "auc_flw", "auc_lcr"):
        assert 0.9 <= float(metrics[key]) <= 1.0, key
    assert 0.8 <= float(metrics["bacc"]) <= 1.0
    # gains can slightly exceed the labeling horizon when the gate is
    # already correct before the situation formally starts
    assert 0.0 <= float(metrics["tau_lcl"]) <= 6.0
    assert float(metrics["n_eval_samples"]) > 0
    # the perfect-gate variant beats the constant-velocity extrapolation
    assert float(metrics["median_error_h_labels"]) < float(metrics["median_error_h_cv"])


def test_predictions_join_truth(workspace):
    out = workspace / "out"
    predictions = read_tsv(out / "predictions.tsv")
    truth = read_tsv(out / "truth.tsv")
    assert len(predictions) == len(truth)
    assert (predictions["sample_id"] == truth["sample_id"]).all()
    assert (predictions["t_star"] == truth["t_star"]).all()
    p = predictions[["p_lcl", "p_flw", "p_lcr"]].to_numpy()
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-6)


def test_figures_are_svg_without_timestamps(workspace):
    out = workspace / "out"
    for name in ("fig2.svg", "fig3.svg", "fig4.svg", "fig5.svg"):
        text = (out / name).read_text()
        assert text.lstrip().startswith("<?xml")
        assert "dc:date" not in text, name


def test_rerun_reproduces_tables_byte_identically(workspace, tmp_path):
    out2 = tmp_path / "out2"
    cfg = workspace / "config.ini"
    common = ["--config", str(cfg), "--out", str(out2), "--seed", "1"]
    for sub in ("synth", "ingest", "prepare", "train", "predict", "evaluate"):
        assert main([sub] + common) == 0, sub
    for name in ("ingest_report.tsv", "balanced_manifest.tsv", "samples.tsv",
                 "predictions.tsv", "truth.tsv", "table1.tsv",
                 "fig2_quantiles.tsv", "fig3_roc.tsv"):
        a = (workspace / "out" / name).read_bytes()
        b = (out2 / name).read_bytes()
        assert a == b, name


def test_changed_seed_changes_hash(workspace, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["synth", "--config", str(workspace / "config.ini"),
                 "--out", str(out), "--seed", "2"]) == 0
    capsys.readouterr()
    new = json.loads((out / "run_synth.json").read_text())
    old = json.loads((workspace / "out" / "run_synth.json").read_text())
    assert new["config_hash"] != old["config_hash"]
