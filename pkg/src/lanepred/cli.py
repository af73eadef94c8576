"""Command-line entry point.

Subcommands cover the whole pipeline: ``synth`` (generate a corpus),
``ingest`` (parse/normalize/validate), ``prepare`` (features + labels +
folds), ``train`` (gate and experts), ``predict`` (batch prediction
table), ``evaluate`` (summary metrics, error quantiles, ROC) and
``context-report`` (density-stratified studies).

Configuration is a flat INI file with sections mirroring the module
names; unknown keys are rejected by name. Every artifact embeds a hash
of the effective configuration, and re-running with unchanged config and
seed reproduces byte-identical tables.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from . import evaluation, moe
from .features import FeatureSchema
from .gmm import MAX_KERNELS, ManeuverExpert, fit_expert
from .ingest import SensorModel, normalize_direction, parse_recording
from .labeling import SamplingPlan, undersample
from .mlp import ManeuverClassifier, TrainConfig, train
from .pipeline import (
    PreparedDataset,
    expert_points_from_samples,
    find_recordings,
    prepare_corpus,
)
from .synth import ScenarioConfig, generate_corpus
from .types import CLASS_NAMES, DEFAULT_HORIZON, ManeuverLabel, validate

FLOAT_FORMAT = "%.9g"


class CliError(Exception):
    """User-facing error; printed as one line, exit status 2."""


# ---------------------------------------------------------------------------
# Configuration

# section -> key -> (type, default). The INI file may set any subset;
# unknown sections or keys are errors naming the offender.
CONFIG_SCHEMA = {
    "synth": {
        "n_recordings": (int, 3),
        "lane_count": (int, 3),
        "segment_length": (float, 1000.0),
        "frame_rate": (float, 25.0),
        "lane_width": (float, 4.0),
        "duration": (float, 120.0),
        "density_low": (float, 12.0),
        "density_high": (float, 12.0),
        "speed_base": (float, 33.0),
        "speed_slope": (float, -0.25),
        "truck_fraction": (float, 0.08),
        "osc_amp_base": (float, 0.13),
        "osc_amp_slope": (float, -0.002),
        "osc_freq": (float, 0.09),
        "osc_decay": (float, 0.005),
        "lane_change_rate": (float, 0.02),
        "announce_time": (float, 4.5),
        "announce_offset": (float, 0.3),
        "dur_base": (float, 2.6),
        "dur_slope": (float, 0.05),
        "vmax_base": (float, 1.6),
        "vmax_slope": (float, 0.02),
        "position_noise": (float, 0.004),
    },
    "ingest": {
        "max_range": (float, 150.0),
        "min_sight": (float, 80.0),
    },
    "labeling": {
        "n_folds": (int, 6),
        "bin_width": (float, 0.5),
    },
    "train": {
        "step_size": (float, 0.02),
        "hidden_units": (int, 27),
        "epochs": (int, 50),
        "batch_size": (int, 32),
        "val_fraction": (float, 0.1),
        "patience": (int, 5),
        "k_max": (int, MAX_KERNELS),
        # expert point sets are subsampled to this cap (seeded) so the
        # EM kernel-selection ladder stays tractable
        "max_expert_points": (int, 40000),
    },
    "evaluate": {
        # 0 disables the probability-threshold variant of the time gain
        "stability_threshold": (float, 0.0),
    },
}


def load_config(path: Optional[str]) -> Dict[str, Dict]:
    cfg = {s: {k: d for k, (_, d) in keys.items()}
           for s, keys in CONFIG_SCHEMA.items()}
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise CliError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in CONFIG_SCHEMA:
            raise CliError(f"unknown config section: {section}")
        for key, raw in parser.items(section):
            if key not in CONFIG_SCHEMA[section]:
                raise CliError(f"unknown config key: {section}.{key}")
            typ = CONFIG_SCHEMA[section][key][0]
            try:
                cfg[section][key] = typ(raw)
            except ValueError:
                raise CliError(
                    f"config key {section}.{key}: cannot parse {raw!r} as {typ.__name__}")
    return cfg


def config_hash(cfg: Dict[str, Dict], args) -> str:
    """Hash of the effective configuration: config values plus the flags
    that change artifact content."""
    payload = {
        "config": cfg,
        "seed": args.seed,
        "fold": args.fold,
        "horizon": args.horizon,
        "density_bin_width": args.density_bin_width,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Artifact helpers

def write_table(path: Path, df: pd.DataFrame, cfg_hash: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(f"# config_hash={cfg_hash}\n")
        df.to_csv(f, sep="\t", index=False, float_format=FLOAT_FORMAT)


def read_table(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise CliError(f"missing artifact: {path} (run the earlier subcommand first)")
    return pd.read_csv(path, sep="\t", comment="#")


def write_model(path: Path, artifact_json: str, cfg_hash: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"config_hash": cfg_hash, "artifact": json.loads(artifact_json)}
    path.write_text(json.dumps(doc, sort_keys=True))


def read_model(path: Path) -> str:
    if not path.exists():
        raise CliError(f"missing model artifact: {path} (run train first)")
    return json.dumps(json.load(open(path))["artifact"])


def write_manifest(out: Path, subcommand: str, cfg_hash: str, args,
                   artifacts: List[str]):
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "subcommand": subcommand,
        "config_hash": cfg_hash,
        "seed": args.seed,
        "fold": args.fold,
        "horizon": args.horizon,
        "density_bin_width": args.density_bin_width,
        "artifacts": sorted(artifacts),
    }
    (out / f"run_{subcommand}.json").write_text(json.dumps(doc, sort_keys=True, indent=2))


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def save_figure(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None})


# ---------------------------------------------------------------------------
# Subcommands

def cmd_synth(args, cfg, cfg_hash) -> List[str]:
    s = cfg["synth"]
    scenario = ScenarioConfig(
        lane_count=s["lane_count"], segment_length=s["segment_length"],
        frame_rate=s["frame_rate"], lane_width=s["lane_width"],
        duration=s["duration"],
        density_range=(s["density_low"], s["density_high"]),
        speed_base=s["speed_base"], speed_slope=s["speed_slope"],
        truck_fraction=s["truck_fraction"],
        osc_amp_base=s["osc_amp_base"], osc_amp_slope=s["osc_amp_slope"],
        osc_freq=s["osc_freq"], osc_decay=s["osc_decay"],
        lane_change_rate=s["lane_change_rate"],
        announce_time=s["announce_time"], announce_offset=s["announce_offset"],
        dur_base=s["dur_base"], dur_slope=s["dur_slope"],
        vmax_base=s["vmax_base"], vmax_slope=s["vmax_slope"],
        position_noise=s["position_noise"], seed=args.seed,
    )
    corpus_dir = Path(args.out) / "corpus"
    paths = generate_corpus(scenario, s["n_recordings"], corpus_dir)
    return [str(p) for p in paths.values()] + [str(corpus_dir)]


def cmd_ingest(args, cfg, cfg_hash) -> List[str]:
    corpus = Path(args.corpus) if args.corpus else Path(args.out) / "corpus"
    rows = []
    for tracks_path, meta_path, rec_path in find_recordings(corpus):
        rec = normalize_direction(parse_recording(tracks_path, meta_path, rec_path))
        violations = validate(rec)
        rows.append({
            "prefix": tracks_path.name[: -len("_tracks.csv")],
            "recording_id": rec.meta.recording_id,
            "n_tracks": len(rec.tracks),
            "n_violations": len(violations),
            "first_violation": violations[0] if violations else "",
        })
    report = Path(args.out) / "ingest_report.tsv"
    write_table(report, pd.DataFrame(rows), cfg_hash)
    return [str(report)]


def cmd_prepare(args, cfg, cfg_hash) -> List[str]:
    corpus = Path(args.corpus) if args.corpus else Path(args.out) / "corpus"
    sensor = SensorModel(cfg["ingest"]["max_range"], cfg["ingest"]["min_sight"])
    ds = prepare_corpus(corpus, sensor=sensor, horizon=args.horizon,
                        n_folds=cfg["labeling"]["n_folds"], seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prepared = out / "prepared.npz"
    ds.save(prepared)
    schema_path = out / "schema.json"
    schema_path.write_text(ds.schema.to_json())
    return [str(prepared), str(schema_path)]


def _load_prepared(args) -> PreparedDataset:
    path = Path(args.out) / "prepared.npz"
    if not path.exists():
        raise CliError(f"missing artifact: {path} (run prepare first)")
    return PreparedDataset.load(path)


def cmd_train(args, cfg, cfg_hash) -> List[str]:
    ds = _load_prepared(args)
    out = Path(args.out)
    train_mask = ds.fold != args.fold
    if not np.any(train_mask):
        raise CliError(f"no training samples outside evaluation fold {args.fold}")
    plan = SamplingPlan(horizon=ds.horizon, bin_width=cfg["labeling"]["bin_width"],
                        seed=args.seed)
    train_idx = np.flatnonzero(train_mask)
    bal = train_idx[undersample(ds.labels[train_mask],
                                ds.time_to_event[train_mask], plan)]

    manifest = pd.DataFrame({
        "sample_id": bal,
        "recording": ds.recording_id[bal],
        "vehicle": ds.vehicle_id[bal],
        "frame": ds.frame[bal],
        "fold": ds.fold[bal],
        "label": [CLASS_NAMES[c] for c in ds.labels[bal]],
        "t_lcl": ds.t_lcl[bal],
        "t_lcr": ds.t_lcr[bal],
        "t_o": ds.t_o[bal],
    })
    manifest_path = out / "balanced_manifest.tsv"
    write_table(manifest_path, manifest, cfg_hash)

    t = cfg["train"]
    clf = train(ds.X[bal], ds.labels[bal],
                TrainConfig(step_size=t["step_size"], hidden_units=t["hidden_units"],
                            epochs=t["epochs"], batch_size=t["batch_size"],
                            seed=args.seed, val_fraction=t["val_fraction"],
                            patience=t["patience"]))
    clf_path = out / "classifier.json"
    write_model(clf_path, clf.to_json(), cfg_hash)

    artifacts = [str(manifest_path), str(clf_path)]
    for c, name in enumerate(CLASS_NAMES):
        points = expert_points_from_samples(ds, bal, c)
        cap = t["max_expert_points"]
        if points.shape[0] > cap:
            rng = np.random.default_rng((args.seed, c))
            points = points[np.sort(rng.choice(points.shape[0], cap, replace=False))]
        if points.shape[0] < 10:
            raise CliError(f"too few training points for the {name} expert "
                           f"({points.shape[0]})")
        expert = fit_expert(name, points, seed=args.seed, k_max=t["k_max"])
        path = out / f"expert_{name}.json"
        write_model(path, expert.to_json(), cfg_hash)
        artifacts.append(str(path))
    return artifacts


def _load_models(args):
    out = Path(args.out)
    clf = ManeuverClassifier.from_json(read_model(out / "classifier.json"))
    experts = {name: ManeuverExpert.from_json(read_model(out / f"expert_{name}.json"))
               for name in CLASS_NAMES}
    return clf, experts


def cmd_predict(args, cfg, cfg_hash) -> List[str]:
    ds = _load_prepared(args)
    clf, experts = _load_models(args)
    out = Path(args.out)
    eval_idx = np.flatnonzero(ds.fold == args.fold)
    if eval_idx.size == 0:
        raise CliError(f"evaluation fold {args.fold} is empty")
    predictor = moe.MoEPredictor(clf, experts, schema=ds.schema, horizon=ds.horizon)
    pred = predictor.point_estimates(ds.X[eval_idx], ds.grid,
                                     labels=ds.labels[eval_idx])

    samples = pd.DataFrame({
        "sample_id": eval_idx,
        "recording": ds.recording_id[eval_idx],
        "vehicle": ds.vehicle_id[eval_idx],
        "frame": ds.frame[eval_idx],
        "time": ds.time[eval_idx],
        "fold": ds.fold[eval_idx],
        "label": [CLASS_NAMES[c] for c in ds.labels[eval_idx]],
        "density": ds.density[eval_idx],
        "t_lcl": ds.t_lcl[eval_idx],
        "t_lcr": ds.t_lcr[eval_idx],
        "t_o": ds.t_o[eval_idx],
    })
    samples_path = out / "samples.tsv"
    write_table(samples_path, samples, cfg_hash)

    n, t_len = eval_idx.size, ds.grid.size
    sample_col = np.repeat(eval_idx, t_len)
    t_col = np.tile(ds.grid, n)
    predictions = pd.DataFrame({
        "sample_id": sample_col,
        "t_star": t_col,
        "y_moe": pred["moe"].ravel(),
        "y_labels": pred["labels"].ravel(),
        "y_cv": pred["cv"].ravel(),
        "p_lcl": np.repeat(pred["gate"][:, 0], t_len),
        "p_flw": np.repeat(pred["gate"][:, 1], t_len),
        "p_lcr": np.repeat(pred["gate"][:, 2], t_len),
    })
    predictions_path = out / "predictions.tsv"
    write_table(predictions_path, predictions, cfg_hash)

    truth = pd.DataFrame({
        "sample_id": sample_col,
        "t_star": t_col,
        "y_true": ds.y_future[eval_idx].ravel(),
    })
    truth_path = out / "truth.tsv"
    write_table(truth_path, truth, cfg_hash)
    return [str(samples_path), str(predictions_path), str(truth_path)]


def _load_prediction_tables(args):
    out = Path(args.out)
    samples = read_table(out / "samples.tsv")
    predictions = read_table(out / "predictions.tsv")
    truth = read_table(out / "truth.tsv")
    return samples, predictions, truth


def _pivot(df: pd.DataFrame, value: str) -> pd.DataFrame:
    wide = df.pivot(index="sample_id", columns="t_star", values=value)
    return wide.sort_index()[sorted(wide.columns)]


def cmd_evaluate(args, cfg, cfg_hash) -> List[str]:
    ds = _load_prepared(args)
    samples, predictions, truth = _load_prediction_tables(args)
    out = Path(args.out)

    label_idx = {name: i for i, name in enumerate(CLASS_NAMES)}
    samples = samples.sort_values("sample_id").reset_index(drop=True)
    labels = samples["label"].map(label_idx).to_numpy()

    first_t = predictions["t_star"].min()
    gate = (predictions[predictions["t_star"] == first_t]
            .sort_values("sample_id")[["p_lcl", "p_flw", "p_lcr"]]
            .to_numpy())

    roc = evaluation.roc_auc(gate, labels)
    bacc_value, bacc_notes = evaluation.bacc(np.argmax(gate, axis=1), labels)

    # time gain per evaluation-fold lane change, via per-frame gate
    # outputs joined back to the events
    threshold = cfg["evaluate"]["stability_threshold"] or None
    by_track: Dict = {}
    for row, (rec_id, veh) in enumerate(zip(samples["recording"], samples["vehicle"])):
        by_track.setdefault((int(rec_id), int(veh)), []).append(row)
    gains = {"LCL": [], "LCR": []}
    skipped_events = 0
    for ev in ds.events:
        key = (ev.recording_id, ev.vehicle_id)
        if ev.truncated or key not in by_track:
            continue
        rows = by_track[key]
        times = samples["time"].to_numpy()[rows]
        order = np.argsort(times)
        times = times[order]
        probs = gate[np.asarray(rows)[order]]
        cls_name = "LCL" if ev.direction == "left" else "LCR"
        try:
            g = evaluation.time_gain(times, np.argmax(probs, axis=1),
                                     label_idx[cls_name], ev.t_cross,
                                     probs=probs, threshold=threshold)
        except ValueError:
            skipped_events += 1
            continue
        gains[cls_name].append(g)
    tau = {name: evaluation.mean_time_gain(gains[name]) for name in ("LCL", "LCR")}

    # lateral error quantiles per horizon and estimator
    truth_wide = _pivot(truth, "y_true")
    t_grid = np.array(sorted(truth_wide.columns), dtype=float)
    horizon_col = t_grid[np.argmin(np.abs(t_grid - args.horizon))]
    fig2_rows = []
    per_estimator = {}
    for est, col in (("moe", "y_moe"), ("labels", "y_labels"), ("cv", "y_cv")):
        pred_wide = _pivot(predictions, col)
        res = evaluation.lateral_error(pred_wide.to_numpy(), truth_wide.to_numpy())
        per_estimator[est] = res
        for ti, t_star in enumerate(t_grid):
            row = {"estimator": est, "t_star": t_star,
                   "count": int(res["counts"][ti]),
                   "skipped": int(res["skipped"][ti])}
            for lev, q in zip(evaluation.QUANTILE_LEVELS, res["quantiles"][ti]):
                row[f"q{int(round(lev * 100)):02d}"] = q
            fig2_rows.append(row)
    fig2_path = out / "fig2_quantiles.tsv"
    write_table(fig2_path, pd.DataFrame(fig2_rows), cfg_hash)

    fig3_rows = []
    for name in CLASS_NAMES:
        for fpr, tpr in zip(roc[name]["fpr"], roc[name]["tpr"]):
            fig3_rows.append({"class": name, "fpr": fpr, "tpr": tpr})
    fig3_path = out / "fig3_roc.tsv"
    write_table(fig3_path, pd.DataFrame(fig3_rows), cfg_hash)

    hi = int(np.argmin(np.abs(t_grid - horizon_col)))
    table1_rows = [{"metric": f"auc_{n.lower()}", "value": roc[n]["auc"]}
                   for n in CLASS_NAMES]
    table1_rows.append({"metric": "bacc", "value": bacc_value})
    for name in ("LCL", "LCR"):
        mean_gain, unstable = tau[name]
        table1_rows.append({"metric": f"tau_{name.lower()}", "value": mean_gain})
        table1_rows.append({"metric": f"unstable_fraction_{name.lower()}",
                            "value": unstable})
        table1_rows.append({"metric": f"n_events_{name.lower()}",
                            "value": float(len(gains[name]))})
    for est in ("moe", "labels", "cv"):
        med = per_estimator[est]["quantiles"][hi][evaluation.QUANTILE_LEVELS.index(0.5)]
        table1_rows.append({"metric": f"median_error_h_{est}", "value": med})
    table1_rows.append({"metric": "n_eval_samples", "value": float(len(samples))})
    table1_rows.append({"metric": "n_skipped_events", "value": float(skipped_events)})
    for note in bacc_notes:
        table1_rows.append({"metric": "note", "value": note})
    table1_path = out / "table1.tsv"
    write_table(table1_path, pd.DataFrame(table1_rows), cfg_hash)

    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    colors = {"moe": "tab:blue", "labels": "tab:green", "cv": "tab:orange"}
    for est, res in per_estimator.items():
        med = res["quantiles"][:, evaluation.QUANTILE_LEVELS.index(0.5)]
        q25 = res["quantiles"][:, evaluation.QUANTILE_LEVELS.index(0.25)]
        q75 = res["quantiles"][:, evaluation.QUANTILE_LEVELS.index(0.75)]
        ax.plot(t_grid, med, label=est.upper(), color=colors[est])
        ax.fill_between(t_grid, q25, q75, alpha=0.2, color=colors[est])
    ax.set_xlabel("prediction time (s)")
    ax.set_ylabel("median lateral error (m)")
    ax.legend()
    fig.tight_layout()
    fig2_svg = out / "fig2.svg"
    save_figure(fig, fig2_svg)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 5))
    for name in CLASS_NAMES:
        ax.plot(roc[name]["fpr"], roc[name]["tpr"],
                label=f"{name} (AUC {roc[name]['auc']:.3f})")
    ax.plot([0, 1], [0, 1], "k--", linewidth=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.legend()
    fig.tight_layout()
    fig3_svg = out / "fig3.svg"
    save_figure(fig, fig3_svg)
    plt.close(fig)

    return [str(table1_path), str(fig2_path), str(fig3_path),
            str(fig2_svg), str(fig3_svg)]


def cmd_context_report(args, cfg, cfg_hash) -> List[str]:
    ds = _load_prepared(args)
    samples, predictions, truth = _load_prediction_tables(args)
    out = Path(args.out)

    label_idx = {name: i for i, name in enumerate(CLASS_NAMES)}
    samples = samples.sort_values("sample_id").reset_index(drop=True)
    labels = samples["label"].map(label_idx).to_numpy()
    densities = samples["density"].to_numpy()

    truth_wide = _pivot(truth, "y_true")
    moe_wide = _pivot(predictions, "y_moe")
    t_grid = np.array(sorted(truth_wide.columns), dtype=float)
    hi = int(np.argmin(np.abs(t_grid - args.horizon)))
    err_h = np.abs(moe_wide.to_numpy()[:, hi] - truth_wide.to_numpy()[:, hi])

    edges = evaluation.density_bin_edges(densities, args.density_bin_width)
    fig4_rows = evaluation.stratify_by_density(err_h, labels, densities, edges)
    fig4_path = out / "fig4_density_errors.tsv"
    write_table(fig4_path, pd.DataFrame(fig4_rows), cfg_hash)

    events = [e for e in ds.events if not e.truncated]
    if events:
        ev_edges = evaluation.density_bin_edges(
            np.array([e.traffic_density for e in events]), args.density_bin_width)
        fig5_rows = evaluation.lc_stats_vs_density(events, ev_edges)
    else:
        fig5_rows = []
    fig5_path = out / "fig5_lc_stats.tsv"
    write_table(fig5_path, pd.DataFrame(fig5_rows), cfg_hash)

    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    df4 = pd.DataFrame(fig4_rows)
    for name in CLASS_NAMES:
        sub = df4[(df4["class"] == name) & (df4["count"] > 0)]
        mids = 0.5 * (sub["bin_low"] + sub["bin_high"])
        ax.plot(mids, sub["median_error"], marker="o", label=name)
    ax.set_xlabel("traffic density (veh/(km*lane))")
    ax.set_ylabel("median lateral error at horizon (m)")
    ax.legend()
    fig.tight_layout()
    fig4_svg = out / "fig4.svg"
    save_figure(fig, fig4_svg)
    plt.close(fig)

    fig, ax1 = plt.subplots(figsize=(6, 4))
    df5 = pd.DataFrame(fig5_rows)
    if not df5.empty:
        sub = df5[df5["count"] > 0]
        mids = 0.5 * (sub["bin_low"] + sub["bin_high"])
        ax1.plot(mids, sub["duration_median"], marker="o", color="black",
                 label="duration")
        ax1.fill_between(mids, sub["duration_q25"], sub["duration_q75"],
                         alpha=0.2, color="black")
        ax1.set_ylabel("lane-change duration (s)")
        ax2 = ax1.twinx()
        ax2.plot(mids, sub["max_vy_median"], marker="s", color="goldenrod",
                 label="max |v_y|")
        ax2.fill_between(mids, sub["max_vy_q25"], sub["max_vy_q75"],
                         alpha=0.2, color="goldenrod")
        ax2.set_ylabel("max lateral speed (m/s)")
    ax1.set_xlabel("traffic density (veh/(km*lane))")
    fig.tight_layout()
    fig5_svg = out / "fig5.svg"
    save_figure(fig, fig5_svg)
    plt.close(fig)

    return [str(fig4_path), str(fig5_path), str(fig4_svg), str(fig5_svg)]


# ---------------------------------------------------------------------------
# Entry point

COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "prepare": cmd_prepare,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "context-report": cmd_context_report,
}


def build_parser() -> argparse.ArgumentParser:
    epilog_lines = ["config defaults:"]
    for section, keys in CONFIG_SCHEMA.items():
        for key, (_, default) in keys.items():
            epilog_lines.append(f"  [{section}] {key} = {default}")
    parser = argparse.ArgumentParser(
        prog="lanepred",
        description="Lateral motion prediction for highway traffic: corpus "
                    "generation, ingestion, training, prediction and reports.",
        epilog="\n".join(epilog_lines),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("corpus", nargs="?", default=None,
                        help="corpus directory for ingest/prepare "
                             "(default: OUT/corpus)")
    parser.add_argument("--config", default=None, help="INI configuration file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument("--fold", type=int, default=6, help="evaluation fold")
    parser.add_argument("--horizon", type=float, default=DEFAULT_HORIZON,
                        help="prediction horizon in seconds")
    parser.add_argument("--density-bin-width", type=float, default=1.0,
                        help="traffic-density bin width for the reports")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg_hash = config_hash(cfg, args)
        artifacts = COMMANDS[args.subcommand](args, cfg, cfg_hash)
        write_manifest(Path(args.out), args.subcommand.replace("-", "_"),
                       cfg_hash, args, artifacts)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for a in artifacts:
        print(a)
    return 0


if __name__ == "__main__":
    sys.exit(main())
