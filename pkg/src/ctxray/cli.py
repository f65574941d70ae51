"""Batch pipeline driver.

Subcommands wire the library stages into file-to-file runs: ``project``
synthesizes radiographs and projected mask archives, ``derive-regions``
appends rule-based regions, ``qa`` filters implausible mask sets,
``biomarkers`` / ``evaluate`` / ``cohort`` measure and compare, and
``phantom`` writes synthetic fixtures.

Every command writes a ``manifest.json`` naming its inputs, outputs,
config hash and per-item status. Item failures never abort the batch;
the exit code reports whether any item failed. Runs are deterministic
for a given config, at any parallelism degree.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .biomarkers import CSV_FIELDS, extract_biomarkers, write_biomarker_csv
from .config import PipelineConfig
from .errors import CtxrayError, InsufficientCohortError
from .maskio import load_maskset, load_labelvolume, save_maskset, save_png
from .metrics import CohortTable, evaluate_masksets, roc_auc, t_test
from .phantom import (
    PhantomSpec,
    enlarged_heart_variant,
    generate_phantom,
    save_phantom,
    scoliosis_variant,
)
from .projection import compose_drr, project_masks
from .qa import compute_class_stats, plausibility_check
from .regions import derive_regions


def _views(arg: str):
    return ("frontal", "lateral") if arg == "both" else (arg,)


def _write_manifest(out_dir: Path, command: str, config: PipelineConfig, items: list):
    manifest = {
        "tool": "ctxray",
        "version": __version__,
        "command": command,
        "config_hash": config.digest(),
        "items": sorted(items, key=lambda it: it["input"]),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return manifest


def _exit_code(items: list) -> int:
    return 1 if any(it["status"] != "ok" for it in items) else 0


# ---------------------------------------------------------------- project

def _project_one(args):
    volume_path, config_dict, out_dir, views = args
    config = PipelineConfig.from_dict(config_dict)
    volume_path = Path(volume_path)
    out_dir = Path(out_dir)
    stem = volume_path.name.replace(".labels", "").split(".")[0]
    item = {"input": str(volume_path), "status": "ok", "outputs": []}
    try:
        from .volume import load_volume

        volume = load_volume(volume_path)
        labels_path = volume_path.with_name(stem + ".labels.json")
        labels = load_labelvolume(labels_path) if labels_path.exists() else None
        for view in views:
            proj = compose_drr(volume, config.projection, view, source_id=stem)
            png_path = out_dir / f"{stem}_{view}.png"
            save_png(proj.image, png_path)
            item["outputs"].append(png_path.name)
            if labels is not None:
                maskset = project_masks(
                    labels, view, config.projection.output_size, source_id=stem
                )
                index, payload = save_maskset(maskset, out_dir / f"{stem}_{view}_masks")
                item["outputs"].extend([index.name, payload.name])
    except (CtxrayError, OSError) as e:
        item["status"] = "error"
        item["error"] = str(e)
    return item


def cmd_project(config: PipelineConfig, inputs: list, out_dir: Path,
                jobs: int = 1, view: str = "both") -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(str(p), asdict(config), str(out_dir), _views(view)) for p in inputs]
    if jobs <= 1:
        items = [_project_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            items = list(pool.map(_project_one, tasks))
    _write_manifest(out_dir, "project", config, items)
    return _exit_code(items)


# ---------------------------------------------------------- derive-regions

def cmd_derive_regions(config: PipelineConfig, inputs: list, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    items = []
    for path in inputs:
        path = Path(path)
        item = {"input": str(path), "status": "ok", "outputs": [], "warnings": []}
        try:
            maskset = load_maskset(path)
            augmented, notes = derive_regions(maskset, config.regions)
            index, payload = save_maskset(augmented, out_dir / path.stem)
            item["outputs"] = [index.name, payload.name]
            item["warnings"] = notes
        except (CtxrayError, OSError) as e:
            item["status"] = "error"
            item["error"] = str(e)
        items.append(item)
    _write_manifest(out_dir, "derive-regions", config, items)
    return _exit_code(items)


# ------------------------------------------------------------------- qa

def cmd_qa(config: PipelineConfig, inputs: list, out_dir: Path,
           filter_passing: bool = False) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    masksets = []
    items = []
    for path in inputs:
        path = Path(path)
        try:
            masksets.append((path, load_maskset(path)))
        except (CtxrayError, OSError) as e:
            items.append({"input": str(path), "status": "error", "error": str(e)})
    if len(masksets) < 2:
        raise InsufficientCohortError(
            f"qa needs >= 2 readable mask archives, got {len(masksets)}"
        )
    stats = compute_class_stats([ms for _, ms in masksets])
    (out_dir / "class_stats.json").write_text(stats.to_json() + "\n")
    summary_rows = []
    filtered_dir = out_dir / "filtered"
    for path, ms in masksets:
        report = plausibility_check(
            ms,
            stats,
            z_max=config.qa.z_max,
            min_rib_pairs=config.qa.min_rib_pairs,
            fail_on_class_deviation=config.qa.fail_on_class_deviation,
        )
        report_path = out_dir / f"{path.stem}.report.json"
        report_path.write_text(report.to_json() + "\n")
        items.append(
            {
                "input": str(path),
                "status": "ok",
                "outputs": [report_path.name],
                "verdict": report.verdict,
            }
        )
        summary_rows.append(
            {
                "source_id": report.source_id or path.stem,
                "verdict": report.verdict,
                "rib_pairs": report.rib_pairs,
                "failed_rules": ";".join(report.failed_rules),
            }
        )
        if filter_passing and report.verdict == "pass":
            filtered_dir.mkdir(exist_ok=True)
            shutil.copy2(path, filtered_dir / path.name)
            payload = path.with_suffix(".rle")
            if payload.exists():
                shutil.copy2(payload, filtered_dir / payload.name)
    with (out_dir / "qa_summary.csv").open("w", newline="") as f:
        writer = csv.DictWriter(
            f, fieldnames=["source_id", "verdict", "rib_pairs", "failed_rules"]
        )
        writer.writeheader()
        writer.writerows(sorted(summary_rows, key=lambda r: r["source_id"]))
    _write_manifest(out_dir, "qa", config, items)
    return _exit_code(items)


# ------------------------------------------------------------- biomarkers

def cmd_biomarkers(config: PipelineConfig, inputs: list, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    items = []
    for path in inputs:
        path = Path(path)
        item = {"input": str(path), "status": "ok", "outputs": ["biomarkers.csv"]}
        try:
            ms = load_maskset(path)
            if not ms.source_id:
                ms.source_id = path.stem
            records.append(extract_biomarkers(ms))
        except (CtxrayError, OSError) as e:
            item["status"] = "error"
            item["error"] = str(e)
        items.append(item)
    records.sort(key=lambda r: r.source_id)
    write_biomarker_csv(records, out_dir / "biomarkers.csv")
    _write_manifest(out_dir, "biomarkers", config, items)
    return _exit_code(items)


# --------------------------------------------------------------- evaluate

def cmd_evaluate(config: PipelineConfig, pred_dir: Path, gt_dir: Path,
                 out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    items = []
    summary_rows = []
    pred_indexes = sorted(p for p in Path(pred_dir).glob("*.json")
                          if not p.name.endswith(".report.json"))
    for pred_path in pred_indexes:
        gt_path = Path(gt_dir) / pred_path.name
        item = {"input": str(pred_path), "status": "ok", "outputs": []}
        try:
            if not gt_path.exists():
                raise CtxrayError(f"no ground-truth archive named {pred_path.name}")
            score = evaluate_masksets(load_maskset(pred_path), load_maskset(gt_path))
            score_path = out_dir / f"{pred_path.stem}.scores.json"
            score_path.write_text(score.to_json() + "\n")
            item["outputs"] = [score_path.name]
            summary_rows.append(
                {
                    "name": pred_path.stem,
                    "mean_iou": score.mean_iou,
                    "mean_dice": score.mean_dice,
                    "mean_hausdorff": score.mean_hausdorff,
                    "undefined_classes": len(score.undefined),
                }
            )
        except (CtxrayError, OSError) as e:
            item["status"] = "error"
            item["error"] = str(e)
        items.append(item)
    with (out_dir / "evaluation_summary.csv").open("w", newline="") as f:
        writer = csv.DictWriter(
            f,
            fieldnames=["name", "mean_iou", "mean_dice", "mean_hausdorff",
                        "undefined_classes"],
        )
        writer.writeheader()
        writer.writerows(summary_rows)
    _write_manifest(out_dir, "evaluate", config, items)
    return _exit_code(items)


# ----------------------------------------------------------------- cohort

def cmd_cohort(config: PipelineConfig, csv_path: Path, value_column: str,
               label_column: str, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    table = CohortTable()
    with Path(csv_path).open(newline="") as f:
        for row in csv.DictReader(f):
            value = row.get(value_column, "")
            label = row.get(label_column, "")
            if value == "" or label == "":
                continue
            table.add(
                row.get("source_id", ""),
                float(value),
                int(float(label)),
                sex=row.get("sex", ""),
                age_group=row.get("age_group", ""),
            )
    t, p = t_test(table.values(1), table.values(0))
    scores, labels = table.scores_and_labels()
    curve, auc = roc_auc(scores, labels)
    report = {
        "value_column": value_column,
        "label_column": label_column,
        "n_pos": int((labels == 1).sum()),
        "n_neg": int((labels == 0).sum()),
        "t_statistic": t,
        "p_value": p,
        "p_value_display": "< 0.0001" if p < 1e-4 else f"{p:.6g}",
        "auc": auc,
    }
    (out_dir / "cohort_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    with (out_dir / "roc_curve.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["fpr", "tpr"])
        writer.writerows(curve)
    with (out_dir / "group_summary.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["sex", "age_group", "label", "n", "mean", "std"])
        for (sex, age, label), stats in table.group_summary().items():
            writer.writerow([sex, age, label, stats["n"], stats["mean"], stats["std"]])
    items = [{"input": str(csv_path), "status": "ok",
              "outputs": ["cohort_report.json", "roc_curve.csv", "group_summary.csv"]}]
    _write_manifest(out_dir, "cohort", config, items)
    return 0


# ---------------------------------------------------------------- phantom

def cmd_phantom(config: PipelineConfig, out_dir: Path, count: int, seed: int,
                size: int, scoliosis_amplitude: float = 0.0,
                heart_half_width: float | None = None, table: bool = False,
                noise_hu: float = 0.0) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    items = []
    for i in range(count):
        spec = PhantomSpec(size=size, seed=seed + i, table=table, noise_hu=noise_hu)
        if scoliosis_amplitude > 0:
            spec = scoliosis_variant(spec, scoliosis_amplitude)
        if heart_half_width is not None:
            spec = enlarged_heart_variant(spec, heart_half_width)
        name = f"phantom_{i:03d}"
        paths = save_phantom(spec, out_dir, name)
        items.append(
            {
                "input": name,
                "status": "ok",
                "outputs": [p.name for p in paths.values()],
            }
        )
    _write_manifest(out_dir, "phantom", config, items)
    return 0


# ------------------------------------------------------------------ main

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxray",
        description="CT-to-radiograph projection and analysis pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, inputs_help):
        p.add_argument("--config", type=Path, help="pipeline config JSON")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("inputs", nargs="+", type=Path, help=inputs_help)

    p = sub.add_parser("project", help="volumes -> radiograph PNGs + mask archives")
    common(p, "volume files (.nii/.nii.gz/.json)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--view", choices=["frontal", "lateral", "both"], default="both")

    p = sub.add_parser("derive-regions", help="append rule-based region classes")
    common(p, "mask archive index files")

    p = sub.add_parser("qa", help="cohort plausibility filtering")
    common(p, "mask archive index files")
    p.add_argument("--filter", action="store_true",
                   help="copy passing archives to <out>/filtered")

    p = sub.add_parser("biomarkers", help="extract biomarker CSV")
    common(p, "mask archive index files")

    p = sub.add_parser("evaluate", help="score predicted vs ground-truth archives")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--pred-dir", type=Path, required=True)
    p.add_argument("--gt-dir", type=Path, required=True)

    p = sub.add_parser("cohort", help="t-test + ROC report from a biomarker CSV")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--values", required=True, help="value column name")
    p.add_argument("--labels", required=True, help="binary label column name")
    p.add_argument("csv", type=Path)

    p = sub.add_parser("phantom", help="write synthetic phantom fixtures")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--scoliosis-amplitude", type=float, default=0.0)
    p.add_argument("--heart-half-width", type=float, default=None)
    p.add_argument("--table", action="store_true")
    p.add_argument("--noise", type=float, default=0.0)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.command == "project":
        return cmd_project(config, args.inputs, args.out, args.jobs, args.view)
    if args.command == "derive-regions":
        return cmd_derive_regions(config, args.inputs, args.out)
    if args.command == "qa":
        return cmd_qa(config, args.inputs, args.out, filter_passing=args.filter)
    if args.command == "biomarkers":
        return cmd_biomarkers(config, args.inputs, args.out)
    if args.command == "evaluate":
        return cmd_evaluate(config, args.pred_dir, args.gt_dir, args.out)
    if args.command == "cohort":
        return cmd_cohort(config, args.csv, args.values, args.labels, args.out)
    if args.command == "phantom":
        return cmd_phantom(
            config,
            args.out,
            args.count,
            args.seed,
            args.size,
            scoliosis_amplitude=args.scoliosis_amplitude,
            heart_half_width=args.heart_half_width,
            table=args.table,
            noise_hu=args.noise,
        )
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
