"""Command-line interface: calibrate, build-ranks, label, train, compress,
evaluate, and a self-contained demo pipeline."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import evaluation, feasibility, model as model_mod, ranks, selection, synth
from .dataset import load_image, load_manifest
from .errors import QfSelectError
from .util import atomic_write_text


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _parse_qf_set(text: str):
    return feasibility.validate_qf_set(int(v) for v in text.split(","))


def _parse_floats(text: str):
    return tuple(float(v) for v in text.split(","))


def _load_calibration(path: str) -> feasibility.CalibrationReport:
    return feasibility.CalibrationReport.from_json(Path(path).read_text(encoding="utf-8"))


def _raw_feature_matrix(manifest) -> np.ndarray:
    return np.stack([model_mod.extract_raw_features(load_image(r)) for r in manifest.records])


def _cmd_calibrate(args) -> int:
    manifest = load_manifest(args.manifest)
    report = feasibility.calibrate(
        manifest,
        qf_set=args.qf_set,
        threshold=args.threshold,
        hit_rate_floor=args.floor,
        parallel=args.parallel,
    )
    atomic_write_text(args.out, report.to_json() + "\n")
    _progress(f"calibrated {len(manifest)} images; pruned set: {list(report.pruned_set)}")
    return 0


def _cmd_build_ranks(args) -> int:
    manifest = load_manifest(args.manifest)
    clf = ranks.train_toy_classifier(manifest, seed=args.seed)
    table = ranks.build_rank_table(manifest, clf, args.qf_set, parallel=args.parallel)
    ranks.save_rank_table(table, args.out)
    _progress(f"ranked {len(manifest)} images over {len(args.qf_set)} quality factors")
    return 0


def _cmd_label(args) -> int:
    manifest = load_manifest(args.manifest)
    table = ranks.load_rank_table(args.ranks)
    pruned = _load_calibration(args.calibration).pruned_set
    records = feasibility.build_training_set(manifest, table, pruned)
    feasibility.save_feasibility(records, args.out)
    _progress(f"labeled {len(records)} images over pruned set {list(pruned)}")
    return 0


def _cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    pruned = _load_calibration(args.calibration).pruned_set
    records = feasibility.load_feasibility(args.labels)
    by_id = {r.image_id: r for r in records}
    labels = np.array([by_id[r.image_id].q for r in manifest.records])
    raw = _raw_feature_matrix(manifest)
    cfg = model_mod.TrainConfig(
        form=args.form,
        pr=args.pr,
        dt=args.dt,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    mdl = model_mod.train(raw, labels, pruned, cfg)
    atomic_write_text(args.out, model_mod.model_to_json(mdl) + "\n")
    for warning in mdl.training["warnings"]:
        _progress(f"warning: {warning}")
    _progress(f"trained {len(mdl.heads)} heads (form {args.form})")
    return 0


def _cmd_compress(args) -> int:
    manifest = load_manifest(args.manifest)
    strategy = args.strategy
    model = None
    table = None
    if strategy == selection.STRATEGY_LEARNED:
        if not args.model:
            raise QfSelectError("--model is required for the learned strategy")
        model = model_mod.load_model(args.model)
        pruned = model.qf_set
    elif strategy == selection.STRATEGY_ORACLE:
        if not args.ranks or not args.calibration:
            raise QfSelectError("--ranks and --calibration are required for oracle")
        table = ranks.load_rank_table(args.ranks)
        pruned = _load_calibration(args.calibration).pruned_set
    elif strategy.startswith("fixed:"):
        qf = int(strategy.split(":", 1)[1])
        pruned = (qf,)
    else:
        raise QfSelectError(f"unknown strategy {strategy!r}")
    out_dir = Path(args.out)
    results = selection.compress_manifest(
        manifest,
        strategy,
        pruned,
        model=model,
        rank_table=table,
        out_dir=out_dir,
        parallel=args.parallel,
    )
    selection.save_selection_log(results, out_dir / "selections.jsonl")
    fallbacks = sum(1 for r in results if r.fallback_used)
    _progress(f"compressed {len(results)} images; {fallbacks} fallbacks")
    return 0


def _cmd_evaluate(args) -> int:
    manifest = load_manifest(args.manifest)
    table = ranks.load_rank_table(args.ranks)
    pruned = _load_calibration(args.calibration).pruned_set
    grid = evaluation.SweepGrid(pr_values=args.pr_grid, dt_values=args.dt_grid)
    raw = _raw_feature_matrix(manifest)
    cfg = model_mod.TrainConfig(
        form=args.form,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    _progress("computing fixed-QF baseline curve")
    base_pts = evaluation.baseline_curve(manifest, args.qf_set, table, parallel=args.parallel)
    _progress("sweeping (pr, dt) grid with the learned selector")
    ad_pts = evaluation.adaptive_curve(
        manifest, raw, pruned, table, grid, cfg, parallel=args.parallel
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "report.csv"
    svg_path = out_dir / "report.svg"
    atomic_write_text(csv_path, evaluation.points_to_csv(base_pts + ad_pts))
    atomic_write_text(svg_path, evaluation.points_to_svg(ad_pts, base_pts))
    _progress(f"wrote {csv_path} and {svg_path}")
    return 0


def _cmd_demo(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _progress(f"generating synthetic corpus ({args.images} images)")
    manifest = synth.generate_corpus(
        out, synth.CorpusSpec(n_images=args.images, seed=args.seed)
    )
    _progress("calibrating quality factors (threshold 0.8, floor 0.9)")
    report = feasibility.calibrate(manifest, threshold=0.8, hit_rate_floor=0.9,
                                   parallel=args.parallel)
    atomic_write_text(out / "calibration.json", report.to_json() + "\n")
    pruned = report.pruned_set

    _progress("training toy classifier and building rank table")
    clf = ranks.train_toy_classifier(manifest, seed=args.seed)
    table = ranks.build_rank_table(
        manifest, clf, feasibility.DEFAULT_QF_SET, parallel=args.parallel
    )
    ranks.save_rank_table(table, out / "ranks.jsonl")

    _progress("labeling feasibility and training the selector")
    records = feasibility.build_training_set(manifest, table, pruned)
    feasibility.save_feasibility(records, out / "labels.jsonl")
    labels = np.array([r.q for r in records])
    raw = _raw_feature_matrix(manifest)
    cfg = model_mod.TrainConfig(form="one", pr=0.3, dt=0.7, seed=args.seed)
    mdl = model_mod.train(raw, labels, pruned, cfg)
    atomic_write_text(out / "model.json", model_mod.model_to_json(mdl) + "\n")

    for strategy, kwargs in (
        (selection.STRATEGY_ORACLE, {"rank_table": table}),
        (selection.STRATEGY_LEARNED, {"model": mdl}),
    ):
        _progress(f"compressing corpus with the {strategy} strategy")
        sub = out / f"compressed_{strategy}"
        results = selection.compress_manifest(
            manifest, strategy, pruned, out_dir=sub, parallel=args.parallel, **kwargs
        )
        selection.save_selection_log(results, sub / "selections.jsonl")

    _progress("evaluating rate-accuracy curves")
    base_pts = evaluation.baseline_curve(
        manifest, feasibility.DEFAULT_QF_SET, table, parallel=args.parallel
    )
    grid = evaluation.SweepGrid(pr_values=(0.3, 0.5), dt_values=(0.5, 0.7, 0.9))
    ad_pts = evaluation.adaptive_curve(
        manifest, raw, pruned, table, grid, cfg, parallel=args.parallel
    )
    atomic_write_text(out / "report.csv", evaluation.points_to_csv(base_pts + ad_pts))
    atomic_write_text(out / "report.svg", evaluation.points_to_svg(ad_pts, base_pts))
    _progress("demo complete")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfselect",
        description="Adaptive JPEG quality-factor selection that preserves "
        "classifier rank under an MS-SSIM floor.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, manifest=True):
        if manifest:
            p.add_argument("--manifest", required=True, help="manifest CSV path")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--parallel", type=int, default=1, help="worker threads")

    p = sub.add_parser("calibrate", help="measure MS-SSIM hit rates and prune the QF set")
    add_common(p)
    p.add_argument("--qf-set", type=_parse_qf_set, default=feasibility.DEFAULT_QF_SET)
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--floor", type=float, default=0.9)
    p.add_argument("--out", required=True)

    p = sub.add_parser("build-ranks", help="rank every image/variant with the toy classifier")
    add_common(p)
    p.add_argument("--qf-set", type=_parse_qf_set, default=feasibility.DEFAULT_QF_SET)
    p.add_argument("--out", required=True)

    p = sub.add_parser("label", help="derive per-image feasibility vectors from ranks")
    add_common(p)
    p.add_argument("--ranks", required=True)
    p.add_argument("--calibration", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train per-QF feasibility heads")
    add_common(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--calibration", required=True)
    p.add_argument("--form", choices=("one", "two"), default="one")
    p.add_argument("--pr", type=float, default=0.5)
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compress", help="compress a corpus with a selection strategy")
    add_common(p)
    p.add_argument(
        "--strategy", required=True, help="learned | oracle | fixed:<qf>"
    )
    p.add_argument("--model")
    p.add_argument("--ranks")
    p.add_argument("--calibration")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("evaluate", help="baseline + adaptive rate-accuracy report")
    add_common(p)
    p.add_argument("--ranks", required=True)
    p.add_argument("--calibration", required=True)
    p.add_argument("--qf-set", type=_parse_qf_set, default=feasibility.DEFAULT_QF_SET)
    p.add_argument("--pr-grid", type=_parse_floats, default=(0.2, 0.3, 0.4, 0.5, 0.6, 0.7))
    p.add_argument("--dt-grid", type=_parse_floats, default=(0.5, 0.6, 0.7, 0.8, 0.9))
    p.add_argument("--form", choices=("one", "two"), default="one")
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("demo", help="run the whole pipeline on a synthetic corpus")
    add_common(p, manifest=False)
    p.add_argument("--images", type=int, default=240)
    p.add_argument("--out", required=True, help="output directory")

    return parser


_COMMANDS = {
    "calibrate": _cmd_calibrate,
    "build-ranks": _cmd_build_ranks,
    "label": _cmd_label,
    "train": _cmd_train,
    "compress": _cmd_compress,
    "evaluate": _cmd_evaluate,
    "demo": _cmd_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "parallel", 1) < 1:
        parser.error("--parallel must be >= 1")
    try:
        return _COMMANDS[args.command](args)
    except QfSelectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
