"""Rate-accuracy evaluation: compression ratio, top-k accuracy, baseline and
adaptive curves, CSV/SVG report emission."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Manifest
from .errors import CoverageMismatchError, NoDataError, QfSelectError
from .feasibility import build_training_set
from .model import TrainConfig, train
from .ranks import VARIANT_ORIG, RankTable, variant_for_qf
from .selection import (
    STRATEGY_LEARNED,
    STRATEGY_ORACLE,
    compress_manifest,
    strategy_fixed,
)


@dataclass(frozen=True)
class RaPoint:
    cr: float
    top1: float
    top5: float
    strategy: str
    pr: float | None = None
    dt: float | None = None
    qf: int | None = None

    def __post_init__(self):
        if self.cr <= 0:
            raise QfSelectError("compression ratio must be positive")
        if not 0.0 <= self.top1 <= self.top5 <= 1.0:
            raise QfSelectError("need 0 <= top1 <= top5 <= 1")


@dataclass(frozen=True)
class SweepGrid:
    pr_values: tuple = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
    dt_values: tuple = (0.5, 0.6, 0.7, 0.8, 0.9)

    def __post_init__(self):
        if not self.pr_values or not self.dt_values:
            raise QfSelectError("sweep grid must be non-empty")
        if any(p <= 0 for p in self.pr_values):
            raise QfSelectError("precision constants must be > 0")
        if any(not 0.0 < d < 1.0 for d in self.dt_values):
            raise QfSelectError("decision thresholds must lie in (0, 1)")

    def pairs(self) -> list[tuple[float, float]]:
        seen = set()
        out = []
        for pr in self.pr_values:
            for dt in self.dt_values:
                key = (float(pr), float(dt))
                if key in seen:
                    warnings.warn(f"duplicate sweep pair {key}; dropped", stacklevel=2)
                    continue
                seen.add(key)
                out.append(key)
        return out


def compression_ratio(manifest: Manifest, selections) -> float:
    """Total original bytes over total compressed bytes."""
    by_id = {}
    for sel in selections:
        if sel.image_id in by_id:
            raise CoverageMismatchError(f"image {sel.image_id!r} appears twice in the log")
        by_id[sel.image_id] = sel
    manifest_ids = {r.image_id for r in manifest.records}
    if set(by_id) != manifest_ids:
        missing = sorted(manifest_ids - set(by_id))[:3]
        extra = sorted(set(by_id) - manifest_ids)[:3]
        raise CoverageMismatchError(
            f"selection log does not cover the manifest (missing={missing}, extra={extra})"
        )
    total_orig = sum(r.original_bytes for r in manifest.records)
    total_comp = sum(s.compressed_bytes for s in by_id.values())
    if total_comp <= 0:
        raise QfSelectError("total compressed size is zero")
    return total_orig / total_comp


def topk_accuracy(ranks, k: int) -> float:
    """Fraction of rank entries at or below k."""
    ranks = list(ranks)
    if k < 1:
        raise QfSelectError("k must be >= 1")
    if not ranks:
        raise QfSelectError("no ranks given")
    return sum(1 for r in ranks if r <= k) / len(ranks)


def accuracy_at_selection(manifest: Manifest, selections, rank_table: RankTable, k: int) -> float:
    ranks = []
    by_id = {s.image_id: s for s in selections}
    for record in manifest.records:
        sel = by_id[record.image_id]
        ranks.append(rank_table.rank(record.image_id, variant_for_qf(sel.chosen_qf)))
    return topk_accuracy(ranks, k)


def original_accuracy(manifest: Manifest, rank_table: RankTable, k: int) -> float:
    return topk_accuracy(
        [rank_table.rank(r.image_id, VARIANT_ORIG) for r in manifest.records], k
    )


def baseline_curve(
    manifest: Manifest,
    qf_set,
    rank_table: RankTable,
    parallel: int = 1,
) -> list[RaPoint]:
    """One fixed-QF rate-accuracy point per quality factor."""
    points = []
    for qf in qf_set:
        selections = compress_manifest(
            manifest, strategy_fixed(qf), (qf,), parallel=parallel
        )
        cr = compression_ratio(manifest, selections)
        points.append(
            RaPoint(
                cr=cr,
                top1=accuracy_at_selection(manifest, selections, rank_table, 1),
                top5=accuracy_at_selection(manifest, selections, rank_table, 5),
                strategy=strategy_fixed(qf),
                qf=qf,
            )
        )
    return points


def oracle_point(
    manifest: Manifest, pruned_set, rank_table: RankTable, parallel: int = 1
) -> RaPoint:
    selections = compress_manifest(
        manifest, STRATEGY_ORACLE, pruned_set, rank_table=rank_table, parallel=parallel
    )
    return RaPoint(
        cr=compression_ratio(manifest, selections),
        top1=accuracy_at_selection(manifest, selections, rank_table, 1),
        top5=accuracy_at_selection(manifest, selections, rank_table, 5),
        strategy=STRATEGY_ORACLE,
    )


def adaptive_curve(
    manifest: Manifest,
    raw_features: np.ndarray,
    pruned_set,
    rank_table: RankTable,
    grid: SweepGrid = SweepGrid(),
    base_config: TrainConfig = TrainConfig(),
    parallel: int = 1,
) -> list[RaPoint]:
    """Sweep (pr, dt) pairs with the LEARNED strategy; one point per pair.

    One pr value is shared by all heads and needs one training run; dt is
    applied at inference, so each trained model serves every dt value.
    Points come back sorted by compression ratio.
    """
    labels = np.array(
        [rec.q for rec in build_training_set(manifest, rank_table, pruned_set)]
    )
    points = []
    models = {}
    for pr, dt in grid.pairs():
        if pr not in models:
            cfg = TrainConfig(
                form=base_config.form,
                pr=pr,
                dt=dt,
                epochs=base_config.epochs,
                batch_size=base_config.batch_size,
                learning_rate=base_config.learning_rate,
                seed=base_config.seed,
            )
            models[pr] = train(raw_features, labels, pruned_set, cfg)
        mdl = models[pr]
        for head in mdl.heads:
            head.dt = dt
        selections = compress_manifest(
            manifest, STRATEGY_LEARNED, pruned_set, model=mdl, parallel=parallel
        )
        points.append(
            RaPoint(
                cr=compression_ratio(manifest, selections),
                top1=accuracy_at_selection(manifest, selections, rank_table, 1),
                top5=accuracy_at_selection(manifest, selections, rank_table, 5),
                strategy=STRATEGY_LEARNED,
                pr=pr,
                dt=dt,
            )
        )
    return sorted(points, key=lambda p: p.cr)


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

CSV_HEADER = ["cr", "top1", "top5", "strategy", "pr", "dt", "qf"]


def points_to_csv(points) -> str:
    points = list(points)
    if not points:
        raise NoDataError("no rate-accuracy points to report")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in points:
        writer.writerow(
            [
                repr(p.cr),
                repr(p.top1),
                repr(p.top5),
                p.strategy,
                "" if p.pr is None else repr(p.pr),
                "" if p.dt is None else repr(p.dt),
                "" if p.qf is None else p.qf,
            ]
        )
    return buf.getvalue()


def points_from_csv(text: str) -> list[RaPoint]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_HEADER:
        raise QfSelectError(f"unexpected report header {header}")
    out = []
    for row in reader:
        if not row:
            continue
        out.append(
            RaPoint(
                cr=float(row[0]),
                top1=float(row[1]),
                top5=float(row[2]),
                strategy=row[3],
                pr=float(row[4]) if row[4] else None,
                dt=float(row[5]) if row[5] else None,
                qf=int(row[6]) if row[6] else None,
            )
        )
    return out


def _svg_series(points, x0, y0, width, height, cr_range, acc_range, accessor):
    cr_min, cr_max = cr_range
    acc_min, acc_max = acc_range
    coords = []
    for p in sorted(points, key=lambda q: q.cr):
        fx = 0.5 if cr_max == cr_min else (p.cr - cr_min) / (cr_max - cr_min)
        fy = 0.5 if acc_max == acc_min else (accessor(p) - acc_min) / (acc_max - acc_min)
        coords.append((x0 + fx * width, y0 + height - fy * height))
    return coords


def points_to_svg(adaptive_points, baseline_points) -> str:
    """Deterministic line chart: baseline dashed, adaptive solid."""
    all_points = list(adaptive_points) + list(baseline_points)
    if not all_points:
        raise NoDataError("no rate-accuracy points to report")
    w, h = 720, 480
    x0, y0, pw, ph = 70, 30, w - 100, h - 90
    cr_min = min(p.cr for p in all_points)
    cr_max = max(p.cr for p in all_points)
    acc_min = min(min(p.top1 for p in all_points), 0.0)
    acc_max = 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for i in range(5):
        fx = x0 + pw * i / 4
        cr_val = cr_min + (cr_max - cr_min) * i / 4
        parts.append(
            f'<text x="{fx:.1f}" y="{y0 + ph + 18}" font-size="11" '
            f'text-anchor="middle">{cr_val:.2f}</text>'
        )
        fy = y0 + ph - ph * i / 4
        acc_val = acc_min + (acc_max - acc_min) * i / 4
        parts.append(
            f'<text x="{x0 - 8}" y="{fy + 4:.1f}" font-size="11" '
            f'text-anchor="end">{acc_val:.2f}</text>'
        )
    parts.append(
        f'<text x="{x0 + pw / 2}" y="{h - 12}" font-size="12" '
        f'text-anchor="middle">compression ratio</text>'
    )
    series = [
        (baseline_points, lambda p: p.top1, "gray", "6,4", "baseline top-1"),
        (baseline_points, lambda p: p.top5, "black", "6,4", "baseline top-5"),
        (adaptive_points, lambda p: p.top1, "tomato", None, "adaptive top-1"),
        (adaptive_points, lambda p: p.top5, "royalblue", None, "adaptive top-5"),
    ]
    legend_y = y0 + 14
    for pts, accessor, color, dash, label in series:
        pts = list(pts)
        if not pts:
            continue
        coords = _svg_series(
            pts, x0, y0, pw, ph, (cr_min, cr_max), (acc_min, acc_max), accessor
        )
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        parts.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"{dash_attr}/>'
        )
        for x, y in coords:
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>')
        parts.append(
            f'<text x="{x0 + pw - 8}" y="{legend_y}" font-size="11" text-anchor="end" '
            f'fill="{color}">{label}</text>'
        )
        legend_y += 14
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(adaptive_points, baseline_points, csv_path, svg_path) -> None:
    """Write the combined CSV and the SVG chart."""
    points = list(baseline_points) + list(adaptive_points)
    Path(csv_path).write_text(points_to_csv(points), encoding="utf-8")
    Path(svg_path).write_text(points_to_svg(adaptive_points, baseline_points), encoding="utf-8")
