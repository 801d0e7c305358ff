"""Per-image quality-factor choice and compression.

Three strategies share one compression path: LEARNED (model-predicted
feasibility), ORACLE (ground-truth feasibility from a rank table), and
FIXED (one quality factor for every image, the baseline mode).  The chosen
quality factor is the smallest feasible one; when nothing is predicted
feasible the selector falls back to the largest calibrated quality factor.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jpeg
from .dataset import Manifest, load_image
from .errors import NoCandidateQfError, QfSelectError
from .feasibility import label_image
from .model import SelectorModel, predict_feasible
from .ranks import RankTable
from .util import atomic_write_bytes, atomic_write_text

STRATEGY_LEARNED = "learned"
STRATEGY_ORACLE = "oracle"


def strategy_fixed(qf: int) -> str:
    return f"fixed:{qf}"


@dataclass(frozen=True)
class SelectionResult:
    image_id: str
    chosen_qf: int
    strategy: str
    fallback_used: bool
    compressed_bytes: int
    feasibility: tuple | None


def select_qf(feasibility, pruned_set) -> tuple[int, bool]:
    """Smallest quality factor marked feasible; falls back to the largest."""
    pruned = tuple(pruned_set)
    if not pruned:
        raise NoCandidateQfError("empty quality-factor set")
    y = tuple(feasibility)
    if len(y) != len(pruned):
        raise QfSelectError(
            f"feasibility length {len(y)} != quality-factor set size {len(pruned)}"
        )
    for flag, qf in zip(y, pruned):
        if flag:
            return qf, False
    return max(pruned), True


def compress_adaptive(
    record,
    strategy: str,
    pruned_set,
    model: SelectorModel | None = None,
    rank_table: RankTable | None = None,
    out_dir: Path | None = None,
    img: np.ndarray | None = None,
) -> SelectionResult:
    """Select a quality factor for one image and encode it.

    Writes ``<image_id>.jpg`` under ``out_dir`` when given; otherwise the
    encoded size is still measured in memory.
    """
    if img is None:
        img = load_image(record)
    if strategy == STRATEGY_LEARNED:
        if model is None:
            raise QfSelectError("learned strategy requires a model")
        if tuple(model.qf_set) != tuple(pruned_set):
            raise QfSelectError(
                f"model QF set {model.qf_set} != calibrated set {tuple(pruned_set)}"
            )
        feas = predict_feasible(model, img)
        chosen, fallback = select_qf(feas, pruned_set)
    elif strategy == STRATEGY_ORACLE:
        if rank_table is None:
            raise QfSelectError("oracle strategy requires a rank table")
        feas = label_image(record.image_id, rank_table, pruned_set).q
        chosen, fallback = select_qf(feas, pruned_set)
    elif strategy.startswith("fixed:"):
        chosen = int(strategy.split(":", 1)[1])
        feas = None
        fallback = False
    else:
        raise QfSelectError(f"unknown strategy {strategy!r}")

    blob = jpeg.encode(img, chosen)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(out_dir / f"{record.image_id}.jpg", blob.data)
    return SelectionResult(
        image_id=record.image_id,
        chosen_qf=chosen,
        strategy=strategy,
        fallback_used=fallback,
        compressed_bytes=len(blob.data),
        feasibility=feas,
    )


def compress_manifest(
    manifest: Manifest,
    strategy: str,
    pruned_set,
    model: SelectorModel | None = None,
    rank_table: RankTable | None = None,
    out_dir: Path | None = None,
    parallel: int = 1,
) -> list[SelectionResult]:
    """Compress every image; results come back in manifest order."""

    def one(record):
        return compress_adaptive(
            record, strategy, pruned_set, model=model, rank_table=rank_table, out_dir=out_dir
        )

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(one, manifest.records))
    return [one(r) for r in manifest.records]


def save_selection_log(results, path: str | Path) -> None:
    text = "".join(
        json.dumps(
            {
                "image_id": r.image_id,
                "qf": r.chosen_qf,
                "fallback": r.fallback_used,
                "bytes": r.compressed_bytes,
                "strategy": r.strategy,
            },
            sort_keys=True,
        )
        + "\n"
        for r in results
    )
    atomic_write_text(path, text)


def load_selection_log(path: str | Path) -> list[SelectionResult]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            out.append(
                SelectionResult(
                    image_id=str(raw["image_id"]),
                    chosen_qf=int(raw["qf"]),
                    strategy=str(raw["strategy"]),
                    fallback_used=bool(raw["fallback"]),
                    compressed_bytes=int(raw["bytes"]),
                    feasibility=None,
                )
            )
    return out
