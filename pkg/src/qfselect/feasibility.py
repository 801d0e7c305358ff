"""Quality-factor calibration against the MS-SSIM floor and per-image labels.

Calibration keeps the quality factors whose corpus-wide hit rate (fraction
of images meeting the MS-SSIM threshold) reaches the floor; labeling marks
a quality factor feasible for an image when the ground-truth label's rank
under the compressed variant is no worse than under the original.  The two
constraints stay separate: labels never look at MS-SSIM.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import jpeg
from .dataset import Manifest, load_image
from .errors import QfSelectError
from .metrics import DEFAULT_MSSSIM_PARAMS, MsSsimParams, ms_ssim
from .ranks import VARIANT_ORIG, RankTable, variant_for_qf
from .util import atomic_write_text

DEFAULT_QF_SET = (10, 20, 30, 40, 50, 60, 70, 80, 90)


def validate_qf_set(qf_set) -> tuple[int, ...]:
    qfs = tuple(int(q) for q in qf_set)
    if not qfs:
        raise QfSelectError("quality-factor set is empty")
    if any(not 1 <= q <= 100 for q in qfs):
        raise QfSelectError("quality factors must lie in [1, 100]")
    if any(a >= b for a, b in zip(qfs, qfs[1:])):
        raise QfSelectError("quality-factor set must be strictly ascending")
    return qfs


@dataclass(frozen=True)
class CalibrationReport:
    threshold: float
    hit_rate_floor: float
    per_qf_hit_rate: dict
    pruned_set: tuple[int, ...]
    num_images: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "threshold": self.threshold,
                "hit_rate_floor": self.hit_rate_floor,
                "per_qf_hit_rate": {str(q): r for q, r in self.per_qf_hit_rate.items()},
                "pruned_set": list(self.pruned_set),
                "num_images": self.num_images,
            },
            sort_keys=True,
            indent=2,
        )

    @staticmethod
    def from_json(text: str) -> "CalibrationReport":
        raw = json.loads(text)
        return CalibrationReport(
            threshold=float(raw["threshold"]),
            hit_rate_floor=float(raw["hit_rate_floor"]),
            per_qf_hit_rate={int(q): float(r) for q, r in raw["per_qf_hit_rate"].items()},
            pruned_set=tuple(int(q) for q in raw["pruned_set"]),
            num_images=int(raw["num_images"]),
        )


def calibrate(
    manifest: Manifest,
    qf_set=DEFAULT_QF_SET,
    threshold: float = 0.8,
    hit_rate_floor: float = 0.9,
    params: MsSsimParams = DEFAULT_MSSSIM_PARAMS,
    parallel: int = 1,
) -> CalibrationReport:
    """Measure per-QF MS-SSIM hit rates and prune below-floor quality factors."""
    if not 0.0 < threshold <= 1.0:
        raise QfSelectError("threshold must lie in (0, 1]")
    if not 0.0 < hit_rate_floor <= 1.0:
        raise QfSelectError("hit_rate_floor must lie in (0, 1]")
    qfs = validate_qf_set(qf_set)
    if len(manifest) == 0:
        raise QfSelectError("empty manifest")

    def hits_for(record):
        img = load_image(record)
        return [
            1 if ms_ssim(img, jpeg.decode(jpeg.encode(img, qf)), params) >= threshold else 0
            for qf in qfs
        ]

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(hits_for, manifest.records))
    else:
        rows = [hits_for(r) for r in manifest.records]
    n = len(manifest)
    per_qf = {qf: sum(row[i] for row in rows) / n for i, qf in enumerate(qfs)}
    pruned = tuple(qf for qf in qfs if per_qf[qf] >= hit_rate_floor)
    return CalibrationReport(
        threshold=threshold,
        hit_rate_floor=hit_rate_floor,
        per_qf_hit_rate=per_qf,
        pruned_set=pruned,
        num_images=n,
    )


@dataclass(frozen=True)
class FeasibilityRecord:
    image_id: str
    q: tuple[int, ...]


def label_image(image_id: str, rank_table: RankTable, pruned_set) -> FeasibilityRecord:
    """q_j = 1 iff the rank at QF_j is no worse than at the original."""
    orig_rank = rank_table.rank(image_id, VARIANT_ORIG)
    q = tuple(
        1 if rank_table.rank(image_id, variant_for_qf(qf)) <= orig_rank else 0
        for qf in pruned_set
    )
    return FeasibilityRecord(image_id=image_id, q=q)


def build_training_set(
    manifest: Manifest, rank_table: RankTable, pruned_set
) -> list[FeasibilityRecord]:
    return [label_image(r.image_id, rank_table, pruned_set) for r in manifest.records]


def save_feasibility(records, path: str | Path) -> None:
    text = "".join(
        json.dumps({"image_id": rec.image_id, "q": list(rec.q)}) + "\n" for rec in records
    )
    atomic_write_text(path, text)


def load_feasibility(path: str | Path) -> list[FeasibilityRecord]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            q = tuple(int(v) for v in raw["q"])
            if any(v not in (0, 1) for v in q):
                raise QfSelectError(f"non-binary feasibility vector for {raw['image_id']}")
            out.append(FeasibilityRecord(image_id=str(raw["image_id"]), q=q))
    return out
