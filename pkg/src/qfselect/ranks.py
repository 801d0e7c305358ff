"""Ground-truth-label ranks under a classifier, per image and quality variant.

The toy classifier is a multinomial logistic model over 16x16 downsampled
grayscale features; it stands in for an external DNN.  External classifiers
integrate through rank-table JSONL files instead of in-process inference.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jpeg
from .dataset import Manifest, load_image
from .errors import (
    DegenerateLabelsError,
    DuplicateKeyError,
    InvalidRankError,
    MissingRankError,
    QfSelectError,
)
from .metrics import luminance
from .util import atomic_write_text

VARIANT_ORIG = "orig"
_VARIANT_RE = re.compile(r"^(orig|qf[1-9][0-9]?|qf100)$")


def variant_for_qf(qf: int) -> str:
    return f"qf{qf}"


@dataclass(frozen=True)
class RankTable:
    entries: dict

    def rank(self, image_id: str, variant: str) -> int:
        try:
            return self.entries[(image_id, variant)]
        except KeyError:
            raise MissingRankError(f"no rank for ({image_id!r}, {variant!r})") from None

    def has(self, image_id: str, variant: str) -> bool:
        return (image_id, variant) in self.entries


def load_rank_table(path: str | Path) -> RankTable:
    entries = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                image_id = row["image_id"]
                variant = row["variant"]
                rank = row["rank"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise QfSelectError(f"{path}:{lineno}: malformed rank row: {exc}") from exc
            if not isinstance(rank, int) or rank < 1:
                raise InvalidRankError(f"{path}:{lineno}: rank must be an integer >= 1")
            if not _VARIANT_RE.match(str(variant)):
                raise QfSelectError(f"{path}:{lineno}: bad variant {variant!r}")
            key = (str(image_id), str(variant))
            if key in entries:
                raise DuplicateKeyError(f"{path}:{lineno}: duplicate key {key}")
            entries[key] = rank
    return RankTable(entries=entries)


def save_rank_table(table: RankTable, path: str | Path) -> None:
    lines = [
        json.dumps({"image_id": image_id, "variant": variant, "rank": rank}, sort_keys=True)
        for (image_id, variant), rank in table.entries.items()
    ]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


# ---------------------------------------------------------------------------
# Toy classifier
# ---------------------------------------------------------------------------

TOY_FEATURE_SIDE = 16
TOY_FEATURE_DIM = TOY_FEATURE_SIDE * TOY_FEATURE_SIDE


def toy_features(img: np.ndarray) -> np.ndarray:
    """16x16 block-mean grayscale downsample, flattened and standardized."""
    luma = luminance(img)
    h, w = luma.shape
    rb = (np.arange(TOY_FEATURE_SIDE) * h) // TOY_FEATURE_SIDE
    cb = (np.arange(TOY_FEATURE_SIDE) * w) // TOY_FEATURE_SIDE
    pooled = np.add.reduceat(np.add.reduceat(luma, rb, axis=0), cb, axis=1)
    rcounts = np.diff(np.append(rb, h))
    ccounts = np.diff(np.append(cb, w))
    pooled = pooled / np.outer(rcounts, ccounts)
    flat = pooled.reshape(-1)
    std = flat.std()
    return (flat - flat.mean()) / (std if std > 1e-9 else 1.0)


@dataclass(frozen=True)
class ToyClassifier:
    weights: np.ndarray  # (num_classes, TOY_FEATURE_DIM)
    bias: np.ndarray  # (num_classes,)
    learning_rate: float
    epochs: int
    seed: int

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def scores(self, img: np.ndarray) -> np.ndarray:
        return self.weights @ toy_features(img) + self.bias


def train_toy_classifier(
    manifest: Manifest,
    seed: int = 42,
    learning_rate: float = 0.5,
    epochs: int = 300,
) -> ToyClassifier:
    """Fit a multinomial logistic model to the manifest originals."""
    labels = np.array([r.gt_label for r in manifest.records])
    if np.unique(labels).size < 2:
        raise DegenerateLabelsError("need at least two distinct classes to train")
    feats = np.stack([toy_features(load_image(r)) for r in manifest.records])
    n, dim = feats.shape
    k = manifest.num_classes
    rng = np.random.default_rng([seed, 1])
    weights = rng.normal(0.0, 0.01, (k, dim))
    bias = np.zeros(k)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    for _ in range(epochs):
        logits = feats @ weights.T + bias
        logits -= logits.max(axis=1, keepdims=True)
        expl = np.exp(logits)
        probs = expl / expl.sum(axis=1, keepdims=True)
        delta = (probs - onehot) / n
        weights -= learning_rate * (delta.T @ feats)
        bias -= learning_rate * delta.sum(axis=0)
    return ToyClassifier(
        weights=weights, bias=bias, learning_rate=learning_rate, epochs=epochs, seed=seed
    )


def rank_from_scores(scores: np.ndarray, gt_label: int) -> int:
    """1-based rank of the label; score ties count lower class indexes first."""
    if not 0 <= gt_label < scores.shape[0]:
        raise QfSelectError(f"label {gt_label} out of range")
    gt = scores[gt_label]
    better = int((scores > gt).sum())
    tied_before = int((scores[:gt_label] == gt).sum())
    return 1 + better + tied_before


def rank_of(clf: ToyClassifier, img: np.ndarray, gt_label: int) -> int:
    return rank_from_scores(clf.scores(img), gt_label)


def build_rank_table(
    manifest: Manifest,
    clf: ToyClassifier,
    qf_set,
    parallel: int = 1,
) -> RankTable:
    """Rank every image at the original and at each quality factor."""
    qfs = list(qf_set)

    def ranks_for(record):
        img = load_image(record)
        out = [(VARIANT_ORIG, rank_of(clf, img, record.gt_label))]
        for qf in qfs:
            decoded = jpeg.decode(jpeg.encode(img, qf))
            out.append((variant_for_qf(qf), rank_of(clf, decoded, record.gt_label)))
        return out

    entries = {}
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(ranks_for, manifest.records))
    else:
        results = [ranks_for(r) for r in manifest.records]
    for record, per_image in zip(manifest.records, results):
        for variant, rank in per_image:
            entries[(record.image_id, variant)] = rank
    return RankTable(entries=entries)
