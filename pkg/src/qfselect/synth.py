"""Deterministic synthetic corpus with two image archetypes.

Classes 0-3 are "robust": their identity is the direction of a strong
brightness gradient, which survives even QF 10 (block-DC structure).
Classes 4-7 are "fragile": their identity is a low-amplitude stripe/plaid
pattern whose aligned DCT coefficient quantizes to zero below roughly
QF 70, so the classifier rank of fragile images degrades under aggressive
compression while robust images keep theirs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import Manifest, load_manifest, write_manifest
from .util import atomic_write_bytes

NUM_CLASSES = 8

# Stripe amplitude targets an aligned (0,1) DCT coefficient of ~5.66*A; with
# A=0.70 the coefficient (~3.96) quantizes away at QF<=60 (step 9) and
# survives at QF>=70 (step 7).  The plaid sits at (1,1) where the same window
# needs A=1.0 (coefficient 4*A against steps 10/7).
STRIPE_AMP = 0.70
PLAID_AMP = 1.00


@dataclass(frozen=True)
class CorpusSpec:
    n_images: int = 240
    image_size: int = 64
    seed: int = 42


def _smooth_noise(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Unit-std low-frequency field (box-smoothed noise)."""
    field = rng.normal(0.0, 1.0, (h, w))
    kernel = np.ones(9) / 9.0
    for _ in range(3):
        field = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="same"), 1, field)
        field = np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="same"), 0, field)
    std = field.std()
    return field / (std if std > 1e-9 else 1.0)


def _stripe(n: int) -> np.ndarray:
    # aligned with the first AC basis of the 8x8 DCT (period 16 px)
    return np.cos((2.0 * np.arange(n) + 1.0) * np.pi / 16.0)


def generate_image(cls: int, rng: np.random.Generator, size: int = 64) -> np.ndarray:
    h = w = size
    if cls < 4:
        theta = cls * (np.pi / 2.0) + rng.uniform(-0.45, 0.45)
        mag = rng.uniform(18.0, 30.0)
        base = rng.uniform(110.0, 150.0)
        yy, xx = np.meshgrid(np.linspace(-1, 1, h), np.linspace(-1, 1, w), indexing="ij")
        field = base + mag * (np.cos(theta) * xx + np.sin(theta) * yy)
        field = field + rng.uniform(1.5, 3.0) * _smooth_noise(rng, h, w)
        field = field + rng.normal(0.0, 1.0, (h, w))
    else:
        amp = rng.uniform(0.92, 1.08)
        col = _stripe(w)[None, :]
        row = _stripe(h)[:, None]
        if cls == 4:
            pattern = STRIPE_AMP * np.broadcast_to(col, (h, w))
        elif cls == 5:
            pattern = STRIPE_AMP * np.broadcast_to(row, (h, w))
        elif cls == 6:
            pattern = PLAID_AMP * row * col
        else:
            pattern = -STRIPE_AMP * np.broadcast_to(col, (h, w))
        field = 128.0 + amp * pattern + rng.normal(0.0, 0.3, (h, w))
    tint = rng.uniform(-8.0, 8.0, 3)
    img = field[:, :, None] + tint[None, None, :]
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def generate_corpus(out_dir: str | Path, spec: CorpusSpec = CorpusSpec()) -> Manifest:
    """Write PNGs plus a manifest under ``out_dir``; returns the manifest."""
    out_dir = Path(out_dir)
    img_dir = out_dir / "corpus"
    img_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(spec.n_images):
        cls = i % NUM_CLASSES
        rng = np.random.default_rng([spec.seed, i])
        img = generate_image(cls, rng, spec.image_size)
        image_id = f"img_{i:04d}"
        rel = f"corpus/{image_id}.png"
        buf = io.BytesIO()
        Image.fromarray(img).save(buf, "PNG")
        atomic_write_bytes(out_dir / rel, buf.getvalue())
        rows.append((image_id, rel, cls))
    manifest_path = out_dir / "manifest.csv"
    write_manifest(manifest_path, NUM_CLASSES, rows)
    return load_manifest(manifest_path)
