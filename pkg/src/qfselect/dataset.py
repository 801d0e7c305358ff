"""Image corpus manifests and image file loading.

A manifest is a CSV file with a ``# num_classes=K`` pragma line followed by
a ``image_id,path,gt_label`` header.  Paths are resolved relative to the
manifest's directory.  Manifest order is the canonical iteration order for
every batch operation in the package.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import jpeg
from .errors import (
    DecodeError,
    DuplicateIdError,
    LabelOutOfRangeError,
    ManifestError,
    UnsupportedFormatError,
)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    path: Path
    gt_label: int
    original_bytes: int


@dataclass(frozen=True)
class Manifest:
    num_classes: int
    records: tuple[ImageRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    num_classes = None
    rows = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        pending = []
        for line in fh:
            stripped = line.strip()
            if stripped.startswith("#"):
                body = stripped.lstrip("#").strip()
                if body.startswith("num_classes="):
                    num_classes = int(body.split("=", 1)[1])
                continue
            if stripped:
                pending.append(line)
        reader = csv.DictReader(io.StringIO("".join(pending)))
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
            "image_id",
            "path",
            "gt_label",
        ]:
            raise ManifestError(f"expected header image_id,path,gt_label in {path}")
        rows = list(reader)
    if num_classes is None:
        raise ManifestError(f"missing '# num_classes=K' pragma in {path}")
    if num_classes < 1:
        raise ManifestError("num_classes must be >= 1")
    if not rows:
        raise ManifestError(f"manifest {path} has no records")

    base = path.parent
    seen: set[str] = set()
    records = []
    for row in rows:
        image_id = row["image_id"].strip()
        if image_id in seen:
            raise DuplicateIdError(f"duplicate image_id {image_id!r}")
        seen.add(image_id)
        gt_label = int(row["gt_label"])
        if not 0 <= gt_label < num_classes:
            raise LabelOutOfRangeError(
                f"gt_label {gt_label} out of range for num_classes={num_classes}"
            )
        img_path = Path(row["path"])
        if not img_path.is_absolute():
            img_path = base / img_path
        if not img_path.is_file():
            raise ManifestError(f"referenced image missing: {img_path}")
        records.append(
            ImageRecord(
                image_id=image_id,
                path=img_path,
                gt_label=gt_label,
                original_bytes=os.stat(img_path).st_size,
            )
        )
    return Manifest(num_classes=num_classes, records=tuple(records))


def write_manifest(path: str | Path, num_classes: int, rows) -> None:
    """Write manifest rows of (image_id, relative_path, gt_label)."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# num_classes={num_classes}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "path", "gt_label"])
        for image_id, rel_path, gt_label in rows:
            writer.writerow([image_id, rel_path, gt_label])


_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def load_image_bytes(data: bytes, source: str = "<bytes>") -> np.ndarray:
    """Decode PNG, PPM (P6), or baseline JPEG bytes to (H, W, 3) uint8."""
    if data[:2] == b"\xff\xd8":
        return jpeg.decode(data)
    if data[: len(_PNG_MAGIC)] == _PNG_MAGIC or data[:2] == b"P6":
        try:
            with Image.open(io.BytesIO(data)) as img:
                return np.asarray(img.convert("RGB"), np.uint8)
        except (UnidentifiedImageError, OSError, SyntaxError) as exc:
            raise DecodeError(f"failed to decode {source}: {exc}") from exc
    raise UnsupportedFormatError(f"{source}: not a PNG, P6 PPM, or JPEG file")


def load_image(record: ImageRecord | str | Path) -> np.ndarray:
    """Load a record's image file as an (H, W, 3) uint8 array.

    Grayscale sources are replicated to three channels.
    """
    path = record.path if isinstance(record, ImageRecord) else Path(record)
    data = path.read_bytes()
    return load_image_bytes(data, source=str(path))
