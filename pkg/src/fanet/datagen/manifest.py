"""Dataset directory format and image file I/O.

A dataset directory holds one 16-bit grayscale PNG per sample, a ``manifest.jsonl``
with one record per sample and a ``manifest.meta.json`` sidecar recording how pixel
values map to stored integers. Record fields are always written in the order
``path, identity_id, pose, illumination, occlusion, split, native_resolution``.
"""

from __future__ import annotations

from logging import getLogger
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from pydantic import BaseModel, ConfigDict

from fanet.config import Split
from fanet.datagen.dataset import SampleSet, check_split_disjoint
from fanet.datagen.images import Image
from fanet.datagen.render import Sample
from fanet.exceptions import InputValidationError

logger = getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
META_NAME = "manifest.meta.json"

_U16_MAX = 65535


class ManifestRecord(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    path: str
    identity_id: int
    pose: float
    illumination: float
    occlusion: bool
    split: Split
    native_resolution: int


class PixelMapping(BaseModel):
    """Affine map ``stored = round((value + offset) * scale)``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dtype: str = "uint16"
    offset: float = 1.0
    scale: float = _U16_MAX / 2.0

    def encode(self, pixels: np.ndarray) -> np.ndarray:
        return np.round((pixels + self.offset) * self.scale).clip(0, _U16_MAX).astype(np.uint16)

    def decode(self, stored: np.ndarray) -> np.ndarray:
        return np.clip(stored.astype(np.float64) / self.scale - self.offset, -1.0, 1.0)


def save_image(img: Image, path: Path, mapping: PixelMapping = PixelMapping()) -> None:
    """Write the first channel of ``img`` as a 16-bit grayscale PNG."""
    path.parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(mapping.encode(img.pixels[:, :, 0])).save(path, format="PNG")


def load_image(path: Path, mapping: PixelMapping = PixelMapping()) -> Image:
    """Read a grayscale image of any resolution into [-1, 1].

    16-bit files are decoded through ``mapping``; anything else is converted to
    8-bit luminance first.
    """
    with PILImage.open(path) as handle:
        if handle.mode in ("I;16", "I;16B", "I;16L", "I"):
            pixels = mapping.decode(np.asarray(handle, dtype=np.int64))
        else:
            luminance = np.asarray(handle.convert("L"), dtype=np.float64)
            pixels = luminance / 127.5 - 1.0
    if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1]:
        raise InputValidationError(f"expected a square grayscale image, got {pixels.shape}")
    return Image.from_array(pixels)


def write_dataset(root: Path, dataset: SampleSet) -> Path:
    """Write ``dataset`` under ``root``; returns the manifest path."""
    mapping = PixelMapping()
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for index, sample in enumerate(dataset):
        relative = f"{sample.split}/{sample.identity_id:04d}/{index:06d}.png"
        save_image(sample.image, root / relative, mapping)
        record = ManifestRecord(
            path=relative,
            identity_id=sample.identity_id,
            pose=sample.pose,
            illumination=sample.illumination,
            occlusion=sample.occlusion,
            split=sample.split,
            native_resolution=sample.image.native_resolution,
        )
        lines.append(record.model_dump_json())
    manifest = root / MANIFEST_NAME
    manifest.write_text("\n".join(lines) + "\n")
    (root / META_NAME).write_text(mapping.model_dump_json(indent=2) + "\n")
    logger.info("Wrote %d samples to %s", len(dataset), root)
    return manifest


def read_manifest(root: Path) -> list[ManifestRecord]:
    manifest = root / MANIFEST_NAME
    if not manifest.exists():
        raise InputValidationError(f"no {MANIFEST_NAME} in {root}", path=str(root))
    return [
        ManifestRecord.model_validate_json(line)
        for line in manifest.read_text().splitlines()
        if line.strip()
    ]


def read_dataset(root: Path) -> SampleSet:
    """Load a dataset directory written by :func:`write_dataset` (or by hand)."""
    meta = root / META_NAME
    mapping = PixelMapping()
    if meta.exists():
        mapping = PixelMapping.model_validate_json(meta.read_text())
    samples = []
    for record in read_manifest(root):
        image = load_image(root / record.path, mapping)
        samples.append(
            Sample(
                image=Image(image.pixels, min(record.native_resolution, image.side)),
                identity_id=record.identity_id,
                pose=record.pose,
                illumination=record.illumination,
                occlusion=record.occlusion,
                split=record.split,
            )
        )
    dataset = SampleSet(samples)
    check_split_disjoint(dataset)
    return dataset
