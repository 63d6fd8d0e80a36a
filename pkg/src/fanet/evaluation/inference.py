"""Inference with trained models: features, face normalization and feature transfer.

Inputs of any side are bicubic-resized to the network side first, keeping their
native resolution.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np
import torch
from numpy.typing import NDArray
from torch import Tensor

from fanet.config import ModelName
from fanet.datagen.images import Image, stack_pixels
from fanet.datagen.resize import bicubic_resize
from fanet.evaluation.metrics import pair_distances, unit_rows
from fanet.exceptions import InputValidationError
from fanet.nets.forward import dec_forward, enc_forward, enc_z_forward, zeros_z
from fanet.nets.params import ParamStore


def network_input(store: ParamStore, images: Sequence[Image]) -> Tensor:
    side = store.cfg.image_side
    if not images:
        raise InputValidationError("no images given")
    resized = [img if img.side == side else bicubic_resize(img, side) for img in images]
    return torch.from_numpy(stack_pixels(resized))


def _chunks(images: Sequence[Image], size: int) -> Iterator[Sequence[Image]]:
    for start in range(0, len(images), size):
        yield images[start : start + size]


def _to_images(batch: Tensor) -> list[Image]:
    return [Image.from_array(pixels) for pixels in batch.detach().double().numpy()]


@torch.no_grad()
def raw_features(
    store: ParamStore, which: ModelName, images: Sequence[Image], *, batch_size: int = 64
) -> Tensor:
    """Un-normalised identity features, one row per image."""
    store.require(which)
    rows = [
        enc_forward(which, store, network_input(store, chunk))
        for chunk in _chunks(images, batch_size)
    ]
    return torch.cat(rows)


def extract_features(
    store: ParamStore, which: ModelName, images: Sequence[Image], *, batch_size: int = 64
) -> NDArray[np.float64]:
    """Unit-L2 identity features from Enc_H or Enc_L, one row per image.

    Raises:
        PrerequisiteError: If the store does not hold ``which``.
    """
    return unit_rows(raw_features(store, which, images, batch_size=batch_size).double().numpy())


def extract_feature(store: ParamStore, which: ModelName, img: Image) -> NDArray[np.float64]:
    return extract_features(store, which, [img])[0]


@torch.no_grad()
def nonidentity_features(
    store: ParamStore, images: Sequence[Image], *, batch_size: int = 64
) -> NDArray[np.float64]:
    rows = [
        enc_z_forward(store, network_input(store, chunk)) for chunk in _chunks(images, batch_size)
    ]
    return torch.cat(rows).double().numpy()


@torch.no_grad()
def normalize_faces(
    store: ParamStore,
    images: Sequence[Image],
    which: ModelName = ModelName.ENC_L,
    *,
    batch_size: int = 64,
) -> list[Image]:
    """``Dec(f, 0)`` for every image, with ``f`` the raw feature from ``which``."""
    store.require(which, ModelName.DEC)
    faces: list[Image] = []
    for chunk in _chunks(images, batch_size):
        f = enc_forward(which, store, network_input(store, chunk))
        faces.extend(_to_images(dec_forward(store, f, zeros_z(f, store.cfg.d_z))))
    return faces


def normalize_face(store: ParamStore, img: Image, which: ModelName = ModelName.ENC_L) -> Image:
    """The frontal, identity-only face the decoder draws from ``img``'s identity feature.

    Raises:
        PrerequisiteError: If the store lacks ``which`` or the decoder.
    """
    return normalize_faces(store, [img], which)[0]


@torch.no_grad()
def feature_transfer(store: ParamStore, img_1: Image, img_2: Image) -> tuple[Image, Image]:
    """``(Dec(f_1, z_2), Dec(f_2, z_1))``: each identity under the other's nuisances."""
    store.require(ModelName.ENC_H, ModelName.ENC_Z, ModelName.DEC)
    x = network_input(store, [img_1, img_2])
    f = enc_forward(ModelName.ENC_H, store, x)
    z = enc_z_forward(store, x)
    swapped = dec_forward(store, f, z.flip(0))
    first, second = _to_images(swapped)
    return first, second


@dataclass(frozen=True)
class DisentangledViews:
    reconstruction: Image
    identity_only: Image
    nonidentity_only: Image


@torch.no_grad()
def disentangle_views(store: ParamStore, img: Image) -> DisentangledViews:
    """Decodes of ``(f, z)``, ``(f, 0)`` and ``(0, z)`` for one image."""
    store.require(ModelName.ENC_H, ModelName.ENC_Z, ModelName.DEC)
    x = network_input(store, [img])
    f = enc_forward(ModelName.ENC_H, store, x)
    z = enc_z_forward(store, x)
    f_batch = torch.cat([f, f, torch.zeros_like(f)])
    z_batch = torch.cat([z, torch.zeros_like(z), z])
    full, identity, nonidentity = _to_images(dec_forward(store, f_batch, z_batch))
    return DisentangledViews(full, identity, nonidentity)


@dataclass(frozen=True)
class FeatureDistanceReport:
    """Enc_H cosine distances to each probe's gallery face.

    Attributes:
        input_distances: From the bicubic-upsampled probe.
        normalized_distances: From the normalized probe.
    """

    input_distances: NDArray[np.float64]
    normalized_distances: NDArray[np.float64]

    @property
    def mean_input(self) -> float:
        return float(np.mean(self.input_distances))

    @property
    def mean_normalized(self) -> float:
        return float(np.mean(self.normalized_distances))

    @property
    def fraction_closer(self) -> float:
        """Share of probes whose normalized face is strictly closer to the gallery face."""
        return float(np.mean(self.normalized_distances < self.input_distances))


def feature_distance_report(
    store: ParamStore,
    probes: Sequence[Image],
    gallery: Sequence[Image],
    which: ModelName = ModelName.ENC_L,
    *,
    batch_size: int = 64,
) -> FeatureDistanceReport:
    """Compare each probe and its normalized face against the matching gallery face.

    ``gallery[i]`` is the high-resolution face of ``probes[i]``'s identity.
    """
    if len(probes) != len(gallery):
        raise InputValidationError(
            f"{len(probes)} probes but {len(gallery)} gallery faces", probes=len(probes)
        )
    normalized = normalize_faces(store, probes, which, batch_size=batch_size)
    target = extract_features(store, ModelName.ENC_H, gallery, batch_size=batch_size)
    upsampled = extract_features(store, ModelName.ENC_H, probes, batch_size=batch_size)
    renormalized = extract_features(store, ModelName.ENC_H, normalized, batch_size=batch_size)
    return FeatureDistanceReport(
        input_distances=pair_distances(upsampled, target),
        normalized_distances=pair_distances(renormalized, target),
    )


@torch.no_grad()
def reconstruct(
    store: ParamStore,
    low: Sequence[Image],
    high: Sequence[Image],
    which: ModelName = ModelName.ENC_L,
    *,
    batch_size: int = 64,
) -> list[Image]:
    """``Dec(f(low_i), Enc_Z(high_i))``: each low-resolution identity with its HR nuisances."""
    if len(low) != len(high):
        raise InputValidationError(f"{len(low)} low-resolution but {len(high)} HR images")
    store.require(which, ModelName.ENC_Z, ModelName.DEC)
    faces: list[Image] = []
    for start in range(0, len(low), batch_size):
        f = enc_forward(which, store, network_input(store, low[start : start + batch_size]))
        z = enc_z_forward(store, network_input(store, high[start : start + batch_size]))
        faces.extend(_to_images(dec_forward(store, f, z)))
    return faces
