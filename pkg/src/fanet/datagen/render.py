"""Synthetic identities with controllable nuisance factors.

An identity is a fixed glyph (a few soft strokes and blobs drawn from a seed that
depends only on the identity). Everything else about a sample, namely rotation, brightness
gain, an occluding patch and a trace of sensor noise, is non-identity variation.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from fanet.config import Split
from fanet.datagen.images import Image
from fanet.exceptions import IdentityLookupError, InputValidationError

POSE_RANGE = (-45.0, 45.0)
ILLUMINATION_RANGE = (0.5, 1.5)

_AMBIENT = 0.25
_ALBEDO = 0.6
_OCCLUDER_LEVEL = 0.5
_SENSOR_NOISE = 0.01


@dataclass(frozen=True, slots=True)
class Sample:
    """One dataset record: an image plus its identity and factor annotations."""

    image: Image
    identity_id: int
    pose: float
    illumination: float
    occlusion: bool
    split: Split


def _segment_distance(
    xs: NDArray[np.float64],
    ys: NDArray[np.float64],
    p0: NDArray[np.float64],
    p1: NDArray[np.float64],
) -> NDArray[np.float64]:
    direction = p1 - p0
    length2 = float(direction @ direction) or 1e-12
    t = np.clip(((xs - p0[0]) * direction[0] + (ys - p0[1]) * direction[1]) / length2, 0.0, 1.0)
    return np.hypot(xs - (p0[0] + t * direction[0]), ys - (p0[1] + t * direction[1]))


class IdentityBank:
    """Deterministic glyph templates for identities ``0 .. n_identities - 1``.

    Templates are drawn on first use, once each, and may be requested from several
    threads at a time.
    """

    def __init__(
        self, n_identities: int, side: int, seed: int, *, strokes: int = 3, blobs: int = 2
    ) -> None:
        self.n_identities = n_identities
        self.side = side
        self.seed = seed
        self._strokes = strokes
        self._blobs = blobs
        self._templates: dict[int, NDArray[np.float64]] = {}
        self._lock = threading.Lock()

    @cached_property
    def _grid(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        axis = (np.arange(self.side) + 0.5) / self.side * 2.0 - 1.0
        ys, xs = np.meshgrid(axis, axis, indexing="ij")
        return xs, ys

    def __contains__(self, identity_id: object) -> bool:
        return isinstance(identity_id, int | np.integer) and 0 <= identity_id < self.n_identities

    def template(self, identity_id: int) -> NDArray[np.float64]:
        """Reflectance map in [0, 1] for one identity.

        Raises:
            IdentityLookupError: If the identity is outside the bank.
        """
        if identity_id not in self:
            raise IdentityLookupError(identity_id, self.n_identities)
        with self._lock:
            if identity_id not in self._templates:
                self._templates[identity_id] = self._draw(identity_id)
            return self._templates[identity_id]

    def _draw(self, identity_id: int) -> NDArray[np.float64]:
        rng = np.random.default_rng([self.seed, identity_id])
        xs, ys = self._grid
        glyph = np.zeros_like(xs)
        for _ in range(self._strokes):
            p0, p1 = rng.uniform(-0.6, 0.6, size=(2, 2))
            width = rng.uniform(0.08, 0.15)
            glyph += np.exp(-((_segment_distance(xs, ys, p0, p1) / width) ** 2))
        for _ in range(self._blobs):
            centre = rng.uniform(-0.5, 0.5, size=2)
            sigma = rng.uniform(0.1, 0.25)
            amplitude = rng.uniform(0.5, 1.0)
            glyph += amplitude * np.exp(
                -((xs - centre[0]) ** 2 + (ys - centre[1]) ** 2) / (2.0 * sigma**2)
            )
        return np.clip(glyph, 0.0, 1.0)


def _check_range(name: str, value: float, bounds: tuple[float, float]) -> None:
    if not bounds[0] <= value <= bounds[1]:
        raise InputValidationError(
            f"{name} {value} outside [{bounds[0]}, {bounds[1]}]", **{name: value}
        )


def render_sample(
    bank: IdentityBank,
    identity_id: int,
    *,
    pose: float,
    illumination: float,
    occlusion: bool,
    rng_seed: int,
    split: Split = Split.TRAIN,
) -> Sample:
    """Render one sample of ``identity_id`` under the given nuisance factors.

    The result is a pure function of the arguments; samples of one identity share the
    bank template whatever their factors.

    Raises:
        IdentityLookupError: If ``identity_id`` is not in the bank.
        InputValidationError: If a factor is out of range.
    """
    _check_range("pose", pose, POSE_RANGE)
    _check_range("illumination", illumination, ILLUMINATION_RANGE)
    template = bank.template(identity_id)
    rng = np.random.default_rng(rng_seed)

    rotated = ndimage.rotate(template, pose, reshape=False, order=1, mode="constant", cval=0.0)
    intensity = illumination * (_AMBIENT + _ALBEDO * rotated)
    if occlusion:
        size = max(1, bank.side // 4)
        top, left = rng.integers(0, bank.side - size + 1, size=2)
        intensity[top : top + size, left : left + size] = _OCCLUDER_LEVEL
    intensity = intensity + rng.normal(0.0, _SENSOR_NOISE, size=intensity.shape)

    image = Image.from_array(2.0 * intensity - 1.0)
    return Sample(
        image=image,
        identity_id=int(identity_id),
        pose=float(pose),
        illumination=float(illumination),
        occlusion=bool(occlusion),
        split=split,
    )
