"""The raster type every degradation path consumes and produces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from fanet.exceptions import InputValidationError

Pixels = NDArray[np.float64]


@dataclass(frozen=True, slots=True)
class Image:
    """An H×W×C raster with values in [-1, 1].

    Attributes:
        pixels: Array of shape (H, W, C), float64.
        native_resolution: Side at which the content was last genuinely sampled.
    """

    pixels: Pixels = field(repr=False)
    native_resolution: int

    def __post_init__(self) -> None:
        pixels = self.pixels
        if pixels.ndim != 3:
            raise InputValidationError(
                f"Image pixels must be H×W×C, got shape {pixels.shape}", shape=pixels.shape
            )
        if not np.all(np.isfinite(pixels)):
            raise InputValidationError("Image pixels must be finite")
        if pixels.size and (pixels.min() < -1.0 or pixels.max() > 1.0):
            raise InputValidationError(
                f"Image pixels must lie in [-1, 1], got [{pixels.min()}, {pixels.max()}]"
            )
        if not 1 <= self.native_resolution <= pixels.shape[0]:
            raise InputValidationError(
                f"native_resolution {self.native_resolution} must be in [1, {pixels.shape[0]}]",
                native_resolution=self.native_resolution,
            )

    @classmethod
    def from_array(
        cls, pixels: NDArray[np.floating], native_resolution: int | None = None
    ) -> Image:
        """Wrap a 2-D or 3-D array, clamping it into [-1, 1]."""
        array = np.asarray(pixels, dtype=np.float64)
        if array.ndim == 2:
            array = array[:, :, None]
        array = np.clip(array, -1.0, 1.0)
        return cls(array, native_resolution or array.shape[0])

    @property
    def side(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def require_side(self, side: int) -> None:
        if self.pixels.shape[:2] != (side, side):
            raise InputValidationError(
                f"expected a {side}×{side} image, "
                f"got {self.pixels.shape[0]}×{self.pixels.shape[1]}",
                shape=self.pixels.shape,
            )


def stack_pixels(images: list[Image]) -> NDArray[np.float32]:
    """Batch images into a float32 B×H×W×C array for the networks."""
    return np.stack([image.pixels for image in images]).astype(np.float32)
