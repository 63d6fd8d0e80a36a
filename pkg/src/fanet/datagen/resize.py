"""Separable bicubic resampling with the Catmull-Rom kernel.

Resizing is two matrix products, one per axis. Row ``i`` of a weight matrix holds
the kernel taps that produce output sample ``i``; taps falling outside the input are
clamped onto the edge pixel. When shrinking, the kernel is stretched by the inverse
scale so the resize also low-pass filters (the MATLAB ``imresize`` convention).
"""

from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from fanet.datagen.images import Image
from fanet.exceptions import InputValidationError

#: Catmull-Rom corresponds to a = -0.5.
CUBIC_A = -0.5


def cubic_kernel(x: NDArray[np.float64], a: float = CUBIC_A) -> NDArray[np.float64]:
    """Keys' cubic convolution kernel, zero outside (-2, 2)."""
    ax = np.abs(x)
    ax2 = ax * ax
    ax3 = ax2 * ax
    inner = (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0
    outer = a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a
    return np.where(ax <= 1.0, inner, np.where(ax < 2.0, outer, 0.0))


@lru_cache(maxsize=256)
def _weights(in_length: int, out_length: int) -> NDArray[np.float64]:
    scale = out_length / in_length
    kernel_scale = min(scale, 1.0)
    # Half-pixel centres: output pixel i covers input coordinate (i + 0.5) / scale - 0.5.
    centres = (np.arange(out_length) + 0.5) / scale - 0.5
    support = 2.0 / kernel_scale
    taps = int(np.ceil(2.0 * support)) + 2
    left = np.floor(centres - support).astype(np.int64)
    indices = left[:, None] + np.arange(taps)[None, :]
    weights = kernel_scale * cubic_kernel((centres[:, None] - indices) * kernel_scale)

    matrix = np.zeros((out_length, in_length))
    rows = np.repeat(np.arange(out_length), taps)
    np.add.at(matrix, (rows, np.clip(indices, 0, in_length - 1).ravel()), weights.ravel())
    matrix /= matrix.sum(axis=1, keepdims=True)
    matrix.setflags(write=False)
    return matrix


def resize_weights(in_length: int, out_length: int) -> NDArray[np.float64]:
    """The (out_length × in_length) resampling matrix for one axis."""
    if in_length < 1 or out_length < 1:
        raise InputValidationError(
            f"resize lengths must be positive, got {in_length} -> {out_length}"
        )
    return _weights(in_length, out_length)


def resize_pixels(pixels: NDArray[np.float64], target: int) -> NDArray[np.float64]:
    """Resize an H×W×C array to target×target and clamp into [-1, 1]."""
    rows = resize_weights(pixels.shape[0], target)
    cols = resize_weights(pixels.shape[1], target)
    out = np.einsum("ij,jkc,lk->ilc", rows, pixels, cols)
    return np.clip(out, -1.0, 1.0)


def bicubic_resize(img: Image, target: int) -> Image:
    """Resample ``img`` to ``target``×``target``.

    The native resolution carries over from the input, capped at the new side when
    shrinking below it.

    Raises:
        InputValidationError: If ``target`` is below 1.
    """
    if target < 1:
        raise InputValidationError(f"resize target must be >= 1, got {target}", target=target)
    if img.pixels.shape[:2] == (target, target):
        return img
    return Image(resize_pixels(img.pixels, target), min(img.native_resolution, target))
