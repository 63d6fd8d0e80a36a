"""Degradation paths that turn high-resolution samples into low-resolution inputs.

All paths end at ``n_high``×``n_high``: content is down-sampled to some side ``k``
and bicubic-upsampled back, so the networks always see a fixed input size while
``native_resolution`` records ``k``.
"""

import numpy as np
from scipy import ndimage

from fanet.config import DegradationConfig
from fanet.datagen.images import Image
from fanet.datagen.resize import resize_pixels
from fanet.exceptions import InputValidationError


def degrade_to(img: Image, k: int) -> Image:
    """Down-sample to ``k``×``k`` and upsample back to the original side."""
    side = img.side
    if not 1 <= k <= side:
        raise InputValidationError(f"degradation side {k} must be in [1, {side}]", k=k)
    low = resize_pixels(img.pixels, k)
    return Image(resize_pixels(low, side), min(img.native_resolution, k))


def draw_scale(cfg: DegradationConfig, rng: np.random.Generator) -> int:
    """Draw ``k`` uniformly from the integers in [n_low, n_high]."""
    return int(rng.integers(cfg.n_low, cfg.n_high + 1))


def rsa_degrade(
    img_hr: Image, cfg: DegradationConfig, rng: np.random.Generator
) -> tuple[Image, int]:
    """Random scale augmentation: degrade to a uniformly drawn resolution.

    Returns:
        The degraded n_high×n_high image and the drawn side ``k``.

    Raises:
        InputValidationError: If ``img_hr`` is not n_high×n_high.
    """
    img_hr.require_side(cfg.n_high)
    k = draw_scale(cfg, rng)
    return degrade_to(img_hr, k), k


def fixed_degrade(img: Image, factor: int) -> Image:
    """Degrade by an integer scale factor that divides the image side.

    Raises:
        InputValidationError: If ``factor`` does not divide the side.
    """
    if factor < 1 or img.side % factor:
        raise InputValidationError(
            f"factor {factor} does not divide image side {img.side}", factor=factor
        )
    return degrade_to(img, img.side // factor)


def jitter(img: Image, cfg: DegradationConfig, rng: np.random.Generator) -> Image:
    """Random translation, Gaussian blur and additive noise, in that order.

    Random draws are skipped for disabled steps, so a jitter-free config leaves both
    the image and the generator untouched.
    """
    jitter_cfg = cfg.unpaired_jitter
    pixels = img.pixels

    if jitter_cfg.max_shift_px > 0:
        dy, dx = rng.integers(-jitter_cfg.max_shift_px, jitter_cfg.max_shift_px + 1, size=2)
        pixels = ndimage.shift(pixels, (float(dy), float(dx), 0.0), order=1, mode="nearest")

    low, high = jitter_cfg.blur_sigma_range
    if high > 0.0:
        sigma = float(rng.uniform(low, high))
        if sigma > 0.0:
            pixels = ndimage.gaussian_filter(pixels, sigma=(sigma, sigma, 0.0), mode="nearest")

    if jitter_cfg.noise_std > 0.0:
        pixels = pixels + rng.normal(0.0, jitter_cfg.noise_std, size=pixels.shape)

    return Image(np.clip(pixels, -1.0, 1.0), img.native_resolution)


def unpaired_degrade(img_hr: Image, cfg: DegradationConfig, rng: np.random.Generator) -> Image:
    """Simulate an unpaired low-resolution capture of the same subject.

    :func:`jitter` followed by :func:`rsa_degrade`; with a jitter-free config this
    consumes the generator exactly like :func:`rsa_degrade`.
    """
    img_hr.require_side(cfg.n_high)
    degraded, _ = rsa_degrade(jitter(img_hr, cfg, rng), cfg, rng)
    return degraded


def unpaired_fixed_degrade(
    img_hr: Image, cfg: DegradationConfig, rng: np.random.Generator
) -> Image:
    """:func:`jitter` followed by :func:`fixed_degrade` at ``cfg.fixed_factor``."""
    img_hr.require_side(cfg.n_high)
    return fixed_degrade(jitter(img_hr, cfg, rng), cfg.fixed_factor)
