"""Deterministic image preprocessing and augmentation.

Images are plain numpy arrays in HWC layout with RGB channel order:

- u8 image: dtype uint8, shape (H, W, 3)
- float image: dtype float64, shape (H, W, 3), every value in [0, 1]

All randomized operations take a ``numpy.random.Generator`` and are pure
functions of (input, config, generator state): re-seeding reproduces the
output bit for bit. Nothing here mutates its input.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import CropTooLarge

__all__ = [
    "AugmentConfig",
    "validate_u8",
    "validate_float",
    "resize",
    "white_patch_retinex",
    "normalize",
    "standardize_channels",
    "center_crop",
    "random_crop",
    "random_flip",
    "random_brightness",
    "augment_train",
    "augment_eval",
    "load_image",
    "save_png_u8",
    "save_png_float",
]


@dataclass(frozen=True)
class AugmentConfig:
    """Knobs for the preprocessing/augmentation pipeline.

    Defaults mirror the dermoscopy setup: resize to 600x450, rescale each
    channel to full range, center-crop 320, train-time random crop 224 with
    flips and a small brightness jitter.
    """

    resize_w: int = 600
    resize_h: int = 450
    center_crop: int = 320
    random_crop: int = 224
    brightness_delta: float = 0.1
    flip_prob: float = 0.5
    apply_color_constancy: bool = True
    # Per-channel (x - mean) / std after the unit-interval scaling. Off by
    # default; when on, outputs are no longer confined to [0, 1].
    standardize: bool = False

    def __post_init__(self):
        if self.resize_w < 1 or self.resize_h < 1:
            raise ValueError("resize dimensions must be positive")
        if not (1 <= self.random_crop <= self.center_crop <= min(self.resize_w, self.resize_h)):
            raise ValueError(
                "need random_crop <= center_crop <= min(resize_w, resize_h), got "
                f"{self.random_crop}, {self.center_crop}, "
                f"({self.resize_w}, {self.resize_h})"
            )
        if not 0.0 <= self.brightness_delta < 1.0:
            raise ValueError("brightness_delta must lie in [0, 1)")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")


def validate_u8(img: np.ndarray) -> np.ndarray:
    """Check u8 image conventions and return the array unchanged."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise TypeError(f"u8 image must be uint8, got {img.dtype}")
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"u8 image must have shape (H, W, 3), got {img.shape}")
    return img


def validate_float(img: np.ndarray) -> np.ndarray:
    """Check float image conventions (float64, HWC, values in [0, 1])."""
    img = np.asarray(img)
    if img.dtype != np.float64:
        raise TypeError(f"float image must be float64, got {img.dtype}")
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"float image must have shape (H, W, 3), got {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("float image values must lie in [0, 1]")
    return img


def _round_half_up(x: np.ndarray) -> np.ndarray:
    # Round half away from zero; inputs here are always >= 0.
    return np.floor(x + 0.5)


def resize(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize of a u8 image using half-pixel sample centers.

    Output pixel (i, j) samples the input at
    ((j + 0.5) * W/out_w - 0.5, (i + 0.5) * H/out_h - 0.5), with edge
    clamping, and rounds the interpolated value back to uint8.
    """
    validate_u8(img)
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be positive")
    h, w = img.shape[:2]
    if (out_w, out_h) == (w, h):
        return img.copy()

    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    ty = (sy - y0)[:, None, None]
    tx = (sx - x0)[None, :, None]

    p = img.astype(np.float64)
    top = p[y0][:, x0] * (1.0 - tx) + p[y0][:, x1] * tx
    bottom = p[y1][:, x0] * (1.0 - tx) + p[y1][:, x1] * tx
    out = top * (1.0 - ty) + bottom * ty
    return _round_half_up(out).astype(np.uint8)


def white_patch_retinex(img: np.ndarray) -> np.ndarray:
    """Rescale each channel so its brightest value becomes 255.

    Channel c with max m > 0 maps v to round(v * 255 / m); an all-zero
    channel is left untouched. Integer arithmetic keeps the op bit-exactly
    idempotent: once a channel's max is 255 the gain is exactly 1.
    """
    validate_u8(img)
    out = img.copy()
    for c in range(3):
        m = int(img[:, :, c].max())
        if m == 0 or m == 255:
            continue
        ch = img[:, :, c].astype(np.int64)
        # round-half-away-from-zero of v*255/m, for non-negative v
        out[:, :, c] = ((ch * 510 + m) // (2 * m)).astype(np.uint8)
    return out


def normalize(img: np.ndarray) -> np.ndarray:
    """Map u8 values onto [0, 1] by dividing by 255."""
    validate_u8(img)
    return img.astype(np.float64) / 255.0


def standardize_channels(img: np.ndarray) -> np.ndarray:
    """Per-channel (x - mean) / std. A zero-variance channel is only centered."""
    img = np.asarray(img, dtype=np.float64)
    mean = img.mean(axis=(0, 1), keepdims=True)
    std = img.std(axis=(0, 1), keepdims=True)
    std = np.where(std == 0.0, 1.0, std)
    return (img - mean) / std


def center_crop(img: np.ndarray, cw: int, ch: int) -> np.ndarray:
    """Crop the centered cw x ch window (offsets round down)."""
    h, w = img.shape[:2]
    if cw > w or ch > h:
        raise CropTooLarge(f"crop {cw}x{ch} exceeds image {w}x{h}")
    left = (w - cw) // 2
    top = (h - ch) // 2
    return img[top:top + ch, left:left + cw].copy()


def random_crop(img: np.ndarray, cw: int, ch: int, rng: np.random.Generator) -> np.ndarray:
    """Crop a cw x ch window at offsets drawn uniformly from the valid range.

    The horizontal offset is drawn before the vertical one.
    """
    h, w = img.shape[:2]
    if cw > w or ch > h:
        raise CropTooLarge(f"crop {cw}x{ch} exceeds image {w}x{h}")
    left = int(rng.integers(0, w - cw + 1))
    top = int(rng.integers(0, h - ch + 1))
    return img[top:top + ch, left:left + cw].copy()


def random_flip(img: np.ndarray, rng: np.random.Generator, flip_prob: float = 0.5) -> np.ndarray:
    """Mirror horizontally and/or vertically, each independently with flip_prob.

    The horizontal coin is tossed first. Both mirrors are involutions and
    commute, so forced double application is the identity.
    """
    out = img
    if rng.random() < flip_prob:
        out = out[:, ::-1]
    if rng.random() < flip_prob:
        out = out[::-1, :]
    return out.copy()


def random_brightness(img: np.ndarray, delta_max: float, rng: np.random.Generator) -> np.ndarray:
    """Add one uniform delta from [-delta_max, +delta_max] to every value, clamped to [0, 1]."""
    validate_float(img)
    if not 0.0 <= delta_max < 1.0:
        raise ValueError("delta_max must lie in [0, 1)")
    delta = rng.uniform(-delta_max, delta_max)
    return np.clip(img + delta, 0.0, 1.0)


def augment_train(img: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Full training-time pipeline.

    Order: resize -> white-patch retinex (if enabled) -> normalize ->
    center crop -> random flips -> random crop -> random brightness.
    Output is a float image of size random_crop x random_crop.
    """
    x = resize(img, cfg.resize_w, cfg.resize_h)
    if cfg.apply_color_constancy:
        x = white_patch_retinex(x)
    f = normalize(x)
    f = center_crop(f, cfg.center_crop, cfg.center_crop)
    f = random_flip(f, rng, cfg.flip_prob)
    f = random_crop(f, cfg.random_crop, cfg.random_crop, rng)
    f = random_brightness(f, cfg.brightness_delta, rng)
    if cfg.standardize:
        f = standardize_channels(f)
    return f


def augment_eval(img: np.ndarray, cfg: AugmentConfig) -> np.ndarray:
    """Deterministic evaluation-time pipeline.

    Same resize/color-constancy/normalize steps as training, then a single
    center crop straight to the network input size. No randomness.
    """
    x = resize(img, cfg.resize_w, cfg.resize_h)
    if cfg.apply_color_constancy:
        x = white_patch_retinex(x)
    f = normalize(x)
    f = center_crop(f, cfg.random_crop, cfg.random_crop)
    if cfg.standardize:
        f = standardize_channels(f)
    return f


def load_image(path: str | Path) -> np.ndarray:
    """Read a PNG or JPEG file as a u8 RGB image."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return arr


def save_png_u8(path: str | Path, img: np.ndarray) -> None:
    """Write a u8 image as PNG."""
    validate_u8(img)
    Image.fromarray(img, mode="RGB").save(path, format="PNG")


def save_png_float(path: str | Path, img: np.ndarray) -> None:
    """Write a float image as PNG (values scaled by 255 and rounded)."""
    validate_float(img)
    u8 = _round_half_up(img * 255.0).astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(path, format="PNG")
