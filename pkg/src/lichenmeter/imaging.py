"""Raster primitives: containers, HSV conversion, smoothing, mask IO.

Hue convention: all HSV values in this package use the 8-bit scale with
H on [0,180) (1 unit = 2 degrees) and S, V on [0,255]. The calibration-target
thresholds (H 95-105, S 85-255, V 170-245) are only meaningful on that scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage


@dataclass(frozen=True)
class Raster:
    """8-bit image (grayscale or RGB/HSV) with optional physical scale.

    ``scale`` is mm per pixel, uniform and isotropic. The pixel buffer is
    frozen after construction; operations return new rasters.
    """

    data: np.ndarray
    scale: float | None = None

    def __post_init__(self):
        d = self.data
        if d.dtype != np.uint8:
            raise ValueError(f"raster data must be uint8, got {d.dtype}")
        if d.ndim == 3 and d.shape[2] != 3:
            raise ValueError(f"3-d raster must have 3 channels, got {d.shape[2]}")
        if d.ndim not in (2, 3):
            raise ValueError(f"raster must be 2-d or 3-d, got shape {d.shape}")
        if self.scale is not None and not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        d.setflags(write=False)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]

    def with_scale(self, scale: float) -> "Raster":
        return Raster(self.data, scale)

    def as_float(self) -> np.ndarray:
        return self.data.astype(np.float64)


@dataclass(frozen=True)
class HsvBounds:
    """Inclusive per-channel HSV threshold box, 8-bit scale (H on [0,180))."""

    h_lo: int
    h_hi: int
    s_lo: int
    s_hi: int
    v_lo: int
    v_hi: int

    def __post_init__(self):
        if not (0 <= self.h_lo <= self.h_hi < 180):
            raise ValueError(f"hue bounds out of order or outside [0,180): {self}")
        for lo, hi in ((self.s_lo, self.s_hi), (self.v_lo, self.v_hi)):
            if not (0 <= lo <= hi <= 255):
                raise ValueError(f"bounds out of order or outside [0,255]: {self}")

    @classmethod
    def parse(cls, text: str) -> "HsvBounds":
        """Parse 'H1,H2,S1,S2,V1,V2'."""
        parts = [int(p) for p in text.split(",")]
        if len(parts) != 6:
            raise ValueError("expected 6 comma-separated integers H1,H2,S1,S2,V1,V2")
        return cls(*parts)


# Blue calibration-target color band (8-bit HSV scale).
TARGET_HSV_BOUNDS = HsvBounds(95, 105, 85, 255, 170, 245)


def quantize_u8(x: np.ndarray) -> np.ndarray:
    """Float -> uint8 with round-half-away-from-zero, clipped to [0,255]."""
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def rgb_to_hsv_float(rgb: np.ndarray) -> np.ndarray:
    """RGB (0..255 floats) -> HSV floats with H on [0,180), S,V on [0,255]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = np.max(rgb, axis=-1)
    c = v - np.min(rgb, axis=-1)
    h_deg = np.zeros_like(v)
    chrom = c != 0
    case_r = chrom & (v == r)
    case_g = chrom & ~case_r & (v == g)
    case_b = chrom & ~case_r & ~case_g
    h_deg[case_r] = (60.0 * (g[case_r] - b[case_r]) / c[case_r]) % 360.0
    h_deg[case_g] = 60.0 * (b[case_g] - r[case_g]) / c[case_g] + 120.0
    h_deg[case_b] = 60.0 * (r[case_b] - g[case_b]) / c[case_b] + 240.0
    s = np.zeros_like(v)
    lit = v != 0
    s[lit] = 255.0 * c[lit] / v[lit]
    return np.stack([h_deg / 2.0, s, v], axis=-1)


def hsv_to_rgb_float(hsv: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv_float`; returns RGB floats on [0,255]."""
    hsv = np.asarray(hsv, dtype=np.float64)
    h6 = (hsv[..., 0] * 2.0 / 60.0) % 6.0
    s = hsv[..., 1] / 255.0
    v = hsv[..., 2]
    c = v * s
    x = c * (1.0 - np.abs(h6 % 2.0 - 1.0))
    m = v - c
    sextant = np.floor(h6).astype(np.int64) % 6
    z = np.zeros_like(c)
    r = np.choose(sextant, [c, x, z, z, x, c])
    g = np.choose(sextant, [x, c, c, x, z, z])
    b = np.choose(sextant, [z, z, x, c, c, x])
    return np.stack([r + m, g + m, b + m], axis=-1)


def rgb_to_hsv(img: Raster) -> Raster:
    """RGB raster -> 8-bit HSV raster (H on [0,180), S/V on [0,255])."""
    if img.channels != 3:
        raise ValueError("rgb_to_hsv requires a 3-channel raster")
    hsv = rgb_to_hsv_float(img.as_float())
    hsv[..., 0] %= 180.0  # H=180 wraps to 0 after rounding
    out = quantize_u8(hsv)
    out[..., 0] = np.where(out[..., 0] == 180, 0, out[..., 0])
    return Raster(out, img.scale)


def hsv_to_rgb(img: Raster) -> Raster:
    if img.channels != 3:
        raise ValueError("hsv_to_rgb requires a 3-channel raster")
    return Raster(quantize_u8(hsv_to_rgb_float(img.as_float())), img.scale)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Sampled Gaussian truncated at 3 sigma per side, normalized to sum 1."""
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_smooth_array(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur on a float array; borders replicate edges."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    out = np.asarray(arr, dtype=np.float64)
    if sigma == 0:
        return out.copy()
    k = gaussian_kernel_1d(sigma)
    for axis in (0, 1):
        out = ndimage.correlate1d(out, k, axis=axis, mode="nearest")
    return out


def gaussian_smooth(img: Raster, sigma: float) -> Raster:
    """Gaussian blur of a raster. sigma 0 returns the input unchanged."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return img
    data = img.as_float()
    if data.ndim == 2:
        sm = gaussian_smooth_array(data, sigma)
    else:
        sm = np.stack(
            [gaussian_smooth_array(data[..., c], sigma) for c in range(3)], axis=-1
        )
    return Raster(quantize_u8(sm), img.scale)


def threshold_hsv(img: Raster, bounds: HsvBounds) -> np.ndarray:
    """Pixels whose H, S and V all lie within the inclusive bounds."""
    if img.channels != 3:
        raise ValueError("threshold_hsv requires a 3-channel HSV raster")
    h, s, v = img.data[..., 0], img.data[..., 1], img.data[..., 2]
    return (
        (h >= bounds.h_lo) & (h <= bounds.h_hi)
        & (s >= bounds.s_lo) & (s <= bounds.s_hi)
        & (v >= bounds.v_lo) & (v <= bounds.v_hi)
    )


def threshold_hsv_rgb(img: Raster, bounds: HsvBounds) -> np.ndarray:
    """Same result as ``threshold_hsv(rgb_to_hsv(img), bounds)`` without
    materializing the HSV raster: V prefilters, then S and H are quantized
    only on the surviving pixels (bit-exact, integers in, integers compared)."""
    if img.channels != 3:
        raise ValueError("threshold_hsv_rgb requires an RGB raster")
    rgb = img.data
    v8 = rgb.max(axis=-1)
    cand = (v8 >= bounds.v_lo) & (v8 <= bounds.v_hi)
    out = np.zeros(v8.shape, dtype=bool)
    if not cand.any():
        return out
    sub = rgb[cand].astype(np.float64)
    r, g, b = sub[:, 0], sub[:, 1], sub[:, 2]
    v = v8[cand].astype(np.float64)
    c = v - sub.min(axis=1)
    s = np.zeros_like(v)
    lit = v > 0
    s[lit] = np.floor(255.0 * c[lit] / v[lit] + 0.5)
    ok = (s >= bounds.s_lo) & (s <= bounds.s_hi)
    h_deg = np.zeros_like(v)
    chrom = c != 0
    case_r = chrom & (v == r)
    case_g = chrom & ~case_r & (v == g)
    case_b = chrom & ~case_r & ~case_g
    h_deg[case_r] = (60.0 * (g[case_r] - b[case_r]) / c[case_r]) % 360.0
    h_deg[case_g] = 60.0 * (b[case_g] - r[case_g]) / c[case_g] + 120.0
    h_deg[case_b] = 60.0 * (r[case_b] - g[case_b]) / c[case_b] + 240.0
    h8 = np.floor(h_deg / 2.0 + 0.5)
    h8[h8 == 180] = 0
    ok &= (h8 >= bounds.h_lo) & (h8 <= bounds.h_hi)
    out[cand] = ok
    return out


def check_mask(mask: np.ndarray, like: np.ndarray | Raster | None = None) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype != bool or mask.ndim != 2:
        raise ValueError("mask must be a 2-d boolean array")
    if like is not None:
        shape = like.data.shape[:2] if isinstance(like, Raster) else like.shape[:2]
        if mask.shape != shape:
            raise ValueError(f"mask shape {mask.shape} != image shape {shape}")
    return mask


def load_image(path: str | Path) -> Raster:
    """Read a PNG or JPEG file as an RGB (or grayscale) raster."""
    with Image.open(path) as im:
        if im.mode not in ("RGB", "L"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8).copy()
    return Raster(arr)


def save_png(img: Raster, path: str | Path) -> None:
    Image.fromarray(img.data).save(path, format="PNG")


def load_mask(path: str | Path) -> np.ndarray:
    """Read a mask PNG (single channel, values 0 and 255) as a bool array."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        arr = np.asarray(im, dtype=np.uint8)
    bad = np.setdiff1d(np.unique(arr), [0, 255])
    if bad.size:
        raise ValueError(f"mask PNG contains values other than 0/255: {bad[:8]}")
    return arr == 255


def save_mask(mask: np.ndarray, path: str | Path) -> None:
    """Write a bool mask as a single-channel PNG with values 0 and 255."""
    mask = check_mask(mask)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(
        path, format="PNG"
    )


def save_labels_png(labels: np.ndarray, path: str | Path) -> None:
    """Debug dump of a superpixel label map as 16-bit grayscale PNG."""
    if labels.max() > 0xFFFF:
        raise ValueError("label map exceeds 16-bit range")
    Image.fromarray(labels.astype(np.uint16), mode="I;16").save(path, format="PNG")


def mask_png_bytes(mask: np.ndarray) -> bytes:
    """Encode a bool mask to PNG bytes (single channel, 0/255)."""
    import io

    buf = io.BytesIO()
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(
        buf, format="PNG"
    )
    return buf.getvalue()
