"""Calibration-target detection, homography estimation, perspective warp.

Four blue circular targets mark the corners of a rectangle of known physical
size; their centroids drive a 4-point DLT onto a metric output rectangle,
which also assigns the mm-per-pixel scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import backend
from .errors import DegenerateGeometry, DetectionFailure
from .imaging import (
    TARGET_HSV_BOUNDS,
    HsvBounds,
    Raster,
    quantize_u8,
    threshold_hsv_rgb,
)

MIN_TARGET_AREA_PX = 50


@dataclass(frozen=True)
class TargetLayout:
    """Center-to-center geometry of the four targets plus output resolution."""

    width_mm: float = 272.0
    height_mm: float = 185.0
    px_per_mm: float = 10.0

    def __post_init__(self):
        if not (self.width_mm > 0 and self.height_mm > 0 and self.px_per_mm > 0):
            raise ValueError(f"layout dimensions must be positive: {self}")

    @property
    def out_size(self) -> tuple[int, int]:
        """Output raster (height, width) in pixels."""
        return (
            int(round(self.height_mm * self.px_per_mm)),
            int(round(self.width_mm * self.px_per_mm)),
        )

    def dest_corners(self) -> np.ndarray:
        """Destination rectangle corners TL,TR,BR,BL in output pixels."""
        w = self.width_mm * self.px_per_mm
        h = self.height_mm * self.px_per_mm
        return np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])


@dataclass(frozen=True)
class QuadDetection:
    """Four target centroids (x, y) ordered TL,TR,BR,BL, with blob areas."""

    corners: np.ndarray
    blob_areas: np.ndarray

    def __post_init__(self):
        if self.corners.shape != (4, 2):
            raise ValueError("corners must be a 4x2 array")


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, normalized so h33 = 1. Maps source px -> dest px."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise DegenerateGeometry("homography is not invertible")
        m = m / m[2, 2]
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Transform (N,2) points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        ph = np.hstack([pts, np.ones((len(pts), 1))])
        q = ph @ self.matrix.T
        return q[:, :2] / q[:, 2:3]


def detect_targets(
    img: Raster, bounds: HsvBounds = TARGET_HSV_BOUNDS
) -> QuadDetection:
    """Locate the four blue targets and return their centroids TL,TR,BR,BL.

    Thresholds in HSV, opens with a 3x3 element to drop speckle, keeps the
    four largest 8-connected blobs of at least MIN_TARGET_AREA_PX pixels, and
    orders intensity-weighted centroids with the sum/difference heuristic.
    """
    if img.channels != 3:
        raise ValueError("detect_targets requires an RGB raster")
    raw = threshold_hsv_rgb(img, bounds)
    mask = ndimage.binary_opening(raw, structure=np.ones((3, 3), dtype=bool))
    from .regions import label_mask_components

    labels, count = label_mask_components(mask, connectivity=8)
    if count == 0:
        raise DetectionFailure("no target-colored blobs found", found=0)
    areas = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    big = np.flatnonzero(areas >= MIN_TARGET_AREA_PX) + 1
    if len(big) < 4:
        raise DetectionFailure(
            f"found {len(big)} qualifying targets, need 4", found=len(big)
        )
    # four largest; ties broken by label order (raster order of first pixel)
    order = sorted(big, key=lambda l: (-areas[l - 1], l))[:4]

    value = img.data.max(axis=-1).astype(np.float64)  # HSV value channel
    cents = np.empty((4, 2))
    blob_areas = np.empty(4, dtype=np.int64)
    for k, lab in enumerate(order):
        ys, xs = np.nonzero(labels == lab)
        w = value[ys, xs]
        wsum = w.sum()
        cents[k] = (xs @ w / wsum, ys @ w / wsum)
        blob_areas[k] = len(ys)

    s = cents[:, 0] + cents[:, 1]
    d = cents[:, 0] - cents[:, 1]
    roles = [int(np.argmin(s)), int(np.argmax(d)), int(np.argmax(s)), int(np.argmin(d))]
    for key, pick, side in ((s, roles[0], "min"), (s, roles[2], "max"),
                            (d, roles[1], "max"), (d, roles[3], "min")):
        rest = np.delete(key, pick)
        if rest.size and (key[pick] == rest).any():
            raise DetectionFailure("ambiguous corner ordering (tied key)", found=4)
    if len(set(roles)) != 4:
        raise DetectionFailure("ambiguous corner ordering (role collision)", found=4)
    ordered = cents[roles]
    return QuadDetection(ordered, blob_areas[roles])


def estimate_homography(quad: QuadDetection, layout: TargetLayout) -> Homography:
    """4-point DLT from target centroids onto the metric output rectangle."""
    src = np.asarray(quad.corners, dtype=np.float64)
    dst = layout.dest_corners()
    for drop in range(4):
        pts = np.delete(src, drop, axis=0)
        u = pts[1] - pts[0]
        v = pts[2] - pts[0]
        cross = u[0] * v[1] - u[1] * v[0]
        extent = max(np.abs(pts - pts[0]).max(), 1.0)
        if abs(cross) <= 1e-9 * extent * extent:
            raise DegenerateGeometry("three of the four corners are collinear")
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        h = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as e:
        raise DegenerateGeometry(f"homography system is singular: {e}") from e
    return Homography(np.array([*h, 1.0]).reshape(3, 3))


# --- bilinear warp kernel: numba lane and pure-numpy lane ------------------


def _warp_loops(src, hinv, out_h, out_w):
    h, w, c = src.shape
    out = np.zeros((out_h, out_w, c), dtype=np.float64)
    for v in backend.prange(out_h):  # rows are independent
        for u in range(out_w):
            z = hinv[2, 0] * u + hinv[2, 1] * v + hinv[2, 2]
            x = (hinv[0, 0] * u + hinv[0, 1] * v + hinv[0, 2]) / z
            y = (hinv[1, 0] * u + hinv[1, 1] * v + hinv[1, 2]) / z
            if x < 0.0 or x > w - 1.0 or y < 0.0 or y > h - 1.0:
                continue
            x0 = int(np.floor(x))
            y0 = int(np.floor(y))
            if x0 > w - 2:
                x0 = w - 2
            if y0 > h - 2:
                y0 = h - 2
            fx = x - x0
            fy = y - y0
            for ch in range(c):
                top = (1.0 - fx) * src[y0, x0, ch] + fx * src[y0, x0 + 1, ch]
                bot = (1.0 - fx) * src[y0 + 1, x0, ch] + fx * src[y0 + 1, x0 + 1, ch]
                out[v, u, ch] = (1.0 - fy) * top + fy * bot
    return out


_warp_jit = backend.jit_parallel(_warp_loops)


def _warp_numpy(src, hinv, out_h, out_w):
    h, w, c = src.shape
    uu, vv = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    z = hinv[2, 0] * uu + hinv[2, 1] * vv + hinv[2, 2]
    x = (hinv[0, 0] * uu + hinv[0, 1] * vv + hinv[0, 2]) / z
    y = (hinv[1, 0] * uu + hinv[1, 1] * vv + hinv[1, 2]) / z
    valid = (x >= 0.0) & (x <= w - 1.0) & (y >= 0.0) & (y <= h - 1.0)
    x0 = np.minimum(np.floor(np.where(valid, x, 0)).astype(np.int64), w - 2)
    y0 = np.minimum(np.floor(np.where(valid, y, 0)).astype(np.int64), h - 2)
    fx = np.where(valid, x, 0) - x0
    fy = np.where(valid, y, 0) - y0
    out = np.zeros((out_h, out_w, c), dtype=np.float64)
    for ch in range(c):
        plane = src[..., ch]
        top = (1.0 - fx) * plane[y0, x0] + fx * plane[y0, x0 + 1]
        bot = (1.0 - fx) * plane[y0 + 1, x0] + fx * plane[y0 + 1, x0 + 1]
        out[..., ch] = np.where(valid, (1.0 - fy) * top + fy * bot, 0.0)
    return out


def warp_array(src: np.ndarray, h_dst_to_src: np.ndarray, out_h: int, out_w: int,
               force_lane: str | None = None) -> np.ndarray:
    """Inverse-mapped bilinear warp of a float image array; outside -> 0."""
    src = np.ascontiguousarray(src, dtype=np.float64)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[..., None]
    hinv = np.ascontiguousarray(h_dst_to_src, dtype=np.float64)
    lane = force_lane or ("numba" if backend.USE_NUMBA else "numpy")
    fn = _warp_jit if lane == "numba" else _warp_numpy
    out = fn(src, hinv, out_h, out_w)
    return out[..., 0] if squeeze else out


def rectify_image(img: Raster, h: Homography, layout: TargetLayout) -> Raster:
    """Warp the photo onto the metric rectangle; attaches mm-per-px scale."""
    out_h, out_w = layout.out_size
    hinv = h.inverse().matrix
    warped = warp_array(img.as_float(), hinv, out_h, out_w)
    return Raster(quantize_u8(warped), scale=1.0 / layout.px_per_mm)


def warp_mask_nearest(mask: np.ndarray, h_dst_to_src: np.ndarray,
                      out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor warp for boolean masks (keeps values crisp)."""
    hinv = np.asarray(h_dst_to_src, dtype=np.float64)
    uu, vv = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    z = hinv[2, 0] * uu + hinv[2, 1] * vv + hinv[2, 2]
    x = np.rint((hinv[0, 0] * uu + hinv[0, 1] * vv + hinv[0, 2]) / z).astype(np.int64)
    y = np.rint((hinv[1, 0] * uu + hinv[1, 1] * vv + hinv[1, 2]) / z).astype(np.int64)
    hh, ww = mask.shape
    valid = (x >= 0) & (x < ww) & (y >= 0) & (y < hh)
    out = np.zeros((out_h, out_w), dtype=bool)
    out[valid] = mask[y[valid], x[valid]]
    return out


def rectify_photo(img: Raster, layout: TargetLayout,
                  bounds: HsvBounds = TARGET_HSV_BOUNDS) -> tuple[Raster, QuadDetection, Homography]:
    """Full detect -> estimate -> warp chain for one photograph."""
    quad = detect_targets(img, bounds)
    h = estimate_homography(quad, layout)
    return rectify_image(img, h, layout), quad, h
