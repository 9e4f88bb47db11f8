"""Superpixels by localized k-means over CIELAB + position, as used for
feature extraction: seeds on a regular grid, 10 assignment/update rounds in
2S-wide windows, then connectivity enforcement by merging small orphans."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .imaging import Raster, gaussian_smooth_array
from .regions import label_same_value_components

N_ITER = 10


@dataclass(frozen=True)
class SlicParams:
    n_segments: int = 1000
    compactness: float = 10.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.n_segments < 2:
            raise ValueError("n_segments must be at least 2")
        if self.compactness <= 0:
            raise ValueError("compactness must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def key(self) -> str:
        return f"n{self.n_segments}_c{self.compactness:g}_s{self.sigma:g}"


# the published sweep grid
SLIC_GRID = [
    SlicParams(n, c, s)
    for n in (2000, 1000, 500)
    for c in (20.0, 10.0)
    for s in (3.0, 1.0)
]


@dataclass(frozen=True)
class SuperpixelMap:
    labels: np.ndarray  # int32 (h, w), values 0..n_segments-1
    n_segments: int
    counts: np.ndarray  # pixels per segment

    def __post_init__(self):
        self.labels.setflags(write=False)
        self.counts.setflags(write=False)


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB (0..255 floats) -> CIELAB under D65."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    m = np.array(
        [
            [0.4124564, 0.3575761, 0.1804375],
            [0.2126729, 0.7151522, 0.0721750],
            [0.0193339, 0.1191920, 0.9503041],
        ]
    )
    xyz = lin @ m.T
    xyz /= np.array([0.95047, 1.0, 1.08883])
    eps = (6.0 / 29.0) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


# --- assignment / update kernels: numba lane and numpy lane -----------------


def _assign_loops(lab, centers, half, sp_scale):
    h, w, _ = lab.shape
    kcount = centers.shape[0]
    labels = np.full((h, w), -1, dtype=np.int32)
    best = np.full((h, w), np.inf, dtype=np.float64)
    for k in range(kcount):
        cy = centers[k, 3]
        cx = centers[k, 4]
        y0 = max(0, int(cy) - half)
        y1 = min(h, int(cy) + half + 1)
        x0 = max(0, int(cx) - half)
        x1 = min(w, int(cx) + half + 1)
        for y in range(y0, y1):
            for x in range(x0, x1):
                dl = lab[y, x, 0] - centers[k, 0]
                da = lab[y, x, 1] - centers[k, 1]
                db = lab[y, x, 2] - centers[k, 2]
                dy = y - cy
                dx = x - cx
                d2 = (dl * dl + da * da + db * db) + (dy * dy + dx * dx) * sp_scale
                if d2 < best[y, x]:
                    best[y, x] = d2
                    labels[y, x] = k
    return labels


_assign_jit = backend.jit(_assign_loops)


def _assign_numpy(lab, centers, half, sp_scale):
    h, w, _ = lab.shape
    labels = np.full((h, w), -1, dtype=np.int32)
    best = np.full((h, w), np.inf, dtype=np.float64)
    for k in range(centers.shape[0]):
        cy = centers[k, 3]
        cx = centers[k, 4]
        y0 = max(0, int(cy) - half)
        y1 = min(h, int(cy) + half + 1)
        x0 = max(0, int(cx) - half)
        x1 = min(w, int(cx) + half + 1)
        if y0 >= y1 or x0 >= x1:
            continue
        win = lab[y0:y1, x0:x1]
        dl = win[..., 0] - centers[k, 0]
        da = win[..., 1] - centers[k, 1]
        db = win[..., 2] - centers[k, 2]
        dy = (np.arange(y0, y1, dtype=np.float64) - cy)[:, None]
        dx = (np.arange(x0, x1, dtype=np.float64) - cx)[None, :]
        d2 = (dl * dl + da * da + db * db) + (dy * dy + dx * dx) * sp_scale
        sub_best = best[y0:y1, x0:x1]
        upd = d2 < sub_best
        sub_best[upd] = d2[upd]
        labels[y0:y1, x0:x1][upd] = k
    return labels


def _update_loops(lab, labels, kcount):
    h, w, _ = lab.shape
    sums = np.zeros((kcount, 6), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            k = labels[y, x]
            if k >= 0:
                sums[k, 0] += lab[y, x, 0]
                sums[k, 1] += lab[y, x, 1]
                sums[k, 2] += lab[y, x, 2]
                sums[k, 3] += y
                sums[k, 4] += x
                sums[k, 5] += 1.0
    return sums


_update_jit = backend.jit(_update_loops)


def _update_numpy(lab, labels, kcount):
    flat = labels.ravel()
    ok = flat >= 0
    flat = flat[ok]
    h, w, _ = lab.shape
    yy, xx = np.divmod(np.arange(h * w, dtype=np.float64)[ok], w)
    sums = np.zeros((kcount, 6), dtype=np.float64)
    for c in range(3):
        sums[:, c] = np.bincount(flat, weights=lab[..., c].ravel()[ok], minlength=kcount)
    sums[:, 3] = np.bincount(flat, weights=yy, minlength=kcount)
    sums[:, 4] = np.bincount(flat, weights=xx, minlength=kcount)
    sums[:, 5] = np.bincount(flat, minlength=kcount)
    return sums


def _lane(force_lane):
    return force_lane or ("numba" if backend.USE_NUMBA else "numpy")


def _seed_centers(lab: np.ndarray, n_segments: int) -> np.ndarray:
    """Regular-grid seeds, each nudged to the lowest-gradient 3x3 neighbor."""
    h, w, _ = lab.shape
    step = np.sqrt(h * w / n_segments)
    ny = max(1, int(round(h / step)))
    nx = max(1, int(round(w / step)))
    # squared LAB gradient with replicated edges
    yp = np.minimum(np.arange(h) + 1, h - 1)
    ym = np.maximum(np.arange(h) - 1, 0)
    xp = np.minimum(np.arange(w) + 1, w - 1)
    xm = np.maximum(np.arange(w) - 1, 0)
    grad = ((lab[:, xp] - lab[:, xm]) ** 2).sum(-1) + ((lab[yp] - lab[ym]) ** 2).sum(-1)

    centers = []
    for i in range(ny):
        for j in range(nx):
            sy = min(h - 1, int((i + 0.5) * h / ny))
            sx = min(w - 1, int((j + 0.5) * w / nx))
            by, bx, bg = sy, sx, np.inf
            for yy in range(max(0, sy - 1), min(h, sy + 2)):
                for xx in range(max(0, sx - 1), min(w, sx + 2)):
                    if grad[yy, xx] < bg:
                        bg = grad[yy, xx]
                        by, bx = yy, xx
            centers.append([lab[by, bx, 0], lab[by, bx, 1], lab[by, bx, 2],
                            float(by), float(bx)])
    return np.asarray(centers, dtype=np.float64)


def _enforce_connectivity(labels: np.ndarray, min_size: float,
                          force_lane: str | None = None) -> tuple[np.ndarray, int]:
    """Merge 4-connected orphan components below min_size into the largest
    adjacent component, then relabel by raster order of first pixel."""
    comp, ncomp = label_same_value_components(labels, connectivity=4,
                                              force_lane=force_lane)
    sizes = np.bincount(comp.ravel(), minlength=ncomp).astype(np.int64)

    h, w = comp.shape
    pairs = set()
    for a_sl, b_sl in (((slice(None), slice(0, w - 1)), (slice(None), slice(1, w))),
                       ((slice(0, h - 1), slice(None)), (slice(1, h), slice(None)))):
        ca = comp[a_sl].ravel()
        cb = comp[b_sl].ravel()
        diff = ca != cb
        pairs.update(zip(ca[diff].tolist(), cb[diff].tolist()))
    neighbors = [set() for _ in range(ncomp)]
    for a, b in pairs:
        neighbors[a].add(b)
        neighbors[b].add(a)

    parent = np.arange(ncomp)

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for c in range(ncomp):
        root = find(c)
        if sizes[root] >= min_size:
            continue
        # adjacent roots of the ORIGINAL component's neighbors
        cand = {find(d) for d in neighbors[c]} - {root}
        if not cand:
            continue
        target = min(cand, key=lambda r: (-sizes[r], r))
        parent[root] = target
        sizes[target] += sizes[root]

    roots = np.array([find(c) for c in range(ncomp)])
    final = roots[comp]
    # sequential ids in raster order of first pixel
    uniq, first = np.unique(final, return_index=True)
    order = np.argsort(np.argsort(first, kind="stable"), kind="stable")
    remap = np.zeros(ncomp, dtype=np.int32)
    remap[uniq] = order.astype(np.int32)
    return remap[final].astype(np.int32), len(uniq)


def slic(img: Raster, p: SlicParams, force_lane: str | None = None) -> SuperpixelMap:
    """Segment an RGB raster into superpixels."""
    if img.channels != 3:
        raise ValueError("slic requires an RGB raster")
    h, w = img.height, img.width
    n_px = h * w
    if p.n_segments > n_px:
        raise ValueError(f"n_segments={p.n_segments} exceeds pixel count {n_px}")

    rgbf = img.as_float()
    if p.sigma > 0:
        rgbf = np.stack(
            [gaussian_smooth_array(rgbf[..., c], p.sigma) for c in range(3)], axis=-1
        )
    lab = np.ascontiguousarray(rgb_to_lab(rgbf))

    centers = _seed_centers(lab, p.n_segments)
    step = np.sqrt(n_px / p.n_segments)
    half = max(1, int(step + 0.5))
    sp_scale = (p.compactness * p.compactness) / (step * step)

    lane = _lane(force_lane)
    assign = _assign_jit if lane == "numba" else _assign_numpy
    update = _update_jit if lane == "numba" else _update_numpy

    labels = None
    for _ in range(N_ITER):
        labels = assign(lab, centers, half, sp_scale)
        sums = update(lab, labels, centers.shape[0])
        counts = sums[:, 5]
        nonzero = counts > 0
        centers[nonzero] = sums[nonzero, :5] / counts[nonzero, None]

    if (labels < 0).any():
        # pixels outside every window: nearest center spatially
        ys, xs = np.nonzero(labels < 0)
        d2 = (ys[:, None] - centers[None, :, 3]) ** 2 + (
            xs[:, None] - centers[None, :, 4]) ** 2
        labels[ys, xs] = np.argmin(d2, axis=1).astype(np.int32)

    min_size = (step * step) / 4.0
    final, count = _enforce_connectivity(labels, min_size, force_lane)
    counts = np.bincount(final.ravel(), minlength=count)
    return SuperpixelMap(labels=final, n_segments=count, counts=counts)
