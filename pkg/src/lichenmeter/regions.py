"""Per-thallus measurement: component labeling, geometry, physical units."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _sparse_cc

from . import backend
from .imaging import check_mask

SQRT2 = float(np.sqrt(2.0))


# --- same-value component labeling: numba lane and scipy lane --------------


def _cc_loops(vals, use8):
    h, w = vals.shape
    comp = np.full(h * w, -1, dtype=np.int32)
    stack = np.empty(h * w, dtype=np.int64)
    nid = 0
    for sy in range(h):
        for sx in range(w):
            if comp[sy * w + sx] >= 0:
                continue
            v = vals[sy, sx]
            comp[sy * w + sx] = nid
            stack[0] = sy * w + sx
            sp = 1
            while sp > 0:
                sp -= 1
                p = stack[sp]
                y = p // w
                x = p % w
                for k in range(8):
                    if k >= 4 and not use8:
                        break
                    if k == 0:
                        ny, nx = y - 1, x
                    elif k == 1:
                        ny, nx = y + 1, x
                    elif k == 2:
                        ny, nx = y, x - 1
                    elif k == 3:
                        ny, nx = y, x + 1
                    elif k == 4:
                        ny, nx = y - 1, x - 1
                    elif k == 5:
                        ny, nx = y - 1, x + 1
                    elif k == 6:
                        ny, nx = y + 1, x - 1
                    else:
                        ny, nx = y + 1, x + 1
                    if 0 <= ny < h and 0 <= nx < w:
                        q = ny * w + nx
                        if comp[q] < 0 and vals[ny, nx] == v:
                            comp[q] = nid
                            stack[sp] = q
                            sp += 1
            nid += 1
    return comp.reshape(h, w), nid


_cc_jit = backend.jit(_cc_loops)


def _cc_numpy(vals, use8):
    h, w = vals.shape
    n = h * w
    idx = np.arange(n, dtype=np.int32).reshape(h, w)
    offsets = [(0, 1), (1, 0)] + ([(1, 1), (1, -1)] if use8 else [])
    rows, cols = [], []
    for dy, dx in offsets:
        a = (slice(0, h - dy), slice(max(0, -dx), w - max(0, dx)))
        b = (slice(dy, h), slice(max(0, dx), w + min(0, dx)))
        same = vals[a] == vals[b]
        rows.append(idx[a][same])
        cols.append(idx[b][same])
    rows = np.concatenate(rows) if rows else np.empty(0, np.int32)
    cols = np.concatenate(cols) if cols else np.empty(0, np.int32)
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    count, lbl = _sparse_cc(graph, directed=False)
    # renumber components by raster order of their first pixel
    _, first = np.unique(lbl, return_index=True)
    order = np.argsort(np.argsort(first, kind="stable"), kind="stable")
    return order[lbl].astype(np.int32).reshape(h, w), count


def label_same_value_components(
    vals: np.ndarray, connectivity: int = 4, force_lane: str | None = None
) -> tuple[np.ndarray, int]:
    """Connected components of equal-valued pixels, ids in raster order."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    vals = np.ascontiguousarray(vals, dtype=np.int32)
    lane = force_lane or ("numba" if backend.USE_NUMBA else "numpy")
    fn = _cc_jit if lane == "numba" else _cc_numpy
    comp, count = fn(vals, connectivity == 8)
    return comp, count


def label_mask_components(
    mask: np.ndarray, connectivity: int = 8, force_lane: str | None = None
) -> tuple[np.ndarray, int]:
    """Label foreground components 1..R in raster order; background is 0."""
    mask = check_mask(mask)
    comp, count = label_same_value_components(
        mask.astype(np.int32), connectivity, force_lane
    )
    is_fg = np.zeros(count, dtype=bool)
    is_fg[comp[mask]] = True
    remap = np.zeros(count, dtype=np.int32)
    remap[is_fg] = np.arange(1, int(is_fg.sum()) + 1, dtype=np.int32)
    return remap[comp], int(is_fg.sum())


# --- geometry ---------------------------------------------------------------

_PERIM_KERNEL = np.array([[10, 2, 10], [2, 1, 2], [10, 2, 10]])
_PERIM_WEIGHTS = np.zeros(50)
_PERIM_WEIGHTS[[5, 7, 15, 17, 25, 27]] = 1.0
_PERIM_WEIGHTS[[21, 33]] = SQRT2
_PERIM_WEIGHTS[[13, 23]] = (1.0 + SQRT2) / 2.0


def perimeter_px(region: np.ndarray) -> float:
    """Boundary-contour length: axial steps 1, diagonal steps sqrt(2)."""
    region = np.pad(region.astype(bool), 1)
    eroded = ndimage.binary_erosion(
        region, np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]), border_value=0
    )
    border = region & ~eroded
    conv = ndimage.convolve(border.astype(np.int32), _PERIM_KERNEL,
                            mode="constant", cval=0)
    hist = np.bincount(conv[border].ravel(), minlength=50)
    return float(_PERIM_WEIGHTS @ hist[:50])


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill background components (4-connected) not touching the border."""
    mask = check_mask(mask)
    bg_lbl, nbg = ndimage.label(~mask, structure=np.array(
        [[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    if nbg == 0:
        return mask.copy()
    touches = np.zeros(nbg + 1, dtype=bool)
    for sl in (bg_lbl[0, :], bg_lbl[-1, :], bg_lbl[:, 0], bg_lbl[:, -1]):
        touches[np.unique(sl)] = True
    touches[0] = True
    return mask | ~touches[bg_lbl]


@dataclass
class ThallusRecord:
    index: int
    area_px: int
    filled_area_px: int
    perimeter_px: float
    centroid: tuple[float, float]  # (row, col)
    major_px: float
    minor_px: float
    area_mm2: float | None = None
    filled_area_mm2: float | None = None
    perimeter_mm: float | None = None
    major_mm: float | None = None
    minor_mm: float | None = None


@dataclass
class SceneStats:
    thallus_count: int
    cover_fraction: float
    total_area_px: int
    total_pixels: int
    total_area_mm2: float | None = None


def _axes_from_moments(ys: np.ndarray, xs: np.ndarray) -> tuple[float, float]:
    """Ellipse axis lengths (4 * sqrt of covariance eigenvalues)."""
    yc = ys.mean()
    xc = xs.mean()
    dy = ys - yc
    dx = xs - xc
    myy = (dy * dy).mean()
    mxx = (dx * dx).mean()
    mxy = (dx * dy).mean()
    common = np.sqrt(max(((myy - mxx) / 2.0) ** 2 + mxy * mxy, 0.0))
    l1 = (myy + mxx) / 2.0 + common
    l2 = (myy + mxx) / 2.0 - common
    return 4.0 * np.sqrt(max(l1, 0.0)), 4.0 * np.sqrt(max(l2, 0.0))


def measure(
    labels: np.ndarray, count: int, scale: float | None = None
) -> tuple[list[ThallusRecord], SceneStats]:
    """Per-thallus geometry for a labeled mask, optionally in mm via scale."""
    if scale is not None and not scale > 0:
        raise ValueError("scale must be positive")
    records = []
    slices = ndimage.find_objects(labels)
    total_area = 0
    for i in range(1, count + 1):
        sl = slices[i - 1]
        region = labels[sl] == i
        ys, xs = np.nonzero(region)
        area = len(ys)
        total_area += area
        filled = int(fill_holes(region).sum())
        perim = perimeter_px(region)
        major, minor = _axes_from_moments(
            ys.astype(np.float64), xs.astype(np.float64)
        )
        rec = ThallusRecord(
            index=i,
            area_px=area,
            filled_area_px=filled,
            perimeter_px=perim,
            centroid=(float(ys.mean() + sl[0].start), float(xs.mean() + sl[1].start)),
            major_px=major,
            minor_px=minor,
        )
        if scale is not None:
            rec.area_mm2 = area * scale * scale
            rec.filled_area_mm2 = filled * scale * scale
            rec.perimeter_mm = perim * scale
            rec.major_mm = major * scale
            rec.minor_mm = minor * scale
        records.append(rec)
    total_pixels = labels.size
    stats = SceneStats(
        thallus_count=count,
        cover_fraction=total_area / total_pixels if total_pixels else 0.0,
        total_area_px=total_area,
        total_pixels=total_pixels,
        total_area_mm2=total_area * scale * scale if scale is not None else None,
    )
    return records, stats


def measure_mask(
    mask: np.ndarray, scale: float | None = None
) -> tuple[list[ThallusRecord], SceneStats]:
    labels, count = label_mask_components(mask)
    return measure(labels, count, scale)


def filter_small(
    records: list[ThallusRecord],
    stats: SceneStats,
    min_area_px: float = 0.0,
    min_area_mm2: float | None = None,
) -> tuple[list[ThallusRecord], SceneStats]:
    """Drop thalli below an area threshold and recompute scene statistics."""
    if min_area_px < 0 or (min_area_mm2 is not None and min_area_mm2 < 0):
        raise ValueError("area threshold must be nonnegative")
    if min_area_mm2 is not None:
        if any(r.area_mm2 is None for r in records):
            raise ValueError("mm threshold given but records carry no scale")
        kept = [r for r in records if r.area_mm2 >= min_area_mm2]
    else:
        kept = [r for r in records if r.area_px >= min_area_px]
    total_area = sum(r.area_px for r in kept)
    has_mm = all(r.area_mm2 is not None for r in kept) and kept
    stats = SceneStats(
        thallus_count=len(kept),
        cover_fraction=total_area / stats.total_pixels if stats.total_pixels else 0.0,
        total_area_px=total_area,
        total_pixels=stats.total_pixels,
        total_area_mm2=sum(r.area_mm2 for r in kept) if has_mm else None,
    )
    return kept, stats


CSV_COLUMNS = [
    "index", "area_px", "filled_area_px", "perimeter_px", "centroid_r",
    "centroid_c", "major_px", "minor_px", "area_mm2", "perimeter_mm",
    "major_mm", "minor_mm",
]


def records_to_csv(records: list[ThallusRecord], stats: SceneStats) -> str:
    """CSV with one row per thallus plus a trailing scene summary row."""
    with_mm = any(r.area_mm2 is not None for r in records)
    cols = CSV_COLUMNS if with_mm else CSV_COLUMNS[:8]
    out = io.StringIO()
    out.write(",".join(cols) + "\n")

    def fmt(v):
        return "" if v is None else (str(v) if isinstance(v, int) else f"{v:.9g}")

    for r in records:
        row = [r.index, r.area_px, r.filled_area_px, r.perimeter_px,
               r.centroid[0], r.centroid[1], r.major_px, r.minor_px]
        if with_mm:
            row += [r.area_mm2, r.perimeter_mm, r.major_mm, r.minor_mm]
        out.write(",".join(fmt(v) for v in row) + "\n")
    out.write(
        f"# scene,thalli={stats.thallus_count},cover={stats.cover_fraction:.9g},"
        f"area_px={stats.total_area_px}"
        + (f",area_mm2={stats.total_area_mm2:.9g}" if stats.total_area_mm2 is not None
           else "")
        + "\n"
    )
    return out.getvalue()
