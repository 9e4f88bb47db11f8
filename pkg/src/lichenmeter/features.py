"""Superpixels -> classifier rows: relative-frequency color histograms, and
ground-truth class assignment per segment via a majority threshold."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import backend
from .imaging import Raster, check_mask
from .slic import SlicParams, SuperpixelMap

DEFAULT_BINS = 32
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class FeatureConfig:
    """Per-channel histograms by default; joint RGB cube behind a flag."""

    bins: int = DEFAULT_BINS
    joint: bool = False
    joint_bins: int = 8

    def __post_init__(self):
        if self.bins < 2 or self.joint_bins < 2:
            raise ValueError("histogram needs at least 2 bins")

    @property
    def dim(self) -> int:
        return self.joint_bins ** 3 if self.joint else 3 * self.bins


def _hist_loops(px, labels, n_seg, bins):
    n = px.shape[0]
    out = np.zeros((n_seg, 3 * bins), dtype=np.float64)
    for i in range(n):
        seg = labels[i]
        for c in range(3):
            b = px[i, c] * bins // 256
            out[seg, c * bins + b] += 1.0
    return out


_hist_jit = backend.jit(_hist_loops)


def _hist_numpy(px, labels, n_seg, bins):
    out = np.empty((n_seg, 3 * bins), dtype=np.float64)
    for c in range(3):
        b = px[:, c] * bins // 256
        counts = np.bincount(labels * bins + b, minlength=n_seg * bins)
        out[:, c * bins : (c + 1) * bins] = counts.reshape(n_seg, bins)
    return out


def _joint_hist(px, labels, n_seg, jb):
    b = (
        (px[:, 0].astype(np.int64) * jb // 256) * jb * jb
        + (px[:, 1].astype(np.int64) * jb // 256) * jb
        + (px[:, 2].astype(np.int64) * jb // 256)
    )
    dim = jb ** 3
    counts = np.bincount(labels * dim + b, minlength=n_seg * dim)
    return counts.reshape(n_seg, dim).astype(np.float64)


def extract_features(
    img: Raster,
    spx: SuperpixelMap,
    config: FeatureConfig = FeatureConfig(),
    force_lane: str | None = None,
) -> np.ndarray:
    """(n_segments, dim) rows of relative frequencies, each summing to 1."""
    if img.channels != 3:
        raise ValueError("extract_features requires an RGB raster")
    if spx.labels.shape != img.data.shape[:2]:
        raise ValueError("superpixel map does not match image dimensions")
    px = img.data.reshape(-1, 3).astype(np.int64)
    labels = spx.labels.ravel().astype(np.int64)
    if config.joint:
        hist = _joint_hist(px, labels, spx.n_segments, config.joint_bins)
        hist /= np.maximum(spx.counts[:, None], 1)
    else:
        lane = force_lane or ("numba" if backend.USE_NUMBA else "numpy")
        fn = _hist_jit if lane == "numba" else _hist_numpy
        hist = fn(px, labels, spx.n_segments, config.bins)
        hist /= np.maximum(spx.counts[:, None], 1)  # each channel sums to 1
        hist /= 3.0
    # renormalize the concatenation (exact already; guards degenerate rows)
    sums = hist.sum(axis=1, keepdims=True)
    return hist / np.where(sums > 0, sums, 1.0)


def label_segments(
    spx: SuperpixelMap, truth: np.ndarray, threshold: float = DEFAULT_THRESHOLD
) -> np.ndarray:
    """Per-segment class: lichen (1) iff lichen fraction strictly exceeds
    the threshold, else background (0)."""
    truth = check_mask(truth)
    if truth.shape != spx.labels.shape:
        raise ValueError("truth mask does not match superpixel map")
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    lichen = np.bincount(spx.labels[truth].ravel(), minlength=spx.n_segments)
    return (lichen > threshold * spx.counts).astype(np.uint8)


def quantized_mask(
    spx: SuperpixelMap, truth: np.ndarray, threshold: float = DEFAULT_THRESHOLD
) -> np.ndarray:
    """Paint each segment with its majority class: the best mask any
    segment-level classifier could produce for this superpixel map."""
    seg_class = label_segments(spx, truth, threshold)
    return seg_class[spx.labels].astype(bool)


@dataclass
class LabeledTable:
    """Feature rows for the segments of one or more images, plus classes."""

    features: np.ndarray  # (n, dim)
    labels: np.ndarray  # (n,) uint8, 1 = lichen
    image_ids: list[str]
    segment_ids: np.ndarray  # (n,)
    slic_params: SlicParams
    feature_config: FeatureConfig
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        n = len(self.features)
        if not (len(self.labels) == len(self.image_ids) == len(self.segment_ids) == n):
            raise ValueError("table columns have mismatched lengths")

    @property
    def n_rows(self) -> int:
        return len(self.features)

    def to_csv(self) -> str:
        dim = self.features.shape[1]
        out = io.StringIO()
        out.write("image,segment," + ",".join(f"f{i}" for i in range(dim)) + ",label\n")
        for i in range(self.n_rows):
            feats = ",".join(f"{v:.9g}" for v in self.features[i])
            out.write(
                f"{self.image_ids[i]},{self.segment_ids[i]},{feats},"
                f"{int(self.labels[i])}\n"
            )
        return out.getvalue()


def build_table(
    items: list[tuple[str, Raster, np.ndarray | None]],
    slic_params: SlicParams,
    config: FeatureConfig = FeatureConfig(),
    threshold: float = DEFAULT_THRESHOLD,
    spx_cache: dict | None = None,
) -> LabeledTable:
    """SLIC + features (+ classes when a truth mask is given) for a list of
    (image_id, raster, mask-or-None), rows ordered by (image, segment)."""
    from .slic import slic as run_slic

    feats, labels, images, segids = [], [], [], []
    for image_id, raster, mask in sorted(items, key=lambda t: t[0]):
        spx = None
        if spx_cache is not None:
            spx = spx_cache.get((image_id, slic_params))
        if spx is None:
            spx = run_slic(raster, slic_params)
            if spx_cache is not None:
                spx_cache[(image_id, slic_params)] = spx
        feats.append(extract_features(raster, spx, config))
        if mask is not None:
            labels.append(label_segments(spx, mask, threshold))
        else:
            labels.append(np.zeros(spx.n_segments, dtype=np.uint8))
        images.extend([image_id] * spx.n_segments)
        segids.append(np.arange(spx.n_segments))
    return LabeledTable(
        features=np.concatenate(feats) if feats else np.zeros((0, config.dim)),
        labels=np.concatenate(labels) if labels else np.zeros(0, np.uint8),
        image_ids=images,
        segment_ids=np.concatenate(segids) if segids else np.zeros(0, np.int64),
        slic_params=slic_params,
        feature_config=config,
        threshold=threshold,
    )
