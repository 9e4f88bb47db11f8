"""Interactive foreground extraction: per-class Gaussian mixture color models,
an 8-connected pixel graph, and iterated exact min-cut with hard user
constraints. Capacities are quantized to int64 fixed point so the cut is
exact integer arithmetic (see maxflow module)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFailure
from .imaging import Raster, check_mask
from .maxflow import INF_CAP, OFF_X, OFF_Y, grid_maxflow

HARD_BG, HARD_FG, PROB_BG, PROB_FG = np.uint8(0), np.uint8(1), np.uint8(2), np.uint8(3)

QUANT = float(1 << 16)  # fixed-point units per unit of energy (int32-safe)
DATA_TERM_MAX = 1e4  # clamp on per-pixel negative log-likelihood
COV_EIG_FLOOR = 1e-3


@dataclass(frozen=True)
class GrabcutParams:
    n_components: int = 5
    lam: float = 50.0
    iters: int = 5
    seed: int = 0
    early_stop_frac: float = 0.001
    brush_radius: int = 5


@dataclass
class Gmm:
    """Full-covariance GMM; scoring uses the best single component."""

    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, 3)
    covs: np.ndarray  # (K, 3, 3)
    _inv: np.ndarray = field(init=False, repr=False)
    _logc: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._refresh()

    def _refresh(self):
        k = len(self.weights)
        self._inv = np.empty((k, 3, 3))
        self._logc = np.full(k, np.inf)
        for i in range(k):
            if self.weights[i] <= 0:
                continue
            vals, vecs = np.linalg.eigh(self.covs[i])
            vals = np.maximum(vals, COV_EIG_FLOOR)
            cov = (vecs * vals) @ vecs.T
            self.covs[i] = cov
            self._inv[i] = (vecs / vals) @ vecs.T
            # -log( w * N(mu, cov) ) = logc + 0.5 * mahalanobis^2
            self._logc[i] = (
                -np.log(self.weights[i])
                + 0.5 * np.log(vals).sum()
                + 1.5 * np.log(2.0 * np.pi)
            )

    def component_scores(self, px: np.ndarray) -> np.ndarray:
        """(n, K) matrix of -log(w_k N_k) per pixel."""
        n = len(px)
        k = len(self.weights)
        out = np.full((n, k), np.inf)
        for i in range(k):
            if self.weights[i] <= 0:
                continue
            d = px - self.means[i]
            quad = np.einsum("nj,jk,nk->n", d, self._inv[i], d)
            out[:, i] = self._logc[i] + 0.5 * quad
        return out

    def neg_log_likelihood(self, px: np.ndarray) -> np.ndarray:
        """Best-component data term, clamped to DATA_TERM_MAX."""
        return np.minimum(self.component_scores(px).min(axis=1), DATA_TERM_MAX)

    def assign(self, px: np.ndarray) -> np.ndarray:
        return self.component_scores(px).argmin(axis=1)

    def refit(self, px: np.ndarray, comp: np.ndarray) -> None:
        """Moment re-estimation for a fixed component assignment."""
        k = len(self.weights)
        n = len(px)
        for i in range(k):
            sel = px[comp == i]
            if len(sel) == 0:
                self.weights[i] = 0.0
                continue
            self.weights[i] = len(sel) / n
            self.means[i] = sel.mean(axis=0)
            d = sel - self.means[i]
            self.covs[i] = (d.T @ d) / len(sel)
        self._refresh()

    def em_pass(self, px: np.ndarray) -> None:
        self.refit(px, self.assign(px))


def _kmeans_pp_init(px: np.ndarray, k: int, rng: np.random.Generator) -> Gmm:
    n = len(px)
    k = min(k, n)
    centers = np.empty((k, 3))
    centers[0] = px[rng.integers(n)]
    d2 = ((px - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i:] = centers[0]
            break
        centers[i] = px[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((px - centers[i]) ** 2).sum(axis=1))
    comp = ((px[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2).argmin(axis=1)
    gmm = Gmm(
        weights=np.full(k, 1.0 / k),
        means=centers.copy(),
        covs=np.tile(np.eye(3), (k, 1, 1)),
    )
    gmm.refit(px, comp)
    return gmm


def init_trimap(img: Raster, rect: tuple[int, int, int, int]) -> np.ndarray:
    """Rectangle (x, y, w, h): inside -> PROB_FG, outside -> HARD_BG."""
    x, y, w, h = rect
    if w <= 0 or h <= 0:
        raise ValueError(f"empty init rectangle: {rect}")
    if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise ValueError(f"rectangle {rect} exceeds image {img.width}x{img.height}")
    tri = np.full((img.height, img.width), HARD_BG, dtype=np.uint8)
    tri[y : y + h, x : x + w] = PROB_FG
    return tri


def fit_gmms(
    img: Raster, trimap: np.ndarray, params: GrabcutParams = GrabcutParams()
) -> tuple[Gmm, Gmm]:
    """Initial color models from the trimap populations (k-means++ seeded)."""
    px = img.as_float().reshape(-1, 3)
    fg = ((trimap == HARD_FG) | (trimap == PROB_FG)).ravel()
    bg = ~fg
    return _fit_pair(px, fg, bg, params)


def _fit_pair(px, fg, bg, params):
    if not fg.any() or not bg.any():
        raise ModelFailure(
            "one class has no pixels; add foreground/background strokes"
        )
    fg_gmm = _kmeans_pp_init(
        px[fg], params.n_components, np.random.default_rng(params.seed * 2 + 1)
    )
    bg_gmm = _kmeans_pp_init(
        px[bg], params.n_components, np.random.default_rng(params.seed * 2)
    )
    return fg_gmm, bg_gmm


def _beta(px_img: np.ndarray) -> float:
    """1 / (2 * mean squared neighbor color difference) over 8-neighbor links."""
    diffs = []
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        a = px_img[
            slice(max(0, -dy), px_img.shape[0] - max(0, dy)),
            slice(max(0, -dx), px_img.shape[1] - max(0, dx)),
        ]
        b = px_img[
            slice(max(0, dy), px_img.shape[0] + min(0, dy)),
            slice(max(0, dx), px_img.shape[1] + min(0, dx)),
        ]
        diffs.append(((a - b) ** 2).sum(axis=-1).ravel())
    mean = float(np.concatenate(diffs).mean())
    return 0.0 if mean <= 0 else 1.0 / (2.0 * mean)


def build_graph(
    img_f: np.ndarray,
    trimap: np.ndarray,
    fg_gmm: Gmm,
    bg_gmm: Gmm,
    lam: float,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Quantized capacities: (n-link array (n,8), signed terminal array (n,),
    subtracted constant). Source side = foreground."""
    h, w, _ = img_f.shape
    n = h * w
    beta = _beta(img_f)

    nbr = np.zeros((n, 8), dtype=np.int64)
    ids = np.arange(n, dtype=np.int64).reshape(h, w)
    for d in range(8):
        dy, dx = int(OFF_Y[d]), int(OFF_X[d])
        if (dy, dx) not in ((0, 1), (1, 0), (1, 1), (1, -1)):
            continue  # symmetric: fill forward dirs, mirror below
        a = (slice(max(0, -dy), h - max(0, dy)), slice(max(0, -dx), w - max(0, dx)))
        b = (slice(max(0, dy), h + min(0, dy)), slice(max(0, dx), w + min(0, dx)))
        d2 = ((img_f[a] - img_f[b]) ** 2).sum(axis=-1)
        dist = np.sqrt(2.0) if dx != 0 and dy != 0 else 1.0
        wgt = np.rint(lam * np.exp(-beta * d2) / dist * QUANT).astype(np.int64)
        nbr[ids[a].ravel(), d] = wgt.ravel()
        nbr[ids[b].ravel(), 7 - d] = wgt.ravel()

    px = img_f.reshape(-1, 3)
    tri = trimap.ravel()
    prob = (tri == PROB_BG) | (tri == PROB_FG)
    src = np.zeros(n, dtype=np.int64)
    snk = np.zeros(n, dtype=np.int64)
    if prob.any():
        # paid when the pixel is labeled background / foreground respectively
        src[prob] = np.rint(bg_gmm.neg_log_likelihood(px[prob]) * QUANT).astype(
            np.int64
        )
        snk[prob] = np.rint(fg_gmm.neg_log_likelihood(px[prob]) * QUANT).astype(
            np.int64
        )
    src[tri == HARD_FG] = INF_CAP
    snk[tri == HARD_BG] = INF_CAP
    base = np.minimum(src, snk)
    return nbr, src - snk, int(base.sum())


@dataclass
class SegmentStats:
    energies: list[int]  # min-cut value per iteration, fixed-point units
    iterations: int
    changed_last: int

    @property
    def energies_float(self) -> list[float]:
        return [e / QUANT for e in self.energies]


def segment_with_stats(
    img: Raster,
    trimap: np.ndarray,
    params: GrabcutParams = GrabcutParams(),
    force_lane: str | None = None,
) -> tuple[np.ndarray, SegmentStats]:
    """Iterated GrabCut; returns the foreground mask and per-iteration energy."""
    if img.channels != 3:
        raise ValueError("segment requires an RGB raster")
    check_mask(trimap == HARD_FG, img)
    h, w = img.height, img.width
    n = h * w
    img_f = img.as_float()
    px = img_f.reshape(-1, 3)
    tri = trimap.ravel()
    hard_fg = tri == HARD_FG
    hard_bg = tri == HARD_BG

    alpha = (tri == HARD_FG) | (tri == PROB_FG)
    fg_gmm = bg_gmm = None
    energies: list[int] = []
    changed = n
    iters = 0
    for iters in range(1, params.iters + 1):
        fg_pop = (alpha | hard_fg) & ~hard_bg
        bg_pop = ~fg_pop
        if not fg_pop.any() or not bg_pop.any():
            raise ModelFailure(
                "one class has no pixels; add foreground/background strokes"
            )
        if fg_gmm is None:
            fg_gmm, bg_gmm = _fit_pair(px, fg_pop, bg_pop, params)
        else:
            fg_gmm.em_pass(px[fg_pop])
            bg_gmm.em_pass(px[bg_pop])
        nbr, term, base = build_graph(img_f, trimap, fg_gmm, bg_gmm, params.lam)
        flow, fg_side = grid_maxflow(nbr, term, h, w, force_lane=force_lane)
        energies.append(flow + base)
        new_alpha = fg_side.ravel()
        changed = int((new_alpha != alpha).sum())
        alpha = new_alpha
        if changed < params.early_stop_frac * n:
            break

    # hard constraints are structural (infinite links); assert anyway
    assert bool(alpha[hard_fg].all()) and not bool(alpha[hard_bg].any())
    return alpha.reshape(h, w).copy(), SegmentStats(energies, iters, changed)


def segment(
    img: Raster,
    trimap: np.ndarray,
    params: GrabcutParams = GrabcutParams(),
    force_lane: str | None = None,
) -> np.ndarray:
    mask, _ = segment_with_stats(img, trimap, params, force_lane)
    return mask


def _disk_offsets(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    keep = yy * yy + xx * xx <= r * r
    return np.stack([yy[keep], xx[keep]], axis=1)


def rasterize_stroke(
    shape: tuple[int, int], points: np.ndarray, radius: int
) -> np.ndarray:
    """Paint a polyline of (x, y) points with a round brush into a bool mask."""
    h, w = shape
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != 2:
        raise ValueError("stroke points must be (n, 2) of x,y")
    out = np.zeros(shape, dtype=bool)
    offs = _disk_offsets(radius)
    samples = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        steps = max(1, int(np.ceil(np.hypot(*(b - a)) / 0.5)))
        for t in range(1, steps + 1):
            samples.append(a + (b - a) * (t / steps))
    for x, y in samples:
        cy, cx = int(round(y)), int(round(x))
        ys = offs[:, 0] + cy
        xs = offs[:, 1] + cx
        keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
        out[ys[keep], xs[keep]] = True
    return out


@dataclass(frozen=True)
class Stroke:
    points: np.ndarray  # (n, 2) of x, y image coordinates
    label: str  # "fg" | "bg"
    brush_radius: int = 5


def apply_strokes(trimap: np.ndarray, strokes: list[Stroke]) -> np.ndarray:
    """Burn strokes into a copy of the trimap as hard labels."""
    tri = trimap.copy()
    for s in strokes:
        if s.label not in ("fg", "bg"):
            raise ValueError(f"stroke label must be fg or bg, got {s.label!r}")
        painted = rasterize_stroke(tri.shape, s.points, s.brush_radius)
        tri[painted] = HARD_FG if s.label == "fg" else HARD_BG
    return tri


def refine(
    img: Raster,
    trimap: np.ndarray,
    strokes: list[Stroke],
    params: GrabcutParams = GrabcutParams(),
    force_lane: str | None = None,
) -> np.ndarray:
    """Rasterize strokes as hard constraints and re-run segmentation."""
    tri = apply_strokes(trimap, strokes)
    fg_possible = (tri == HARD_FG) | (tri == PROB_FG)
    bg_possible = (tri == HARD_BG) | (tri == PROB_BG)
    if not fg_possible.any() or not bg_possible.any():
        raise ModelFailure("strokes erased the last pixels of one class")
    return segment(img, tri, params, force_lane)
