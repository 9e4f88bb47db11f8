"""Deterministic synthetic scenes with exact ground truth: value-noise rock,
irregular lichen blobs, blue calibration targets, a 60 mm reference disk,
and optional perspective warps into a simulated camera frame."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SpecInfeasible
from .imaging import Raster, hsv_to_rgb_float, quantize_u8, save_mask, save_png
from .rectify import Homography, TargetLayout, warp_array, warp_mask_nearest

ROCK_HUE = 12.0  # brownish rock base, [0,180) hue units
TARGET_HSV = (100.0, 200.0, 210.0)  # inside the published detection band
TARGET_RADIUS_MM = 12.0
MARK_DIAMETER_MM = 60.0


# --- integer-hash value noise (bit-stable across platforms) -----------------


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    seed_term = np.uint32((seed * 2246822519) & 0xFFFFFFFF)
    h = (
        ix.astype(np.uint32) * np.uint32(374761393)
        + iy.astype(np.uint32) * np.uint32(668265263)
        + seed_term
    )
    h ^= h >> np.uint32(13)
    h *= np.uint32(1274126177)
    h ^= h >> np.uint32(16)
    return h.astype(np.float64) / 4294967296.0


def value_noise(h: int, w: int, freq: float, seed: int) -> np.ndarray:
    """Smooth [0,1) lattice noise at the given frequency (cells per pixel)."""
    ys = np.arange(h, dtype=np.float64)[:, None] * freq
    xs = np.arange(w, dtype=np.float64)[None, :] * freq
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    ty = ys - y0
    tx = xs - x0
    ty = ty * ty * (3.0 - 2.0 * ty)
    tx = tx * tx * (3.0 - 2.0 * tx)
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    v00 = _hash01(x0, y0, seed)
    v01 = _hash01(x0 + 1, y0, seed)
    v10 = _hash01(x0, y0 + 1, seed)
    v11 = _hash01(x0 + 1, y0 + 1, seed)
    top = v00 * (1.0 - tx) + v01 * tx
    bot = v10 * (1.0 - tx) + v11 * tx
    return top * (1.0 - ty) + bot * ty


def fractal_noise(h: int, w: int, base_freq: float, octaves: int,
                  seed: int) -> np.ndarray:
    """Multi-octave value noise normalized to [0,1]."""
    out = np.zeros((h, w))
    amp = 1.0
    total = 0.0
    for o in range(octaves):
        out += amp * value_noise(h, w, base_freq * (2.0 ** o), seed * 16 + o)
        total += amp
        amp *= 0.5
    return out / total


# --- scene parameters -------------------------------------------------------


@dataclass(frozen=True)
class WarpSpec:
    cam_width: int = 3000
    cam_height: int = 2000
    tilt_max_deg: float = 30.0
    fill: float = 0.80
    distance_mm: float = 600.0


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    width: int = 480
    height: int = 360
    blob_count: int = 12
    blob_r_min: float = 14.0
    blob_r_max: float = 42.0
    wobble: float = 0.25  # radial boundary perturbation amplitude
    margin_rough: float = 0.05  # high-frequency margin roughness amplitude
    margin_blend_px: float = 4.0  # optical mixing band width at the margin
    hue_offset: float = 25.0  # blob hue offset from rock hue, [0,180) units
    hue_jitter: float = 3.0
    value_jitter: float = 14.0
    scene_drift: float = 5.0  # per-scene palette variation (hue units)
    noise_octaves: int = 4
    include_targets: bool = False
    include_mark_disk: bool = False
    layout: TargetLayout = field(default_factory=TargetLayout)
    margin_mm: float = 30.0
    px_per_mm: float = 5.0  # flat-frame rendering resolution for target scenes
    warp: WarpSpec | None = None


DIFFICULTY_PRESETS = {
    "easy": dict(hue_offset=45.0, hue_jitter=2.0, value_jitter=10.0, wobble=0.2,
                 margin_rough=0.02, margin_blend_px=1.5),
    "medium": dict(hue_offset=25.0, hue_jitter=4.0, value_jitter=16.0,
                   wobble=0.25, margin_rough=0.06, margin_blend_px=5.0),
    "hard": dict(hue_offset=12.0, hue_jitter=6.0, value_jitter=22.0, wobble=0.3,
                 margin_rough=0.09, margin_blend_px=7.0),
}


def difficulty_spec(seed: int, difficulty: str = "medium", **overrides) -> SceneSpec:
    if difficulty not in DIFFICULTY_PRESETS:
        raise ValueError(f"difficulty must be one of {sorted(DIFFICULTY_PRESETS)}")
    kw = dict(DIFFICULTY_PRESETS[difficulty])
    kw.update(overrides)
    return SceneSpec(seed=seed, **kw)


@dataclass
class Scene:
    image: Raster  # camera frame when warped, else the flat frame
    truth: np.ndarray
    meta: dict
    flat_image: Raster | None = None  # populated for warped scenes
    flat_truth: np.ndarray | None = None


def _paint_disk(hsv: np.ndarray, cy: float, cx: float, r: float,
                color: tuple[float, float, float]) -> np.ndarray:
    h, w, _ = hsv.shape
    y0, y1 = max(0, int(cy - r - 2)), min(h, int(cy + r + 3))
    x0, x1 = max(0, int(cx - r - 2)), min(w, int(cx + r + 3))
    yy, xx = np.mgrid[y0:y1, x0:x1]
    inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    for c in range(3):
        hsv[y0:y1, x0:x1, c][inside] = color[c]
    full = np.zeros((h, w), dtype=bool)
    full[y0:y1, x0:x1] = inside
    return full


def _blob_mask(h, w, cy, cx, a, b, angle, harmonics, wobble, blend_px):
    """Irregular ellipse: radius modulated by random harmonics. Returns the
    exact truth mask plus a margin-blend alpha (0..1) for rendering."""
    rmax = max(a, b) * (1.0 + wobble) + blend_px + 2.0
    y0, y1 = max(0, int(cy - rmax)), min(h, int(cy + rmax + 1))
    x0, x1 = max(0, int(cx - rmax)), min(w, int(cx + rmax + 1))
    if y0 >= y1 or x0 >= x1:
        return None, None
    yy, xx = np.mgrid[y0:y1, x0:x1]
    dy = yy - cy
    dx = xx - cx
    ca, sa = np.cos(angle), np.sin(angle)
    u = (dx * ca + dy * sa) / a
    v = (-dx * sa + dy * ca) / b
    rho = np.sqrt(u * u + v * v)
    theta = np.arctan2(v, u)
    edge = np.ones_like(rho)
    for k, amp, phase in harmonics:
        edge += amp * np.cos(k * theta + phase)
    out = np.zeros((h, w), dtype=bool)
    out[y0:y1, x0:x1] = rho <= edge
    # optical mixing of thallus and substrate near the margin (render only;
    # the truth mask stays exactly rho <= edge)
    scale = (a + b) / 2.0
    dist_in = (edge - rho) * scale  # approx. px inside the margin
    alpha = np.zeros((h, w))
    alpha[y0:y1, x0:x1] = np.clip(dist_in / max(blend_px, 1e-6), 0.0, 1.0)
    alpha[~out] = 0.0
    return out, alpha


def generate(spec: SceneSpec) -> Scene:
    """Render a scene; the truth mask shares the blob rasterization exactly."""
    layout = spec.layout
    if spec.include_targets:
        ppm = spec.px_per_mm
        w = int(round((layout.width_mm + 2 * spec.margin_mm) * ppm))
        h = int(round((layout.height_mm + 2 * spec.margin_mm) * ppm))
    else:
        h, w = spec.height, spec.width

    rng = np.random.default_rng(spec.seed)
    # per-scene palette drift: different rocks and lighting per photograph
    rock_hue = ROCK_HUE + rng.uniform(-spec.scene_drift, spec.scene_drift)
    rock_sat = 55.0 + rng.uniform(-12.0, 12.0)
    rock_val = 95.0 + rng.uniform(-18.0, 18.0)
    blob_hue_bias = rng.uniform(-spec.scene_drift, spec.scene_drift)
    blob_val_bias = rng.uniform(-14.0, 14.0)
    hsv = np.empty((h, w, 3))
    hsv[..., 0] = rock_hue + 8.0 * (
        fractal_noise(h, w, 1 / 48.0, spec.noise_octaves, spec.seed * 7 + 1) - 0.5
    )
    hsv[..., 1] = rock_sat + 45.0 * fractal_noise(h, w, 1 / 64.0,
                                                  spec.noise_octaves,
                                                  spec.seed * 7 + 2)
    hsv[..., 2] = rock_val + 85.0 * fractal_noise(h, w, 1 / 56.0,
                                                  spec.noise_octaves,
                                                  spec.seed * 7 + 3)

    keepout: list[tuple[float, float, float]] = []  # (cy, cx, radius)
    meta: dict = {"seed": spec.seed, "width": w, "height": h}

    if spec.include_targets:
        ppm = spec.px_per_mm
        tr = TARGET_RADIUS_MM * ppm
        centers_mm = [(0.0, 0.0), (layout.width_mm, 0.0),
                      (layout.width_mm, layout.height_mm), (0.0, layout.height_mm)]
        centers_px = [
            ((mx + spec.margin_mm) * ppm, (my + spec.margin_mm) * ppm)
            for mx, my in centers_mm
        ]
        for cx, cy in centers_px:
            _paint_disk(hsv, cy, cx, tr, TARGET_HSV)
            keepout.append((cy, cx, tr))
        meta["target_centers_px"] = [[cx, cy] for cx, cy in centers_px]
        meta["target_centers_mm"] = [[mx, my] for mx, my in centers_mm]
        meta["px_per_mm"] = ppm
        meta["target_radius_px"] = tr
        meta["layout"] = {
            "width_mm": layout.width_mm,
            "height_mm": layout.height_mm,
            "px_per_mm": layout.px_per_mm,
        }

    if spec.include_mark_disk:
        ppm = spec.px_per_mm if spec.include_targets else 1.0
        mr = MARK_DIAMETER_MM / 2.0 * ppm
        mcy, mcx = h / 2.0, w / 2.0
        _paint_disk(hsv, mcy, mcx, mr, (0.0, 0.0, 255.0))
        keepout.append((mcy, mcx, mr))
        meta["mark"] = {
            "center_px": [mcx, mcy],
            "radius_px": mr,
            "diameter_mm": MARK_DIAMETER_MM,
        }

    max_pad = spec.blob_r_max * (1 + spec.wobble) + 2
    if spec.blob_count > 0 and 2 * max_pad >= min(h, w):
        raise SpecInfeasible(
            f"blob radius up to {spec.blob_r_max} cannot fit a {w}x{h} scene"
        )
    truth = np.zeros((h, w), dtype=bool)
    blob_tex = fractal_noise(h, w, 1 / 24.0, 3, spec.seed * 131 + 5)
    blob_meta = []
    for bi in range(spec.blob_count):
        for attempt in range(100):
            a = rng.uniform(spec.blob_r_min, spec.blob_r_max)
            b = a * rng.uniform(0.6, 1.0)
            angle = rng.uniform(0, np.pi)
            pad = max(a, b) * (1 + spec.wobble) + 2
            cy = rng.uniform(pad, h - pad)
            cx = rng.uniform(pad, w - pad)
            clear = all(
                np.hypot(cy - ky, cx - kx) > kr + pad + 4 for ky, kx, kr in keepout
            )
            if clear:
                break
        else:
            raise SpecInfeasible(
                f"could not place blob {bi} after 100 tries; too crowded"
            )
        nh = 2 + int(rng.integers(0, 3))
        amps = rng.uniform(0.3, 1.0, nh)
        amps *= spec.wobble / amps.sum()
        harmonics = [
            (int(k), float(amp), float(rng.uniform(0, 2 * np.pi)))
            for k, amp in zip(range(2, 2 + nh), amps)
        ]
        # fine margin roughness: lichen edges are lobed below superpixel scale
        for _ in range(3):
            k = int(rng.integers(9, 28))
            harmonics.append(
                (k, float(rng.uniform(0.35, 1.0) * spec.margin_rough),
                 float(rng.uniform(0, 2 * np.pi)))
            )
        mask, alpha = _blob_mask(h, w, cy, cx, a, b, angle, harmonics,
                                 spec.wobble, spec.margin_blend_px)
        if mask is None or not mask.any():
            continue
        hue = (ROCK_HUE + spec.hue_offset + blob_hue_bias
               + rng.uniform(-spec.hue_jitter, spec.hue_jitter)) % 180.0
        if 85.0 <= hue <= 115.0:  # stay out of the target detection band
            hue = (hue + 35.0) % 180.0
        sat = rng.uniform(120.0, 190.0)
        val = blob_val_bias + rng.uniform(100.0, 170.0)
        tex = blob_tex[mask]
        am = alpha[mask]
        blob_hsv = (
            hue + 2.0 * (tex - 0.5),
            sat + 30.0 * (tex - 0.5),
            val + 2.0 * spec.value_jitter * (tex - 0.5),
        )
        for c in range(3):
            hsv[..., c][mask] = am * blob_hsv[c] + (1.0 - am) * hsv[..., c][mask]
        truth |= mask
        blob_meta.append(
            {"center": [cx, cy], "axes": [a, b], "angle": angle, "hue": hue}
        )
    meta["blobs"] = blob_meta

    hsv[..., 0] %= 180.0
    hsv[..., 1] = np.clip(hsv[..., 1], 0, 255)
    hsv[..., 2] = np.clip(hsv[..., 2], 0, 255)
    flat = Raster(
        quantize_u8(hsv_to_rgb_float(hsv)),
        scale=(1.0 / spec.px_per_mm) if spec.include_targets else None,
    )

    if spec.warp is None:
        return Scene(image=flat, truth=truth, meta=meta)

    g = _camera_homography(spec, w, h, rng)
    meta["flat_to_camera"] = g.matrix.tolist()
    cam_w, cam_h = spec.warp.cam_width, spec.warp.cam_height
    hinv = np.linalg.inv(g.matrix)
    cam_img = Raster(quantize_u8(warp_array(flat.as_float(), hinv, cam_h, cam_w)))
    cam_truth = warp_mask_nearest(truth, hinv, cam_h, cam_w)
    if "target_centers_px" in meta:
        meta["target_centers_cam_px"] = g.apply(
            np.asarray(meta["target_centers_px"])
        ).tolist()
    if "mark" in meta:
        meta["mark"]["center_cam_px"] = g.apply(
            np.asarray([meta["mark"]["center_px"]])
        )[0].tolist()
    return Scene(image=cam_img, truth=cam_truth, meta=meta,
                 flat_image=flat, flat_truth=truth)


def _camera_homography(spec: SceneSpec, w: int, h: int,
                       rng: np.random.Generator) -> Homography:
    """Flat-frame px -> camera px under a random tilt <= tilt_max_deg."""
    ws = spec.warp
    tilt = np.deg2rad(rng.uniform(0.35, 1.0) * ws.tilt_max_deg)
    azimuth = rng.uniform(0, 2 * np.pi)
    roll = rng.uniform(-0.3, 0.3)
    axis = np.array([np.cos(azimuth), np.sin(azimuth), 0.0])
    rot = _axis_angle(axis, tilt) @ _axis_angle(np.array([0.0, 0.0, 1.0]), roll)
    # plane points in mm, centered so the rotation pivots on the scene center
    ppm = spec.px_per_mm if spec.include_targets else 4.0
    c_x, c_y = w / 2.0 / ppm, h / 2.0 / ppm
    px2mm = np.array(
        [[1.0 / ppm, 0, -c_x], [0, 1.0 / ppm, -c_y], [0, 0, 1.0]]
    )
    rt = np.column_stack([rot[:, 0], rot[:, 1], [0.0, 0.0, ws.distance_mm]])
    proj = rt @ px2mm
    corners = np.array([[0.0, 0], [w - 1.0, 0], [w - 1.0, h - 1.0], [0, h - 1.0]])
    ch = np.hstack([corners, np.ones((4, 1))]) @ proj.T
    xn = ch[:, 0] / ch[:, 2]
    yn = ch[:, 1] / ch[:, 2]
    f = ws.fill * min(
        ws.cam_width / (xn.max() - xn.min()), ws.cam_height / (yn.max() - yn.min())
    )
    cx = ws.cam_width / 2.0 - f * (xn.max() + xn.min()) / 2.0
    cy = ws.cam_height / 2.0 - f * (yn.max() + yn.min()) / 2.0
    k = np.array([[f, 0, cx], [0, f, cy], [0, 0, 1.0]])
    return Homography(k @ proj)


def _axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    cc = 1 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


def write_corpus(
    out_dir: str | Path,
    count: int,
    seed: int,
    difficulty: str = "medium",
    include_targets: bool = False,
    include_mark: bool = False,
    warp: bool = False,
    **overrides,
) -> dict:
    """Emit image/truth/meta per scene plus a corpus manifest; returns it."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenes = []
    for i in range(count):
        spec = difficulty_spec(
            seed + i,
            difficulty,
            include_targets=include_targets,
            include_mark_disk=include_mark,
            warp=WarpSpec() if warp else None,
            **overrides,
        )
        scene = generate(spec)
        sid = f"scene_{i:04d}"
        save_png(scene.image, out / f"{sid}.png")
        save_mask(scene.truth, out / f"{sid}_truth.png")
        if scene.flat_image is not None:
            save_png(scene.flat_image, out / f"{sid}_flat.png")
            save_mask(scene.flat_truth, out / f"{sid}_flat_truth.png")
        (out / f"{sid}_meta.json").write_text(
            json.dumps(scene.meta, sort_keys=True), encoding="utf-8"
        )
        scenes.append({"id": sid, "image": f"{sid}.png", "truth": f"{sid}_truth.png",
                       "meta": f"{sid}_meta.json"})
    manifest = {
        "count": count,
        "seed": seed,
        "difficulty": difficulty,
        "include_targets": include_targets,
        "include_mark": include_mark,
        "warp": warp,
        "scenes": scenes,
    }
    (out / "corpus.json").write_text(json.dumps(manifest, sort_keys=True),
                                     encoding="utf-8")
    return manifest
