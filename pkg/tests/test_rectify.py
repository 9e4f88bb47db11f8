import numpy as np
import pytest

from lichenmeter.errors import DegenerateGeometry, DetectionFailure
from lichenmeter.imaging import hsv_to_rgb_float, quantize_u8
from lichenmeter.rectify import (
    Homography,
    QuadDetection,
    TargetLayout,
    detect_targets,
    estimate_homography,
    rectify_image,
    warp_array,
)
from lichenmeter.synthcorpus import TARGET_HSV

from conftest import make_raster


def target_scene(centers, radius=9.0, size=(120, 160), extra_blobs=()):
    """Rock-gray canvas with target-colored disks at the given (x, y) centers."""
    h, w = size
    hsv = np.zeros((h, w, 3))
    hsv[..., 0] = 20.0
    hsv[..., 1] = 40.0
    hsv[..., 2] = 120.0
    for (cx, cy), r in list(zip(centers, [radius] * len(centers))) + [
        (c, r) for c, r in extra_blobs
    ]:
        yy, xx = np.mgrid[0:h, 0:w]
        inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        for c in range(3):
            hsv[..., c][inside] = TARGET_HSV[c]
    return make_raster(quantize_u8(hsv_to_rgb_float(hsv)))


CENTERS = [(30.0, 25.0), (130.0, 30.0), (125.0, 95.0), (35.0, 90.0)]


def test_detect_four_targets_within_one_px():
    img = target_scene(CENTERS)
    quad = detect_targets(img)
    expect = np.array(CENTERS)  # already TL,TR,BR,BL by construction
    assert np.abs(quad.corners - expect).max() <= 1.0
    assert (quad.blob_areas >= 50).all()


def test_detect_three_targets_fails_with_count():
    img = target_scene(CENTERS[:3])
    with pytest.raises(DetectionFailure) as e:
        detect_targets(img)
    assert e.value.found == 3


def test_detect_axis_aligned_ordering():
    centers = [(20.0, 20.0), (100.0, 20.0), (100.0, 80.0), (20.0, 80.0)]
    quad = detect_targets(target_scene(centers))
    assert np.abs(quad.corners - np.array(centers)).max() <= 1.0


def test_detect_ignores_small_distractors():
    # distractor blobs of target color, each under 50 px (radius 3 -> 29 px)
    extra = [((70.0, 60.0), 3.0), ((90.0, 40.0), 3.0), ((50.0, 70.0), 3.5)]
    quad = detect_targets(target_scene(CENTERS, extra_blobs=extra))
    assert np.abs(quad.corners - np.array(CENTERS)).max() <= 1.0


def layout_quad(layout: TargetLayout) -> QuadDetection:
    return QuadDetection(layout.dest_corners(), np.full(4, 100))


def test_homography_identity_when_quad_equals_destination():
    layout = TargetLayout(100, 50, 1.0)
    h = estimate_homography(layout_quad(layout), layout)
    assert np.allclose(h.matrix, np.eye(3), atol=1e-9)


def test_homography_pure_scaling():
    layout = TargetLayout(100, 50, 1.0)
    quad = QuadDetection(layout.dest_corners() * 2.0, np.full(4, 100))
    h = estimate_homography(quad, layout)
    assert np.allclose(h.matrix, np.diag([0.5, 0.5, 1.0]), atol=1e-9)


def test_homography_exact_on_random_quads(rng):
    # oracle route: SVD null space of the 9-column DLT system
    layout = TargetLayout(272, 185, 10.0)
    dst = layout.dest_corners()
    for _ in range(20):
        quad = np.array([[0, 0], [100, 0], [100, 70], [0, 70]], dtype=float)
        quad += rng.uniform(-18, 18, (4, 2))
        h = estimate_homography(QuadDetection(quad, np.full(4, 60)), layout)
        proj = h.apply(quad)
        assert np.abs(proj - dst).max() < 1e-6  # exact on the 4 corners

        rows = []
        for (x, y), (u, v) in zip(quad, dst):
            rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
            rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
        _, s, vt = np.linalg.svd(np.asarray(rows))
        h_svd = vt[-1].reshape(3, 3)
        h_svd /= h_svd[2, 2]
        assert np.allclose(h_svd, h.matrix, atol=1e-6 * np.abs(h.matrix).max())


def test_homography_translation_equivariance(rng):
    layout = TargetLayout(50, 40, 2.0)
    quad = np.array([[3.0, 4.0], [88, 9], [91, 74], [7, 69]])
    h = estimate_homography(QuadDetection(quad, np.full(4, 60)), layout)
    dx, dy = 13.5, -7.25
    h2 = estimate_homography(QuadDetection(quad + [dx, dy], np.full(4, 60)), layout)
    t_inv = np.array([[1, 0, -dx], [0, 1, -dy], [0, 0, 1.0]])
    expect = h.matrix @ t_inv
    expect /= expect[2, 2]
    assert np.allclose(h2.matrix, expect, atol=1e-8)


def test_homography_collinear_corners_degenerate():
    layout = TargetLayout(50, 40, 2.0)
    quad = np.array([[0.0, 0], [50, 0], [100, 0], [0, 40]])  # 3 collinear
    with pytest.raises(DegenerateGeometry):
        estimate_homography(QuadDetection(quad, np.full(4, 60)), layout)


def test_homography_rejects_singular_matrix():
    with pytest.raises(DegenerateGeometry):
        Homography(np.array([[1, 0, 0], [0, 1, 0], [0, 0, 0]], dtype=float))


def test_rectify_identity_is_crop():
    rng = np.random.default_rng(3)
    img = make_raster(rng.integers(0, 256, (60, 80, 3)))
    layout = TargetLayout(50, 30, 1.0)
    out = rectify_image(img, Homography.identity(), layout)
    assert out.data.shape == (30, 50, 3)
    assert np.array_equal(out.data, img.data[:30, :50])
    assert out.scale == 1.0


def test_warp_inverse_round_trip_interior(rng):
    # bilinear sampling is exact on locally linear intensity fields, so the
    # one-level claim is tested on a smooth image ...
    h = np.array([[1.02, 0.04, 3.0], [-0.03, 0.98, 2.0], [1e-4, -8e-5, 1.0]])
    inner = (slice(12, 58), slice(12, 78))
    smooth = np.zeros((70, 90, 3))
    smooth[...] = (
        np.linspace(40, 200, 90)[None, :, None]
        + np.linspace(0, 30, 70)[:, None, None]
    )
    fwd_s = warp_array(smooth, np.linalg.inv(h), 70, 90)
    back_s = warp_array(fwd_s, h, 70, 90)
    assert np.abs(back_s[inner] - smooth[inner]).max() <= 1.0
    # ... and exactly (any content) for grid-aligned warps
    img = rng.integers(0, 256, (70, 90, 3)).astype(np.float64)
    t = np.array([[1.0, 0, 5.0], [0, 1.0, -3.0], [0, 0, 1.0]])
    fwd = warp_array(img, np.linalg.inv(t), 70, 90)
    back = warp_array(fwd, t, 70, 90)
    assert np.array_equal(back[inner], img[inner])


def test_rectified_disk_axes_within_two_percent():
    from lichenmeter.regions import measure_mask
    from lichenmeter.synthcorpus import WarpSpec, difficulty_spec, generate

    spec = difficulty_spec(
        42, "medium", include_targets=True, include_mark_disk=True,
        blob_count=4, warp=WarpSpec(cam_width=1500, cam_height=1000),
    )
    scene = generate(spec)
    layout = TargetLayout()
    quad = detect_targets(scene.image)
    h = estimate_homography(quad, layout)
    rect = rectify_image(scene.image, h, layout)
    hsv = rect.data.astype(np.float64)
    white = (hsv[..., 0] > 190) & (hsv[..., 1] > 190) & (hsv[..., 2] > 190)
    recs, _ = measure_mask(white)
    disk = max(recs, key=lambda r: r.area_px)
    for axis in (disk.major_px, disk.minor_px):
        assert abs(axis * rect.scale - 60.0) / 60.0 <= 0.02
