import numpy as np
import pytest

from lichenmeter.imaging import (
    TARGET_HSV_BOUNDS,
    HsvBounds,
    Raster,
    gaussian_kernel_1d,
    gaussian_smooth,
    gaussian_smooth_array,
    hsv_to_rgb_float,
    load_image,
    load_mask,
    quantize_u8,
    rgb_to_hsv,
    rgb_to_hsv_float,
    save_mask,
    save_png,
    threshold_hsv,
)

from conftest import make_raster


def test_raster_invariants():
    r = make_raster(np.zeros((4, 5, 3)))
    assert (r.width, r.height, r.channels) == (5, 4, 3)
    with pytest.raises(ValueError):
        Raster(np.zeros((4, 5, 3), dtype=np.float32))
    with pytest.raises(ValueError):
        Raster(np.zeros((4, 5, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        Raster(np.zeros((4, 5), dtype=np.uint8), scale=-1.0)
    with pytest.raises(ValueError):
        r.data[0, 0] = 1  # frozen buffer


def test_rgb_to_hsv_primary_colors():
    img = make_raster([[[255, 0, 0], [0, 0, 255], [128, 128, 128]]])
    hsv = rgb_to_hsv(img).data
    assert tuple(hsv[0, 0]) == (0, 255, 255)  # pure red
    assert tuple(hsv[0, 1]) == (120, 255, 255)  # pure blue
    assert hsv[0, 2, 1] == 0 and hsv[0, 2, 2] == 128  # gray: S=0, V=128


def test_rgb_to_hsv_rejects_single_channel():
    with pytest.raises(ValueError):
        rgb_to_hsv(make_raster(np.zeros((3, 3))))


def test_hsv_round_trip_stride7():
    # float-hue path: quantization only on final write-back -> error <= 1
    vals = np.arange(0, 256, 7, dtype=np.uint8)
    r, g, b = np.meshgrid(vals, vals, vals, indexing="ij")
    rgb = np.stack([r, g, b], axis=-1).reshape(-1, 1, 3).astype(np.float64)
    back = quantize_u8(hsv_to_rgb_float(rgb_to_hsv_float(rgb)))
    assert np.abs(back.astype(int) - rgb.astype(int)).max() <= 1


def test_hsv_round_trip_quantized_bound():
    # through the fully 8-bit HSV raster, hue quantization (2 degree steps)
    # costs up to 5 levels near saturated primaries; same bound as OpenCV
    vals = np.arange(0, 256, 7, dtype=np.uint8)
    r, g, b = np.meshgrid(vals, vals, vals, indexing="ij")
    rgb = make_raster(np.stack([r, g, b], axis=-1).reshape(-1, 37, 3))
    back = quantize_u8(hsv_to_rgb_float(rgb_to_hsv(rgb).as_float()))
    assert np.abs(back.astype(int) - rgb.data.astype(int)).max() <= 5


def test_gaussian_sigma_zero_is_identity():
    img = make_raster(np.random.default_rng(0).integers(0, 256, (20, 30, 3)))
    assert gaussian_smooth(img, 0.0) is img


def test_gaussian_constant_image_unchanged():
    img = make_raster(np.full((16, 16), 77))
    out = gaussian_smooth(img, 3.0)
    assert np.array_equal(out.data, img.data)


def test_gaussian_single_pixel_mass_and_peak():
    # oracle: direct dense 2D convolution with the sampled, 3-sigma kernel
    sigma = 1.0
    arr = np.zeros((21, 21))
    arr[10, 10] = 255.0
    k = gaussian_kernel_1d(sigma)
    r = len(k) // 2
    oracle = np.zeros_like(arr)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            oracle[10 + dy, 10 + dx] = 255.0 * k[r + dy] * k[r + dx]
    out = gaussian_smooth_array(arr, sigma)
    assert np.allclose(out, oracle, atol=1e-12)
    assert out[10, 10] == pytest.approx(40.60648705112912, abs=1e-9)
    assert out.sum() == pytest.approx(255.0, abs=1e-9)  # mass preserved
    img8 = gaussian_smooth(make_raster(np.where(arr > 0, 255, 0)), sigma)
    assert img8.data[10, 10] == 41  # round-half-away write-back


def test_gaussian_mean_preserved_within_half_percent(rng):
    # the published sigma grid (1 and 3) on photo-scale images
    noise = rng.integers(0, 256, (200, 300)).astype(np.float64)
    ramp = np.add.outer(np.linspace(10, 240, 200), np.linspace(0, 15, 300))
    blob = np.zeros((200, 300))
    blob[40:120, 60:220] = 200.0
    for img in (noise, ramp, blob):
        for sigma in (1.0, 3.0):
            out = gaussian_smooth_array(img, sigma)
            assert abs(out.mean() - img.mean()) <= 0.005 * img.mean()


def test_threshold_hsv_target_band():
    hsv = make_raster([[[100, 200, 200], [0, 0, 0]]])
    mask = threshold_hsv(hsv, TARGET_HSV_BOUNDS)
    assert mask[0, 0] and not mask[0, 1]


def test_threshold_monotone_in_bounds(rng):
    hsv = make_raster(
        np.stack(
            [
                rng.integers(0, 180, (30, 30)),
                rng.integers(0, 256, (30, 30)),
                rng.integers(0, 256, (30, 30)),
            ],
            axis=-1,
        )
    )
    inner = HsvBounds(40, 90, 60, 180, 50, 200)
    wider = HsvBounds(30, 95, 50, 200, 40, 230)
    m1 = threshold_hsv(hsv, inner)
    m2 = threshold_hsv(hsv, wider)
    assert not (m1 & ~m2).any()  # widening never clears a set pixel


def test_threshold_rgb_fast_path_equals_hsv_raster_path(rng):
    from lichenmeter.imaging import threshold_hsv_rgb

    for _ in range(6):
        img = make_raster(rng.integers(0, 256, (40, 50, 3)))
        for bounds in (TARGET_HSV_BOUNDS, HsvBounds(0, 179, 0, 255, 0, 255),
                       HsvBounds(10, 60, 30, 200, 100, 255)):
            fast = threshold_hsv_rgb(img, bounds)
            slow = threshold_hsv(rgb_to_hsv(img), bounds)
            assert np.array_equal(fast, slow)


def test_bounds_validation():
    with pytest.raises(ValueError):
        HsvBounds(105, 95, 85, 255, 170, 245)
    with pytest.raises(ValueError):
        HsvBounds(0, 185, 0, 255, 0, 255)
    assert HsvBounds.parse("95,105,85,255,170,245") == TARGET_HSV_BOUNDS


def test_png_round_trip(tmp_path, rng):
    img = make_raster(rng.integers(0, 256, (18, 25, 3)))
    save_png(img, tmp_path / "x.png")
    back = load_image(tmp_path / "x.png")
    assert np.array_equal(back.data, img.data)


def test_mask_png_is_0_255(tmp_path, rng):
    mask = rng.random((12, 17)) > 0.5
    save_mask(mask, tmp_path / "m.png")
    import PIL.Image

    with PIL.Image.open(tmp_path / "m.png") as im:
        assert im.mode == "L"
        vals = np.unique(np.asarray(im))
    assert set(vals.tolist()) <= {0, 255}
    assert np.array_equal(load_mask(tmp_path / "m.png"), mask)
