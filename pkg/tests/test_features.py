import numpy as np
import pytest

from lichenmeter.features import (
    FeatureConfig,
    build_table,
    extract_features,
    label_segments,
    quantized_mask,
)
from lichenmeter.slic import SlicParams, SuperpixelMap, slic

from conftest import make_raster, two_tone_image


def spx_from_labels(labels):
    labels = np.asarray(labels, dtype=np.int32)
    count = labels.max() + 1
    return SuperpixelMap(
        labels=labels, n_segments=count,
        counts=np.bincount(labels.ravel(), minlength=count),
    )


def test_single_color_segment_thirds():
    img = make_raster(np.full((4, 4, 3), 10))
    spx = spx_from_labels(np.zeros((4, 4)))
    rows = extract_features(img, spx, FeatureConfig(bins=32))
    assert rows.shape == (1, 96)
    nz = np.flatnonzero(rows[0])
    assert len(nz) == 3
    assert np.allclose(rows[0][nz], 1 / 3)


def test_black_white_segment_sixths():
    img = np.zeros((2, 2, 3), dtype=np.uint8)
    img[0] = 255
    spx = spx_from_labels(np.zeros((2, 2)))
    rows = extract_features(make_raster(img), spx, FeatureConfig(bins=32))
    nz = np.flatnonzero(rows[0])
    assert len(nz) == 6
    assert np.allclose(rows[0][nz], 1 / 6)


def test_histogram_matches_naive_tally(rng):
    img = rng.integers(0, 256, (20, 30, 3)).astype(np.uint8)
    labels = rng.integers(0, 5, (20, 30)).astype(np.int32)
    spx = spx_from_labels(labels)
    bins = 16
    rows = extract_features(make_raster(img), spx, FeatureConfig(bins=bins))
    # naive per-pixel counting oracle
    for seg in range(5):
        expect = np.zeros(3 * bins)
        count = 0
        for y in range(20):
            for x in range(30):
                if labels[y, x] != seg:
                    continue
                count += 1
                for c in range(3):
                    expect[c * bins + int(img[y, x, c]) * bins // 256] += 1
        expect /= count * 3
        assert np.allclose(rows[seg], expect, atol=1e-12)


def test_rows_sum_to_one_and_channel_swap_covariance(rng):
    img = rng.integers(0, 256, (24, 24, 3)).astype(np.uint8)
    labels = rng.integers(0, 4, (24, 24)).astype(np.int32)
    spx = spx_from_labels(labels)
    rows = extract_features(make_raster(img), spx)
    assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-9)
    perm = [2, 0, 1]
    rows_p = extract_features(make_raster(img[..., perm]), spx)
    bins = 32
    blocks = [rows[:, c * bins : (c + 1) * bins] for c in perm]
    assert np.allclose(rows_p, np.concatenate(blocks, axis=1))


def test_joint_histogram_dim():
    img = make_raster(np.full((4, 4, 3), 200))
    spx = spx_from_labels(np.zeros((4, 4)))
    rows = extract_features(img, spx, FeatureConfig(joint=True))
    assert rows.shape == (1, 512)
    assert rows.sum() == pytest.approx(1.0)


def test_bins_validation():
    with pytest.raises(ValueError):
        FeatureConfig(bins=1)


def test_label_segments_majority_rule():
    labels = np.zeros((10, 10), dtype=np.int32)
    labels[:, 5:] = 1
    spx = spx_from_labels(labels)
    truth = np.zeros((10, 10), dtype=bool)
    truth[:6, :5] = True  # segment 0: 60% lichen
    assert label_segments(spx, truth, 0.5).tolist() == [1, 0]
    # 0% lichen -> background
    assert label_segments(spx, np.zeros((10, 10), bool), 0.5).tolist() == [0, 0]
    # exactly 50% -> background (strict inequality)
    truth50 = np.zeros((10, 10), dtype=bool)
    truth50[:5, :5] = True
    assert label_segments(spx, truth50, 0.5).tolist() == [0, 0]


def test_label_segments_reproduces_segment_constant_mask():
    labels = np.repeat(np.arange(6, dtype=np.int32), 20).reshape(6, 20)
    spx = spx_from_labels(labels)
    seg_class = np.array([1, 0, 0, 1, 1, 0], dtype=np.uint8)
    truth = seg_class[labels].astype(bool)
    assert np.array_equal(label_segments(spx, truth, 0.5), seg_class)
    assert np.array_equal(quantized_mask(spx, truth, 0.5), truth)


def test_quantized_mask_small_blob_mcc_zero():
    from lichenmeter.modelselect import mask_confusion, mcc

    labels = np.zeros((20, 20), dtype=np.int32)
    labels[:, 10:] = 1
    spx = spx_from_labels(labels)
    truth = np.zeros((20, 20), dtype=bool)
    truth[4:7, 4:7] = True  # 9 px inside a 200 px segment: under threshold
    q = quantized_mask(spx, truth, 0.5)
    assert not q.any()
    assert mcc(mask_confusion(q, truth)) == 0.0


def test_quantized_mask_mcc_improves_with_segments_on_average():
    # finer superpixels adhere better, as a corpus average (not per scene)
    from lichenmeter.modelselect import mask_confusion, mcc
    from lichenmeter.synthcorpus import difficulty_spec, generate

    scores = {50: [], 400: []}
    for seed in range(6):
        scene = generate(difficulty_spec(seed, "medium", width=240, height=180,
                                         blob_count=5, blob_r_min=12,
                                         blob_r_max=30))
        for n in scores:
            spx = slic(scene.image, SlicParams(n, 10.0, 1.0))
            q = quantized_mask(spx, scene.truth, 0.5)
            scores[n].append(mcc(mask_confusion(q, scene.truth)))
    assert np.mean(scores[400]) >= np.mean(scores[50])
    assert np.mean(scores[400]) >= 0.85


def test_table_csv_format(rng):
    img = two_tone_image(30, 40, 20, noise=3)
    truth = np.zeros((30, 40), dtype=bool)
    truth[:, :20] = True
    table = build_table([("img0", img, truth)], SlicParams(8, 10.0, 1.0))
    text = table.to_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "image,segment," + ",".join(
        f"f{i}" for i in range(96)) + ",label"
    assert len(lines) == table.n_rows + 1
    cells = lines[1].split(",")
    assert cells[0] == "img0" and cells[-1] in ("0", "1")
    # 9-significant-digit formatting round-trips through the same format
    for v_str in cells[2:-1]:
        v = float(v_str)
        assert f"{v:.9g}" == v_str


def test_table_row_order_fixed():
    img = two_tone_image(30, 40, 20, noise=3)
    truth = np.zeros((30, 40), dtype=bool)
    items = [("b", img, truth), ("a", img, truth)]
    table = build_table(items, SlicParams(8, 10.0, 1.0))
    assert table.image_ids == sorted(table.image_ids)
    per_image = np.asarray(table.segment_ids)
    split = table.image_ids.index("b")
    assert (np.diff(per_image[:split]) == 1).all()
