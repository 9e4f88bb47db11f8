import numpy as np
import pytest

from lichenmeter.errors import ModelFailure
from lichenmeter.grabcut import (
    HARD_BG,
    HARD_FG,
    PROB_FG,
    GrabcutParams,
    Stroke,
    fit_gmms,
    init_trimap,
    rasterize_stroke,
    refine,
    segment,
    segment_with_stats,
)
from conftest import make_raster, two_tone_image


def blob_image(h=50, w=70, noise=5, seed=0):
    rng = np.random.default_rng(seed)
    img = np.zeros((h, w, 3), dtype=np.int64)
    img[...] = (70, 95, 110)
    truth = np.zeros((h, w), dtype=bool)
    truth[14:36, 20:52] = True
    img[truth] = (190, 170, 60)
    img = np.clip(img + rng.integers(-noise, noise + 1, img.shape), 0, 255)
    return make_raster(img), truth


def test_init_trimap_full_image():
    img, _ = blob_image()
    tri = init_trimap(img, (0, 0, img.width, img.height))
    assert (tri == PROB_FG).all()


def test_init_trimap_left_half():
    img, _ = blob_image()
    tri = init_trimap(img, (0, 0, img.width // 2, img.height))
    assert (tri[:, img.width // 2 :] == HARD_BG).all()
    assert (tri[:, : img.width // 2] == PROB_FG).all()


def test_init_trimap_rejects_bad_rect():
    img, _ = blob_image()
    with pytest.raises(ValueError):
        init_trimap(img, (5, 5, 0, 10))
    with pytest.raises(ValueError):
        init_trimap(img, (60, 5, 20, 10))


def test_fit_gmms_two_color_collapses_to_true_colors():
    img = two_tone_image(40, 40, 20, left=(200, 60, 50), right=(40, 60, 200))
    tri = init_trimap(img, (0, 0, 20, 40))
    fg, bg = fit_gmms(img, tri)
    assert fg.weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert bg.weights.sum() == pytest.approx(1.0, abs=1e-9)
    # moments oracle: population means of each side
    fg_best = fg.means[np.argmax(fg.weights)]
    bg_best = bg.means[np.argmax(bg.weights)]
    assert np.abs(fg_best - [200, 60, 50]).max() <= 1.0
    assert np.abs(bg_best - [40, 60, 200]).max() <= 1.0


def test_fit_gmms_single_class_fails():
    img = two_tone_image()
    tri = np.full((img.height, img.width), PROB_FG, dtype=np.uint8)
    with pytest.raises(ModelFailure):
        fit_gmms(img, tri)


def test_segment_recovers_blob_exactly():
    img, truth = blob_image()
    tri = init_trimap(img, (10, 6, 52, 38))
    mask = segment(img, tri)
    assert np.array_equal(mask, truth)


def test_segment_hard_fg_stroke_is_foreground():
    img, truth = blob_image()
    tri = init_trimap(img, (10, 6, 52, 38))
    tri[3, 3] = HARD_FG  # background-colored pixel forced to foreground
    mask = segment(img, tri)
    assert mask[3, 3]


def test_energy_non_increasing():
    from lichenmeter.synthcorpus import difficulty_spec, generate

    for seed in range(4):
        scene = generate(difficulty_spec(seed, "medium", width=120, height=90,
                                         blob_count=3, blob_r_min=9.0,
                                         blob_r_max=16.0))
        tri = init_trimap(scene.image, (4, 4, 112, 82))
        _, stats = segment_with_stats(scene.image, tri, GrabcutParams(iters=5))
        n_caps = 8 * scene.image.width * scene.image.height
        for a, b in zip(stats.energies, stats.energies[1:]):
            assert b <= a + n_caps  # slack: one fixed-point quantum per capacity


def test_segment_deterministic():
    img, _ = blob_image(noise=12)
    tri = init_trimap(img, (10, 6, 52, 38))
    m1 = segment(img, tri, GrabcutParams(seed=3))
    m2 = segment(img, tri, GrabcutParams(seed=3))
    assert np.array_equal(m1, m2)


def test_refine_no_strokes_matches_segment():
    img, _ = blob_image()
    tri = init_trimap(img, (10, 6, 52, 38))
    assert np.array_equal(refine(img, tri, []), segment(img, tri))


def test_refine_bg_stroke_removes_false_positive():
    # a bright mineral vein is initially segmented as lichen; one background
    # stroke across it teaches the models to evict it
    rng = np.random.default_rng(1)
    img = np.zeros((50, 80, 3), dtype=np.int64)
    img[...] = (70, 95, 110)
    truth = np.zeros((50, 80), dtype=bool)
    truth[10:26, 8:30] = True
    fp = np.zeros((50, 80), dtype=bool)
    fp[12:28, 48:72] = True
    img[truth] = (190, 170, 60)
    img[fp] = (235, 230, 228)
    img = make_raster(np.clip(img + rng.integers(-5, 6, img.shape), 0, 255))
    tri = init_trimap(img, (2, 2, 76, 46))
    before = segment(img, tri)
    assert before[18, 58]  # the distractor is initially foreground
    ys = np.linspace(14, 26, 6)
    strokes = [
        Stroke(points=np.column_stack([np.linspace(50, 70, 6), ys]), label="bg",
               brush_radius=5)
    ]
    after = refine(img, tri, strokes)
    assert not after[fp].any()
    assert after[truth].mean() > 0.95


def test_refine_erasing_last_class_pixel_fails():
    img = two_tone_image(20, 20, 10)
    tri = np.full((20, 20), HARD_BG, dtype=np.uint8)
    tri[5, 5] = HARD_FG
    stroke = Stroke(points=np.array([[5.0, 5.0]]), label="bg", brush_radius=3)
    with pytest.raises(ModelFailure):
        refine(img, tri, [stroke])


def test_rasterize_stroke_radius_and_clipping():
    mask = rasterize_stroke((20, 20), np.array([[10.0, 10.0]]), radius=3)
    assert mask[10, 10] and mask[10, 13] and not mask[10, 14]
    edge = rasterize_stroke((20, 20), np.array([[0.0, 0.0], [0.0, 30.0]]), radius=2)
    assert edge[:, 0].any() and edge.shape == (20, 20)


def test_scripted_stroke_refinement_reaches_mcc_090():
    from lichenmeter.modelselect import mask_confusion, mcc
    from lichenmeter.synthcorpus import difficulty_spec, generate

    scene = generate(difficulty_spec(5, "medium", width=200, height=150,
                                     blob_count=4))
    img = scene.image
    tri = init_trimap(img, (4, 4, img.width - 8, img.height - 8))
    mask = segment(img, tri, GrabcutParams(seed=1))
    # scripted oracle strokes: mark the largest truth blob and a clean
    # background corridor, as an operator would
    ys, xs = np.nonzero(scene.truth)
    cy, cx = int(ys.mean()), int(xs.mean())
    fg_pts = np.array([[cx - 4, cy], [cx + 4, cy]], dtype=float)
    bg_row = int(np.argmin(scene.truth.sum(axis=1)))
    bg_pts = np.array([[8.0, bg_row], [img.width - 8.0, bg_row]])
    mask = refine(
        img,
        tri,
        [
            Stroke(points=fg_pts, label="fg", brush_radius=4),
            Stroke(points=bg_pts, label="bg", brush_radius=4),
        ],
        GrabcutParams(seed=1),
    )
    score = mcc(mask_confusion(mask, scene.truth))
    assert score >= 0.9
