"""Parity between the numba kernel lane and the pure-numpy fallback lane."""

import subprocess
import sys

import numpy as np

from lichenmeter import backend
from lichenmeter.grabcut import GrabcutParams, init_trimap, segment
from lichenmeter.features import FeatureConfig, extract_features
from lichenmeter.rectify import warp_array
from lichenmeter.slic import SlicParams, slic

from conftest import make_raster, two_tone_image


import pytest


@pytest.mark.skipif(not backend.NUMBA_REQUESTED,
                    reason="suite running with LICHENMETER_NUMBA=0")
def test_numba_is_the_default_lane_here():
    assert backend.HAVE_NUMBA
    assert backend.USE_NUMBA  # the suite runs with the default env


def test_env_flag_selects_numpy_lane():
    code = (
        "from lichenmeter import backend; "
        "assert not backend.USE_NUMBA; assert backend.HAVE_NUMBA"
    )
    r = subprocess.run(
        [sys.executable, "-c", code],
        env={"PATH": "/usr/bin:/bin", "LICHENMETER_NUMBA": "0"},
        capture_output=True,
    )
    assert r.returncode == 0, r.stderr.decode()


def test_warp_lanes_bit_identical(rng):
    src = rng.integers(0, 256, (40, 55, 3)).astype(np.float64)
    h = np.array([[0.97, 0.08, 2.0], [-0.06, 1.03, -1.0], [2e-4, -1e-4, 1.0]])
    a = warp_array(src, h, 50, 60, force_lane="numba")
    b = warp_array(src, h, 50, 60, force_lane="numpy")
    assert np.array_equal(a, b)


def test_histogram_lanes_bit_identical(rng):
    from lichenmeter.slic import SuperpixelMap

    img = make_raster(rng.integers(0, 256, (30, 40, 3)))
    labels = rng.integers(0, 7, (30, 40)).astype(np.int32)
    spx = SuperpixelMap(labels=labels, n_segments=7,
                        counts=np.bincount(labels.ravel(), minlength=7))
    a = extract_features(img, spx, FeatureConfig(), force_lane="numba")
    b = extract_features(img, spx, FeatureConfig(), force_lane="numpy")
    assert np.array_equal(a, b)


def test_slic_lanes_bit_identical():
    img = two_tone_image(48, 64, 32, noise=12, seed=3)
    for p in (SlicParams(24, 10.0, 1.0), SlicParams(60, 20.0, 3.0)):
        a = slic(img, p, force_lane="numba")
        b = slic(img, p, force_lane="numpy")
        assert np.array_equal(a.labels, b.labels)


def test_grabcut_masks_identical_across_lanes():
    # integer capacities and the canonical minimal cut make the two flow
    # solvers agree exactly
    rng = np.random.default_rng(1)
    img = np.zeros((40, 60, 3), dtype=np.int64)
    img[...] = (70, 95, 110)
    img[12:30, 18:45] = (185, 160, 70)
    img = make_raster(np.clip(img + rng.integers(-6, 7, img.shape), 0, 255))
    tri = init_trimap(img, (5, 5, 50, 30))
    a = segment(img, tri, GrabcutParams(seed=0), force_lane="numba")
    b = segment(img, tri, GrabcutParams(seed=0), force_lane="numpy")
    assert a.any() and np.array_equal(a, b)
