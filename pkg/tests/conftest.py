import numpy as np
import pytest

from lichenmeter.imaging import Raster


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_raster(arr) -> Raster:
    return Raster(np.ascontiguousarray(arr, dtype=np.uint8))


def two_tone_image(h=60, w=80, split=40, left=(200, 60, 50), right=(40, 60, 200),
                   noise=0, seed=0):
    img = np.zeros((h, w, 3), dtype=np.int64)
    img[:, :split] = left
    img[:, split:] = right
    if noise:
        r = np.random.default_rng(seed)
        img = img + r.integers(-noise, noise + 1, img.shape)
    return make_raster(np.clip(img, 0, 255))
