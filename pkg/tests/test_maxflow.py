import numpy as np
import pytest

from oracles import edmonds_karp, grid_to_dense, random_grid_graph

from lichenmeter.maxflow import OFF_X, OFF_Y, grid_maxflow


@pytest.mark.parametrize("lane", ["numba", "numpy"])
def test_flow_equals_reference_oracle(lane, rng):
    for trial in range(30):
        h = int(rng.integers(2, 8))
        w = int(rng.integers(2, 8))
        nbr, term = random_grid_graph(rng, h, w)
        dense, s, t = grid_to_dense(nbr, term, h, w)
        expect, _ = edmonds_karp(dense, s, t)
        got, _ = grid_maxflow(nbr.copy(), term.copy(), h, w, force_lane=lane)
        assert got == expect


def test_lanes_produce_identical_masks(rng):
    for trial in range(15):
        h = int(rng.integers(3, 12))
        w = int(rng.integers(3, 12))
        nbr, term = random_grid_graph(rng, h, w)
        f1, m1 = grid_maxflow(nbr.copy(), term.copy(), h, w, force_lane="numba")
        f2, m2 = grid_maxflow(nbr.copy(), term.copy(), h, w, force_lane="numpy")
        assert f1 == f2
        assert np.array_equal(m1, m2)  # canonical minimal source-side cut


def test_cut_value_equals_severed_capacity(rng):
    # the mask must certify the flow: sum of capacities crossing the cut
    for trial in range(15):
        h = int(rng.integers(3, 9))
        w = int(rng.integers(3, 9))
        nbr, term = random_grid_graph(rng, h, w)
        flow, mask = grid_maxflow(nbr.copy(), term.copy(), h, w)
        fg = mask.ravel()
        cut = int(np.where(~fg, np.maximum(term, 0), 0).sum())  # source links
        cut += int(np.where(fg, np.maximum(-term, 0), 0).sum())  # sink links
        ids = np.arange(h * w).reshape(h, w)
        for d in range(8):
            dy, dx = int(OFF_Y[d]), int(OFF_X[d])
            a = (slice(max(0, -dy), h - max(0, dy)),
                 slice(max(0, -dx), w - max(0, dx)))
            b = (slice(max(0, dy), h + min(0, dy)),
                 slice(max(0, dx), w + min(0, dx)))
            sel = fg[ids[a].ravel()] & ~fg[ids[b].ravel()]
            cut += int(nbr[ids[a].ravel(), d][sel].sum())
        assert cut == flow


def test_hard_terminals_respected():
    h = w = 5
    n = h * w
    nbr = np.zeros((n, 8), dtype=np.int64)
    ids = np.arange(n).reshape(h, w)
    for d in range(8):
        dy, dx = int(OFF_Y[d]), int(OFF_X[d])
        if (dy, dx) not in ((0, 1), (1, 0), (1, 1), (1, -1)):
            continue
        a = (slice(max(0, -dy), h - max(0, dy)), slice(max(0, -dx), w - max(0, dx)))
        b = (slice(max(0, dy), h + min(0, dy)), slice(max(0, dx), w + min(0, dx)))
        nbr[ids[a].ravel(), d] = 7
        nbr[ids[b].ravel(), 7 - d] = 7
    term = np.zeros(n, dtype=np.int64)
    big = np.int64(1) << 62
    term[0] = big
    term[n - 1] = -big
    _, mask = grid_maxflow(nbr, term, h, w)
    assert mask.ravel()[0] and not mask.ravel()[n - 1]
