"""Exact min-cut / max-flow on 8-connected pixel grids with integer capacities.

Terminal links are consolidated into one signed capacity per pixel (positive:
residual capacity from the source, negative: toward the sink); callers track
the subtracted constant. The reported foreground side is the canonical
minimal source-side cut (residual reachability from the source), which is
identical for every maximum flow, so both kernel lanes agree bit for bit.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from . import backend

# neighbor order; opposite direction of d is 7 - d
OFF_Y = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
OFF_X = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)

INF_CAP = np.int64(1) << 62


def _dinic_loops(nbr, term, h, w):
    n = h * w
    level = np.empty(n, dtype=np.int32)
    queue = np.empty(n, dtype=np.int64)
    it = np.empty(n, dtype=np.int8)
    path = np.empty(n + 1, dtype=np.int64)
    off_y = OFF_Y
    off_x = OFF_X
    flow = np.int64(0)
    while True:
        level[:] = -1
        tail = 0
        for p in range(n):
            if term[p] > 0:
                level[p] = 0
                queue[tail] = p
                tail += 1
        sink_reached = False
        head = 0
        while head < tail:
            p = queue[head]
            head += 1
            if term[p] < 0:
                sink_reached = True
            y = p // w
            x = p % w
            for d in range(8):
                if nbr[p, d] > 0:
                    ny = y + off_y[d]
                    nx = x + off_x[d]
                    if 0 <= ny < h and 0 <= nx < w:
                        q = ny * w + nx
                        if level[q] < 0:
                            level[q] = level[p] + 1
                            queue[tail] = q
                            tail += 1
        if not sink_reached:
            break
        it[:] = 0
        for s0 in range(n):
            if term[s0] <= 0 or level[s0] != 0:
                continue
            while term[s0] > 0:
                top = 0
                path[0] = s0
                found = False
                while top >= 0:
                    p = path[top]
                    if term[p] < 0:
                        found = True
                        break
                    advanced = False
                    while it[p] < 8:
                        d = it[p]
                        if nbr[p, d] > 0:
                            y = p // w
                            x = p % w
                            ny = y + off_y[d]
                            nx = x + off_x[d]
                            if 0 <= ny < h and 0 <= nx < w:
                                q = ny * w + nx
                                if level[q] == level[p] + 1 and (
                                    term[q] < 0 or it[q] < 8
                                ):
                                    top += 1
                                    path[top] = q
                                    advanced = True
                                    break
                        it[p] += 1
                    if not advanced:
                        top -= 1
                        if top >= 0:
                            it[path[top]] += 1
                if not found:
                    break
                bott = term[s0]
                for i in range(top):
                    c = nbr[path[i], it[path[i]]]
                    if c < bott:
                        bott = c
                last = path[top]
                if -term[last] < bott:
                    bott = -term[last]
                term[s0] -= bott
                term[last] += bott
                for i in range(top):
                    p = path[i]
                    d = it[p]
                    nbr[p, d] -= bott
                    nbr[path[i + 1], 7 - d] += bott
                flow += bott
    # canonical cut: residual reachability from the source
    reach = np.zeros(n, dtype=np.bool_)
    tail = 0
    for p in range(n):
        if term[p] > 0:
            reach[p] = True
            queue[tail] = p
            tail += 1
    head = 0
    while head < tail:
        p = queue[head]
        head += 1
        y = p // w
        x = p % w
        for d in range(8):
            if nbr[p, d] > 0:
                ny = y + off_y[d]
                nx = x + off_x[d]
                if 0 <= ny < h and 0 <= nx < w:
                    q = ny * w + nx
                    if not reach[q]:
                        reach[q] = True
                        queue[tail] = q
                        tail += 1
    return flow, reach


_dinic_jit = backend.jit(_dinic_loops)


def _grid_arc_arrays(nbr, term, h, w):
    """Arc lists (u, v, cap) for the grid graph plus terminals s=n, t=n+1."""
    n = h * w
    ids = np.arange(n, dtype=np.int64).reshape(h, w)
    rows, cols, caps = [], [], []
    for d in range(8):
        dy, dx = int(OFF_Y[d]), int(OFF_X[d])
        a = (slice(max(0, -dy), h - max(0, dy)), slice(max(0, -dx), w - max(0, dx)))
        b = (slice(max(0, dy), h + min(0, dy)), slice(max(0, dx), w + min(0, dx)))
        cap_d = nbr[:, d].reshape(h, w)[a].ravel()
        keep = cap_d > 0
        rows.append(ids[a].ravel()[keep])
        cols.append(ids[b].ravel()[keep])
        caps.append(cap_d[keep])
    src = np.flatnonzero(term > 0)
    snk = np.flatnonzero(term < 0)
    rows.append(np.full(len(src), n, dtype=np.int64))
    cols.append(src)
    caps.append(term[src])
    rows.append(snk)
    cols.append(np.full(len(snk), n + 1, dtype=np.int64))
    caps.append(-term[snk])
    return (np.concatenate(rows), np.concatenate(cols),
            np.concatenate(caps).astype(np.int64))


def _maxflow_scipy(nbr, term, h, w):
    # scipy's solver stores capacities as int32, so hard (infinite) terminal
    # links cannot be passed through: contract hard-source nodes into the
    # source and hard-sink nodes into the sink instead. The contraction
    # preserves the max-flow value and the canonical cut exactly.
    n = h * w
    hard_fg = term >= (INF_CAP >> 1)
    hard_bg = term <= -(INF_CAP >> 1)
    soft_term = np.where(hard_fg | hard_bg, 0, term)
    rows, cols, caps = _grid_arc_arrays(nbr, soft_term, h, w)
    s_id, t_id = n, n + 1
    hf = np.zeros(n + 2, dtype=bool)
    hf[:n] = hard_fg
    hb = np.zeros(n + 2, dtype=bool)
    hb[:n] = hard_bg
    keep = ~(hb[rows] | hf[cols])  # drop arcs leaving the sink / entering source
    rows = np.where(hf[rows], s_id, rows)[keep]
    cols = np.where(hb[cols], t_id, cols)[keep]
    caps = caps[keep]
    if caps.size and caps.max() >= np.int64(1) << 31:
        raise ValueError(
            "numpy max-flow lane requires capacities below 2^31; "
            "use the numba lane for this graph"
        )
    graph = csr_matrix((caps, (rows, cols)), shape=(n + 2, n + 2))
    res = maximum_flow(graph, n, n + 1)
    residual = graph - res.flow  # union pattern; reverse arcs get +flow
    residual.data = np.maximum(residual.data, 0)
    residual.eliminate_zeros()
    order = breadth_first_order(residual, n, directed=True,
                                return_predecessors=False)
    reach = np.zeros(n + 2, dtype=bool)
    reach[order] = True
    reach[:n][hard_fg] = True
    reach[:n][hard_bg] = False
    return np.int64(res.flow_value), reach[:n]


def grid_maxflow(
    nbr_cap: np.ndarray,
    term_cap: np.ndarray,
    h: int,
    w: int,
    force_lane: str | None = None,
) -> tuple[int, np.ndarray]:
    """Max flow on the grid; returns (flow, source-side mask of shape (h,w)).

    ``nbr_cap`` is (n, 8) int64 and is consumed (residual state on return);
    pass copies if the originals are still needed.
    """
    nbr = np.ascontiguousarray(nbr_cap, dtype=np.int64)
    term = np.ascontiguousarray(term_cap, dtype=np.int64)
    lane = force_lane or ("numba" if backend.USE_NUMBA else "numpy")
    if lane == "numba":
        flow, reach = _dinic_jit(nbr, term, h, w)
    else:
        flow, reach = _maxflow_scipy(nbr, term, h, w)
    return int(flow), reach.reshape(h, w)
