"""Hot search kernels with numba and numpy/scipy implementations.

Both routes return identical arrays: every input weight is dyadic (see
``hashing.quantize``) so the order in which path sums are formed cannot
change a result.
"""
import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

from . import _accel
from ._accel import njit


# ---------------------------------------------------------------------------
# binary heap on parallel arrays (key, value), lazy deletion
# ---------------------------------------------------------------------------

@njit
def _heap_push(hk, hv, size, key, val):
    if size == hk.shape[0]:
        nk = np.empty(2 * size, dtype=hk.dtype)
        nv = np.empty(2 * size, dtype=hv.dtype)
        nk[:size] = hk
        nv[:size] = hv
        hk = nk
        hv = nv
    i = size
    hk[i] = key
    hv[i] = val
    while i > 0:
        p = (i - 1) >> 1
        if hk[p] > hk[i] or (hk[p] == hk[i] and hv[p] > hv[i]):
            tk = hk[p]
            hk[p] = hk[i]
            hk[i] = tk
            tv = hv[p]
            hv[p] = hv[i]
            hv[i] = tv
            i = p
        else:
            break
    return hk, hv, size + 1


@njit
def _heap_pop(hk, hv, size):
    key = hk[0]
    val = hv[0]
    size -= 1
    if size > 0:
        hk[0] = hk[size]
        hv[0] = hv[size]
        i = 0
        while True:
            left = 2 * i + 1
            right = left + 1
            m = i
            if left < size and (hk[left] < hk[m] or (hk[left] == hk[m] and hv[left] < hv[m])):
                m = left
            if right < size and (hk[right] < hk[m] or (hk[right] == hk[m] and hv[right] < hv[m])):
                m = right
            if m == i:
                break
            tk = hk[m]
            hk[m] = hk[i]
            hk[i] = tk
            tv = hv[m]
            hv[m] = hv[i]
            hv[i] = tv
            i = m
    return key, val, size


# ---------------------------------------------------------------------------
# lattice: multi-source label-setting search with tie masks
# ---------------------------------------------------------------------------

def c_strides(shape):
    shape = np.asarray(shape, dtype=np.int64)
    strides = np.ones(shape.size, dtype=np.int64)
    for a in range(shape.size - 2, -1, -1):
        strides[a] = strides[a + 1] * shape[a + 1]
    return strides


@njit
def _lattice_search_nb(weights, shape, strides, sources, targets):
    d = shape.shape[0]
    n = weights.shape[1]
    dist = np.full(n, np.inf)
    mask = np.zeros(n, dtype=np.uint64)
    expanded_mask = np.zeros(n, dtype=np.uint64)
    expanded = np.zeros(n, dtype=np.bool_)
    hk = np.empty(4 * n + 16, dtype=np.float64)
    hv = np.empty(4 * n + 16, dtype=np.int64)
    size = 0
    for j in range(sources.shape[0]):
        u = sources[j]
        dist[u] = 0.0
        mask[u] |= np.uint64(1) << np.uint64(j)
        hk, hv, size = _heap_push(hk, hv, size, 0.0, u)

    is_target = np.zeros(n, dtype=np.bool_)
    remaining = 0
    for t in range(targets.shape[0]):
        if not is_target[targets[t]]:
            is_target[targets[t]] = True
            remaining += 1
    armed = False
    stop_key = np.inf

    while size > 0:
        key, u, size = _heap_pop(hk, hv, size)
        if armed and key > stop_key:
            break
        if key > dist[u]:
            continue
        if expanded[u] and expanded_mask[u] == mask[u]:
            continue
        if not expanded[u]:
            expanded[u] = True
            if is_target[u]:
                remaining -= 1
                if remaining == 0:
                    armed = True
                    stop_key = key
        expanded_mask[u] = mask[u]
        du = dist[u]
        mu = mask[u]
        for a in range(d):
            c = (u // strides[a]) % shape[a]
            for side in range(2):
                if side == 0:
                    if c >= shape[a] - 1:
                        continue
                    v = u + strides[a]
                    w = weights[a, u]
                else:
                    if c == 0:
                        continue
                    v = u - strides[a]
                    w = weights[a, v]
                nd = du + w
                if nd < dist[v]:
                    dist[v] = nd
                    mask[v] = mu
                    hk, hv, size = _heap_push(hk, hv, size, nd, v)
                elif nd == dist[v] and (mask[v] | mu) != mask[v]:
                    mask[v] |= mu
                    hk, hv, size = _heap_push(hk, hv, size, nd, v)
    return dist, mask


def lattice_graph(weights, shape):
    """Undirected CSR adjacency of the box graph (explicit zeros are kept)."""
    shape = np.asarray(shape, dtype=np.int64)
    n = int(np.prod(shape))
    strides = c_strides(shape)
    idx = np.arange(n, dtype=np.int64)
    rows, cols, vals = [], [], []
    for a in range(shape.size):
        c = (idx // strides[a]) % shape[a]
        ok = c < shape[a] - 1
        rows.append(idx[ok])
        cols.append(idx[ok] + strides[a])
        vals.append(weights[a, ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sparse.csr_matrix((np.concatenate([vals, vals]),
                              (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
                             shape=(n, n))


def _lattice_search_np(weights, shape, sources):
    g = lattice_graph(weights, shape)
    per = np.atleast_2d(csgraph.dijkstra(g, directed=True,
                                         indices=np.asarray(sources, dtype=np.int64)))
    dist = per.min(axis=0)
    mask = np.zeros(dist.size, dtype=np.uint64)
    finite = np.isfinite(dist)
    for j in range(per.shape[0]):
        mask[finite & (per[j] == dist)] |= np.uint64(1) << np.uint64(j)
    return dist, mask


def lattice_search(weights, shape, sources, targets=None, use_numba=None):
    """Multi-source shortest-path times over a box of the lattice.

    ``weights[a, i]`` is the passage time of the edge from flat site ``i`` to
    its ``+e_a`` neighbour. Returns ``(dist, mask)``: the minimal time over
    all sources, and a bitmask of the source indices attaining it. With
    ``targets`` the compiled path may stop once every target is settled
    (times at other sites are then only upper bounds).
    """
    use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
    shape = np.asarray(shape, dtype=np.int64)
    sources = np.asarray(sources, dtype=np.int64)
    if sources.size > 63:
        raise ValueError("at most 63 sources per search")
    if use_numba:
        t = np.empty(0, np.int64) if targets is None else np.asarray(targets, dtype=np.int64)
        return _lattice_search_nb(np.ascontiguousarray(weights, dtype=np.float64),
                                  shape, c_strides(shape), sources, t)
    return _lattice_search_np(weights, shape, sources)


# ---------------------------------------------------------------------------
# continuum: time-ordered burst sweep over a removable cell list
# ---------------------------------------------------------------------------

@njit
def _burst_sweep_nb(points, n_events, tau, radius, src_c, src_r, t_stop,
                    origin, cell, dims):
    n = points.shape[0]
    d = points.shape[1]
    ncell = 1
    for a in range(d):
        ncell *= dims[a]
    cstride = np.ones(d, dtype=np.int64)
    for a in range(d - 2, -1, -1):
        cstride[a] = cstride[a + 1] * dims[a + 1]

    cid = np.empty(n, dtype=np.int64)
    for i in range(n):
        f = 0
        for a in range(d):
            c = int(np.floor((points[i, a] - origin[a]) / cell))
            if c < 0:
                c = 0
            elif c >= dims[a]:
                c = dims[a] - 1
            f += c * cstride[a]
        cid[i] = f
    perm = np.argsort(cid, kind="mergesort")
    start = np.zeros(ncell + 1, dtype=np.int64)
    for i in range(n):
        start[cid[i] + 1] += 1
    for c in range(ncell):
        start[c + 1] += start[c]
    live_end = start[1:].copy()

    time = np.full(n, np.inf)
    hk = np.empty(1024, dtype=np.float64)
    hv = np.empty(1024, dtype=np.int64)
    size = 0

    # seed region: everything inside a source ball is infected at time 0
    for c in range(ncell):
        p = start[c]
        while p < live_end[c]:
            q = perm[p]
            inside = False
            for s in range(src_c.shape[0]):
                d2 = 0.0
                for a in range(d):
                    diff = points[q, a] - src_c[s, a]
                    d2 += diff * diff
                if d2 <= src_r[s] * src_r[s]:
                    inside = True
                    break
            if inside:
                time[q] = 0.0
                perm[p] = perm[live_end[c] - 1]
                perm[live_end[c] - 1] = q
                live_end[c] -= 1
                if q < n_events and tau[q] <= t_stop:
                    hk, hv, size = _heap_push(hk, hv, size, tau[q], q)
            else:
                p += 1

    lo = np.empty(d, dtype=np.int64)
    hi = np.empty(d, dtype=np.int64)
    cur = np.empty(d, dtype=np.int64)
    while size > 0:
        t, u, size = _heap_pop(hk, hv, size)
        if t > t_stop:
            break
        r = radius[u]
        r2 = r * r
        for a in range(d):
            l = int(np.floor((points[u, a] - r - origin[a]) / cell))
            h = int(np.floor((points[u, a] + r - origin[a]) / cell))
            l = min(max(l, 0), dims[a] - 1)
            h = min(max(h, 0), dims[a] - 1)
            lo[a] = l
            hi[a] = h
            cur[a] = l
        while True:
            c = 0
            for a in range(d):
                c += cur[a] * cstride[a]
            p = start[c]
            while p < live_end[c]:
                q = perm[p]
                d2 = 0.0
                for a in range(d):
                    diff = points[q, a] - points[u, a]
                    d2 += diff * diff
                if d2 <= r2 and d2 > 0.0:
                    time[q] = t
                    perm[p] = perm[live_end[c] - 1]
                    perm[live_end[c] - 1] = q
                    live_end[c] -= 1
                    if q < n_events:
                        nt = t + tau[q]
                        if nt <= t_stop:
                            hk, hv, size = _heap_push(hk, hv, size, nt, q)
                else:
                    p += 1
            # odometer over the cell range
            a = d - 1
            while a >= 0:
                cur[a] += 1
                if cur[a] <= hi[a]:
                    break
                cur[a] = lo[a]
                a -= 1
            if a < 0:
                break
    return time


def _covers(centers, radii, pts):
    d2 = ((pts - centers) ** 2).sum(axis=-1)
    return (d2 <= radii ** 2) & (d2 > 0.0)


def _burst_sweep_np(points, n_events, tau, radius, src_c, src_r, t_stop):
    """Explicit event graph + scipy Dijkstra; same semantics as the sweep."""
    n = points.shape[0]
    ev = points[:n_events]
    time = np.full(n, np.inf)
    in_src = np.zeros(n, dtype=bool)
    for c, r in zip(src_c, src_r):
        in_src |= ((points - c) ** 2).sum(axis=1) <= r * r
    time[in_src] = 0.0
    if n_events == 0:
        return time
    tree = cKDTree(ev)
    rows, cols = [], []
    cand = tree.query_ball_point(ev, radius * (1 + 1e-9) + 1e-12)
    for u, lst in enumerate(cand):
        if not lst:
            continue
        lst = np.asarray(lst, dtype=np.int64)
        ok = _covers(ev[u], radius[u], ev[lst])
        rows.append(np.full(ok.sum(), u, dtype=np.int64))
        cols.append(lst[ok])
    rows = np.concatenate(rows) if rows else np.empty(0, np.int64)
    cols = np.concatenate(cols) if cols else np.empty(0, np.int64)
    src_events = np.flatnonzero(in_src[:n_events])
    ev_time = np.full(n_events, np.inf)
    if src_events.size:
        # node-exit weights: the edge u -> v costs tau_u
        g = sparse.csr_matrix((tau[rows], (rows, cols)), shape=(n_events, n_events))
        ev_time = csgraph.dijkstra(g, directed=True, indices=src_events, min_only=True)
    ev_time[ev_time > t_stop] = np.inf
    time[:n_events] = np.where(in_src[:n_events], 0.0, ev_time)

    tg = np.arange(n_events, n)
    tg = tg[~in_src[tg]]
    if tg.size:
        reach = np.isfinite(ev_time) & (ev_time + tau <= t_stop)
        r_cap = float(radius.max())
        cand = tree.query_ball_point(points[tg], r_cap * (1 + 1e-9) + 1e-12)
        for j, lst in zip(tg, cand):
            lst = np.asarray(lst, dtype=np.int64)
            if lst.size == 0:
                continue
            lst = lst[reach[lst]]
            ok = _covers(ev[lst], radius[lst], points[j])
            if ok.any():
                time[j] = (ev_time[lst[ok]] + tau[lst[ok]]).min()
    return time


def burst_sweep(points, n_events, tau, radius, src_centers, src_radii, t_stop,
                origin, cell, dims, use_numba=None):
    """Infection times of ``points`` (events first, then plain targets).

    A point inside a source ball gets time 0. An event infected at time t
    bursts at ``t + tau`` and infects every live point of its closed ball
    (except its own centre). Times above ``t_stop`` come back as ``inf``.
    """
    use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
    points = np.ascontiguousarray(points, dtype=np.float64)
    src_centers = np.ascontiguousarray(np.atleast_2d(src_centers), dtype=np.float64)
    src_radii = np.ascontiguousarray(np.atleast_1d(src_radii), dtype=np.float64)
    if use_numba:
        return _burst_sweep_nb(points, int(n_events), np.ascontiguousarray(tau, dtype=np.float64),
                               np.ascontiguousarray(radius, dtype=np.float64),
                               src_centers, src_radii, float(t_stop),
                               np.asarray(origin, dtype=np.float64), float(cell),
                               np.asarray(dims, dtype=np.int64))
    return _burst_sweep_np(points, int(n_events), np.asarray(tau, dtype=np.float64),
                           np.asarray(radius, dtype=np.float64), src_centers, src_radii,
                           float(t_stop))
