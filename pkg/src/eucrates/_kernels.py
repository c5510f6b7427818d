"""Compiled inner loops for the exact and heuristic solvers.

All kernels are ``nogil`` so trial-level thread pools overlap. Bitmask DPs
index subsets of at most ~20 points; callers enforce the limits.
"""

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True, nogil=True)
def sq_dist(x, i, j):
    s = 0.0
    for k in range(x.shape[1]):
        t = x[i, k] - x[j, k]
        s += t * t
    return s


@njit(cache=True, nogil=True)
def prim_parents(x, attach_sq):
    """Dense Prim on squared Euclidean lengths.

    If ``attach_sq`` is non-empty a virtual vertex with index n is added,
    joined to point i by an edge of squared length ``attach_sq[i]``; the
    tree is then rooted there. Returns the parent array (root -> -1).
    """
    n = x.shape[0]
    virtual = attach_sq.shape[0] > 0
    nv = n + 1 if virtual else n
    parent = np.full(nv, -1, np.int64)
    if nv <= 1:
        return parent
    best = np.full(nv, INF)
    done = np.zeros(nv, np.bool_)
    cur = n if virtual else 0
    done[cur] = True
    for _ in range(nv - 1):
        # relax from cur
        if virtual and cur == n:
            for v in range(n):
                if not done[v] and attach_sq[v] < best[v]:
                    best[v] = attach_sq[v]
                    parent[v] = n
        else:
            for v in range(n):
                if not done[v]:
                    dv = sq_dist(x, cur, v)
                    if dv < best[v]:
                        best[v] = dv
                        parent[v] = cur
            if virtual and not done[n] and attach_sq[cur] < best[n]:
                best[n] = attach_sq[cur]
                parent[n] = cur
        nxt = -1
        bv = INF
        for v in range(nv):
            if not done[v] and best[v] < bv:
                bv = best[v]
                nxt = v
        if nxt < 0:
            # only infinite attachments remain; pick any unfinished vertex
            for v in range(nv):
                if not done[v]:
                    nxt = v
                    break
        done[nxt] = True
        cur = nxt
    return parent


@njit(cache=True, nogil=True)
def held_karp(w):
    """Exact closed tour on n >= 3 vertices. Returns (cost, order)."""
    n = w.shape[0]
    m = n - 1
    size = 1 << m
    dp = np.full((size, m), INF)
    par = np.full((size, m), -1, np.int8)
    for j in range(m):
        dp[1 << j, j] = w[0, j + 1]
    for mask in range(1, size):
        for j in range(m):
            if not (mask >> j) & 1:
                continue
            cur = dp[mask, j]
            if cur == INF:
                continue
            for k in range(m):
                if (mask >> k) & 1:
                    continue
                nm = mask | (1 << k)
                val = cur + w[j + 1, k + 1]
                if val < dp[nm, k]:
                    dp[nm, k] = val
                    par[nm, k] = j
    full = size - 1
    best = INF
    last = -1
    for j in range(m):
        val = dp[full, j] + w[j + 1, 0]
        if val < best:
            best = val
            last = j
    order = np.empty(n, np.int64)
    order[0] = 0
    mask = full
    j = last
    pos = n - 1
    while j >= 0:
        order[pos] = j + 1
        pos -= 1
        pj = par[mask, j]
        mask ^= 1 << j
        j = pj
    return best, order


@njit(cache=True, nogil=True)
def matching_dp(w, attach, allow_skip):
    """Exact min-cost resolution of every point by pairing, attaching or skipping.

    Each point is paired with another (cost ``w[i, j]``), attached at cost
    ``attach[i]`` (``inf`` disables), or, at most once and only when
    ``allow_skip``, left unmatched for free. Returns (cost, partner) with
    partner[i] = j, -1 for attached, -2 for skipped.
    """
    n = w.shape[0]
    size = 1 << n
    f = np.full((2, size), INF)
    ch = np.full((2, size), -3, np.int8)
    f[0, 0] = 0.0
    f[1, 0] = 0.0
    for mask in range(1, size):
        low = 0
        while not (mask >> low) & 1:
            low += 1
        rest = mask ^ (1 << low)
        for s in range(2):
            best = attach[low] + f[s, rest]
            arg = -1
            if s == 1 and allow_skip:
                v = f[0, rest]
                if v < best:
                    best = v
                    arg = -2
            for j in range(low + 1, n):
                if (rest >> j) & 1:
                    v = w[low, j] + f[s, rest ^ (1 << j)]
                    if v < best:
                        best = v
                        arg = j
            f[s, mask] = best
            ch[s, mask] = arg
    partner = np.full(n, -3, np.int64)
    mask = size - 1
    s = 1
    while mask:
        low = 0
        while not (mask >> low) & 1:
            low += 1
        a = ch[s, mask]
        if a == -1:
            partner[low] = -1
            mask ^= 1 << low
        elif a == -2:
            partner[low] = -2
            mask ^= 1 << low
            s = 0
        else:
            partner[low] = a
            partner[a] = low
            mask ^= (1 << low) | (1 << a)
    return f[1, size - 1], partner


@njit(cache=True, nogil=True)
def anchored_path_cover(w, attach):
    """Cheapest cover of all points by disjoint paths, each with both ends attached.

    A path on vertex set T costs its internal edges plus ``attach`` at its two
    endpoints (twice for a singleton). Returns (cost, path_of, order): path
    label per point and, per label, the vertices in path order (-1 padded).
    """
    n = w.shape[0]
    size = 1 << n
    hp = np.full((size, n), INF)
    hpar = np.full((size, n), -1, np.int8)
    for j in range(n):
        hp[1 << j, j] = attach[j]
    for mask in range(1, size):
        for j in range(n):
            if not (mask >> j) & 1:
                continue
            cur = hp[mask, j]
            if cur == INF:
                continue
            for k in range(n):
                if (mask >> k) & 1:
                    continue
                nm = mask | (1 << k)
                val = cur + w[j, k]
                if val < hp[nm, k]:
                    hp[nm, k] = val
                    hpar[nm, k] = j
    closed = np.full(size, INF)
    cend = np.full(size, -1, np.int8)
    for mask in range(1, size):
        for j in range(n):
            if (mask >> j) & 1:
                val = hp[mask, j] + attach[j]
                if val < closed[mask]:
                    closed[mask] = val
                    cend[mask] = j
    cover = np.full(size, INF)
    cpick = np.zeros(size, np.int64)
    cover[0] = 0.0
    for s in range(1, size):
        low = s & (-s)
        rest = s ^ low
        sub = rest
        while True:
            t = sub | low
            val = closed[t] + cover[s ^ t]
            if val < cover[s]:
                cover[s] = val
                cpick[s] = t
            if sub == 0:
                break
            sub = (sub - 1) & rest
    path_of = np.full(n, -1, np.int64)
    order = np.full((n, n), -1, np.int64)
    s = size - 1
    label = 0
    while s:
        t = cpick[s]
        j = cend[t]
        mask = t
        seq = np.empty(n, np.int64)
        cnt = 0
        while j >= 0:
            seq[cnt] = j
            cnt += 1
            pj = hpar[mask, j]
            mask ^= 1 << j
            j = pj
        for q in range(cnt):
            order[label, q] = seq[cnt - 1 - q]
            path_of[seq[q]] = label
        label += 1
        s ^= t
    return cover[size - 1], path_of, order[:label]


@njit(cache=True, nogil=True)
def pcost(x, i, j, p):
    d2 = sq_dist(x, i, j)
    if d2 == 0.0:
        return 0.0
    return d2 ** (0.5 * p)


@njit(cache=True, nogil=True)
def nearest_neighbor_tour(x, p):
    n = x.shape[0]
    tour = np.empty(n, np.int64)
    used = np.zeros(n, np.bool_)
    cur = 0
    used[0] = True
    tour[0] = 0
    for pos in range(1, n):
        bd = INF
        bj = -1
        for j in range(n):
            if not used[j]:
                dj = sq_dist(x, cur, j)
                if dj < bd:
                    bd = dj
                    bj = j
        tour[pos] = bj
        used[bj] = True
        cur = bj
    return tour


@njit(cache=True, nogil=True)
def two_opt(x, tour, p, max_passes):
    """First-improvement 2-opt under |e|^p weights; modifies ``tour`` in place."""
    n = tour.shape[0]
    if n < 4:
        return tour
    eps = 1e-12
    for _ in range(max_passes):
        improved = False
        for i in range(n - 1):
            a = tour[i]
            b = tour[i + 1]
            wab = pcost(x, a, b, p)
            for j in range(i + 2, n):
                c = tour[j]
                d = tour[(j + 1) % n]
                if d == a:
                    continue
                delta = pcost(x, a, c, p) + pcost(x, b, d, p) - wab - pcost(x, c, d, p)
                if delta < -eps * (1.0 + wab):
                    lo = i + 1
                    hi = j
                    while lo < hi:
                        tmp = tour[lo]
                        tour[lo] = tour[hi]
                        tour[hi] = tmp
                        lo += 1
                        hi -= 1
                    improved = True
                    b = tour[i + 1]
                    wab = pcost(x, a, b, p)
        if not improved:
            break
    return tour


@njit(cache=True, nogil=True)
def greedy_matching(x, p, max_passes):
    """Greedy matching via iterated mutual nearest neighbours, then pair swaps.

    Mutual-nearest rounds reproduce the globally sorted greedy matching for
    distinct lengths without materialising all pairs.
    """
    n = x.shape[0]
    mate = np.full(n, -1, np.int64)
    free = n
    nn = np.full(n, -1, np.int64)
    while free >= 2:
        for i in range(n):
            if mate[i] >= 0:
                continue
            bd = INF
            bj = -1
            for j in range(n):
                if j != i and mate[j] < 0:
                    dj = sq_dist(x, i, j)
                    if dj < bd or (dj == bd and j < bj):
                        bd = dj
                        bj = j
            nn[i] = bj
        progress = False
        for i in range(n):
            if mate[i] < 0:
                j = nn[i]
                if j > i and mate[j] < 0 and nn[j] == i:
                    mate[i] = j
                    mate[j] = i
                    free -= 2
                    progress = True
        if not progress:
            # unreachable for finite inputs, kept as a guard
            break
    # pair-swap and unmatched-exchange improvement passes
    for _ in range(max_passes):
        improved = False
        for a in range(n):
            for c in range(a + 1, n):
                b = mate[a]
                d = mate[c]
                if b == c:
                    continue
                if b >= 0 and d >= 0:
                    if b < a or d < c:
                        continue
                    cur = pcost(x, a, b, p) + pcost(x, c, d, p)
                    alt1 = pcost(x, a, c, p) + pcost(x, b, d, p)
                    alt2 = pcost(x, a, d, p) + pcost(x, b, c, p)
                    tol = 1e-12 * (1.0 + cur)
                    if alt1 <= alt2 and alt1 < cur - tol:
                        mate[a] = c
                        mate[c] = a
                        mate[b] = d
                        mate[d] = b
                        improved = True
                    elif alt2 < cur - tol:
                        mate[a] = d
                        mate[d] = a
                        mate[b] = c
                        mate[c] = b
                        improved = True
                elif b >= 0 or d >= 0:
                    # one of a, c is the unmatched point: try trading it in
                    if b >= 0:
                        u, s, t = c, a, b
                    else:
                        u, s, t = a, c, d
                    cur = pcost(x, s, t, p)
                    if pcost(x, u, t, p) < cur - 1e-12 * (1.0 + cur):
                        mate[s] = -1
                        mate[u] = t
                        mate[t] = u
                        improved = True
                    elif pcost(x, u, s, p) < cur - 1e-12 * (1.0 + cur):
                        mate[t] = -1
                        mate[u] = s
                        mate[s] = u
                        improved = True
        if not improved:
            break
    return mate
