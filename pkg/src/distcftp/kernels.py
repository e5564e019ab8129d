"""Hot loops of the samplers, in two interchangeable implementations.

``*_nb`` functions are scalar loops compiled with numba; ``*_np`` functions
are vectorized numpy. Both compute bit-identical results. Public callers go
through the dispatchers at the bottom, which follow ``_accel.USE_NUMBA``.

Label sets are uint8 bitmasks (bit j = label index j). Combined randomness
rows hold -1 for an unmarked vertex and the proposed label index otherwise.
Tri-state codes: PASS=0, FAIL=1, UNCERTAIN=2.
"""

from __future__ import annotations

import numpy as np

from . import rng
from ._accel import USE_NUMBA, njit

PASS, FAIL, UNCERTAIN = 0, 1, 2

HARDCORE, WDS = 0, 1

# driver error codes
OK, ERR_PERMANENCE, ERR_RETAINED = 0, 1, 2


# -- randomness ----------------------------------------------------------------


@njit(cache=True)
def draw_row_nb(tkey, p, cdf, out):
    n = cdf.shape[0]
    for v in range(n):
        if rng.uniform_nb(tkey, 1, v) < p:
            up = rng.uniform_nb(tkey, 2, v)
            j = 0
            while up >= cdf[v, j]:
                j += 1
            out[v] = j
        else:
            out[v] = -1


@njit(cache=True)
def draw_filter_row_nb(tkey, out):
    for e in range(out.shape[0]):
        out[e] = rng.uniform_nb(tkey, 3, e)


def draw_row_np(seed, t, p, cdf):
    idx = np.arange(cdf.shape[0], dtype=np.uint64)
    marked = rng.uniform_np(seed, t, rng.MARK, idx) < p
    up = rng.uniform_np(seed, t, rng.PROPOSAL, idx)
    props = (up[:, None] >= cdf).sum(axis=1)
    return np.where(marked, props, -1).astype(np.int8)


def draw_filter_row_np(seed, t, m):
    return rng.uniform_np(seed, t, rng.FILTER, np.arange(m, dtype=np.uint64))


# -- hardcore bounding step ----------------------------------------------------


@njit(cache=True)
def hardcore_edge_nb(sa, ma, sb, mb):
    """Tri-state of edge {a, b}; ``sa``/``sb`` are proposals (-1 unmarked)."""
    if sa < 0 and sb < 0:
        return PASS
    if sa < 0:
        sa, ma, sb, mb = sb, mb, sa, ma
    if sb < 0:
        if sa == 1 and mb == 2:
            return FAIL
        if sa == 0 or (mb & 2) == 0:
            return PASS
        return UNCERTAIN
    if sa == 1 and sb == 1:
        return FAIL
    if (sa == 1 and mb == 2) or (sb == 1 and ma == 2):
        return FAIL
    if (sa == 1 and (mb & 2)) or (sb == 1 and (ma & 2)):
        return UNCERTAIN
    return PASS


@njit(cache=True)
def hardcore_step_nb(indptr, indices, S, row, out):
    n = S.shape[0]
    for v in range(n):
        sv = row[v]
        out[v] = S[v]
        if sv < 0:
            continue
        all_pass = True
        any_fail = False
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            ts = hardcore_edge_nb(sv, S[v], row[u], S[u])
            if ts == FAIL:
                any_fail = True
                break
            if ts == UNCERTAIN:
                all_pass = False
        if any_fail:
            continue
        if all_pass:
            out[v] = np.uint8(1 << sv)
        else:
            out[v] = S[v] | np.uint8(1 << sv)


def _edge_tristate_np(sa, ma, sb, mb):
    """Vectorized hardcore edge tri-state for directed edge arrays (a marked)."""
    b_marked = sb >= 0
    a1, b1 = sa == 1, sb == 1
    a_can1, b_can1 = (ma & 2) != 0, (mb & 2) != 0
    a_cert1, b_cert1 = ma == 2, mb == 2
    fail = np.where(
        b_marked,
        (a1 & b1) | (a1 & b_cert1) | (b1 & a_cert1),
        a1 & b_cert1,
    )
    unc = np.where(
        b_marked,
        (a1 & b_can1) | (b1 & a_can1),
        a1 & b_can1,
    ) & ~fail
    return fail, unc


def hardcore_step_np(indptr, indices, S, row):
    n = S.shape[0]
    src = np.repeat(np.arange(n), np.diff(indptr))
    dst = indices
    mask = row[src] >= 0
    src, dst = src[mask], dst[mask]
    fail, unc = _edge_tristate_np(row[src], S[src], row[dst], S[dst])
    any_fail = np.bincount(src, weights=fail, minlength=n) > 0
    any_unc = np.bincount(src, weights=unc, minlength=n) > 0
    marked = row >= 0
    bit = np.where(marked, np.left_shift(1, np.maximum(row, 0).astype(np.int64)), 0).astype(np.uint8)
    out = S.copy()
    certain = marked & ~any_fail & ~any_unc
    grow = marked & ~any_fail & any_unc
    out[certain] = bit[certain]
    out[grow] = S[grow] | bit[grow]
    return out


# -- weighted dominating set bounding step -------------------------------------


@njit(cache=True)
def wds_center_nb(iptr, iidx, S, row, u):
    """Tri-state of the constraint on the inclusive neighborhood of ``u``."""
    any_zero = False
    fail_c = True
    pass_c = False
    for e in range(iptr[u], iptr[u + 1]):
        w = iidx[e]
        zero_prop = row[w] == 0
        if zero_prop:
            any_zero = True
        if not (S[w] == 1 or zero_prop):
            fail_c = False
        if S[w] == 2 and not zero_prop:
            pass_c = True
    if not any_zero:
        return PASS
    if fail_c:
        return FAIL
    if pass_c:
        return PASS
    return UNCERTAIN


@njit(cache=True)
def wds_step_nb(iptr, iidx, S, row, out):
    n = S.shape[0]
    ts = np.empty(n, dtype=np.int8)
    for u in range(n):
        ts[u] = wds_center_nb(iptr, iidx, S, row, u)
    for v in range(n):
        sv = row[v]
        out[v] = S[v]
        if sv < 0:
            continue
        all_pass = True
        any_fail = False
        for e in range(iptr[v], iptr[v + 1]):
            c = ts[iidx[e]]
            if c == FAIL:
                any_fail = True
                break
            if c == UNCERTAIN:
                all_pass = False
        if any_fail:
            continue
        if all_pass:
            out[v] = np.uint8(1 << sv)
        else:
            out[v] = S[v] | np.uint8(1 << sv)


def wds_tristates_np(iptr, iidx, S, row):
    rw, sw = row[iidx], S[iidx]
    zero = rw == 0
    starts = iptr[:-1]
    any_zero = np.add.reduceat(zero.astype(np.int64), starts) > 0
    fail_c = np.logical_and.reduceat((sw == 1) | zero, starts)
    pass_c = np.add.reduceat(((sw == 2) & ~zero).astype(np.int64), starts) > 0
    ts = np.full(S.shape[0], UNCERTAIN, dtype=np.int8)
    ts[pass_c] = PASS
    ts[fail_c] = FAIL
    ts[~any_zero] = PASS
    return ts


def wds_step_np(iptr, iidx, S, row):
    n = S.shape[0]
    ts = wds_tristates_np(iptr, iidx, S, row)
    cs = ts[iidx]
    starts = iptr[:-1]
    any_fail = np.add.reduceat((cs == FAIL).astype(np.int64), starts) > 0
    any_unc = np.add.reduceat((cs == UNCERTAIN).astype(np.int64), starts) > 0
    marked = row >= 0
    bit = np.where(marked, np.left_shift(1, np.maximum(row, 0).astype(np.int64)), 0).astype(np.uint8)
    out = S.copy()
    certain = marked & ~any_fail & ~any_unc
    grow = marked & ~any_fail & any_unc
    out[certain] = bit[certain]
    out[grow] = S[grow] | bit[grow]
    return out


# -- Ising monotone step -------------------------------------------------------


@njit(cache=True)
def edge_q_nb(ratio, sa, xa, sb, xb):
    """Local filter probability of an edge (members ascending), proposals -1 if unmarked."""
    q = 1.0
    if sa >= 0 and sb >= 0:
        q *= ratio[sa, xb]
        q *= ratio[xa, sb]
        q *= ratio[sa, sb]
    elif sa >= 0:
        q *= ratio[sa, xb]
    elif sb >= 0:
        q *= ratio[xa, sb]
    return q


@njit(cache=True)
def ising_step_nb(ea, eb, vptr, vedges, ratio, X, row, urow, out):
    m = ea.shape[0]
    passed = np.empty(m, dtype=np.bool_)
    for e in range(m):
        a = ea[e]
        b = eb[e]
        passed[e] = urow[e] < edge_q_nb(ratio, row[a], X[a], row[b], X[b])
    for v in range(X.shape[0]):
        out[v] = X[v]
        if row[v] < 0:
            continue
        ok = True
        for j in range(vptr[v], vptr[v + 1]):
            if not passed[vedges[j]]:
                ok = False
                break
        if ok:
            out[v] = row[v]


def ising_step_np(ea, eb, vptr, vedges, ratio, X, row, urow):
    sa, sb = row[ea], row[eb]
    xa, xb = X[ea], X[eb]
    ma, mb = sa >= 0, sb >= 0
    sa0, sb0 = np.maximum(sa, 0), np.maximum(sb, 0)
    one = np.ones(ea.shape[0])
    f1 = np.where(ma, ratio[sa0, xb], one)
    f2 = np.where(mb, ratio[xa, sb0], one)
    f3 = np.where(ma & mb, ratio[sa0, sb0], one)
    # same multiplication order as the scalar path
    q = np.where(ma & mb, ((1.0 * f1) * f2) * f3, np.where(ma, 1.0 * f1, 1.0 * f2))
    passed = urow < q
    n = X.shape[0]
    if vedges.size:
        blocked = np.zeros(n, dtype=bool)
        owner = np.repeat(np.arange(n), np.diff(vptr))
        np.logical_or.at(blocked, owner, ~passed[vedges])
    else:
        blocked = np.zeros(n, dtype=bool)
    adopt = (row >= 0) & ~blocked
    return np.where(adopt, row, X).astype(X.dtype)


# -- coalescence drivers -------------------------------------------------------


@njit(cache=True)
def _popcount1(x):
    return x != 0 and (x & (x - np.uint8(1))) == 0


@njit(cache=True)
def _lowbit(x):
    j = 0
    while not (x >> np.uint8(j)) & np.uint8(1):
        j += 1
    return j


@njit(cache=True)
def sets_cftp_nb(model, ptr, idx, cdf, full, deg, seed, p, max_stages, audit, labels_out):
    """Doubling CFTP with the global bounding chain for one seed.

    Returns ``(status, stages, t_conn, err)``: status 1 when every vertex
    coalesced; ``t_conn`` the largest stage length at which some uncoalesced
    vertex had a neighbor.
    """
    n = full.shape[0]
    coalesced = np.zeros(n, dtype=np.bool_)
    seed_u = np.uint64(seed)
    T = 1
    rnd = np.empty((1, n), dtype=np.int8)
    draw_row_nb(rng.time_key_nb(seed_u, -1), p, cdf, rnd[0])
    S = np.empty(n, dtype=np.uint8)
    tmp = np.empty(n, dtype=np.uint8)
    check = np.empty(n, dtype=np.int8)
    t_conn = 0
    for stage in range(1, max_stages + 1):
        if stage > 1:
            # r_t for t >= -T/2 is retained; only the older half is fresh
            T2 = 2 * T
            new = np.empty((T2, n), dtype=np.int8)
            new[T:, :] = rnd
            for i in range(T):
                draw_row_nb(rng.time_key_nb(seed_u, i - T2), p, cdf, new[i])
            if audit:
                for i in range(T, T2):
                    draw_row_nb(rng.time_key_nb(seed_u, i - T2), p, cdf, check)
                    for v in range(n):
                        if check[v] != new[i, v]:
                            return 0, stage, t_conn, ERR_RETAINED
            rnd = new
            T = T2
        for v in range(n):
            if not coalesced[v] and deg[v] > 0:
                t_conn = T
                break
        S[:] = full
        for i in range(T):
            if model == HARDCORE:
                hardcore_step_nb(ptr, idx, S, rnd[i], tmp)
            else:
                wds_step_nb(ptr, idx, S, rnd[i], tmp)
            S[:] = tmp
        done = True
        for v in range(n):
            single = _popcount1(S[v])
            if coalesced[v]:
                if audit and (not single or _lowbit(S[v]) != labels_out[v]):
                    return 0, stage, t_conn, ERR_PERMANENCE
            elif single:
                coalesced[v] = True
                labels_out[v] = _lowbit(S[v])
            else:
                done = False
        if done:
            return 1, stage, t_conn, OK
    return 0, max_stages, t_conn, OK


@njit(cache=True)
def sets_cftp_batch_nb(model, ptr, idx, cdf, full, deg, seeds, p, max_stages, audit):
    N = seeds.shape[0]
    n = full.shape[0]
    labels = np.full((N, n), -1, dtype=np.int8)
    info = np.zeros((N, 4), dtype=np.int64)
    for s in range(N):
        st, stages, tc, err = sets_cftp_nb(
            model, ptr, idx, cdf, full, deg, seeds[s], p, max_stages, audit, labels[s]
        )
        info[s, 0] = st
        info[s, 1] = stages
        info[s, 2] = tc
        info[s, 3] = err
    return labels, info


@njit(cache=True)
def ising_cftp_nb(ea, eb, vptr, vedges, ratio, cdf, deg, top_label, seed, p, max_stages, audit, labels_out):
    n = cdf.shape[0]
    m = ea.shape[0]
    coalesced = np.zeros(n, dtype=np.bool_)
    seed_u = np.uint64(seed)
    T = 1
    rnd = np.empty((1, n), dtype=np.int8)
    urnd = np.empty((1, m), dtype=np.float64)
    tk = rng.time_key_nb(seed_u, -1)
    draw_row_nb(tk, p, cdf, rnd[0])
    draw_filter_row_nb(tk, urnd[0])
    top = np.empty(n, dtype=np.int8)
    bot = np.empty(n, dtype=np.int8)
    tmp = np.empty(n, dtype=np.int8)
    check = np.empty(n, dtype=np.int8)
    ucheck = np.empty(m, dtype=np.float64)
    t_conn = 0
    for stage in range(1, max_stages + 1):
        if stage > 1:
            T2 = 2 * T
            new = np.empty((T2, n), dtype=np.int8)
            unew = np.empty((T2, m), dtype=np.float64)
            new[T:, :] = rnd
            unew[T:, :] = urnd
            for i in range(T):
                tk = rng.time_key_nb(seed_u, i - T2)
                draw_row_nb(tk, p, cdf, new[i])
                draw_filter_row_nb(tk, unew[i])
            if audit:
                for i in range(T, T2):
                    tk = rng.time_key_nb(seed_u, i - T2)
                    draw_row_nb(tk, p, cdf, check)
                    draw_filter_row_nb(tk, ucheck)
                    for v in range(n):
                        if check[v] != new[i, v]:
                            return 0, stage, t_conn, ERR_RETAINED
                    for e in range(m):
                        if ucheck[e] != unew[i, e]:
                            return 0, stage, t_conn, ERR_RETAINED
            rnd = new
            urnd = unew
            T = T2
        for v in range(n):
            if not coalesced[v] and deg[v] > 0:
                t_conn = T
                break
        top[:] = top_label
        bot[:] = 0
        for i in range(T):
            ising_step_nb(ea, eb, vptr, vedges, ratio, top, rnd[i], urnd[i], tmp)
            top[:] = tmp
            ising_step_nb(ea, eb, vptr, vedges, ratio, bot, rnd[i], urnd[i], tmp)
            bot[:] = tmp
        done = True
        for v in range(n):
            agree = top[v] == bot[v]
            if coalesced[v]:
                if audit and (not agree or top[v] != labels_out[v]):
                    return 0, stage, t_conn, ERR_PERMANENCE
            elif agree:
                coalesced[v] = True
                labels_out[v] = top[v]
            else:
                done = False
        if done:
            return 1, stage, t_conn, OK
    return 0, max_stages, t_conn, OK


@njit(cache=True)
def ising_cftp_batch_nb(ea, eb, vptr, vedges, ratio, cdf, deg, top_label, seeds, p, max_stages, audit):
    N = seeds.shape[0]
    n = cdf.shape[0]
    labels = np.full((N, n), -1, dtype=np.int8)
    info = np.zeros((N, 4), dtype=np.int64)
    for s in range(N):
        st, stages, tc, err = ising_cftp_nb(
            ea, eb, vptr, vedges, ratio, cdf, deg, top_label, seeds[s], p, max_stages, audit, labels[s]
        )
        info[s, 0] = st
        info[s, 1] = stages
        info[s, 2] = tc
        info[s, 3] = err
    return labels, info


# -- sequential single-site hardcore CFTP --------------------------------------


@njit(cache=True)
def seq_step_nb(ptr, idx, S, v, heads):
    if not heads:
        S[v] = 1
        return
    all_zero = True
    some_one = False
    for e in range(ptr[v], ptr[v + 1]):
        su = S[idx[e]]
        if su != 1:
            all_zero = False
        if su == 2:
            some_one = True
    if all_zero:
        S[v] = 2
    elif some_one:
        S[v] = 1
    else:
        S[v] = 3


@njit(cache=True)
def seq_draw_nb(seed_u, t, n, coin_p):
    tk = rng.time_key_nb(seed_u, t)
    v = int(rng.uniform_nb(tk, 4, 0) * n)
    if v >= n:
        v = n - 1
    heads = rng.uniform_nb(tk, 5, 0) < coin_p
    return v, heads


@njit(cache=True)
def seq_cftp_nb(ptr, idx, n, coin_p, seed, max_doublings, labels_out):
    seed_u = np.uint64(seed)
    S = np.empty(n, dtype=np.uint8)
    T = 1
    steps = 0
    for stage in range(1, max_doublings + 1):
        S[:] = 3
        for t in range(-T, 0):
            v, heads = seq_draw_nb(seed_u, t, n, coin_p)
            seq_step_nb(ptr, idx, S, v, heads)
        steps += T
        done = True
        for v in range(n):
            if not _popcount1(S[v]):
                done = False
                break
        if done:
            for v in range(n):
                labels_out[v] = _lowbit(S[v])
            return 1, stage, T, steps
        T *= 2
    return 0, max_doublings, T // 2, steps


@njit(cache=True)
def seq_cftp_batch_nb(ptr, idx, n, coin_p, seeds, max_doublings):
    N = seeds.shape[0]
    labels = np.full((N, n), -1, dtype=np.int8)
    info = np.zeros((N, 4), dtype=np.int64)
    for s in range(N):
        st, stages, T, steps = seq_cftp_nb(ptr, idx, n, coin_p, seeds[s], max_doublings, labels[s])
        info[s, 0] = st
        info[s, 1] = stages
        info[s, 2] = T
        info[s, 3] = steps
    return labels, info


def seq_draw_py(seed, t, n, coin_p):
    v = int(rng.uniform(seed, t, rng.SITE, 0) * n)
    return min(v, n - 1), rng.uniform(seed, t, rng.COIN, 0) < coin_p


def seq_step_py(adj, S, v, heads):
    if not heads:
        S[v] = 1
        return
    nb = [S[u] for u in adj[v]]
    if all(x == 1 for x in nb):
        S[v] = 2
    elif any(x == 2 for x in nb):
        S[v] = 1
    else:
        S[v] = 3


# -- dispatch ------------------------------------------------------------------


def hardcore_step(indptr, indices, S, row, use_numba=None):
    if USE_NUMBA if use_numba is None else use_numba:
        out = np.empty_like(S)
        hardcore_step_nb(indptr, indices, S, row, out)
        return out
    return hardcore_step_np(indptr, indices, S, row)


def wds_step(iptr, iidx, S, row, use_numba=None):
    if USE_NUMBA if use_numba is None else use_numba:
        out = np.empty_like(S)
        wds_step_nb(iptr, iidx, S, row, out)
        return out
    return wds_step_np(iptr, iidx, S, row)


def ising_step(ea, eb, vptr, vedges, ratio, X, row, urow, use_numba=None):
    if USE_NUMBA if use_numba is None else use_numba:
        out = np.empty_like(X)
        ising_step_nb(ea, eb, vptr, vedges, ratio, X, row, urow, out)
        return out
    return ising_step_np(ea, eb, vptr, vedges, ratio, X, row, urow)
