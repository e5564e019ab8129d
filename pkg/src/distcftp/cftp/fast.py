"""Whole-run kernels for the built-in models.

The staged protocol only ever updates a vertex at step ``i`` when its time-0
value depends on the active region alone, so the sets held by uncoalesced
vertices equal those of the global bounding chain run from the full support.
The fast path therefore runs the global chain directly and derives rounds
and message widths from the schedule; the tests check it against the
message-passing engine run for run.
"""

from __future__ import annotations

import numpy as np

from .. import kernels, rng
from .._accel import USE_NUMBA
from ..csp import CspInstance
from ..models import arrays_for
from . import report
from .engine import InvariantViolation

FAST_SETS_MODELS = {"hardcore": kernels.HARDCORE, "wds": kernels.WDS}


def seeds_array(seeds) -> np.ndarray:
    return np.array([int(s) & rng.MASK64 for s in seeds], dtype=np.uint64)


def _raise_on(info: np.ndarray, seeds) -> None:
    bad = np.nonzero(info[:, 3])[0]
    if bad.size:
        s = int(bad[0])
        what = "coalescence permanence" if info[s, 3] == kernels.ERR_PERMANENCE else "retained randomness"
        raise InvariantViolation(f"seed {seeds[s]}: {what} check failed in stage {info[s, 1]}")


def _sets_one_np(model, ptr, idx, cdf, full, deg, seed, p, max_stages, audit):
    n = full.shape[0]
    step = kernels.hardcore_step_np if model == kernels.HARDCORE else kernels.wds_step_np
    connected = deg > 0
    coalesced = np.zeros(n, dtype=bool)
    labels = np.full(n, -1, dtype=np.int8)
    rows = [kernels.draw_row_np(seed, -1, p, cdf)]
    T, t_conn = 1, 0
    for stage in range(1, max_stages + 1):
        if stage > 1:
            T2 = 2 * T
            if audit:
                for i, row in enumerate(rows):
                    if not np.array_equal(row, kernels.draw_row_np(seed, T + i - T2, p, cdf)):
                        return labels, (0, stage, t_conn, kernels.ERR_RETAINED)
            rows = [kernels.draw_row_np(seed, i - T2, p, cdf) for i in range(T)] + rows
            T = T2
        if np.any(~coalesced & connected):
            t_conn = T
        S = full.copy()
        for row in rows:
            S = step(ptr, idx, S, row)
        single = (S != 0) & ((S & (S - 1)) == 0)
        low = np.where(S == 2, 1, 0).astype(np.int8)
        if audit and np.any(coalesced & (~single | (low != labels))):
            return labels, (0, stage, t_conn, kernels.ERR_PERMANENCE)
        fresh = ~coalesced & single
        labels[fresh] = low[fresh]
        coalesced |= fresh
        if coalesced.all():
            return labels, (1, stage, t_conn, kernels.OK)
    return labels, (0, max_stages, t_conn, kernels.OK)


def sets_batch(csp: CspInstance, seeds, p: float, max_stages: int, audit: bool = True, use_numba=None):
    """Label indices ``(N, n)`` and per-seed ``(status, stages, t_conn, err)``."""
    model = FAST_SETS_MODELS[csp.model]
    arr = arrays_for(csp)
    ptr, idx = arr.adjacency_csr if model == kernels.HARDCORE else arr.inclusive_csr
    su = seeds_array(seeds)
    full = csp.support_masks.astype(np.uint8)
    if USE_NUMBA if use_numba is None else use_numba:
        labels, info = kernels.sets_cftp_batch_nb(
            model, ptr, idx, csp.proposal_cdf, full, arr.degrees, su, float(p), int(max_stages), bool(audit)
        )
    else:
        labels = np.full((len(su), csp.n), -1, dtype=np.int8)
        info = np.zeros((len(su), 4), dtype=np.int64)
        for s, seed in enumerate(su):
            labels[s], info[s] = _sets_one_np(
                model, ptr, idx, csp.proposal_cdf, full, arr.degrees, int(seed), p, max_stages, audit
            )
    _raise_on(info, list(seeds))
    return labels, info


def _monotone_one_np(ea, eb, vptr, vedges, ratio, cdf, deg, top_label, seed, p, max_stages, audit):
    n, m = cdf.shape[0], ea.shape[0]
    connected = deg > 0
    coalesced = np.zeros(n, dtype=bool)
    labels = np.full(n, -1, dtype=np.int8)

    def draw(t):
        return kernels.draw_row_np(seed, t, p, cdf), kernels.draw_filter_row_np(seed, t, m)

    rows = [draw(-1)]
    T, t_conn = 1, 0
    for stage in range(1, max_stages + 1):
        if stage > 1:
            T2 = 2 * T
            if audit:
                for i, (row, urow) in enumerate(rows):
                    r2, u2 = draw(T + i - T2)
                    if not (np.array_equal(row, r2) and np.array_equal(urow, u2)):
                        return labels, (0, stage, t_conn, kernels.ERR_RETAINED)
            rows = [draw(i - T2) for i in range(T)] + rows
            T = T2
        if np.any(~coalesced & connected):
            t_conn = T
        top = np.full(n, top_label, dtype=np.int8)
        bot = np.zeros(n, dtype=np.int8)
        for row, urow in rows:
            top = kernels.ising_step_np(ea, eb, vptr, vedges, ratio, top, row, urow)
            bot = kernels.ising_step_np(ea, eb, vptr, vedges, ratio, bot, row, urow)
        agree = top == bot
        if audit and np.any(coalesced & (~agree | (top != labels))):
            return labels, (0, stage, t_conn, kernels.ERR_PERMANENCE)
        fresh = ~coalesced & agree
        labels[fresh] = top[fresh]
        coalesced |= fresh
        if coalesced.all():
            return labels, (1, stage, t_conn, kernels.OK)
    return labels, (0, max_stages, t_conn, kernels.OK)


def monotone_batch(csp: CspInstance, seeds, p: float, max_stages: int, audit: bool = True, use_numba=None):
    arr = arrays_for(csp)
    ea, eb, vptr, vedges = arr.edge_arrays
    ratio = arr.ising_ratio
    su = seeds_array(seeds)
    top = csp.n_labels - 1
    if USE_NUMBA if use_numba is None else use_numba:
        labels, info = kernels.ising_cftp_batch_nb(
            ea, eb, vptr, vedges, ratio, csp.proposal_cdf, arr.degrees, top, su, float(p), int(max_stages), bool(audit)
        )
    else:
        labels = np.full((len(su), csp.n), -1, dtype=np.int8)
        info = np.zeros((len(su), 4), dtype=np.int64)
        for s, seed in enumerate(su):
            labels[s], info[s] = _monotone_one_np(
                ea, eb, vptr, vedges, ratio, csp.proposal_cdf, arr.degrees, top, int(seed), p, max_stages, audit
            )
    _raise_on(info, list(seeds))
    return labels, info


def _sequential_one_py(adj, n, coin_p, seed, max_doublings):
    T, steps = 1, 0
    for stage in range(1, max_doublings + 1):
        S = [3] * n
        for t in range(-T, 0):
            v, heads = kernels.seq_draw_py(seed, t, n, coin_p)
            kernels.seq_step_py(adj, S, v, heads)
        steps += T
        if all(x in (1, 2) for x in S):
            return [x - 1 for x in S], (1, stage, T, steps)
        T *= 2
    return [-1] * n, (0, max_doublings, T // 2, steps)


def sequential_batch(g, coin_p: float, seeds, max_doublings: int, use_numba=None):
    su = seeds_array(seeds)
    if USE_NUMBA if use_numba is None else use_numba:
        ptr, idx = g.csr
        return kernels.seq_cftp_batch_nb(ptr, idx, g.n, float(coin_p), su, int(max_doublings))
    labels = np.full((len(su), g.n), -1, dtype=np.int8)
    info = np.zeros((len(su), 4), dtype=np.int64)
    for s, seed in enumerate(su):
        labels[s], info[s] = _sequential_one_py(g.adjacency, g.n, coin_p, int(seed), max_doublings)
    return labels, info


def to_reports(csp: CspInstance, labels, info, seeds, payload_bits: int, h: int = 1) -> list[report.SampleReport]:
    k = csp.k
    names = csp.labels
    out = []
    for s, seed in enumerate(seeds):
        status, stages, t_conn = int(info[s, 0]), int(info[s, 1]), int(info[s, 2])
        lab = tuple(names[x] for x in labels[s].tolist()) if status else None
        out.append(
            report.SampleReport(
                lab,
                stages,
                1 << (stages - 1),
                report.total_rounds(k, h, stages),
                report.peak_bits(k, t_conn, payload_bits),
                0,
                report.EXACT if status else report.ABORTED,
                int(seed),
            )
        )
    return out
