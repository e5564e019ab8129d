import json
import os
import subprocess
import sys

import numpy as np
import pytest

from distcftp import kernels, rng
from distcftp.cftp import fast
from distcftp.graph import generate
from distcftp.models import arrays_for, make_hardcore, make_ising, make_wds


def _rows(csp, seed, p, count):
    return [kernels.draw_row_np(seed, t, p, csp.proposal_cdf) for t in range(-count, 0)]


def test_draw_rows_agree():
    csp = make_ising(generate("cycle", {"n": 9}), 2)
    for t in range(-30, 0):
        out = np.empty(9, dtype=np.int8)
        kernels.draw_row_nb(np.uint64(rng.time_key(5, t)), 0.4, csp.proposal_cdf, out)
        assert np.array_equal(out, kernels.draw_row_np(5, t, 0.4, csp.proposal_cdf))
        u = np.empty(9)
        kernels.draw_filter_row_nb(np.uint64(rng.time_key(5, t)), u)
        assert np.array_equal(u, kernels.draw_filter_row_np(5, t, 9))


@pytest.mark.parametrize("model", ["hardcore", "wds"])
def test_set_steps_agree(model):
    g = generate("grid", {"rows": 3, "cols": 4})
    csp = make_hardcore(g, 1) if model == "hardcore" else make_wds(g, 2)
    arr = arrays_for(csp)
    ptr, idx = arr.adjacency_csr if model == "hardcore" else arr.inclusive_csr
    step = kernels.hardcore_step if model == "hardcore" else kernels.wds_step
    gen = np.random.default_rng(0)
    for row in _rows(csp, 3, 0.5, 200):
        S = gen.integers(1, 4, size=g.n).astype(np.uint8)
        a = step(ptr, idx, S, row, use_numba=True)
        b = step(ptr, idx, S, row, use_numba=False)
        assert np.array_equal(a, b)


def test_ising_steps_agree():
    g = generate("grid", {"rows": 3, "cols": 3})
    csp = make_ising(g, 2.5)
    arr = arrays_for(csp)
    ea, eb, vptr, vedges = arr.edge_arrays
    gen = np.random.default_rng(1)
    for t in range(-200, 0):
        row = kernels.draw_row_np(8, t, 0.5, csp.proposal_cdf)
        urow = kernels.draw_filter_row_np(8, t, len(ea))
        X = gen.integers(0, 2, size=g.n).astype(np.int8)
        a = kernels.ising_step(ea, eb, vptr, vedges, arr.ising_ratio, X, row, urow, use_numba=True)
        b = kernels.ising_step(ea, eb, vptr, vedges, arr.ising_ratio, X, row, urow, use_numba=False)
        assert np.array_equal(a, b)


@pytest.mark.parametrize("model", ["hardcore", "wds"])
def test_sets_drivers_agree(model):
    g = generate("cycle", {"n": 7})
    csp = make_hardcore(g, 0.5) if model == "hardcore" else make_wds(g, 4)
    p = 0.1 if model == "hardcore" else 0.05
    la, ia = fast.sets_batch(csp, range(60), p, 40, True, use_numba=True)
    lb, ib = fast.sets_batch(csp, range(60), p, 40, True, use_numba=False)
    assert np.array_equal(la, lb) and np.array_equal(ia, ib)


def test_monotone_drivers_agree():
    csp = make_ising(generate("cycle", {"n": 7}), 2)
    la, ia = fast.monotone_batch(csp, range(60), 0.5, 40, True, use_numba=True)
    lb, ib = fast.monotone_batch(csp, range(60), 0.5, 40, True, use_numba=False)
    assert np.array_equal(la, lb) and np.array_equal(ia, ib)


def test_sequential_drivers_agree():
    g = generate("path", {"n": 6})
    la, ia = fast.sequential_batch(g, 0.5, range(60), 40, use_numba=True)
    lb, ib = fast.sequential_batch(g, 0.5, range(60), 40, use_numba=False)
    assert np.array_equal(la, lb) and np.array_equal(ia, ib)


def test_large_seed_masks():
    csp = make_hardcore(generate("cycle", {"n": 5}), 1)
    la, _ = fast.sets_batch(csp, [2**64 + 3], 0.1, 40, use_numba=True)
    lb, _ = fast.sets_batch(csp, [3], 0.1, 40, use_numba=False)
    assert np.array_equal(la, lb)


def test_env_flag_selects_numpy():
    code = (
        "import json; from distcftp import backend_name, cftp_sample_batch, make_hardcore, generate;"
        "g = generate('cycle', {'n': 6}); csp = make_hardcore(g, 1);"
        "print(json.dumps([backend_name(), [r.to_dict() for r in cftp_sample_batch(csp, g, range(20))]]))"
    )
    outs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, DISTCFTP_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        outs[flag] = json.loads(res.stdout)
    assert outs["0"][0] == "numpy" and outs["1"][0] == "numba"
    assert outs["0"][1] == outs["1"][1]
