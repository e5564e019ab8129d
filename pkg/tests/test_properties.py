import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from distcftp.cftp.bounds import bounded_step_general
from distcftp.chain import draw_step_randomness
from distcftp.csp import valid_labelings
from distcftp.graph import build_graph
from distcftp.models import hardcore_bounded_step, make_hardcore, make_wds, wds_bounded_step
from distcftp.verify import bounding_soundness_bruteforce


@st.composite
def small_graphs(draw, max_n=6):
    n = draw(st.integers(2, max_n))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    return build_graph(n, edges)


@settings(max_examples=60, deadline=None)
@given(
    g=small_graphs(),
    model=st.sampled_from(["hardcore", "wds"]),
    lam=st.sampled_from([0.3, 1.0, 4.0]),
    p=st.floats(0.05, 1.0),
    seed=st.integers(0, 2**63),
    data=st.data(),
)
def test_kernel_equals_bruteforce(g, model, lam, p, seed, data):
    csp = make_hardcore(g, lam) if model == "hardcore" else make_wds(g, lam)
    step = hardcore_bounded_step if model == "hardcore" else wds_bounded_step
    full = [int(x) for x in csp.support_masks]
    S = np.array([data.draw(st.sampled_from([m for m in (1, 2, 3) if m & full[v] == m])) for v in range(g.n)], dtype=np.uint8)
    for t in range(-5, 0):
        r = draw_step_randomness(seed, p, t, csp)
        assert step(csp, S, r).tolist() == bounded_step_general(csp, g, S, r).tolist()


@settings(max_examples=15, deadline=None)
@given(g=small_graphs(max_n=5), model=st.sampled_from(["hardcore", "wds"]), p=st.sampled_from([0.2, 0.5, 1.0]))
def test_sets_contain_every_trajectory(g, model, p):
    csp = make_hardcore(g, 1.5) if model == "hardcore" else make_wds(g, 2)
    assume(len(valid_labelings(csp)) <= 12)
    res = bounding_soundness_bruteforce(csp, g, p, range(4), 8)
    assert res.ok, res.witness
