import io

import pytest

from distcftp.cftp import cftp_sample_batch, monotone_batch
from distcftp.cftp.engine import InvariantViolation, StagedSampler, aggregation_radius
from distcftp.csp import CspInstance
from distcftp.graph import build_graph, generate
from distcftp.models import make_hardcore, make_ising, make_wds
from distcftp.simnet import NetworkMode


def _same(a, b):
    assert a.to_dict() == b.to_dict()


@pytest.mark.parametrize(
    "name,g,make",
    [
        ("hc-p4", generate("path", {"n": 4}), lambda g: make_hardcore(g, 1)),
        ("hc-c5", generate("cycle", {"n": 5}), lambda g: make_hardcore(g, 0.3)),
        ("hc-iso", build_graph(4, [(0, 1)]), lambda g: make_hardcore(g, 2)),
        ("wds-c4", generate("cycle", {"n": 4}), lambda g: make_wds(g, 2)),
        ("wds-c6", generate("cycle", {"n": 6}), lambda g: make_wds(g, 8)),
    ],
)
def test_simnet_matches_fast(name, g, make):
    csp = make(g)
    seeds = range(40)
    fast = cftp_sample_batch(csp, g, seeds, backend="fast")
    slow = cftp_sample_batch(csp, g, seeds, backend="simnet")
    for a, b in zip(fast, slow):
        _same(a, b)


def test_simnet_matches_fast_monotone():
    g = generate("cycle", {"n": 5})
    fast = monotone_batch(g, 2, range(40))
    slow = monotone_batch(g, 2, range(40), backend="simnet")
    for a, b in zip(fast, slow):
        _same(a, b)


def test_run_stage_progress(k2):
    s = StagedSampler(make_hardcore(k2, 1), k2, seed=4, p=0.1)
    st = s.run_stage()
    assert st.T == 1 and len(st.coalesced) == 2
    for c, o in zip(st.coalesced, st.outputs):
        assert (o is not None) == c
    while not all(s.run_stage().coalesced):
        pass
    with pytest.raises(ValueError):
        s.run_stage()


def test_isolated_vertex_coalesces_first_stage():
    g = build_graph(3, [(0, 1)])
    for seed in range(20):
        st = StagedSampler(make_hardcore(g, 1), g, seed, 0.1).run_stage()
        # an unmarked isolated vertex keeps its full set; a marked one takes its proposal
        assert st.coalesced[2] in (True, False)
    rep = StagedSampler(make_hardcore(g, 1), g, 0, 0.1).run()
    assert rep.exact


def test_coalesced_outputs_persist(p3):
    s = StagedSampler(make_hardcore(p3, 1), p3, 9, 0.3)
    seen = {}
    for _ in range(12):
        st = s.run_stage()
        for v, (c, o) in enumerate(zip(st.coalesced, st.outputs)):
            if c:
                assert seen.setdefault(v, o) == o
        if all(st.coalesced):
            break


def test_audit_catches_tampering(k2):
    s = StagedSampler(make_hardcore(k2, 1), k2, 4, 0.5)
    s.run_stage()
    pr = s.programs[0]
    # overwrite the retained proposal for t=-1 with the opposite label
    pr._rand[-1] = 1 - pr._rand[-1] if pr._rand[-1] >= 0 else 0
    with pytest.raises(InvariantViolation):
        s.run_stage()


def test_aggregation_radius():
    g = generate("cycle", {"n": 5})
    assert aggregation_radius(make_hardcore(g, 1), g) == 1
    assert aggregation_radius(make_wds(g, 1), g) == 1


def test_congest_budget_respected():
    g = generate("cycle", {"n": 8})
    rep = StagedSampler(make_hardcore(g, 0.3), g, 1, 0.1, mode=NetworkMode("CONGEST")).run()
    assert rep.exact and rep.budget_violations == 0
    assert 0 < rep.peak_message_bits <= 64 + 2 * 3


def test_tiny_budget_counts_violations():
    g = generate("cycle", {"n": 8})
    rep = StagedSampler(make_hardcore(g, 0.3), g, 1, 0.1, mode=NetworkMode("CONGEST", 3)).run()
    assert rep.budget_violations > 0


def test_trace_csv(k2):
    s = StagedSampler(make_hardcore(k2, 1), k2, 0, 0.5, trace=True)
    s.run()
    buf = io.StringIO()
    s.net.write_trace(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "round,sender,receiver,bits"
    assert len(lines) > 1


def test_mismatched_sizes(k2, p3):
    with pytest.raises(ValueError):
        StagedSampler(make_hardcore(k2, 1), p3, 0, 0.5)
    with pytest.raises(ValueError):
        StagedSampler(make_hardcore(k2, 1), k2, 0, 0.0)
