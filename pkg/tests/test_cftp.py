from fractions import Fraction

import pytest

from distcftp import (
    cftp_sample,
    cftp_sample_batch,
    generate,
    make_csp,
    make_hardcore,
    monotone_batch,
    monotone_cftp_ising,
    sequential_batch,
    sequential_cftp_hardcore,
)
from distcftp.cftp import report
from distcftp.csp import enumerate_distribution
from distcftp.graph import build_graph
from distcftp.simnet import NetworkMode
from distcftp.verify import empirical_counts, tv_distance


def test_deterministic(p3):
    csp = make_hardcore(p3, 1)
    a = [r.to_dict() for r in cftp_sample_batch(csp, p3, range(50))]
    b = [r.to_dict() for r in cftp_sample_batch(csp, p3, range(50))]
    assert a == b
    assert cftp_sample(csp, p3, 17).to_dict() == a[17]


def test_report_fields(k2):
    r = cftp_sample(make_hardcore(k2, 1), k2, 3)
    d = r.to_dict()
    assert list(d) == [
        "seed",
        "status",
        "labeling",
        "stages_used",
        "T_star",
        "total_rounds",
        "peak_message_bits",
        "budget_violations",
    ]
    assert r.exact and r.T_star == 2 ** (r.stages_used - 1)
    assert r.total_rounds == report.total_rounds(1, 1, r.stages_used)


def test_single_vertex_frequency():
    g = build_graph(1, [])
    reps = cftp_sample_batch(make_hardcore(g, 3), g, range(4000), p=0.5)
    ones = sum(r.labeling[0] for r in reps) / len(reps)
    assert ones == pytest.approx(0.75, abs=0.03)


def test_aborted_has_no_labeling():
    g = generate("cycle", {"n": 30})
    reps = cftp_sample_batch(make_hardcore(g, 1), g, range(20), p=0.01, max_stages=1)
    assert any(not r.exact for r in reps)
    for r in reps:
        if not r.exact:
            assert r.labeling is None and r.status == "Aborted"


def test_bad_arguments(k2):
    csp = make_hardcore(k2, 1)
    with pytest.raises(ValueError):
        cftp_sample(csp, k2, 0, p=1.5)
    with pytest.raises(ValueError):
        cftp_sample(csp, k2, 0, max_stages=0)
    with pytest.raises(ValueError):
        cftp_sample(csp, k2, 0, backend="gpu")
    assert cftp_sample_batch(csp, k2, []) == []


def test_custom_csp_runs_on_simnet(k2):
    # a 3-coloring-like soft constraint with no fast kernel
    table = [Fraction(1, 2) if a == b else 1 for a in range(3) for b in range(3)]
    csp = make_csp((0, 1, 2), [(1, 1, 1), (1, 2, 1)], [((0, 1), table)], g=k2)
    with pytest.raises(ValueError):
        cftp_sample(csp, k2, 0, backend="fast")
    reps = cftp_sample_batch(csp, k2, range(1500), p=0.5)
    pi = enumerate_distribution(csp)
    emp = empirical_counts(reps)
    assert tv_distance(emp, pi) < 0.06


def test_monotone(p3):
    with pytest.raises(ValueError):
        monotone_cftp_ising(p3, 1, 0)
    r = monotone_cftp_ising(p3, 2, 5)
    assert r.exact and set(r.labeling) <= {-1, 1}
    assert monotone_batch(p3, 2, []) == []


def test_sequential(p3):
    r = sequential_cftp_hardcore(p3, 1, 2)
    assert r.exact and r.peak_message_bits == 0
    # steps double with each attempt
    assert r.total_rounds == 2 * r.T_star - 1
    with pytest.raises(ValueError):
        sequential_batch(p3, 1, [0], max_doublings=0)


def test_congest_certification():
    g = generate("cycle", {"n": 64})
    reps = cftp_sample_batch(make_hardcore(g, 0.3), g, range(10), net=NetworkMode("CONGEST"))
    assert all(r.exact and r.budget_violations == 0 for r in reps)
    budget = NetworkMode("CONGEST").budget(64)
    assert all(r.peak_message_bits <= budget for r in reps)


def test_local_mode_has_no_budget(k2):
    assert NetworkMode("LOCAL").budget(2) is None
