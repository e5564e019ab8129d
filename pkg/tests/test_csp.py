from fractions import Fraction

import pytest

from distcftp.csp import (
    CspError,
    InstanceTooLarge,
    check_irreducible,
    constraint_diameter_check,
    dump_csp_json,
    enumerate_distribution,
    is_valid,
    labeling_weight,
    load_csp_json,
    make_csp,
)
from distcftp.graph import build_graph, generate
from distcftp.models import make_hardcore, make_ising, make_wds

import oracles


def test_weights_hardcore(k2):
    csp = make_hardcore(k2, 2)
    assert labeling_weight(csp, k2, (1, 0)) == 2
    assert labeling_weight(csp, k2, (1, 1)) == 0
    assert not is_valid(csp, k2, (1, 1))
    assert is_valid(csp, k2, (0, 0))


def test_weight_ising(p3):
    csp = make_ising(p3, 2)
    # labels are (-1, +1): index 1 is +1
    assert labeling_weight(csp, p3, (1, 1, 0)) == 2


def test_wds_all_zero_invalid(c4):
    assert not is_valid(make_wds(c4, 1), c4, (0, 0, 0, 0))


def test_enumerate_k2(k2):
    pi = enumerate_distribution(make_hardcore(k2, 2))
    assert pi == {(0, 0): Fraction(1, 5), (0, 1): Fraction(2, 5), (1, 0): Fraction(2, 5)}
    assert set(enumerate_distribution(make_hardcore(k2, 1)).values()) == {Fraction(1, 3)}


def test_enumerate_p3_uniform(p3):
    pi = enumerate_distribution(make_hardcore(p3, 1))
    assert len(pi) == 5 and set(pi.values()) == {Fraction(1, 5)}


@pytest.mark.parametrize("n,lam", [(4, 1), (5, Fraction(3, 10)), (6, 2)])
def test_enumerate_matches_oracle(n, lam):
    g = generate("cycle", {"n": n})
    assert enumerate_distribution(make_hardcore(g, lam)) == oracles.hardcore_pi(n, oracles.cycle_edges(n), lam)
    assert enumerate_distribution(make_wds(g, lam)) == oracles.wds_pi(n, oracles.cycle_edges(n), lam)


def test_rescaling_invariance(c4):
    base = enumerate_distribution(make_hardcore(c4, Fraction(1, 3)))
    scaled = make_csp(
        (0, 1),
        [(5, Fraction(5, 3))] * 4,
        [((u, v), (7, 7, 7, 0)) for u, v in c4.edges],
        c4,
    )
    assert enumerate_distribution(scaled) == base
    assert sum(base.values()) == 1


def test_enumeration_guard():
    g = generate("path", {"n": 25})
    with pytest.raises(InstanceTooLarge):
        enumerate_distribution(make_hardcore(g, 1))


def test_diameters(k2, c5):
    assert constraint_diameter_check(make_hardcore(c5, 1), c5) == 1
    assert constraint_diameter_check(make_wds(c5, 1), c5) == 2
    assert constraint_diameter_check(make_wds(k2, 1), k2) == 1


def test_diameter_violation(c5):
    csp = make_csp((0, 1), [(1, 1)] * 5, [((0, 2), (1, 1, 1, 0))], k=1)
    with pytest.raises(CspError, match="diameter"):
        constraint_diameter_check(csp, c5)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(labels=(0, 1), unary=[(0, 0), (1, 1)], constraints=[]),
        dict(labels=(0, 1), unary=[(1, 1), (1, 1)], constraints=[((0,), (1, 1))]),
        dict(labels=(0, 1), unary=[(1, 1), (1, 1)], constraints=[((0, 1), (0, 0, 0, 0))]),
        dict(labels=(0, 1), unary=[(1, 1), (1, 1)], constraints=[((0, 1), (1, 1, 1))]),
        dict(labels=(0, 1), unary=[(1, -1), (1, 1)], constraints=[]),
    ],
)
def test_make_csp_rejects(kwargs):
    with pytest.raises(CspError):
        make_csp(k=1, **kwargs)


def test_callable_constraint_and_json_roundtrip(p3):
    csp = make_csp(
        ("a", "b", "c"),
        [(1, 2, 0), (1, 1, 1), ("1/2", 1, 3)],
        [((0, 1), lambda x: 3 if x[0] == x[1] else 1), ((1, 2), lambda x: 0 if x == (2, 2) else 1)],
        p3,
    )
    again = load_csp_json(dump_csp_json(csp), p3)
    assert again.unary == csp.unary
    assert [c.table for c in again.constraints] == [c.table for c in csp.constraints]
    assert enumerate_distribution(again) == enumerate_distribution(csp)


def test_irreducible(c4):
    assert check_irreducible(make_hardcore(c4, 1))
    assert check_irreducible(make_wds(c4, 8))


def test_default_aggregator():
    g = build_graph(3, [(0, 1), (1, 2)])
    csp = make_csp((0, 1), [(1, 1)] * 3, [((0, 1, 2), [1] * 8)], g)
    assert csp.constraints[0].aggregator == 1
    assert csp.k == 2
