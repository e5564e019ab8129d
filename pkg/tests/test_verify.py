import io
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from distcftp.csp import enumerate_distribution
from distcftp.graph import generate
from distcftp.models import make_hardcore, make_ising, make_wds
from distcftp.verify import (
    TransitionMatrix,
    bounding_soundness_bruteforce,
    broken_bounded_step,
    build_transition_matrix,
    check_detailed_balance,
    check_stationarity,
    chi_square,
    row_sum_error,
    scaling_experiment,
    tv_distance,
)


@pytest.mark.parametrize(
    "make,p",
    [
        (lambda g: make_hardcore(g, 1), Fraction(3, 10)),
        (lambda g: make_hardcore(g, Fraction(1, 3)), 1),
        (lambda g: make_ising(g, 2), Fraction(1, 2)),
        (lambda g: make_wds(g, 3), Fraction(1, 4)),
    ],
)
def test_matrix_reversible(p3, make, p):
    csp = make(p3)
    M = build_transition_matrix(csp, p3, p)
    pi = enumerate_distribution(csp)
    assert row_sum_error(M) == 0
    assert check_detailed_balance(M, pi) == 0
    assert check_stationarity(M, pi) == 0


def test_p_zero_is_identity(k2):
    M = build_transition_matrix(make_hardcore(k2, 1), k2, 0)
    assert np.array_equal(M.as_array(), np.eye(len(M.states)))


def test_entry_lookup(k2):
    M = build_transition_matrix(make_hardcore(k2, 1), k2, 1)
    # the proposal (1,1) is rejected outright, so it adds to the holding probability
    assert (1, 1) not in M.states
    assert M.entry((0, 0), (0, 0)) == Fraction(1, 2)
    assert M.entry((0, 1), (1, 0)) == 0
    assert M.entry((0, 0), (0, 1)) == Fraction(1, 4)


def test_perturbed_matrix_detected(k2):
    csp = make_hardcore(k2, 1)
    M = build_transition_matrix(csp, k2, Fraction(1, 2))
    rows = [list(r) for r in M.matrix]
    rows[0][0] -= Fraction(1, 100)
    rows[0][1] += Fraction(1, 100)
    bad = TransitionMatrix(M.states, rows)
    pi = enumerate_distribution(csp)
    assert check_detailed_balance(bad, pi) > 0
    assert check_stationarity(bad, pi) > 0


def test_matrix_size_guard():
    g = generate("cycle", {"n": 9})
    with pytest.raises(Exception):
        build_transition_matrix(make_hardcore(g, 1), g, 0.5)


def test_tv_properties():
    pi = {"a": 0.5, "b": 0.5}
    assert tv_distance(Counter({"a": 5, "b": 5}), pi) == 0
    assert tv_distance(Counter({"a": 10}), pi) == pytest.approx(0.5)
    assert tv_distance(Counter({"c": 3}), pi) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        tv_distance(Counter(), pi)


def test_chi_square_closed_form():
    stat, pval = chi_square(Counter({0: 60, 1: 40}), {0: 0.5, 1: 0.5})
    assert stat == pytest.approx(4.0)
    assert pval == pytest.approx(math.erfc(math.sqrt(2.0)), rel=1e-9)


def test_chi_square_rejects_point_mass():
    _, pval = chi_square(Counter({0: 1000}), {0: 0.5, 1: 0.5})
    assert pval < 1e-6
    assert chi_square(Counter({2: 1}), {0: 0.5, 1: 0.5}) == (math.inf, 0.0)


def test_chi_square_pools_small_cells():
    pi = {0: 0.9, 1: 0.05, 2: 0.03, 3: 0.02}
    stat, pval = chi_square(Counter({0: 90, 1: 5, 2: 3, 3: 2}), pi)
    assert stat == pytest.approx(0.0) and pval == pytest.approx(1.0)
    with pytest.raises(ValueError):
        chi_square(Counter({0: 3}), {0: 0.5, 1: 0.5})


def test_soundness(c4):
    res = bounding_soundness_bruteforce(make_hardcore(c4, 1), c4, 0.5, range(30), 16)
    assert res.ok and res.checked == 30 * 16
    res = bounding_soundness_bruteforce(make_wds(c4, 8), c4, 0.4, range(30), 16)
    assert res.ok


def test_soundness_negative_control(c4):
    res = bounding_soundness_bruteforce(make_hardcore(c4, 1), c4, 0.5, range(30), 16, step=broken_bounded_step)
    assert not res.ok
    w = res.witness
    assert w is not None and not (w["set"] >> w["image"][w["vertex"]] & 1)


def test_scaling_small():
    rep = scaling_experiment("hardcore", {"lambda": 0.3}, "cycle", [16, 64], 8)
    assert [r.n for r in rep.rows] == [16, 64]
    assert rep.slope is not None and rep.ratio() is not None
    buf = io.StringIO()
    rep.write_runs_csv(buf)
    assert len(buf.getvalue().splitlines()) == 1 + 16
    d = rep.to_dict()
    assert set(d) == {"rows", "slope", "intercept", "rate", "ratio"}


def test_scaling_single_size():
    rep = scaling_experiment("hardcore", {"lambda": 0.3}, "cycle", [16], 4)
    assert rep.slope is None and rep.ratio() is None
    with pytest.raises(ValueError):
        scaling_experiment("hardcore", {"lambda": 0.3}, "cycle", [16, 8], 4)


def test_scaling_grid_sizes_are_sides():
    rep = scaling_experiment("hardcore", {"lambda": 0.1}, "grid", [3, 4], 3)
    assert [r.n for r in rep.rows] == [9, 16]
