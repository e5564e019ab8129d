from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from distcftp import rng
from distcftp.chain import (
    StepRandomness,
    apply_step,
    draw_step_randomness,
    filter_pass_probability,
    potential_labelings,
    run_forward,
)
from distcftp.csp import is_valid, valid_labelings
from distcftp.graph import generate
from distcftp.models import make_hardcore, make_ising, make_wds
from distcftp.verify import build_transition_matrix

import oracles


def _r(marks, props, u):
    marks = np.array(marks, dtype=bool)
    return StepRandomness(-1, marks, np.array(props, dtype=np.int64), np.array(u, dtype=float))


def test_randomness_deterministic(k2):
    csp = make_hardcore(k2, 2)
    assert draw_step_randomness(5, 0.3, -4, csp) == draw_step_randomness(5, 0.3, -4, csp)
    assert draw_step_randomness(5, 0.3, -4, csp) != draw_step_randomness(5, 0.3, -5, csp)


def test_p_one_marks_everyone(c5):
    r = draw_step_randomness(1, 1.0, 0, make_hardcore(c5, 1))
    assert r.marks.all()
    assert (r.proposals >= 0).all()


def test_bad_p(k2):
    with pytest.raises(ValueError):
        draw_step_randomness(1, 0.0, 0, make_hardcore(k2, 1))


def test_proposal_frequency():
    g = generate("path", {"n": 1})
    csp = make_hardcore(g, 2)
    N = 100_000
    ones = sum(draw_step_randomness(s, 1.0, -1, csp).proposals[0] for s in range(N))
    assert abs(ones / N - 2 / 3) <= oracles.sigma3(2 / 3, N)


def test_potential_labelings():
    assert potential_labelings((0, 1), (-1, -1), (False, False)) == []
    assert potential_labelings((0, 1), (1, -1), (True, False)) == [(1, 1)]
    assert sorted(potential_labelings((0, 0), (1, 1), (True, True))) == [(0, 1), (1, 0), (1, 1)]
    # duplicates are kept
    assert potential_labelings((1, 1), (1, 1), (True, True)) == [(1, 1)] * 3


def test_filter_probability(k2):
    hc = make_hardcore(k2, 1)
    assert filter_pass_probability(hc, 0, (0, 0), (-1, -1), (False, False)) == 1
    assert filter_pass_probability(hc, 0, (0, 1), (1, -1), (True, False)) == 0
    ising = make_ising(k2, 2)
    # current (+,+), proposals (+,-): entries agree, disagree, disagree
    assert filter_pass_probability(ising, 0, (1, 1), (1, 0), (True, True), exact=True) == Fraction(1, 4)
    # current (-,+), proposals (+,-): agree, agree, disagree
    assert filter_pass_probability(ising, 0, (0, 1), (1, 0), (True, True), exact=True) == Fraction(1, 2)


def test_apply_step_cases(k2):
    csp = make_hardcore(k2, 1)
    assert apply_step(csp, k2, (1, 0), _r([0, 0], [-1, -1], [0.5])) == (1, 0)
    assert apply_step(csp, k2, (0, 0), _r([1, 0], [1, -1], [0.99])) == (1, 0)
    assert apply_step(csp, k2, (0, 1), _r([1, 0], [1, -1], [0.0])) == (0, 1)


def test_apply_step_one_fail_blocks(p3):
    # vertex 1 sits in two edges; the edge to 2 fails so it keeps its label
    csp = make_hardcore(p3, 1)
    assert apply_step(csp, p3, (0, 0, 1), _r([0, 1, 0], [-1, 1, -1], [0.1, 0.1])) == (0, 0, 1)


def test_run_forward(c5):
    csp = make_hardcore(c5, 1)
    x0 = (0,) * 5
    assert run_forward(csp, c5, x0, 3, 0.5, 0) == x0
    one = apply_step(csp, c5, x0, draw_step_randomness(3, 0.5, 0, csp))
    assert run_forward(csp, c5, x0, 3, 0.5, 1) == one
    assert run_forward(csp, c5, x0, 3, 0.5, 30) == run_forward(csp, c5, x0, 3, 0.5, 30)
    with pytest.raises(ValueError):
        run_forward(csp, c5, x0, 3, 0.5, -1)


def test_last_step_uses_same_randomness(c5):
    csp = make_hardcore(c5, 1)
    x = (1, 0, 1, 0, 0)
    for T in (3, 7):
        prev = run_forward(csp, c5, x, 9, 0.4, T - 1)
        assert run_forward(csp, c5, x, 9, 0.4, T) == apply_step(csp, c5, prev, draw_step_randomness(9, 0.4, T - 1, csp))


@pytest.mark.parametrize("maker,arg", [(make_hardcore, 1), (make_wds, 2), (make_ising, 2)])
def test_validity_preserved(maker, arg, c4):
    csp = maker(c4, arg)
    for s in valid_labelings(csp):
        for seed in range(40):
            x = s
            for t in range(5):
                x = apply_step(csp, c4, x, draw_step_randomness(seed, 0.6, t, csp))
                assert is_valid(csp, c4, x)


def test_one_step_frequencies_match_matrix(k2):
    csp = make_hardcore(k2, 1)
    M = build_transition_matrix(csp, k2, Fraction(1, 2))
    N = 100_000
    x = (1, 0)
    counts = Counter(apply_step(csp, k2, x, draw_step_randomness(s, 0.5, 0, csp)) for s in range(N))
    for y in M.states:
        q = float(M.entry(x, y))
        assert abs(counts[y] / N - q) <= oracles.sigma3(q, N) + 1e-12
