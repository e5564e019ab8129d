"""Oracles and statistics for checking the samplers.

The transition matrix is built by summing over every mark vector, proposal
vector, and filter outcome, in exact rational arithmetic.
"""

from __future__ import annotations

import csv
import itertools
import math
import statistics
import warnings
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import models
from .cftp import cftp_sample_batch, monotone_batch
from .cftp.bounds import TriState, bounded_step_contract, constraint_tristates
from .cftp.report import DEFAULT_MAX_STAGES, SampleReport
from .chain import apply_step, draw_step_randomness, filter_pass_probability
from .csp import CspInstance, InstanceTooLarge, as_fraction, valid_labelings
from .graph import Graph, generate

MATRIX_MAX_VERTICES = 6
MATRIX_MAX_LABELS = 3
SOUNDNESS_MAX_STATES = 12


@dataclass(frozen=True)
class TransitionMatrix:
    states: tuple[tuple[int, ...], ...]
    matrix: tuple[tuple[Fraction, ...], ...]

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.matrix])

    def index(self, state: Sequence[int]) -> int:
        return self.states.index(tuple(state))

    def entry(self, x: Sequence[int], y: Sequence[int]) -> Fraction:
        return self.matrix[self.index(x)][self.index(y)]


def _step_outcomes(csp: CspInstance, x: tuple[int, ...], marks, props):
    """Distribution of successor states for fixed marks and proposals."""
    qs = [
        filter_pass_probability(
            csp, c, [x[m] for m in c.members], [props[m] for m in c.members], [marks[m] for m in c.members], exact=True
        )
        for c in csp.constraints
    ]
    free = [i for i, q in enumerate(qs) if 0 < q < 1]
    for outcome in itertools.product((True, False), repeat=len(free)):
        passed = [q == 1 for q in qs]
        prob = Fraction(1)
        for i, ok in zip(free, outcome):
            passed[i] = ok
            prob *= qs[i] if ok else 1 - qs[i]
        y = list(x)
        for v in range(csp.n):
            if marks[v] and all(passed[c] for c in csp.constraints_of[v]):
                y[v] = props[v]
        yield tuple(y), prob


def build_transition_matrix(csp: CspInstance, g: Graph | None, p) -> TransitionMatrix:
    """Exact one-step transition matrix over the valid labelings."""
    if csp.n > MATRIX_MAX_VERTICES or csp.n_labels > MATRIX_MAX_LABELS:
        raise InstanceTooLarge(
            f"transition matrix needs n <= {MATRIX_MAX_VERTICES} and |L| <= {MATRIX_MAX_LABELS}"
        )
    pf = as_fraction(p)
    if not 0 <= pf <= 1:
        raise ValueError("p must lie in [0, 1]")
    states = valid_labelings(csp)
    pos = {s: i for i, s in enumerate(states)}
    prop_prob = []
    for bv in csp.unary:
        total = sum(bv)
        prop_prob.append({j: b / total for j, b in enumerate(bv) if b > 0})
    n = csp.n
    rows = [[Fraction(0)] * len(states) for _ in states]
    for marks in itertools.product((False, True), repeat=n):
        m = sum(marks)
        pm = pf**m * (1 - pf) ** (n - m)
        if pm == 0:
            continue
        choices = [sorted(prop_prob[v]) if marks[v] else [-1] for v in range(n)]
        for props in itertools.product(*choices):
            pp = pm
            for v in range(n):
                if marks[v]:
                    pp *= prop_prob[v][props[v]]
            for x in states:
                row = rows[pos[x]]
                for y, pr in _step_outcomes(csp, x, marks, props):
                    if y not in pos:
                        raise AssertionError(f"step from {x} produced invalid state {y}")
                    row[pos[y]] += pp * pr
    return TransitionMatrix(tuple(states), tuple(tuple(r) for r in rows))


def _pi_vector(M: TransitionMatrix, pi) -> list:
    if isinstance(pi, Mapping):
        return [pi.get(s, 0) for s in M.states]
    if len(pi) != len(M.states):
        raise ValueError("distribution and matrix dimensions differ")
    return list(pi)


def check_detailed_balance(M: TransitionMatrix, pi) -> float:
    """Largest ``|pi(x) M[x,y] - pi(y) M[y,x]|``."""
    v = _pi_vector(M, pi)
    worst = 0
    size = len(v)
    for i in range(size):
        for j in range(i + 1, size):
            worst = max(worst, abs(v[i] * M.matrix[i][j] - v[j] * M.matrix[j][i]))
    return float(worst)


def check_stationarity(M: TransitionMatrix, pi) -> float:
    v = _pi_vector(M, pi)
    size = len(v)
    worst = 0
    for j in range(size):
        flow = sum(v[i] * M.matrix[i][j] for i in range(size))
        worst = max(worst, abs(flow - v[j]))
    return float(worst)


def row_sum_error(M: TransitionMatrix) -> float:
    return float(max((abs(sum(r) - 1) for r in M.matrix), default=0))


# -- goodness of fit -----------------------------------------------------------


def empirical_counts(reports: Iterable[SampleReport]) -> Counter:
    """Counts of exact samples; aborted runs are not samples."""
    return Counter(r.labeling for r in reports if r.exact)


def tv_distance(empirical: Mapping, pi: Mapping) -> float:
    total = sum(empirical.values())
    if total <= 0:
        raise ValueError("no observations")
    keys = set(empirical) | set(pi)
    return 0.5 * sum(abs(empirical.get(k, 0) / total - float(pi.get(k, 0))) for k in keys)


def chi_square(empirical: Mapping, pi: Mapping, min_expected: float = 5.0) -> tuple[float, float]:
    """Pearson statistic and upper-tail p-value.

    Cells expected to hold fewer than ``min_expected`` observations are pooled
    with the next smallest until the pool reaches it.
    """
    total = sum(empirical.values())
    if total <= 0:
        raise ValueError("no observations")
    if any(c > 0 and float(pi.get(k, 0)) == 0 for k, c in empirical.items()):
        return math.inf, 0.0
    cells = sorted(((total * float(q), empirical.get(k, 0)) for k, q in pi.items() if q > 0), key=lambda c: c[0])
    merged: list[list[float]] = []
    pool = [0.0, 0.0]
    for e, o in cells:
        if pool[0] < min_expected:
            pool[0] += e
            pool[1] += o
        else:
            merged.append(pool)
            pool = [e, o]
    if merged and pool[0] < min_expected:
        merged[-1][0] += pool[0]
        merged[-1][1] += pool[1]
    else:
        merged.append(pool)
    if len(merged) < 2:
        raise ValueError("chi-square needs at least two cells after pooling")
    stat = sum((o - e) ** 2 / e for e, o in merged)
    return float(stat), float(stats.chi2.sf(stat, len(merged) - 1))


def labeled_distribution(csp: CspInstance, pi: Mapping) -> dict:
    """Re-key a distribution over label indices by label values."""
    return {tuple(csp.labels[i] for i in s): q for s, q in pi.items()}


# -- bounding soundness --------------------------------------------------------


@dataclass(frozen=True)
class SoundnessResult:
    ok: bool
    checked: int
    witness: dict | None = None


def default_bounded_step(csp: CspInstance) -> Callable:
    if csp.model == "hardcore":
        return models.hardcore_bounded_step
    if csp.model == "wds":
        return models.wds_bounded_step
    return bounded_step_contract


def broken_bounded_step(csp: CspInstance, S, r):
    """Negative control: treats every uncertain outcome as a pass."""
    states = constraint_tristates(csp, S, r)
    out = np.array(S, dtype=np.int64)
    for v in range(csp.n):
        if r.marks[v] and all(states[c] != TriState.FAIL for c in csp.constraints_of[v]):
            out[v] = 1 << int(r.proposals[v])
    return out


def bounding_soundness_bruteforce(
    csp: CspInstance,
    g: Graph | None,
    p: float,
    seeds: Iterable[int],
    T_max: int,
    step: Callable | None = None,
) -> SoundnessResult:
    """Check that every ``F^0_{-T}(X)`` lies inside the bounding sets.

    For each seed the one-step maps over the valid states are composed
    backwards, so every ``T <= T_max`` costs one extra map.
    """
    step = step or default_bounded_step(csp)
    states = valid_labelings(csp)
    if len(states) > SOUNDNESS_MAX_STATES:
        raise InstanceTooLarge(f"{len(states)} valid states exceed {SOUNDNESS_MAX_STATES}")
    pos = {s: i for i, s in enumerate(states)}
    full = np.array([int(x) for x in csp.support_masks], dtype=np.int64)
    checked = 0
    for seed in seeds:
        rs = {t: draw_step_randomness(seed, p, t, csp, g) for t in range(-T_max, 0)}
        maps = {t: [pos[apply_step(csp, g, s, rs[t])] for s in states] for t in rs}
        image = list(range(len(states)))  # F^0_{-T} as state index -> state index
        for T in range(1, T_max + 1):
            f = maps[-T]
            image = [image[f[i]] for i in range(len(states))]
            S = full.copy()
            for t in range(-T, 0):
                S = np.asarray(step(csp, S, rs[t]), dtype=np.int64)
            for i, y in enumerate(image):
                out = states[y]
                for v, lab in enumerate(out):
                    if not S[v] >> lab & 1:
                        return SoundnessResult(
                            False,
                            checked,
                            {"seed": seed, "T": T, "start": states[i], "image": out, "vertex": v, "set": int(S[v])},
                        )
            checked += 1
    return SoundnessResult(True, checked)


# -- round scaling ---------------------------------------------------------------


@dataclass(frozen=True)
class ScalingRow:
    n: int
    seeds_used: int
    aborted: int
    median_total_rounds: float
    median_T_star: float
    peak_bits: int
    violations: int
    predicted_T: float | None


@dataclass
class ScalingReport:
    rows: list[ScalingRow]
    runs: list[tuple[int, SampleReport]] = field(default_factory=list)
    slope: float | None = None
    intercept: float | None = None
    rate: float | None = None

    def ratio(self) -> float | None:
        """Median T* at the largest size over that at the smallest."""
        if len(self.rows) < 2 or not self.rows[0].median_T_star:
            return None
        return self.rows[-1].median_T_star / self.rows[0].median_T_star

    def to_dict(self) -> dict:
        return {
            "rows": [r.__dict__.copy() for r in self.rows],
            "slope": self.slope,
            "intercept": self.intercept,
            "rate": self.rate,
            "ratio": self.ratio(),
        }

    def write_runs_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "seed", "T_star", "total_rounds", "peak_bits", "status"])
        for n, r in self.runs:
            w.writerow([n, r.seed, r.T_star, r.total_rounds, r.peak_message_bits, r.status])


def scaling_experiment(
    model: str,
    params: Mapping,
    family: str,
    sizes: Sequence[int],
    seeds_per_size: int,
    p: float | None = None,
    max_stages: int = DEFAULT_MAX_STAGES,
    base_seed: int = 0,
    graph_params: Mapping | None = None,
    backend: str = "auto",
) -> ScalingReport:
    """Median T* and rounds per size, with a least-squares fit of T* against ln n.

    For the grid family a size is the side length; rows report vertex counts.
    """
    sizes = list(sizes)
    if not sizes:
        raise ValueError("no sizes given")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")
    p = models.default_p(model) if p is None else p
    rows, runs = [], []
    rate = None
    for n in sizes:
        gp = dict(graph_params or {})
        gp["rows" if family == "grid" else "n"] = n
        g = generate(family, gp, base_seed)
        csp = models.build_model(model, g, params)
        predicted = None
        if model in ("hardcore", "wds"):
            rp = models.rate_parameters(model, g, {**params, "p": p})
            rate = rp["rate"]
            if rate <= 0:
                warnings.warn(f"rate condition fails at n={n} (rate {rate:.4g})", stacklevel=2)
            else:
                predicted = math.log(g.n) / rate
        seeds = range(base_seed, base_seed + seeds_per_size)
        if model == "ising":
            reps = monotone_batch(g, params.get("beta", 2), seeds, p, max_stages, backend=backend)
        else:
            reps = cftp_sample_batch(csp, g, seeds, p, max_stages, backend=backend)
        runs.extend((g.n, r) for r in reps)
        ok = [r for r in reps if r.exact]
        rows.append(
            ScalingRow(
                g.n,
                len(ok),
                len(reps) - len(ok),
                statistics.median(r.total_rounds for r in ok) if ok else math.nan,
                statistics.median(r.T_star for r in ok) if ok else math.nan,
                max((r.peak_message_bits for r in reps), default=0),
                sum(r.budget_violations for r in reps),
                predicted,
            )
        )
    rep = ScalingReport(rows, runs, rate=rate)
    pts = [(math.log(r.n), r.median_T_star) for r in rows if r.seeds_used]
    if len(pts) >= 2:
        slope, intercept = np.polyfit([x for x, _ in pts], [y for _, y in pts], 1)
        rep.slope, rep.intercept = float(slope), float(intercept)
    return rep
