"""The marked local-Metropolis chain and its explicit random mapping.

One step at time index ``t``: every vertex is marked with probability ``p``,
marked vertices propose a label drawn proportionally to their unary weights,
and every constraint set passes its local filter when its uniform ``u_R``
falls below the product of ``C_R / C*_R`` over its potential labelings. A
marked vertex adopts its proposal when every constraint containing it passes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import rng
from .csp import Constraint, CspInstance
from .graph import Graph

__all__ = [
    "StepRandomness",
    "draw_step_randomness",
    "potential_labelings",
    "filter_pass_probability",
    "apply_step",
    "run_forward",
]


@dataclass(frozen=True)
class StepRandomness:
    """Randomness ``r_t`` of one chain step.

    ``proposals[v]`` is -1 for unmarked vertices. ``u[cid]`` is the filter
    threshold of constraint ``cid``, generated by that constraint's aggregator.
    """

    t: int
    marks: np.ndarray
    proposals: np.ndarray
    u: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepRandomness):
            return NotImplemented
        return (
            self.t == other.t
            and np.array_equal(self.marks, other.marks)
            and np.array_equal(self.proposals, other.proposals)
            and np.array_equal(self.u, other.u)
        )

    __hash__ = None  # type: ignore[assignment]


def draw_proposals(seed: int, t: int, p: float, cdf: np.ndarray) -> np.ndarray:
    """Combined marks/proposals as one int array: -1 where unmarked."""
    n = cdf.shape[0]
    idx = np.arange(n, dtype=np.uint64)
    marked = rng.uniform_np(seed, t, rng.MARK, idx) < p
    up = rng.uniform_np(seed, t, rng.PROPOSAL, idx)
    # first label whose cumulative probability exceeds the uniform
    props = (up[:, None] >= cdf).sum(axis=1)
    return np.where(marked, props, -1).astype(np.int8 if cdf.shape[1] < 128 else np.int64)


def draw_vertex(seed: int, t: int, p: float, cdf_row: Sequence[float], v: int) -> int:
    """Scalar twin of :func:`draw_proposals` for a single vertex."""
    if not rng.uniform(seed, t, rng.MARK, v) < p:
        return -1
    up = rng.uniform(seed, t, rng.PROPOSAL, v)
    j = 0
    while up >= cdf_row[j]:
        j += 1
    return j


def draw_step_randomness(seed: int, p: float, t: int, csp: CspInstance, g: Graph | None = None) -> StepRandomness:
    if not 0.0 < p <= 1.0:
        raise ValueError(f"marking probability must lie in (0, 1], got {p}")
    combined = draw_proposals(seed, t, p, csp.proposal_cdf)
    u = rng.uniform_np(seed, t, rng.FILTER, np.arange(len(csp.constraints), dtype=np.uint64))
    return StepRandomness(t, combined >= 0, combined.astype(np.int64), u)


def potential_labelings(
    current: Sequence[int], proposals: Sequence[int], marks: Sequence[bool]
) -> list[tuple[int, ...]]:
    """Every restricted labeling taking at least one proposed entry.

    Selection vectors over the marked members are enumerated in binary
    counting order (first marked member is the low bit); duplicates are kept.
    """
    marked = [i for i, m in enumerate(marks) if m]
    out = []
    for sel in range(1, 1 << len(marked)):
        lab = list(current)
        for bit, i in enumerate(marked):
            if sel >> bit & 1:
                lab[i] = proposals[i]
        out.append(tuple(lab))
    return out


def filter_pass_probability(
    csp: CspInstance,
    constraint: Constraint | int,
    current: Sequence[int],
    proposals: Sequence[int],
    marks: Sequence[bool],
    exact: bool = False,
):
    """Product of ``C_R / C*_R`` over the potential labelings; 1 when none exist."""
    c = csp.constraints[constraint] if isinstance(constraint, int) else constraint
    ratios = c.exact_ratio if exact else c.ratio
    nl = csp.n_labels
    q = Fraction(1) if exact else 1.0
    for lab in potential_labelings(current, proposals, marks):
        q *= ratios[c.index(lab, nl)]
    return q


def apply_step(csp: CspInstance, g: Graph | None, x: Sequence[int], r: StepRandomness) -> tuple[int, ...]:
    marks, props = r.marks, r.proposals
    passed = []
    for cid, c in enumerate(csp.constraints):
        mem = c.members
        if not any(marks[m] for m in mem):
            passed.append(True)
            continue
        q = filter_pass_probability(
            csp, c, [x[m] for m in mem], [int(props[m]) for m in mem], [bool(marks[m]) for m in mem]
        )
        passed.append(r.u[cid] < q)
    out = list(x)
    for v in range(csp.n):
        if marks[v] and all(passed[cid] for cid in csp.constraints_of[v]):
            out[v] = int(props[v])
    return tuple(out)


def run_forward(
    csp: CspInstance, g: Graph | None, x0: Sequence[int], seed: int, p: float, steps: int
) -> tuple[int, ...]:
    """Compose ``steps`` chain steps using ``r_0 .. r_{steps-1}``."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    x = tuple(x0)
    for t in range(steps):
        x = apply_step(csp, g, x, draw_step_randomness(seed, p, t, csp, g))
    return x
