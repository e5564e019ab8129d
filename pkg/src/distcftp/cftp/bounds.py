"""Label-set semantics of the bounding chain for arbitrary CSPs.

Label sets are integer bitmasks over label indices. These routines are the
slow, general forms; the built-in models have specialized kernels.
"""

from __future__ import annotations

import itertools
from enum import IntEnum
from typing import Sequence

import numpy as np

from ..chain import StepRandomness, filter_pass_probability
from ..csp import Constraint, CspInstance, InstanceTooLarge

BALL_LIMIT = 1 << 16


class TriState(IntEnum):
    PASS = 0
    FAIL = 1
    UNCERTAIN = 2


def mask_labels(mask: int) -> list[int]:
    out = []
    j = 0
    while mask >> j:
        if mask >> j & 1:
            out.append(j)
        j += 1
    return out


def is_singleton(mask: int) -> bool:
    return mask != 0 and mask & (mask - 1) == 0


def single_label(mask: int) -> int:
    return mask.bit_length() - 1


def tristate_filter(
    csp: CspInstance,
    constraint: Constraint | int,
    sets: Sequence[int],
    proposals: Sequence[int],
    marks: Sequence[bool],
    u: float,
) -> TriState:
    """Filter outcome over every restricted labeling consistent with ``sets``.

    Pass when ``u`` is below the smallest pass probability, Fail when it is at
    or above the largest, Uncertain otherwise.
    """
    c = csp.constraints[constraint] if isinstance(constraint, int) else constraint
    if not any(marks):
        return TriState.PASS
    q_min, q_max = 1.0, 0.0
    for combo in itertools.product(*(mask_labels(int(s)) for s in sets)):
        q = filter_pass_probability(csp, c, combo, proposals, marks)
        q_min = min(q_min, q)
        q_max = max(q_max, q)
    if u < q_min:
        return TriState.PASS
    if u >= q_max:
        return TriState.FAIL
    return TriState.UNCERTAIN


def contract_update(S_v: int, sigma: int, states: Sequence[TriState]) -> int:
    """Per-vertex bounding update for a marked vertex."""
    if any(s == TriState.FAIL for s in states):
        return S_v
    if all(s == TriState.PASS for s in states):
        return 1 << sigma
    return S_v | (1 << sigma)


def constraint_tristates(csp: CspInstance, S: Sequence[int], r: StepRandomness) -> list[TriState]:
    out = []
    for cid, c in enumerate(csp.constraints):
        mem = c.members
        out.append(
            tristate_filter(
                csp,
                c,
                [int(S[m]) for m in mem],
                [int(r.proposals[m]) for m in mem],
                [bool(r.marks[m]) for m in mem],
                float(r.u[cid]),
            )
        )
    return out


def bounded_step_contract(csp: CspInstance, S: Sequence[int], r: StepRandomness) -> np.ndarray:
    """Global bounding step from per-constraint tri-states and the update contract."""
    states = constraint_tristates(csp, S, r)
    out = np.array(S, dtype=np.int64)
    for v in range(csp.n):
        if r.marks[v]:
            out[v] = contract_update(int(S[v]), int(r.proposals[v]), [states[c] for c in csp.constraints_of[v]])
    return out


def bounded_step_general(
    csp: CspInstance, g, S: Sequence[int], r: StepRandomness, limit: int = BALL_LIMIT
) -> np.ndarray:
    """Bounding step by brute force.

    For a marked vertex, every labeling of the members of its constraints
    consistent with ``S`` is run through the chain's per-vertex rule, and the
    results are united.
    """
    out = np.array(S, dtype=np.int64)
    for v in range(csp.n):
        if not r.marks[v]:
            continue
        cids = csp.constraints_of[v]
        ball = sorted({m for c in cids for m in csp.constraints[c].members} | {v})
        choices = [mask_labels(int(S[w])) for w in ball]
        size = 1
        for ch in choices:
            size *= len(ch)
        if size > limit:
            raise InstanceTooLarge(f"vertex {v}: {size} consistent labelings exceed the limit {limit}")
        pos = {w: i for i, w in enumerate(ball)}
        sigma = int(r.proposals[v])
        result = 0
        for combo in itertools.product(*choices):
            ok = True
            for cid in cids:
                c = csp.constraints[cid]
                mem = c.members
                q = filter_pass_probability(
                    csp,
                    c,
                    [combo[pos[m]] for m in mem],
                    [int(r.proposals[m]) for m in mem],
                    [bool(r.marks[m]) for m in mem],
                )
                if not r.u[cid] < q:
                    ok = False
                    break
            result |= 1 << (sigma if ok else combo[pos[v]])
        out[v] = result
    return out
