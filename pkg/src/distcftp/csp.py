"""Weighted local CSPs: labels, unary weights, constraint tables, and the exact oracle.

A labeling is a tuple of label *indices* into ``CspInstance.labels``. Constraint
tables are flat tuples indexed in mixed radix over the members in ascending id
order, the first member being the most significant digit.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import Graph, distances_from

__all__ = [
    "Constraint",
    "CspInstance",
    "CspError",
    "InstanceTooLarge",
    "as_fraction",
    "make_csp",
    "labeling_weight",
    "is_valid",
    "enumerate_distribution",
    "valid_labelings",
    "constraint_diameter_check",
    "check_irreducible",
    "load_csp_json",
    "dump_csp_json",
    "ENUMERATION_LIMIT",
]

ENUMERATION_LIMIT = 2**24


class CspError(ValueError):
    pass


class InstanceTooLarge(ValueError):
    """Raised by exhaustive oracles asked to enumerate more than they allow."""


def as_fraction(x) -> Fraction:
    """Exact rational for ``x``; floats go through their shortest repr, so 0.3 -> 3/10."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not weights")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x))


@dataclass(frozen=True)
class Constraint:
    members: tuple[int, ...]
    table: tuple[Fraction, ...]
    max_value: Fraction
    aggregator: int

    @cached_property
    def ratio(self) -> tuple[float, ...]:
        """``C_R / C*_R`` per table entry, as doubles for the sampler path."""
        return tuple(float(c / self.max_value) for c in self.table)

    @cached_property
    def exact_ratio(self) -> tuple[Fraction, ...]:
        return tuple(c / self.max_value for c in self.table)

    def index(self, restricted: Sequence[int], n_labels: int) -> int:
        idx = 0
        for x in restricted:
            idx = idx * n_labels + x
        return idx


@dataclass(frozen=True)
class CspInstance:
    labels: tuple
    unary: tuple[tuple[Fraction, ...], ...]
    constraints: tuple[Constraint, ...]
    k: int
    model: str | None = None
    params: Mapping = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.unary)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @cached_property
    def support(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(j for j, b in enumerate(bv) if b > 0) for bv in self.unary)

    @cached_property
    def support_masks(self) -> np.ndarray:
        masks = np.zeros(self.n, dtype=np.uint8 if self.n_labels <= 8 else np.int64)
        for v, sup in enumerate(self.support):
            masks[v] = sum(1 << j for j in sup)
        return masks

    @cached_property
    def proposal_cdf(self) -> np.ndarray:
        """Per-vertex cumulative proposal probabilities over label indices.

        The last positive-weight label and every label after it hold exactly 1.0,
        so a uniform in [0, 1) always lands on a label of positive weight.
        """
        cdf = np.ones((self.n, self.n_labels), dtype=np.float64)
        for v, bv in enumerate(self.unary):
            total = sum(bv)
            last = max(self.support[v])
            acc = Fraction(0)
            for j, b in enumerate(bv):
                acc += b
                cdf[v, j] = 1.0 if j >= last else float(acc / total)
        return cdf

    @cached_property
    def constraints_of(self) -> tuple[tuple[int, ...], ...]:
        """Constraint ids containing each vertex."""
        out: list[list[int]] = [[] for _ in range(self.n)]
        for cid, c in enumerate(self.constraints):
            for v in c.members:
                out[v].append(cid)
        return tuple(tuple(x) for x in out)

    def label_names(self, labeling: Sequence[int]) -> list:
        return [self.labels[x] for x in labeling]


def _tabulate(func, size: int, n_labels: int) -> tuple[Fraction, ...]:
    return tuple(
        as_fraction(func(combo)) for combo in itertools.product(range(n_labels), repeat=size)
    )


def make_csp(
    labels: Sequence,
    unary: Sequence[Sequence],
    constraints: Iterable[tuple],
    g: Graph | None = None,
    k: int | None = None,
    model: str | None = None,
    params: Mapping | None = None,
) -> CspInstance:
    """Validate and freeze a CSP description.

    ``constraints`` holds ``(members, table_or_callable)`` or
    ``(members, table_or_callable, aggregator)`` entries. A callable receives the
    restricted labeling (label indices, members ascending) and returns a weight.
    ``k`` defaults to the largest constraint diameter measured in ``g``.
    """
    labels = tuple(labels)
    nl = len(labels)
    if nl == 0:
        raise CspError("label set is empty")
    unary_t = tuple(tuple(as_fraction(b) for b in bv) for bv in unary)
    for v, bv in enumerate(unary_t):
        if len(bv) != nl:
            raise CspError(f"unary weights of vertex {v} have length {len(bv)}, expected {nl}")
        if any(b < 0 for b in bv):
            raise CspError(f"negative unary weight at vertex {v}")
        if not any(b > 0 for b in bv):
            raise CspError(f"vertex {v} has no label of positive weight")
    n = len(unary_t)
    built = []
    for entry in constraints:
        members, spec = entry[0], entry[1]
        agg = entry[2] if len(entry) > 2 else None
        members = tuple(sorted(int(x) for x in members))
        if len(members) < 2:
            raise CspError(f"constraint {members} is not allowed: singleton sets go into unary weights")
        if len(set(members)) != len(members) or members[-1] >= n or members[0] < 0:
            raise CspError(f"constraint {members} has duplicate or out-of-range members")
        size = nl ** len(members)
        table = _tabulate(spec, len(members), nl) if callable(spec) else tuple(as_fraction(x) for x in spec)
        if len(table) != size:
            raise CspError(f"constraint {members}: table has {len(table)} entries, expected {size}")
        if any(x < 0 for x in table):
            raise CspError(f"constraint {members}: negative table entry")
        cmax = max(table)
        if cmax <= 0:
            raise CspError(f"constraint {members} is identically zero")
        if agg is None:
            agg = _default_aggregator(members, g)
        if agg not in members:
            raise CspError(f"constraint {members}: aggregator {agg} is not a member")
        built.append(Constraint(members, table, cmax, int(agg)))
    if g is not None and g.n != n:
        raise CspError(f"graph has {g.n} vertices but the CSP has {n}")
    if k is None:
        if g is None:
            raise CspError("k must be given when no graph is supplied")
        probe = CspInstance(labels, unary_t, tuple(built), 1)
        k = max(_diameters(probe, g), default=1) or 1
    if k < 1:
        raise CspError("k must be positive")
    return CspInstance(labels, unary_t, tuple(built), int(k), model, dict(params or {}))


def _default_aggregator(members: tuple[int, ...], g: Graph | None) -> int:
    # highest-id member adjacent to every other member; plain highest id otherwise
    if g is not None:
        for cand in reversed(members):
            nb = set(g.adjacency[cand])
            if all(m == cand or m in nb for m in members):
                return cand
    return members[-1]


def _weight(csp: CspInstance, ell: Sequence[int], exact: bool = True):
    nl = csp.n_labels
    w = Fraction(1) if exact else 1.0
    for v, x in enumerate(ell):
        b = csp.unary[v][x]
        if b == 0:
            return 0 * w
        w *= b if exact else float(b)
    for c in csp.constraints:
        val = c.table[c.index([ell[m] for m in c.members], nl)]
        if val == 0:
            return 0 * w
        w *= val if exact else float(val)
    return w


def labeling_weight(csp: CspInstance, g: Graph | None, ell: Sequence[int]) -> Fraction:
    """Exact weight: the product of every unary and constraint factor."""
    if len(ell) != csp.n:
        raise CspError(f"labeling has length {len(ell)}, expected {csp.n}")
    if any(not 0 <= x < csp.n_labels for x in ell):
        raise CspError("labeling uses an unknown label index")
    return _weight(csp, ell)


def is_valid(csp: CspInstance, g: Graph | None, ell: Sequence[int]) -> bool:
    return labeling_weight(csp, g, ell) > 0


def valid_labelings(csp: CspInstance, limit: int = ENUMERATION_LIMIT) -> list[tuple[int, ...]]:
    """All labelings of positive weight, in lexicographic order.

    Backtracks over vertices in id order and prunes as soon as a fully assigned
    constraint evaluates to zero.
    """
    n, nl = csp.n, csp.n_labels
    if nl**n > limit:
        raise InstanceTooLarge(f"{nl}^{n} labelings exceed the enumeration limit {limit}")
    closing: list[list[Constraint]] = [[] for _ in range(n)]
    for c in csp.constraints:
        closing[c.members[-1]].append(c)
    support = csp.support
    out: list[tuple[int, ...]] = []
    ell = [0] * n

    def rec(v: int) -> None:
        if v == n:
            out.append(tuple(ell))
            return
        for x in support[v]:
            ell[v] = x
            if all(c.table[c.index([ell[m] for m in c.members], nl)] > 0 for c in closing[v]):
                rec(v + 1)

    rec(0)
    return out


def enumerate_distribution(csp: CspInstance, g: Graph | None = None) -> dict[tuple[int, ...], Fraction]:
    """Exact target distribution over valid labelings (weight / Z)."""
    states = valid_labelings(csp)
    weights = [_weight(csp, s) for s in states]
    z = sum(weights)
    if z == 0:
        raise CspError("instance has no valid labeling")
    return {s: w / z for s, w in zip(states, weights)}


def _diameters(csp: CspInstance, g: Graph) -> list[int]:
    out = []
    for c in csp.constraints:
        diam = 0
        for i, a in enumerate(c.members):
            dist = distances_from(g, a)
            for b in c.members[i + 1:]:
                if b not in dist:
                    raise CspError(f"constraint {c.members} spans disconnected vertices")
                diam = max(diam, dist[b])
        out.append(diam)
    return out


def constraint_diameter_check(csp: CspInstance, g: Graph) -> int:
    """Largest graph diameter of a constraint set; raises if any exceeds ``csp.k``."""
    diams = _diameters(csp, g)
    for c, d in zip(csp.constraints, diams):
        if d > csp.k:
            raise CspError(f"constraint {c.members} has diameter {d} > k={csp.k}")
    return max(diams, default=0)


def check_irreducible(csp: CspInstance) -> bool:
    """Whether valid labelings are connected by single-vertex changes (exponential)."""
    states = valid_labelings(csp)
    if not states:
        return False
    index = {s: i for i, s in enumerate(states)}
    seen = {0}
    stack = [states[0]]
    while stack:
        s = stack.pop()
        for v in range(csp.n):
            for x in csp.support[v]:
                if x == s[v]:
                    continue
                t = s[:v] + (x,) + s[v + 1:]
                i = index.get(t)
                if i is not None and i not in seen:
                    seen.add(i)
                    stack.append(t)
    return len(seen) == len(states)


# -- JSON description ----------------------------------------------------------


def _num_out(x: Fraction):
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def dump_csp_json(csp: CspInstance) -> str:
    doc = {
        "labels": list(csp.labels),
        "unary": [[_num_out(b) for b in bv] for bv in csp.unary],
        "constraints": [
            {"members": list(c.members), "table": [_num_out(x) for x in c.table], "aggregator": c.aggregator}
            for c in csp.constraints
        ],
        "k": csp.k,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def load_csp_json(text: str, g: Graph | None = None) -> CspInstance:
    doc = json.loads(text)
    try:
        labels = doc["labels"]
        unary = doc["unary"]
        cons = doc["constraints"]
    except KeyError as exc:
        raise CspError(f"CSP description lacks field {exc.args[0]!r}") from None
    entries: list[tuple] = []
    for c in cons:
        entry: tuple = (c["members"], c["table"])
        if c.get("aggregator") is not None:
            entry += (c["aggregator"],)
        entries.append(entry)
    return make_csp(labels, unary, entries, g=g, k=doc.get("k"))
