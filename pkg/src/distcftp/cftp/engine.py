"""Staged coupling from the past, run as vertex programs on the simulator.

Each stage has length ``T``. Uncoalesced vertices flood an activation to
distance ``D = k*T`` and the distances are echoed back. Every active vertex
then resets its state and runs ``T`` steps of the bounding chain (or of the
top/bottom pair, in the monotone variant). At step ``i`` a vertex updates
only while its distance is at most ``k*(T-1-i)``, which is exactly the region
whose time-0 value the active region determines. Per step, members send
their (mark, proposal, state) to each constraint's aggregator, and the
aggregator sends the constraint's verdict back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .. import rng
from ..chain import apply_step, draw_step_randomness, draw_vertex, filter_pass_probability
from ..csp import CspInstance
from ..graph import Graph, _bfs
from ..simnet import Message, Network, NetworkMode
from . import report
from .bounds import TriState, bounded_step_contract, contract_update, is_singleton, single_label, tristate_filter
from .report import ABORTED, EXACT, SampleReport

INF = math.inf


class ProtocolError(RuntimeError):
    """A vertex lacked information the schedule should have delivered."""


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True)
class StageState:
    T: int
    coalesced: tuple[bool, ...]
    outputs: tuple[int | None, ...]
    active: tuple[bool, ...]
    dist: tuple[float, ...]


class _SetsRule:
    """Bounding chain: the state is a label-set bitmask."""

    name = "sets"

    def __init__(self, n_labels: int):
        self.payload_bits = report.triple_bits(n_labels)

    def reset(self, support_mask: int, n_labels: int):
        return support_mask

    def verdict(self, csp, c, states, props, marks, u):
        return tristate_filter(csp, c, states, props, marks, u)

    def update(self, state, sigma, verdicts):
        return contract_update(state, sigma, verdicts)

    def settled(self, state):
        return is_singleton(state)

    def value(self, state):
        return single_label(state)


class _MonotoneRule:
    """Top and bottom trajectories under the shared randomness."""

    name = "monotone"

    def __init__(self, n_labels: int):
        self.payload_bits = report.monotone_triple_bits(n_labels)

    def reset(self, support_mask: int, n_labels: int):
        return (n_labels - 1, 0)

    def verdict(self, csp, c, states, props, marks, u):
        tops = [s[0] for s in states]
        bots = [s[1] for s in states]
        return (
            bool(u < filter_pass_probability(csp, c, tops, props, marks)),
            bool(u < filter_pass_probability(csp, c, bots, props, marks)),
        )

    def update(self, state, sigma, verdicts):
        top, bot = state
        if all(v[0] for v in verdicts):
            top = sigma
        if all(v[1] for v in verdicts):
            bot = sigma
        return (top, bot)

    def settled(self, state):
        return state[0] == state[1]

    def value(self, state):
        return state[0]


class CftpVertex:
    """Program of one vertex.

    It knows its id, its neighbors, the constraints it belongs to, and the
    public run parameters. Everything else arrives through its inbox.
    """

    def __init__(self, v: int, csp: CspInstance, neighbors, seed: int, p: float, rule, h: int, audit: bool):
        self.v = v
        self.csp = csp
        self.neighbors = tuple(neighbors)
        self.seed = seed
        self.p = p
        self.rule = rule
        self.h = h
        self.k = csp.k
        self.audit = audit
        self.cids = csp.constraints_of[v]
        self.aggregated = tuple(cid for cid, c in enumerate(csp.constraints) if c.aggregator == v)
        self.support = int(csp.support_masks[v])
        self.cdf = [float(x) for x in csp.proposal_cdf[v]]
        self.id_bits = max(1, math.ceil(math.log2(max(csp.n, 2))))
        self.cid_bits = max(1, math.ceil(math.log2(max(len(csp.constraints), 2))))
        self.coalesced = False
        self.output: int | None = None
        self.state = None
        self.dist = INF
        self.nbr_dist: dict[int, float] = {}
        self._rand: dict[int, int] = {}
        self._u: dict[tuple[int, int], float] = {}

    # -- local bookkeeping ----------------------------------------------------

    def draw(self, t: int) -> int:
        if t in self._rand:
            if self.audit and draw_vertex(self.seed, t, self.p, self.cdf, self.v) != self._rand[t]:
                raise InvariantViolation(f"vertex {self.v}: retained randomness for t={t} changed")
            return self._rand[t]
        x = self._rand[t] = draw_vertex(self.seed, t, self.p, self.cdf, self.v)
        return x

    def filter_uniform(self, t: int, cid: int) -> float:
        key = (t, cid)
        if key in self._u:
            if self.audit and rng.uniform(self.seed, t, rng.FILTER, cid) != self._u[key]:
                raise InvariantViolation(f"vertex {self.v}: retained filter threshold for t={t} changed")
            return self._u[key]
        x = self._u[key] = rng.uniform(self.seed, t, rng.FILTER, cid)
        return x

    def begin_stage(self, T: int) -> None:
        self.T = T
        self.D = self.k * T
        self.dist = INF if self.coalesced else 0
        self.nbr_dist = {}

    def reset(self) -> None:
        if self.dist <= self.D:
            self.state = self.rule.reset(self.support, self.csp.n_labels)

    def participates(self, i: int) -> bool:
        return self.dist <= self.D - self.k * i

    def updates(self, i: int) -> bool:
        return self.dist <= self.k * (self.T - 1 - i)

    def finish_stage(self) -> None:
        if not self.coalesced and self.rule.settled(self.state):
            self.coalesced = True
            self.output = self.rule.value(self.state)

    # -- rounds ---------------------------------------------------------------

    def send(self, ctx: Mapping):
        phase = ctx["phase"]
        if phase == "flood":
            if self.dist == ctx["j"] - 1:
                m = Message("ACTIVATE", self.dist, report.activation_bits(self.k, self.T))
                return {w: m for w in self.neighbors}
        elif phase == "ack":
            d = self.dist
            if d >= 1 and d == self.D - ctx["j"] + 1:
                m = Message("ACK", None, report.ACK_BITS)
                return {w: m for w in self.neighbors if self.nbr_dist.get(w) == d - 1}
        elif phase == "collect":
            return self._send_collect(ctx)
        elif phase == "echo":
            return self._send_echo(ctx)
        return {}

    def receive(self, inbox: Mapping[int, Message], ctx: Mapping) -> None:
        phase = ctx["phase"]
        if phase == "flood":
            for s, msg in inbox.items():
                self.nbr_dist[s] = msg.payload
                if self.dist == INF:
                    self.dist = msg.payload + 1
        elif phase == "ack":
            for s in inbox:
                self.nbr_dist[s] = self.dist + 1
        elif phase == "collect":
            self._recv_collect(inbox, ctx)
        elif phase == "echo":
            self._recv_echo(inbox, ctx)

    # -- one chain step ---------------------------------------------------------

    def _entry(self, t: int, i: int):
        return (self.draw(t), self.state, self.updates(i))

    def _entry_bits(self) -> int:
        return self.rule.payload_bits

    def _send_collect(self, ctx):
        i, t, j = ctx["i"], ctx["t"], ctx["j"]
        if j == 1:
            self._known = {}
            self._verdicts = {}
            if self.participates(i):
                self._known[self.v] = self._entry(t, i)
        if not self.participates(i):
            return {}
        if self.h == 1:
            targets = {self.csp.constraints[c].aggregator for c in self.cids} - {self.v}
            m = Message("TRIPLE", self._known[self.v], self._entry_bits())
            return {a: m for a in sorted(targets)}
        # relay everything learned last round; entries carry the origin id and the update bit
        fresh = self._known if j == 1 else self._fresh
        if not fresh:
            return {}
        bits = len(fresh) * (self.id_bits + self._entry_bits() + 1)
        m = Message("RELAY", dict(fresh), bits)
        return {w: m for w in self.neighbors}

    def _recv_collect(self, inbox, ctx):
        fresh = {}
        for s, msg in inbox.items():
            if msg.kind == "TRIPLE":
                self._known[s] = msg.payload
            else:
                for origin, entry in msg.payload.items():
                    if origin not in self._known:
                        self._known[origin] = entry
                        fresh[origin] = entry
        self._fresh = fresh

    def _member_updates(self, w: int, i: int) -> bool:
        if self.h == 1:
            d = self.dist if w == self.v else self.nbr_dist.get(w, INF)
            return d <= self.k * (self.T - 1 - i)
        entry = self._known.get(w)
        return entry is not None and entry[2]

    def _compute_verdicts(self, i: int, t: int) -> dict[int, object]:
        out = {}
        for cid in self.aggregated:
            c = self.csp.constraints[cid]
            if not any(self._member_updates(w, i) for w in c.members):
                continue
            missing = [w for w in c.members if w not in self._known]
            if missing:
                raise ProtocolError(f"aggregator {self.v} lacks members {missing} of constraint {cid} at t={t}")
            entries = [self._known[w] for w in c.members]
            props = [e[0] for e in entries]
            out[cid] = self.rule.verdict(
                self.csp,
                c,
                [e[1] for e in entries],
                props,
                [x >= 0 for x in props],
                self.filter_uniform(t, cid),
            )
        return out

    def _send_echo(self, ctx):
        i, t, j = ctx["i"], ctx["t"], ctx["j"]
        if j == 1:
            self._own = self._compute_verdicts(i, t) if self.aggregated else {}
            self._verdicts.update(self._own)
        if self.h == 1:
            out = {}
            for w in self.neighbors:
                if not self._member_updates(w, i):
                    continue
                vs = tuple(
                    (cid, self._own[cid]) for cid in self._own if w in self.csp.constraints[cid].members
                )
                if vs:
                    out[w] = Message("VERDICT", vs, report.VERDICT_BITS * len(vs))
            return out
        fresh = self._own if j == 1 else self._fresh_v
        if not fresh:
            return {}
        m = Message("RELAY_VERDICT", dict(fresh), len(fresh) * (self.cid_bits + report.VERDICT_BITS))
        return {w: m for w in self.neighbors}

    def _recv_echo(self, inbox, ctx):
        fresh = {}
        for msg in inbox.values():
            items = msg.payload if msg.kind == "VERDICT" else msg.payload.items()
            for cid, vd in items:
                if cid not in self._verdicts:
                    self._verdicts[cid] = vd
                    fresh[cid] = vd
        self._fresh_v = fresh
        if ctx["j"] < self.h:
            return
        i, t = ctx["i"], ctx["t"]
        if not self.updates(i):
            return
        sigma = self._rand[t]
        if sigma < 0:
            return
        missing = [c for c in self.cids if c not in self._verdicts]
        if missing:
            raise ProtocolError(f"vertex {self.v} has no verdict for constraints {missing} at t={t}")
        self.state = self.rule.update(self.state, sigma, [self._verdicts[c] for c in self.cids])


def aggregation_radius(csp: CspInstance, g: Graph) -> int:
    h = 1
    for c in csp.constraints:
        d = _bfs(g, c.aggregator)
        far = max(d.get(m, INF) for m in c.members)
        if far == INF:
            raise ValueError(f"constraint {c.members} is not connected in the graph")
        h = max(h, far)
    return h


class StagedSampler:
    """One sampling run on a simulated network.

    ``rule`` is ``"sets"`` for the bounding chain or ``"monotone"`` for the
    top/bottom variant. With ``audit`` on, each stage is replayed by a global
    reference computation: vertices uncoalesced at the stage start must hold
    the reference state, and coalesced vertices must see their stored output
    reproduced.
    """

    def __init__(
        self,
        csp: CspInstance,
        g: Graph,
        seed: int,
        p: float,
        rule: str = "sets",
        mode: NetworkMode | None = None,
        audit: bool = True,
        trace: bool = False,
    ):
        if not 0.0 < p <= 1.0:
            raise ValueError(f"marking probability must lie in (0, 1], got {p}")
        if g.n != csp.n:
            raise ValueError("graph and CSP sizes differ")
        self.csp, self.g, self.seed, self.p = csp, g, seed, p
        self.rule = _SetsRule(csp.n_labels) if rule == "sets" else _MonotoneRule(csp.n_labels)
        self.h = aggregation_radius(csp, g)
        self.audit = audit
        self.net = Network(g, mode, trace)
        self.programs = [
            CftpVertex(v, csp, g.adjacency[v], seed, p, self.rule, self.h, audit) for v in range(csp.n)
        ]
        self.T = 1
        self.stages = 0

    def _rounds(self, phase: str, count: int, **extra) -> None:
        for j in range(1, count + 1):
            self.net.run_round(self.programs, {"phase": phase, "j": j, **extra})

    def run_stage(self) -> StageState:
        progs = self.programs
        if all(pr.coalesced for pr in progs):
            raise ValueError("every vertex has already coalesced")
        T = self.T
        was_coalesced = [pr.coalesced for pr in progs]
        for pr in progs:
            pr.begin_stage(T)
        D = self.csp.k * T
        self._rounds("flood", D)
        self._rounds("ack", D)
        for pr in progs:
            pr.reset()
        for i in range(T):
            t = -T + i
            self._rounds("collect", self.h, i=i, t=t)
            self._rounds("echo", self.h, i=i, t=t)
        snapshot = [pr.state for pr in progs]
        for pr in progs:
            pr.finish_stage()
        if self.audit:
            self._check(T, was_coalesced, snapshot)
        self.stages += 1
        st = StageState(
            T,
            tuple(pr.coalesced for pr in progs),
            tuple(pr.output for pr in progs),
            tuple(pr.dist <= D for pr in progs),
            tuple(pr.dist for pr in progs),
        )
        self.T = 2 * T
        return st

    def reference(self, T: int) -> list:
        """Global state at time 0 after ``T`` steps from the widest start."""
        csp = self.csp
        if self.rule.name == "sets":
            S = np.array([int(x) for x in csp.support_masks], dtype=np.int64)
            for t in range(-T, 0):
                S = bounded_step_contract(csp, S, draw_step_randomness(self.seed, self.p, t, csp))
            return [int(x) for x in S]
        top = tuple([csp.n_labels - 1] * csp.n)
        bot = tuple([0] * csp.n)
        for t in range(-T, 0):
            r = draw_step_randomness(self.seed, self.p, t, csp)
            top = apply_step(csp, self.g, top, r)
            bot = apply_step(csp, self.g, bot, r)
        return list(zip(top, bot))

    def _check(self, T: int, was_coalesced, snapshot) -> None:
        ref = self.reference(T)
        for v, pr in enumerate(self.programs):
            if not was_coalesced[v]:
                if snapshot[v] != ref[v]:
                    raise InvariantViolation(
                        f"vertex {v}: distributed state {snapshot[v]} differs from reference {ref[v]} at T={T}"
                    )
            elif not (self.rule.settled(ref[v]) and self.rule.value(ref[v]) == pr.output):
                raise InvariantViolation(f"vertex {v}: coalesced output {pr.output} not reproduced at T={T}")

    def run(self, max_stages: int = report.DEFAULT_MAX_STAGES) -> SampleReport:
        if max_stages < 1:
            raise ValueError("max_stages must be at least 1")
        while self.stages < max_stages:
            self.run_stage()
            if all(pr.coalesced for pr in self.programs):
                break
        cert = self.net.certify()
        done = all(pr.coalesced for pr in self.programs)
        labeling = tuple(self.csp.labels[pr.output] for pr in self.programs) if done else None
        return SampleReport(
            labeling,
            self.stages,
            self.T // 2,
            cert["total_rounds"],
            cert["peak_bits"],
            cert["violations"],
            EXACT if done else ABORTED,
            self.seed,
        )
