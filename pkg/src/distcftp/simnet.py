"""Synchronous message passing over a graph, with per-message bit accounting.

A round has two phases. First every vertex program's ``send`` returns its
outbox; only then are all outboxes delivered and every ``receive`` called. A
program therefore never observes a message sent in the same round before it
has produced its own outbox, and the visiting order cannot matter.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Any, Mapping, Protocol, Sequence

from .graph import Graph

LOCAL = "LOCAL"
CONGEST = "CONGEST"


class ContractBreach(RuntimeError):
    """A program tried to send to a vertex that is not its neighbor."""


def default_budget(n: int) -> int:
    return 64 + 2 * math.ceil(math.log2(max(n, 1)))


@dataclass(frozen=True)
class NetworkMode:
    kind: str = CONGEST
    bit_budget: int | None = None

    def __post_init__(self):
        if self.kind not in (LOCAL, CONGEST):
            raise ValueError(f"unknown network mode {self.kind!r}")
        if self.bit_budget is not None and self.bit_budget < 1:
            raise ValueError("bit budget must be positive")

    def budget(self, n: int) -> int | None:
        """Per-message limit in bits, or None when unlimited."""
        if self.kind == LOCAL:
            return None
        b = self.bit_budget if self.bit_budget is not None else default_budget(n)
        if b < math.ceil(math.log2(max(n, 2))):
            raise ValueError(f"bit budget {b} cannot carry a vertex id for n={n}")
        return b


@dataclass(frozen=True)
class Message:
    kind: str
    payload: Any
    bits: int


@dataclass(frozen=True)
class RoundStats:
    round_index: int
    messages_sent: int
    max_message_bits: int
    violations: int


class VertexProgram(Protocol):
    def send(self, ctx: Mapping) -> Mapping[int, Message]: ...

    def receive(self, inbox: Mapping[int, Message], ctx: Mapping) -> None: ...


class Network:
    def __init__(self, g: Graph, mode: NetworkMode | None = None, trace: bool = False):
        self.g = g
        self.mode = mode or NetworkMode()
        self.budget = self.mode.budget(g.n)
        self._nbrs = [frozenset(a) for a in g.adjacency]
        self.log: list[RoundStats] = []
        self.trace: list[tuple[int, int, int, int]] | None = [] if trace else None

    def run_round(self, programs: Sequence[VertexProgram], ctx: Mapping | None = None) -> RoundStats:
        if len(programs) != self.g.n:
            raise ValueError(f"{len(programs)} programs registered for {self.g.n} vertices")
        ctx = ctx or {}
        r = len(self.log)
        inboxes: list[dict[int, Message]] = [{} for _ in range(self.g.n)]
        sent = 0
        widest = 0
        violations = 0
        for v, prog in enumerate(programs):
            for w, msg in (prog.send(ctx) or {}).items():
                if w not in self._nbrs[v]:
                    raise ContractBreach(f"round {r}: vertex {v} addressed non-neighbor {w}")
                inboxes[w][v] = msg
                sent += 1
                widest = max(widest, msg.bits)
                if self.budget is not None and msg.bits > self.budget:
                    violations += 1
                if self.trace is not None:
                    self.trace.append((r, v, w, msg.bits))
        for v, prog in enumerate(programs):
            prog.receive(inboxes[v], ctx)
        stats = RoundStats(r, sent, widest, violations)
        self.log.append(stats)
        return stats

    def certify(self) -> dict:
        return certify(self.log)

    def write_trace(self, fh) -> None:
        if self.trace is None:
            raise ValueError("network was created without tracing")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "sender", "receiver", "bits"])
        w.writerows(self.trace)


def certify(log: Sequence[RoundStats]) -> dict:
    return {
        "congest_ok": all(s.violations == 0 for s in log),
        "total_rounds": len(log),
        "peak_bits": max((s.max_message_bits for s in log), default=0),
        "violations": sum(s.violations for s in log),
    }
