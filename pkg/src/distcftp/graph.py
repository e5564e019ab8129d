"""Undirected simple graphs, neighborhood queries and seeded generators."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "build_graph",
    "k_hop_ball",
    "delta_k",
    "generate",
    "parse_graph_spec",
    "read_graph_file",
    "write_graph_file",
    "FAMILIES",
]

FAMILIES = ("path", "cycle", "grid", "random_regular", "erdos_renyi")


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Graph on vertices ``0..n-1`` stored as sorted adjacency tuples."""

    n: int
    adjacency: tuple[tuple[int, ...], ...]

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @cached_property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((u, v) for u in range(self.n) for v in self.adjacency[u] if u < v)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` int64 arrays of the adjacency."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in self.adjacency])
        indices = np.fromiter(
            (u for a in self.adjacency for u in a), dtype=np.int64, count=int(indptr[-1])
        )
        return indptr, indices

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def build_graph(n: int, edges: Iterable[tuple[int, int]]) -> Graph:
    if n < 1:
        raise GraphError(f"vertex count must be positive, got {n}")
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) has an endpoint outside 0..{n - 1}")
        if u == v:
            raise GraphError(f"self-loop at vertex {u}")
        nbrs[u].add(v)
        nbrs[v].add(u)
    return Graph(n, tuple(tuple(sorted(s)) for s in nbrs))


def _bfs(g: Graph, source: int, radius: float = math.inf) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        x = queue.popleft()
        d = dist[x]
        if d >= radius:
            continue
        for y in g.adjacency[x]:
            if y not in dist:
                dist[y] = d + 1
                queue.append(y)
    return dist


def distances_from(g: Graph, source: int) -> dict[int, int]:
    """Hop distances from ``source`` to every reachable vertex."""
    return _bfs(g, source)


def k_hop_ball(g: Graph, v: int, k: int) -> frozenset[int]:
    """Vertices within graph distance ``k`` of ``v``, ``v`` included."""
    if not 0 <= v < g.n:
        raise GraphError(f"vertex {v} out of range")
    return frozenset(_bfs(g, v, k))


def delta_k(g: Graph, k: int) -> int:
    """Size of the largest exclusive ``k``-hop neighborhood."""
    if k < 1:
        raise GraphError("k must be at least 1")
    return max(len(_bfs(g, v, k)) - 1 for v in range(g.n))


# -- generators ---------------------------------------------------------------


def _int_param(params: Mapping, key: str) -> int:
    if key not in params:
        raise GraphError(f"missing graph parameter {key!r}")
    value = params[key]
    if isinstance(value, float) and not value.is_integer():
        raise GraphError(f"graph parameter {key!r} must be an integer")
    return int(value)


def _random_regular(n: int, d: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    # configuration model, full restart on any loop or multi-edge
    if d < 0 or d >= n:
        raise GraphError(f"random_regular needs 0 <= d < n, got d={d}, n={n}")
    if (n * d) % 2:
        raise GraphError("random_regular needs n*d even")
    if d == 0:
        return []
    stubs = np.repeat(np.arange(n), d)
    for _ in range(100_000):
        rng.shuffle(stubs)
        a, b = stubs[0::2], stubs[1::2]
        if np.any(a == b):
            continue
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = lo * n + hi
        if np.unique(keys).size != keys.size:
            continue
        return sorted(zip(lo.tolist(), hi.tolist()))
    raise GraphError("random_regular: configuration model kept failing")


def generate(family: str, params: Mapping, seed: int = 0) -> Graph:
    """Build a graph from a named family; random families are pure in ``seed``."""
    if family == "path":
        n = _int_param(params, "n")
        return build_graph(n, [(i, i + 1) for i in range(n - 1)])
    if family == "cycle":
        n = _int_param(params, "n")
        if n < 3:
            raise GraphError("cycle needs n >= 3")
        return build_graph(n, [(i, (i + 1) % n) for i in range(n)])
    if family == "grid":
        rows = _int_param(params, "rows")
        cols = _int_param(params, "cols") if "cols" in params else rows
        if rows < 1 or cols < 1:
            raise GraphError("grid needs positive rows and cols")
        edges = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    edges.append((v, v + 1))
                if r + 1 < rows:
                    edges.append((v, v + cols))
        return build_graph(rows * cols, edges)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1)))
    if family == "random_regular":
        n, d = _int_param(params, "n"), _int_param(params, "d")
        return build_graph(n, _random_regular(n, d, rng))
    if family == "erdos_renyi":
        n = _int_param(params, "n")
        prob = float(params.get("p", 0.5))
        if not 0.0 <= prob <= 1.0:
            raise GraphError("erdos_renyi edge probability must lie in [0, 1]")
        iu, ju = np.triu_indices(n, k=1)
        keep = rng.random(iu.size) < prob
        return build_graph(n, zip(iu[keep].tolist(), ju[keep].tolist()))
    raise GraphError(f"unknown graph family {family!r}; expected one of {FAMILIES}")


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_graph_spec(spec: str) -> tuple[str, dict]:
    """Split ``"family:key=val,..."`` into the family name and a parameter dict."""
    family, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise GraphError(f"malformed graph parameter {item!r}")
        params[key.strip()] = _parse_value(val.strip())
    return family.strip(), params


def read_graph_file(path) -> Graph:
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise GraphError("graph file must start with 'n m'")
    n, m = int(tokens[0]), int(tokens[1])
    body = tokens[2:]
    if len(body) != 2 * m:
        raise GraphError(f"graph file declares {m} edges but holds {len(body) // 2}")
    return build_graph(n, zip(map(int, body[0::2]), map(int, body[1::2])))


def write_graph_file(g: Graph, fh) -> None:
    fh.write(f"{g.n} {g.m}\n")
    for u, v in g.edges:
        fh.write(f"{u} {v}\n")
