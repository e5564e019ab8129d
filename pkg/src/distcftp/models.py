"""Built-in weighted local CSPs and their specialized bounding rules.

Label index conventions: hardcore and weighted dominating set use labels
``(0, 1)``; Ising uses ``(-1, +1)`` so index 0 is -1 and index 1 is +1.
"""

from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from typing import Mapping

import numpy as np

from . import kernels
from .chain import StepRandomness
from .csp import CspError, CspInstance, as_fraction, make_csp
from .graph import Graph, _parse_value, delta_k

MODELS = ("hardcore", "wds", "ising")

DEFAULT_P = {"hardcore": 0.1, "wds": 0.05, "ising": 0.5}


class ModelError(ValueError):
    pass


def _positive(name: str, x) -> Fraction:
    try:
        v = as_fraction(x)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ModelError(f"{name} must be a positive number, got {x!r}") from exc
    if v <= 0:
        raise ModelError(f"{name} must be positive, got {x!r}")
    return v


def make_hardcore(g: Graph, lam) -> CspInstance:
    lam_f = _positive("lambda", lam)
    table = (1, 1, 1, 0)
    cons = [((u, v), table, max(u, v)) for u, v in g.edges]
    return make_csp((0, 1), [(1, lam_f)] * g.n, cons, g, k=1, model="hardcore", params={"lambda": lam_f})


def _wds_table(size: int) -> tuple[int, ...]:
    # entry index 0 is the all-zero restricted labeling
    return (0,) + (1,) * (2**size - 1)


def wds_radius(g: Graph) -> int:
    """1 when every inclusive neighborhood is a clique, else 2."""
    for v in range(g.n):
        nb = g.adjacency[v]
        for i, a in enumerate(nb):
            na = set(g.adjacency[a])
            if any(b not in na for b in nb[i + 1:]):
                return 2
    return 1


def make_wds(g: Graph, lam) -> CspInstance:
    """Weighted dominating sets: every inclusive neighborhood holds a 1.

    An isolated vertex would carry a singleton constraint; it is folded into
    that vertex's unary weights instead (label 0 gets weight 0).
    """
    lam_f = _positive("lambda", lam)
    unary = []
    cons = []
    for v in range(g.n):
        if g.degree(v) == 0:
            unary.append((0, lam_f))
            continue
        unary.append((1, lam_f))
        members = tuple(sorted((v,) + g.adjacency[v]))
        cons.append((members, _wds_table(len(members)), v))
    return make_csp((0, 1), unary, cons, g, k=wds_radius(g), model="wds", params={"lambda": lam_f})


def make_ising(g: Graph, beta) -> CspInstance:
    beta_f = _positive("beta", beta)
    table = (beta_f, 1, 1, beta_f)
    cons = [((u, v), table, max(u, v)) for u, v in g.edges]
    return make_csp((-1, 1), [(1, 1)] * g.n, cons, g, k=1, model="ising", params={"beta": beta_f})


def build_model(name: str, g: Graph, params: Mapping) -> CspInstance:
    if name == "hardcore":
        return make_hardcore(g, params.get("lambda", 1))
    if name == "wds":
        return make_wds(g, params.get("lambda", 1))
    if name == "ising":
        return make_ising(g, params.get("beta", 2))
    raise ModelError(f"unknown model {name!r}; choose from {', '.join(MODELS)}")


def parse_model_spec(spec: str) -> tuple[str, dict]:
    """``"hardcore:lambda=0.3"`` -> ``("hardcore", {"lambda": 0.3})``."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in MODELS:
        raise ModelError(f"unknown model {name!r}; choose from {', '.join(MODELS)}")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ModelError(f"bad model parameter {item!r}, expected key=value")
        params[key.strip()] = _parse_value(val.strip())
    allowed = {"hardcore": {"lambda"}, "wds": {"lambda"}, "ising": {"beta"}}[name]
    extra = set(params) - allowed
    if extra:
        raise ModelError(f"model {name} does not take {', '.join(sorted(extra))}")
    return name, params


def default_p(model: str | None) -> float:
    return DEFAULT_P.get(model or "", 0.1)


# -- specialized tri-state rules (scalar forms) --------------------------------


def hardcore_edge_tristate(sv: int, Sv: int, su: int, Su: int) -> int:
    """Tri-state of edge {v, u}. ``sv``/``su`` are proposals, -1 when unmarked.

    Sets are bitmasks over {0, 1}. Both directions of the conflict are
    considered: the edge fails when some potential labeling is certainly (1, 1).
    """
    return int(kernels.hardcore_edge_nb(sv, Sv, su, Su))


def wds_constraint_tristate(members, S, props) -> int:
    """Tri-state of the constraint on one inclusive neighborhood."""
    zero = [props[w] == 0 for w in members]
    if not any(zero):
        return kernels.PASS
    if all(S[w] == 1 or z for w, z in zip(members, zero)):
        return kernels.FAIL
    if any(S[w] == 2 and not z for w, z in zip(members, zero)):
        return kernels.PASS
    return kernels.UNCERTAIN


class _ModelArrays:
    """Index arrays the kernels need, derived once per instance."""

    def __init__(self, csp: CspInstance):
        self.csp = csp

    @cached_property
    def adjacency_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Neighbors through constraints, as CSR."""
        n = self.csp.n
        nbrs = [set() for _ in range(n)]
        for c in self.csp.constraints:
            for a in c.members:
                nbrs[a].update(c.members)
        for v in range(n):
            nbrs[v].discard(v)
        return _csr([sorted(x) for x in nbrs])

    @cached_property
    def inclusive_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Members of the neighborhood constraint centred at each vertex."""
        rows = [[v] for v in range(self.csp.n)]
        for c in self.csp.constraints:
            rows[c.aggregator] = list(c.members)
        return _csr(rows)

    @cached_property
    def edge_arrays(self):
        cons = self.csp.constraints
        ea = np.array([c.members[0] for c in cons], dtype=np.int64)
        eb = np.array([c.members[1] for c in cons], dtype=np.int64)
        vptr, vedges = _csr([list(x) for x in self.csp.constraints_of])
        return ea, eb, vptr, vedges

    @cached_property
    def ising_ratio(self) -> np.ndarray:
        if not self.csp.constraints:
            return np.ones((2, 2))
        return np.array(self.csp.constraints[0].ratio, dtype=np.float64).reshape(2, 2)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(x) for x in self.csp.constraints_of], dtype=np.int64)


def _csr(rows) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    flat = [x for r in rows for x in r]
    return indptr, np.array(flat, dtype=np.int64)


_ARRAYS: dict[int, _ModelArrays] = {}


def arrays_for(csp: CspInstance) -> _ModelArrays:
    key = id(csp)
    arr = _ARRAYS.get(key)
    if arr is None or arr.csp is not csp:
        if len(_ARRAYS) > 64:
            _ARRAYS.clear()
        arr = _ARRAYS[key] = _ModelArrays(csp)
    return arr


def _combined(r: StepRandomness) -> np.ndarray:
    return np.where(r.marks, r.proposals, -1).astype(np.int8)


def hardcore_bounded_step(csp: CspInstance, S: np.ndarray, r: StepRandomness, use_numba=None) -> np.ndarray:
    """Bounding-chain step of the hardcore model, edge rules plus update contract."""
    if csp.model != "hardcore":
        raise ModelError("hardcore_bounded_step needs a hardcore instance")
    ptr, idx = arrays_for(csp).adjacency_csr
    return kernels.hardcore_step(ptr, idx, np.asarray(S, dtype=np.uint8), _combined(r), use_numba)


def wds_bounded_step(csp: CspInstance, S: np.ndarray, r: StepRandomness, use_numba=None) -> np.ndarray:
    if csp.model != "wds":
        raise ModelError("wds_bounded_step needs a weighted dominating set instance")
    ptr, idx = arrays_for(csp).inclusive_csr
    return kernels.wds_step(ptr, idx, np.asarray(S, dtype=np.uint8), _combined(r), use_numba)


# -- rate condition ------------------------------------------------------------


def rate_parameters(model: str, g: Graph, params: Mapping) -> dict:
    """Coalescence-rate constants: ``gamma``, ``beta_rate``, ``delta_k``, ``rate``.

    ``rate = p * (gamma - delta_k * beta_rate)`` and may be nonpositive.
    """
    p = float(params.get("p", default_p(model)))
    lam = float(_positive("lambda", params.get("lambda", 1)))
    if model == "hardcore":
        dk = delta_k(g, 1)
        gamma = (1 / (1 + lam)) * (1 - g.max_degree * p * lam / (1 + lam))
        beta_rate = lam / (1 + lam)
    elif model == "wds":
        dk = delta_k(g, 2)
        gamma = (lam / (1 + lam)) * (1 - dk * p / (1 + lam))
        beta_rate = 1 / (1 + lam)
    else:
        raise ModelError(f"no rate constants for model {model!r}")
    return {
        "gamma": gamma,
        "beta_rate": beta_rate,
        "delta_k": dk,
        "rate": p * (gamma - dk * beta_rate),
    }


def condition_check(model: str, g: Graph, params: Mapping) -> dict:
    rp = rate_parameters(model, g, params)
    margin = rp["gamma"] - rp["delta_k"] * rp["beta_rate"]
    return {"holds": margin > 0, "margin": margin}


def check_model_params(csp: CspInstance) -> None:
    if csp.model == "ising" and not csp.params["beta"] > 1:
        raise CspError("monotone sampling needs beta > 1")
