"""Exact sampling by coupling from the past.

``backend="simnet"`` runs the full message-passing protocol; ``"fast"`` runs
the equivalent global computation for the built-in models; ``"auto"`` picks
``fast`` when available.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from ..csp import CspInstance
from ..graph import Graph
from ..models import default_p, make_hardcore, make_ising
from ..simnet import NetworkMode
from . import fast, report
from .bounds import TriState, bounded_step_contract, bounded_step_general, contract_update, tristate_filter
from .engine import InvariantViolation, ProtocolError, StagedSampler, StageState
from .report import ABORTED, DEFAULT_MAX_STAGES, EXACT, SampleReport

BACKENDS = ("auto", "fast", "simnet")

__all__ = [
    "ABORTED",
    "EXACT",
    "InvariantViolation",
    "ProtocolError",
    "SampleReport",
    "StageState",
    "StagedSampler",
    "TriState",
    "bounded_step_contract",
    "bounded_step_general",
    "cftp_sample",
    "cftp_sample_batch",
    "contract_update",
    "monotone_cftp_ising",
    "monotone_batch",
    "sequential_cftp_hardcore",
    "sequential_batch",
    "tristate_filter",
]


def _check_args(p, max_stages, backend):
    if not 0.0 < p <= 1.0:
        raise ValueError(f"marking probability must lie in (0, 1], got {p}")
    if max_stages < 1:
        raise ValueError("max_stages must be at least 1")
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")


def _certified(reports: list[SampleReport], csp, g, net, p, max_stages, rule, audit) -> list[SampleReport]:
    # a run whose widest message exceeds the budget is replayed message by message for the exact count
    budget = (net or NetworkMode()).budget(csp.n)
    if budget is None:
        return reports
    out = []
    for r in reports:
        if r.peak_message_bits > budget:
            r = StagedSampler(csp, g, r.seed, p, rule, net, audit).run(max_stages)
        out.append(r)
    return out


def cftp_sample_batch(
    csp: CspInstance,
    g: Graph,
    seeds: Iterable[int],
    p: float | None = None,
    max_stages: int = DEFAULT_MAX_STAGES,
    net: NetworkMode | None = None,
    backend: str = "auto",
    audit: bool = True,
) -> list[SampleReport]:
    """Bounding-chain samples, one per seed."""
    seeds = [int(s) for s in seeds]
    p = default_p(csp.model) if p is None else p
    _check_args(p, max_stages, backend)
    use_fast = csp.model in fast.FAST_SETS_MODELS and backend != "simnet"
    if backend == "fast" and not use_fast:
        raise ValueError(f"no fast backend for model {csp.model!r}")
    if not use_fast:
        return [StagedSampler(csp, g, s, p, "sets", net, audit).run(max_stages) for s in seeds]
    if not seeds:
        return []
    labels, info = fast.sets_batch(csp, seeds, p, max_stages, audit)
    reps = fast.to_reports(csp, labels, info, seeds, report.triple_bits(csp.n_labels))
    return _certified(reps, csp, g, net, p, max_stages, "sets", audit)


def cftp_sample(
    csp: CspInstance,
    g: Graph,
    seed: int,
    p: float | None = None,
    max_stages: int = DEFAULT_MAX_STAGES,
    net: NetworkMode | None = None,
    backend: str = "auto",
    audit: bool = True,
) -> SampleReport:
    return cftp_sample_batch(csp, g, [seed], p, max_stages, net, backend, audit)[0]


def monotone_batch(
    g: Graph,
    beta,
    seeds: Iterable[int],
    p: float | None = None,
    max_stages: int = DEFAULT_MAX_STAGES,
    net: NetworkMode | None = None,
    backend: str = "auto",
    audit: bool = True,
) -> list[SampleReport]:
    """Top/bottom CFTP for the ferromagnetic Ising model (``beta > 1``)."""
    csp = make_ising(g, beta)
    if not csp.params["beta"] > 1:
        raise ValueError(f"monotone sampling needs beta > 1, got {beta}")
    seeds = [int(s) for s in seeds]
    p = default_p("ising") if p is None else p
    _check_args(p, max_stages, backend)
    if backend == "simnet":
        return [StagedSampler(csp, g, s, p, "monotone", net, audit).run(max_stages) for s in seeds]
    if not seeds:
        return []
    labels, info = fast.monotone_batch(csp, seeds, p, max_stages, audit)
    reps = fast.to_reports(csp, labels, info, seeds, report.monotone_triple_bits(csp.n_labels))
    return _certified(reps, csp, g, net, p, max_stages, "monotone", audit)


def monotone_cftp_ising(
    g: Graph,
    beta,
    seed: int,
    p: float | None = None,
    max_stages: int = DEFAULT_MAX_STAGES,
    net: NetworkMode | None = None,
    backend: str = "auto",
    audit: bool = True,
) -> SampleReport:
    return monotone_batch(g, beta, [seed], p, max_stages, net, backend, audit)[0]


def sequential_batch(g: Graph, lam, seeds: Sequence[int], max_doublings: int = DEFAULT_MAX_STAGES, use_numba=None):
    """Single-site hardcore CFTP. ``total_rounds`` counts single-site steps."""
    csp = make_hardcore(g, lam)
    if max_doublings < 1:
        raise ValueError("max_doublings must be at least 1")
    lam_f = float(csp.params["lambda"])
    seeds = [int(s) for s in seeds]
    if not seeds:
        return []
    labels, info = fast.sequential_batch(g, lam_f / (1 + lam_f), seeds, max_doublings, use_numba)
    out = []
    for s, seed in enumerate(seeds):
        ok = bool(info[s, 0])
        out.append(
            SampleReport(
                tuple(labels[s].tolist()) if ok else None,
                int(info[s, 1]),
                int(info[s, 2]),
                int(info[s, 3]),
                0,
                0,
                EXACT if ok else ABORTED,
                seed,
            )
        )
    return out


def sequential_cftp_hardcore(g: Graph, lam, seed: int, max_doublings: int = DEFAULT_MAX_STAGES) -> SampleReport:
    return sequential_batch(g, lam, [seed], max_doublings)[0]
