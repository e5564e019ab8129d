"""Exact sampling of weighted local CSPs with a simulated distributed chain."""

from ._accel import backend_name
from .cftp import (
    SampleReport,
    cftp_sample,
    cftp_sample_batch,
    monotone_batch,
    monotone_cftp_ising,
    sequential_batch,
    sequential_cftp_hardcore,
)
from .csp import CspInstance, enumerate_distribution, labeling_weight, make_csp
from .graph import Graph, build_graph, generate
from .models import make_hardcore, make_ising, make_wds
from .simnet import NetworkMode

__all__ = [
    "CspInstance",
    "Graph",
    "NetworkMode",
    "SampleReport",
    "backend_name",
    "build_graph",
    "cftp_sample",
    "cftp_sample_batch",
    "enumerate_distribution",
    "generate",
    "labeling_weight",
    "make_csp",
    "make_hardcore",
    "make_ising",
    "make_wds",
    "monotone_batch",
    "monotone_cftp_ising",
    "sequential_batch",
    "sequential_cftp_hardcore",
]

__version__ = "0.1.0"
