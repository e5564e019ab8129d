"""Sample reports and the round/bit accounting of the staged protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass

EXACT = "Exact"
ABORTED = "Aborted"

DEFAULT_MAX_STAGES = 40


@dataclass(frozen=True)
class SampleReport:
    """Outcome of one sampler run.

    ``labeling`` is None for an aborted run: a run stopped before coalescence
    is biased and must not be used as a sample.
    """

    labeling: tuple | None
    stages_used: int
    T_star: int
    total_rounds: int
    peak_message_bits: int
    budget_violations: int
    status: str
    seed: int

    @property
    def exact(self) -> bool:
        return self.status == EXACT

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "status": self.status,
            "labeling": None if self.labeling is None else list(self.labeling),
            "stages_used": self.stages_used,
            "T_star": self.T_star,
            "total_rounds": self.total_rounds,
            "peak_message_bits": self.peak_message_bits,
            "budget_violations": self.budget_violations,
        }


def label_index_bits(n_labels: int) -> int:
    return max(0, math.ceil(math.log2(n_labels))) if n_labels > 1 else 0


def triple_bits(n_labels: int) -> int:
    """Mark bit, proposal index, label-set bitmask."""
    return 1 + label_index_bits(n_labels) + n_labels


def monotone_triple_bits(n_labels: int) -> int:
    """Mark bit, proposal index, top label, bottom label."""
    return 1 + 3 * label_index_bits(n_labels)


VERDICT_BITS = 2
ACK_BITS = 1


def activation_bits(k: int, T: int) -> int:
    return max(1, (k * T).bit_length())


def stage_rounds(k: int, h: int, T: int) -> int:
    """Flood plus echo of the activation, then ``h`` collect and ``h`` echo rounds per step."""
    return 2 * k * T + 2 * h * T


def total_rounds(k: int, h: int, stages: int) -> int:
    return sum(stage_rounds(k, h, 1 << s) for s in range(stages))


def peak_bits(k: int, t_conn: int, payload_bits: int) -> int:
    """Widest message of a run whose last stage with a connected uncoalesced vertex had length ``t_conn``."""
    if t_conn == 0:
        return 0
    return max(activation_bits(k, t_conn), payload_bits, VERDICT_BITS, ACK_BITS)
