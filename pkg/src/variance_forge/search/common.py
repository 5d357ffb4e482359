"""Shared search plumbing: budgets, traces, and the real-valued embedding
that lets vector-arithmetic engines act on discrete strategies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..metrics import EvaluationRecord
from ..perturb import PerturbationPool, PerturbationStrategy


@dataclass(frozen=True)
class SearchBudget:
    """Evaluation and iteration caps; engines stop at whichever hits first.

    Cache hits never consume evaluation budget — only actual trainings do.
    """

    max_evaluations: int
    max_generations_or_iterations: int = 1_000_000

    def __post_init__(self):
        if self.max_evaluations < 1:
            raise ConfigError("budget.max_evaluations must be >= 1")
        if self.max_generations_or_iterations < 1:
            raise ConfigError("budget.max_generations_or_iterations must be >= 1")


@dataclass(frozen=True)
class TraceEntry:
    step: int
    strategy: PerturbationStrategy
    pv: float
    incumbent_pv: float


@dataclass
class SearchTrace:
    """Evaluation trajectory of one engine run.

    incumbent_pv is non-decreasing; the final incumbent equals the max pv
    over all entries. Cache hits appear as entries too (they are part of
    the trajectory) but only `evaluations_consumed` trainings were paid for.
    """

    engine: str
    entries: list[TraceEntry] = field(default_factory=list)
    evaluations_consumed: int = 0

    def add(self, strategy: PerturbationStrategy, pv: float) -> None:
        incumbent = self.entries[-1].incumbent_pv if self.entries else -math.inf
        self.entries.append(
            TraceEntry(len(self.entries), strategy, pv, max(incumbent, pv))
        )

    @property
    def incumbent_pv(self) -> float:
        return self.entries[-1].incumbent_pv if self.entries else -math.inf

    @property
    def strategies_requested(self) -> int:
        return len({e.strategy.encoding for e in self.entries})


def encode_real(ps: PerturbationStrategy, pool: PerturbationPool) -> np.ndarray:
    """Map level indices to [0,1]: index k of an L-level factor -> k/(L-1)."""
    out = np.empty(pool.n_factors)
    for j, (count, idx) in enumerate(zip(pool.level_counts, ps.level_indices)):
        out[j] = 0.0 if count == 1 else idx / (count - 1)
    return out


def decode_real(vector, pool: PerturbationPool) -> PerturbationStrategy:
    """Clamp to [0,1] and round to the nearest level index, halves up."""
    indices = []
    for j, count in enumerate(pool.level_counts):
        v = min(1.0, max(0.0, float(vector[j])))
        indices.append(0 if count == 1 else int(math.floor(v * (count - 1) + 0.5)))
    return pool.strategy_from_indices(indices)


def better(candidate: EvaluationRecord, incumbent: EvaluationRecord | None) -> bool:
    """Strictly-higher pv wins; the first record to reach a pv keeps it."""
    return incumbent is None or candidate.pv > incumbent.pv
