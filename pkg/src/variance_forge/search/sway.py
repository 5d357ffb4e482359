"""Geometric divide-and-conquer search.

Each recursion level picks two far-apart poles of the candidate set (a
random candidate's farthest neighbor, then that pole's farthest neighbor),
projects every candidate onto the pole axis with the cosine rule, splits
at the median projection, evaluates only the two poles, and recurses into
the half whose pole scored higher. Evaluation count is therefore
logarithmic in the candidate count plus the base-case sweep, which is the
whole point: it trades optimality for very few trainings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import BudgetExhausted, ConfigError
from ..metrics import EvaluationRecord, StrategyEvaluator
from ..perturb import PerturbationPool, PerturbationStrategy
from ..rng import SplitMix64, derive_seed
from .common import SearchTrace, better, encode_real


@dataclass(frozen=True)
class SwayConfig:
    candidate_sample_size: int | None = None  # None = the whole pool
    size_threshold: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.size_threshold < 2:
            raise ConfigError("size_threshold must be >= 2")
        if self.candidate_sample_size is not None and self.candidate_sample_size < self.size_threshold:
            raise ConfigError("candidate_sample_size must be >= size_threshold")


def _farthest(
    from_vec: np.ndarray,
    candidates: list[PerturbationStrategy],
    vectors: list[np.ndarray],
) -> int:
    best_i = 0
    best_key = (-math.inf, b"")
    for i, (c, v) in enumerate(zip(candidates, vectors)):
        d = float(np.sqrt(np.sum((v - from_vec) ** 2)))
        # farther wins; equal distances resolved by smaller encoding
        key = (d, c.encoding)
        if d > best_key[0] or (d == best_key[0] and c.encoding < best_key[1]):
            best_key = key
            best_i = i
    return best_i


def search_sway(
    pool: PerturbationPool, evaluator: StrategyEvaluator, config: SwayConfig
) -> tuple[EvaluationRecord | None, SearchTrace]:
    gen = SplitMix64(derive_seed(config.seed, "sway"))
    start = evaluator.consumed
    trace = SearchTrace(engine="sway")
    best: EvaluationRecord | None = None

    sample_size = config.candidate_sample_size
    if sample_size is None or sample_size >= pool.size:
        flat = list(range(pool.size))
    else:
        flat = sorted(gen.sample_distinct(pool.size, sample_size))
    candidates = [pool.strategy_at(i) for i in flat]

    def note(records):
        nonlocal best
        for rec in records:
            trace.add(rec.strategy, rec.pv)
            if better(rec, best):
                best = rec

    def recurse(cands: list[PerturbationStrategy]):
        if len(cands) <= config.size_threshold:
            note(evaluator.evaluate_many(cands))
            return
        vecs = [encode_real(c, pool) for c in cands]
        anchor = gen.randint(len(cands))
        east_i = _farthest(vecs[anchor], cands, vecs)
        west_i = _farthest(vecs[east_i], cands, vecs)
        east_v, west_v = vecs[east_i], vecs[west_i]
        d = float(np.sqrt(np.sum((west_v - east_v) ** 2)))

        def projection(v: np.ndarray) -> float:
            if d == 0.0:
                return 0.0
            a2 = float(np.sum((v - east_v) ** 2))
            b2 = float(np.sum((v - west_v) ** 2))
            return (a2 + d * d - b2) / (2.0 * d)

        order = sorted(
            range(len(cands)), key=lambda i: (projection(vecs[i]), cands[i].encoding)
        )
        half = math.ceil(len(cands) / 2)
        east_half = [cands[i] for i in order[:half]]
        west_half = [cands[i] for i in order[half:]]

        poles = evaluator.evaluate_many([cands[east_i], cands[west_i]])
        note(poles)
        if len(poles) < 2:
            return
        east_rec, west_rec = poles
        # equal pole scores keep the east half
        recurse(east_half if east_rec.pv >= west_rec.pv else west_half)

    try:
        recurse(candidates)
    except BudgetExhausted:
        pass

    trace.evaluations_consumed = evaluator.consumed - start
    return best, trace
