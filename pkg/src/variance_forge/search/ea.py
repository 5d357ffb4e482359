"""Differential-evolution style engine over the real embedding of strategies.

Mutation is plain DE/rand/1: mutant = r1 + epsilon*(r2 - r3) on the encoded
vectors, clamped and rounded back to a valid strategy. Crossover keeps the
PARENT gene when the uniform draw falls below the replacement rate (note
this is inverted from textbook DE, where the drawn gene comes from the
mutant; a rate of 0.9 here means mostly-parent children). Selection keeps
whichever of parent/child scores strictly higher, so the population never
regresses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..metrics import EvaluationRecord, StrategyEvaluator
from ..perturb import PerturbationPool
from ..rng import SplitMix64, derive_seed
from .common import SearchTrace, better, decode_real, encode_real


@dataclass(frozen=True)
class EaConfig:
    # defaults calibrated on the bundled blobs pool; raising epsilon and
    # lowering the replacement rate both add exploration, which small
    # discrete pools reward
    population_size: int = 12
    generations: int = 15
    epsilon: float = 1.0
    replacement_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ConfigError("population_size must be >= 4 (three distinct partners)")
        if self.generations < 1:
            raise ConfigError("generations must be >= 1")
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in (0, 1]")
        if not 0.0 <= self.replacement_rate <= 1.0:
            raise ConfigError("replacement_rate must lie in [0, 1]")


def _three_partners(gen: SplitMix64, pop_size: int, i: int) -> tuple[int, int, int]:
    # draw from the population minus individual i, then shift past the gap
    picks = gen.sample_distinct(pop_size - 1, 3)
    return tuple(j + 1 if j >= i else j for j in picks)


def mutant_vector(
    pool: PerturbationPool, r1, r2, r3, epsilon: float
) -> np.ndarray:
    v1 = encode_real(r1, pool)
    v2 = encode_real(r2, pool)
    v3 = encode_real(r3, pool)
    return v1 + epsilon * (v2 - v3)


def search_ea(
    pool: PerturbationPool, evaluator: StrategyEvaluator, config: EaConfig
) -> tuple[EvaluationRecord | None, SearchTrace]:
    if config.population_size > pool.size:
        raise ConfigError(
            f"population_size {config.population_size} exceeds pool size {pool.size}"
        )
    gen = SplitMix64(derive_seed(config.seed, "ea"))
    start = evaluator.consumed
    trace = SearchTrace(engine="ea")
    best: EvaluationRecord | None = None

    flat = gen.sample_distinct(pool.size, config.population_size)
    population = [pool.strategy_at(f) for f in flat]
    pop_records = evaluator.evaluate_many(population)
    for rec in pop_records:
        trace.add(rec.strategy, rec.pv)
        if better(rec, best):
            best = rec
    if len(pop_records) < len(population):
        trace.evaluations_consumed = evaluator.consumed - start
        return best, trace

    n = config.population_size
    for _ in range(config.generations):
        children = []
        for i in range(n):
            r1, r2, r3 = _three_partners(gen, n, i)
            mutant = mutant_vector(
                pool, population[r1], population[r2], population[r3], config.epsilon
            )
            parent_vec = encode_real(population[i], pool)
            child_vec = np.array(
                [
                    parent_vec[j]
                    if gen.uniform() < config.replacement_rate
                    else mutant[j]
                    for j in range(pool.n_factors)
                ]
            )
            children.append(decode_real(child_vec, pool))
        child_records = evaluator.evaluate_many(children)
        for rec in child_records:
            trace.add(rec.strategy, rec.pv)
            if better(rec, best):
                best = rec
        for i, rec in enumerate(child_records):
            if rec.pv > pop_records[i].pv:
                population[i] = children[i]
                pop_records[i] = rec
        if len(child_records) < len(children):
            break

    trace.evaluations_consumed = evaluator.consumed - start
    return best, trace
