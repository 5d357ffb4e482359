"""Tabular Q-learning over strategy space.

State is the current level-index vector plus the perturbed confidence gap
discretized into equal-width bins over [-1, 0] (the trained model itself is
not tabulable, the binned score is its observable summary). Each action
sets one factor to one level, so the action count is the sum of level-set
sizes; re-selecting the current level is a legal no-op move. Rewards are
the change in pv across the transition, so an episode's return telescopes
to the final pv minus the starting pv. Episodes restart from the all-off
strategy. The returned best is the highest-pv strategy ever evaluated,
independent of what the greedy policy converged to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BudgetExhausted, ConfigError
from ..metrics import EvaluationRecord, StrategyEvaluator
from ..perturb import PerturbationPool
from ..rng import SplitMix64, derive_seed
from .common import SearchTrace, better


@dataclass(frozen=True)
class RlConfig:
    episodes: int = 50
    steps_per_episode: int = 6
    learning_rate: float = 0.5
    discount: float = 0.9
    exploration: float = 0.2
    ccdd_bins: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 1 or self.steps_per_episode < 1:
            raise ConfigError("episodes and steps_per_episode must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must lie in (0, 1]")
        if not 0.0 <= self.discount <= 1.0:
            raise ConfigError("discount must lie in [0, 1]")
        if not 0.0 <= self.exploration <= 1.0:
            raise ConfigError("exploration must lie in [0, 1]")
        if self.ccdd_bins < 2:
            raise ConfigError("ccdd_bins must be >= 2")


def ccdd_bin(record: EvaluationRecord, bins: int) -> int:
    """Equal-width bin over [-1, 0]; failed evaluations get a sentinel bin."""
    if record.failed:
        return bins
    v = record.perturbed_ccdd.value
    return min(bins - 1, max(0, int((v + 1.0) * bins)))


def q_update(q_sa: float, reward: float, q_next_max: float, alpha: float, gamma: float) -> float:
    return q_sa + alpha * (reward + gamma * q_next_max - q_sa)


def search_rl(
    pool: PerturbationPool, evaluator: StrategyEvaluator, config: RlConfig
) -> tuple[EvaluationRecord | None, SearchTrace]:
    gen = SplitMix64(derive_seed(config.seed, "rl"))
    start = evaluator.consumed
    trace = SearchTrace(engine="rl")
    best: EvaluationRecord | None = None

    actions = [
        (f, lvl)
        for f in range(pool.n_factors)
        for lvl in range(pool.level_counts[f])
    ]
    n_actions = len(actions)
    q_table: dict[tuple, np.ndarray] = {}

    def q_row(state) -> np.ndarray:
        row = q_table.get(state)
        if row is None:
            row = np.zeros(n_actions)
            q_table[state] = row
        return row

    def observe(ps):
        nonlocal best
        rec = evaluator.evaluate(ps)
        trace.add(rec.strategy, rec.pv)
        if better(rec, best):
            best = rec
        return rec

    try:
        for _ in range(config.episodes):
            indices = [0] * pool.n_factors
            ps = pool.strategy_from_indices(indices)
            rec = observe(ps)
            state = (tuple(indices), ccdd_bin(rec, config.ccdd_bins))
            for _ in range(config.steps_per_episode):
                row = q_row(state)
                if gen.uniform() < config.exploration:
                    action = gen.randint(n_actions)
                else:
                    action = int(np.argmax(row))  # first max on ties
                factor, level = actions[action]
                indices[factor] = level
                next_ps = pool.strategy_from_indices(indices)
                next_rec = observe(next_ps)
                reward = next_rec.pv - rec.pv
                next_state = (tuple(indices), ccdd_bin(next_rec, config.ccdd_bins))
                row[action] = q_update(
                    row[action],
                    reward,
                    float(np.max(q_row(next_state))),
                    config.learning_rate,
                    config.discount,
                )
                state, rec = next_state, next_rec
    except BudgetExhausted:
        pass

    trace.evaluations_consumed = evaluator.consumed - start
    return best, trace
