"""Exhaustive pool evaluation; the ground truth the other engines are judged
against on pools small enough to enumerate."""

from __future__ import annotations

from ..errors import ConfigError
from ..metrics import EvaluationRecord, StrategyEvaluator
from ..perturb import PerturbationPool
from .common import SearchBudget, SearchTrace


def brute_force(
    pool: PerturbationPool, evaluator: StrategyEvaluator, budget: SearchBudget
) -> tuple[list[EvaluationRecord], SearchTrace]:
    """Evaluate every strategy; rank by pv descending, ties by encoding.

    The trace lists strategies in pool enumeration order regardless of how
    the evaluator schedules the actual trainings, so trace files compare
    byte-identical across parallelism settings.
    """
    if pool.size > budget.max_evaluations:
        raise ConfigError(
            f"pool has {pool.size} strategies but the budget allows only "
            f"{budget.max_evaluations} evaluations"
        )
    start = evaluator.consumed
    trace = SearchTrace(engine="brute")
    records = evaluator.evaluate_many(list(pool.iter_strategies()))
    for rec in records:
        trace.add(rec.strategy, rec.pv)
    trace.evaluations_consumed = evaluator.consumed - start
    ranked = sorted(records, key=lambda r: (-r.pv, r.strategy.encoding))
    return ranked, trace
