"""Scoring and the strategy-evaluation pipeline.

The headline metric is the confidence gap: mean over samples of
(probability of the desired class minus probability of the predicted
class). It is 0 exactly when every prediction is correct and negative
otherwise, bounded below by -1. A strategy's score is the absolute
change this metric suffers between the clean pipeline and the perturbed
one; searches maximize that change.

Training dominates the cost of every evaluation, so records are cached
in an append-only JSONL file keyed by strategy encoding and guarded by
a fingerprint of (data, configs, master seed). A cache hit returns the
stored record byte-for-byte and consumes no evaluation budget.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import net, perturb as perturb_mod
from .data import SplitDataset
from .errors import BudgetExhausted, DataError, DivergenceError, ShapeError
from .net import ModelConfig, Parameters, TrainConfig
from .perturb import PerturbationPool, PerturbationStrategy

BASELINE_KEY = "__baseline__"


@dataclass(frozen=True)
class CcddScore:
    value: float
    sample_count: int


def _predictions(model: Parameters, x: np.ndarray):
    probs = net.forward(model, x)
    # np.argmax takes the first maximum, which is the tie-break we want:
    # a tie that includes the desired class at the lowest index scores 0.
    return probs, np.argmax(probs, axis=1)


def _check_desired(desired: np.ndarray, n_rows: int, m: int) -> np.ndarray:
    desired = np.ascontiguousarray(desired, dtype=np.int64)
    if desired.ndim != 1 or len(desired) != n_rows:
        raise ShapeError("desired labels must be 1-D with one entry per row")
    if desired.size == 0:
        raise DataError("metric undefined on an empty batch")
    if desired.min() < 0 or desired.max() >= m:
        raise DataError("desired label outside the model's class range")
    return desired


def ccdd_from_probs(probs: np.ndarray, desired: np.ndarray) -> CcddScore:
    """Mean of prob[desired] - prob[argmax] over probability rows."""
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeError("probs must be a 2-D row-per-sample matrix")
    desired = _check_desired(desired, len(probs), probs.shape[1])
    rows = np.arange(len(probs))
    pred = np.argmax(probs, axis=1)
    value = float(np.mean(probs[rows, desired] - probs[rows, pred]))
    return CcddScore(value=value, sample_count=len(probs))


def c_cdd(model: Parameters, x: np.ndarray, desired: np.ndarray) -> CcddScore:
    """Mean of prob[desired] - prob[argmax]; 0 iff every sample is correct."""
    probs, _ = _predictions(model, x)
    return ccdd_from_probs(probs, desired)


def accuracy(model: Parameters, x: np.ndarray, desired: np.ndarray) -> float:
    probs, pred = _predictions(model, x)
    desired = _check_desired(desired, len(probs), probs.shape[1])
    return float(np.mean(pred == desired))


@dataclass
class EvaluationRecord:
    """Outcome of one strategy evaluation.

    pv = |perturbed - baseline| confidence gap. A training divergence is
    recorded as failed=True with pv = 0 and no perturbed metrics; searches
    must not be rewarded for driving training into NaN.
    """

    strategy: PerturbationStrategy
    baseline_ccdd: CcddScore
    perturbed_ccdd: CcddScore | None
    pv: float
    baseline_accuracy: float
    perturbed_accuracy: float | None
    master_seed: int
    wall_time: float
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "encoding": self.strategy.encoding_str,
            "baseline_ccdd": self.baseline_ccdd.value,
            "perturbed_ccdd": None if self.failed else self.perturbed_ccdd.value,
            "sample_count": self.baseline_ccdd.sample_count,
            "pv": self.pv,
            "baseline_accuracy": self.baseline_accuracy,
            "perturbed_accuracy": self.perturbed_accuracy,
            "master_seed": self.master_seed,
            "wall_time": self.wall_time,
            "failed": self.failed,
        }

    @classmethod
    def from_dict(cls, d: dict, strategy: PerturbationStrategy) -> "EvaluationRecord":
        n = d["sample_count"]
        failed = d["failed"]
        return cls(
            strategy=strategy,
            baseline_ccdd=CcddScore(d["baseline_ccdd"], n),
            perturbed_ccdd=None if failed else CcddScore(d["perturbed_ccdd"], n),
            pv=d["pv"],
            baseline_accuracy=d["baseline_accuracy"],
            perturbed_accuracy=d["perturbed_accuracy"],
            master_seed=d["master_seed"],
            wall_time=d["wall_time"],
            failed=failed,
        )


def run_fingerprint(
    split: SplitDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    pool: PerturbationPool | None,
    master_seed: int,
) -> str:
    """Hash of everything a record depends on; guards against cache pollution."""
    h = hashlib.sha256()
    for ds in (split.train, split.test):
        h.update(ds.features.tobytes())
        h.update(ds.labels.tobytes())
        h.update(ds.feature_ranges.tobytes())
    meta = {
        "model": model_config.to_dict(),
        "train": train_config.to_dict(),
        "pool": pool.to_dict() if pool is not None else None,
        "master_seed": master_seed,
    }
    h.update(json.dumps(meta, sort_keys=True).encode("utf-8"))
    return h.hexdigest()


class EvalCache:
    """Append-only JSONL record store, keyed by strategy encoding.

    Entries whose fingerprint differs from this run's are ignored on load,
    so a stale or foreign cache behaves exactly like an empty one. Writes
    for the same key are idempotent by determinism, so last-writer-wins
    races between threads are benign.
    """

    def __init__(self, fingerprint: str, path=None):
        self.fingerprint = fingerprint
        self.path = path
        self._table: dict[str, dict] = {}
        self._lock = threading.Lock()
        if path is not None:
            self._load(path)

    def _load(self, path):
        try:
            f = open(path, "r", encoding="utf-8")
        except FileNotFoundError:
            return
        with f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn tail from an interrupted run
                if entry.get("fingerprint") == self.fingerprint:
                    self._table[entry["key"]] = entry["record"]

    def get(self, key: str) -> dict | None:
        with self._lock:
            return self._table.get(key)

    def put(self, key: str, record: dict) -> None:
        line = json.dumps(
            {"key": key, "fingerprint": self.fingerprint, "record": record},
            sort_keys=True,
        )
        with self._lock:
            self._table[key] = record
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(line + "\n")

    def __len__(self):
        with self._lock:
            return len(self._table)


class StrategyEvaluator:
    """Shared evaluation context: data, configs, cache, budget accounting.

    `consumed` counts cache misses (actual trainings paid for in this run).
    `strategies_requested` is the run-local set of distinct strategies any
    engine asked about, hit or miss; it measures what a search would cost
    against a cold cache.
    """

    def __init__(
        self,
        split: SplitDataset,
        model_config: ModelConfig,
        train_config: TrainConfig,
        master_seed: int,
        cache: EvalCache | None = None,
        pool: PerturbationPool | None = None,
        max_evaluations: int | None = None,
        parallelism: int = 1,
    ):
        self.split = split
        self.model_config = model_config
        self.train_config = train_config
        self.master_seed = master_seed
        self.pool = pool
        if cache is None:
            fp = run_fingerprint(split, model_config, train_config, pool, master_seed)
            cache = EvalCache(fp)
        self.cache = cache
        self.max_evaluations = max_evaluations
        self.parallelism = max(1, int(parallelism))
        self.consumed = 0
        self.strategies_requested: set[str] = set()
        self._lock = threading.Lock()
        self._baseline: tuple[CcddScore, float] | None = None
        self._baseline_params: Parameters | None = None

    # -- baseline ---------------------------------------------------------

    def baseline(self) -> tuple[CcddScore, float]:
        """Clean-pipeline score and accuracy; trained at most once per run."""
        with self._lock:
            if self._baseline is not None:
                return self._baseline
            cached = self.cache.get(BASELINE_KEY)
            if cached is not None:
                self._baseline = (
                    CcddScore(cached["ccdd"], cached["sample_count"]),
                    cached["accuracy"],
                )
                return self._baseline
        params = self.baseline_params()
        score = c_cdd(params, self.split.test.features, self.split.test.labels)
        acc = accuracy(params, self.split.test.features, self.split.test.labels)
        with self._lock:
            self._baseline = (score, acc)
        self.cache.put(
            BASELINE_KEY,
            {"ccdd": score.value, "accuracy": acc, "sample_count": score.sample_count},
        )
        return self._baseline

    def baseline_params(self) -> Parameters:
        with self._lock:
            if self._baseline_params is not None:
                return self._baseline_params
        params = net.train(
            self.split.train.features,
            self.split.train.labels,
            self.model_config,
            self.train_config,
        )
        with self._lock:
            if self._baseline_params is None:
                self._baseline_params = params
            return self._baseline_params

    # -- evaluation -------------------------------------------------------

    def _run_pipeline(self, ps: PerturbationStrategy) -> EvaluationRecord:
        base_score, base_acc = self.baseline()
        t0 = time.perf_counter()
        bundle = perturb_mod.perturb(
            ps,
            self.split.train.features,
            self.split.train.labels,
            self.split.test.features,
            self.split.test.labels,
            self.model_config,
            self.train_config,
            self.master_seed,
        )
        try:
            theta = net.train(
                self.split.train.features,
                bundle.y_train,
                bundle.model_config,
                bundle.train_config,
            )
            theta = bundle.apply_theta_modifiers(theta)
            x_test = bundle.x_test
            if bundle.fgsm_sigma is not None:
                x_test = perturb_mod.apply_fgsm(
                    theta,
                    x_test,
                    self.split.test.labels,
                    bundle.fgsm_sigma,
                    self.split.test.feature_ranges,
                )
            pert_score = c_cdd(theta, x_test, self.split.test.labels)
            pert_acc = accuracy(theta, x_test, self.split.test.labels)
        except DivergenceError:
            return EvaluationRecord(
                strategy=ps,
                baseline_ccdd=base_score,
                perturbed_ccdd=None,
                pv=0.0,
                baseline_accuracy=base_acc,
                perturbed_accuracy=None,
                master_seed=self.master_seed,
                wall_time=time.perf_counter() - t0,
                failed=True,
            )
        return EvaluationRecord(
            strategy=ps,
            baseline_ccdd=base_score,
            perturbed_ccdd=pert_score,
            pv=abs(pert_score.value - base_score.value),
            baseline_accuracy=base_acc,
            perturbed_accuracy=pert_acc,
            master_seed=self.master_seed,
            wall_time=time.perf_counter() - t0,
        )

    def evaluate(self, ps: PerturbationStrategy) -> EvaluationRecord:
        """Evaluate one strategy, consulting the cache first.

        Raises BudgetExhausted when the strategy is uncached and the
        evaluation budget is spent.
        """
        key = ps.encoding_str
        self.strategies_requested.add(key)
        cached = self.cache.get(key)
        if cached is not None:
            return EvaluationRecord.from_dict(cached, ps)
        with self._lock:
            if self.max_evaluations is not None and self.consumed >= self.max_evaluations:
                raise BudgetExhausted(
                    f"evaluation budget of {self.max_evaluations} spent"
                )
            self.consumed += 1
        record = self._run_pipeline(ps)
        self.cache.put(key, record.to_dict())
        return record

    def evaluate_many(
        self, strategies: list[PerturbationStrategy]
    ) -> list[EvaluationRecord]:
        """Evaluate a batch in order, in parallel where the budget allows.

        Returns records for the longest prefix of `strategies` the budget
        covers: iteration stops just before the first uncached strategy
        that would exceed the budget. Duplicate strategies within the
        batch consume budget once. The returned list is deterministic for
        a given cache state regardless of parallelism.
        """
        plan: list[tuple[str, dict | None]] = []  # (key, cached record or None)
        new_keys: list[str] = []
        budget_left = (
            None
            if self.max_evaluations is None
            else self.max_evaluations - self.consumed
        )
        seen_new = set()
        for ps in strategies:
            key = ps.encoding_str
            cached = self.cache.get(key)
            if cached is None and key not in seen_new:
                if budget_left is not None and len(seen_new) >= budget_left:
                    break
                seen_new.add(key)
                new_keys.append(key)
            self.strategies_requested.add(key)
            plan.append((key, cached))

        to_run = {}
        if new_keys:
            with self._lock:
                self.consumed += len(new_keys)
            unique = {}
            for ps in strategies[: len(plan)]:
                if ps.encoding_str in seen_new and ps.encoding_str not in unique:
                    unique[ps.encoding_str] = ps
            if self.parallelism > 1 and len(unique) > 1:
                # Baseline must exist before workers race to read it.
                self.baseline()
                with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
                    futures = {
                        k: pool.submit(self._run_pipeline, ps)
                        for k, ps in unique.items()
                    }
                    to_run = {k: f.result() for k, f in futures.items()}
            else:
                to_run = {k: self._run_pipeline(ps) for k, ps in unique.items()}
            for k in new_keys:
                self.cache.put(k, to_run[k].to_dict())

        out = []
        for ps, (key, cached) in zip(strategies, plan):
            if key in to_run:
                rec = to_run[key]
                out.append(
                    rec
                    if rec.strategy is ps
                    else EvaluationRecord.from_dict(rec.to_dict(), ps)
                )
            else:
                cached = self.cache.get(key) if cached is None else cached
                out.append(EvaluationRecord.from_dict(cached, ps))
        return out


def evaluate_strategy(
    ps: PerturbationStrategy,
    split: SplitDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    master_seed: int,
    cache: EvalCache | None = None,
) -> EvaluationRecord:
    """One-shot evaluation outside a search context."""
    ev = StrategyEvaluator(split, model_config, train_config, master_seed, cache)
    return ev.evaluate(ps)


def evaluate_pool(
    pool: PerturbationPool,
    split: SplitDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    master_seed: int,
    cache: EvalCache | None = None,
    parallelism: int = 1,
) -> list[EvaluationRecord]:
    """Evaluate every strategy in the pool, in enumeration order."""
    ev = StrategyEvaluator(
        split,
        model_config,
        train_config,
        master_seed,
        cache,
        pool=pool,
        parallelism=parallelism,
    )
    return ev.evaluate_many(list(pool.iter_strategies()))
