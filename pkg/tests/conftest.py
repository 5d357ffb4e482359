"""Shared fixtures: the calibrated standard instance, a tiny fast instance,
and a synthetic evaluator for engine-behavior tests that need no training."""

import json

import pytest

import _criteria


def pytest_terminal_summary(terminalreporter):
    """Replay the acceptance verdict lines after the capture-heavy run."""
    if _criteria.LINES:
        terminalreporter.ensure_newline()
        terminalreporter.section("acceptance criteria", sep="-")
        for line in _criteria.LINES:
            terminalreporter.write_line(line)

from variance_forge import data as data_mod
from variance_forge import net
from variance_forge.errors import BudgetExhausted
from variance_forge.metrics import (
    CcddScore,
    EvalCache,
    EvaluationRecord,
    StrategyEvaluator,
    run_fingerprint,
)
from variance_forge.perturb import FactorKind, PerturbationPool
from variance_forge.search import SearchBudget, brute_force

STANDARD_POOL_SPEC = [
    (FactorKind.ADVERSARIAL, [0, 0.003, 0.05]),
    (FactorKind.LABEL_FLIP, [0, 0.1, 0.2]),
    (FactorKind.WEIGHT_MOD, [0, 0.25, 0.5]),
]


class Instance:
    """A materialized experiment the whole session can share.

    All evaluators handed out share one in-memory cache, so each distinct
    strategy is trained at most once per test session no matter how many
    tests or engine seeds touch it.
    """

    def __init__(self, split, model_config, train_config, pool, master_seed):
        self.split = split
        self.model_config = model_config
        self.train_config = train_config
        self.pool = pool
        self.master_seed = master_seed
        fp = run_fingerprint(split, model_config, train_config, pool, master_seed)
        self.cache = EvalCache(fp)

    def evaluator(self, max_evaluations=None, parallelism=1, cache=True):
        return StrategyEvaluator(
            self.split,
            self.model_config,
            self.train_config,
            self.master_seed,
            cache=self.cache if cache else None,
            pool=self.pool,
            max_evaluations=max_evaluations,
            parallelism=parallelism,
        )


@pytest.fixture(scope="session")
def standard():
    """The calibrated reference instance: separable blobs, one hidden layer."""
    ds = data_mod.gen_blobs(
        num_classes=3, samples_per_class=100, dims=2, spread=0.25, seed=11
    )
    split = data_mod.split(ds, 0.25, 11)
    mc = net.ModelConfig(input_dim=2, hidden_layers=(16,), output_dim=3)
    tc = net.TrainConfig(epochs=150, batch_size=32, learning_rate=0.1)
    pool = PerturbationPool.from_levels(STANDARD_POOL_SPEC, mc)
    return Instance(split, mc, tc, pool, master_seed=2)


@pytest.fixture(scope="session")
def standard_oracle(standard):
    """Exhaustive ranking of the 27-strategy pool; ground truth for engines."""
    ev = standard.evaluator(max_evaluations=60, parallelism=4)
    ranked, trace = brute_force(standard.pool, ev, SearchBudget(60))
    return ranked


@pytest.fixture(scope="session")
def tiny():
    """A small, fast instance for plumbing tests."""
    ds = data_mod.gen_blobs(
        num_classes=3, samples_per_class=30, dims=2, spread=0.2, seed=3
    )
    split = data_mod.split(ds, 0.25, 5)
    mc = net.ModelConfig(input_dim=2, hidden_layers=(8,), output_dim=3)
    tc = net.TrainConfig(epochs=30, batch_size=16, learning_rate=0.1)
    pool = PerturbationPool.from_levels(
        [
            (FactorKind.ADVERSARIAL, [0, 0.05]),
            (FactorKind.WEIGHT_MOD, [0, 0.5]),
        ],
        mc,
    )
    return Instance(split, mc, tc, pool, master_seed=7)


class FakeEvaluator:
    """Duck-typed evaluator with a synthetic pv landscape and no training."""

    def __init__(self, pv_fn, max_evaluations=None):
        self.pv_fn = pv_fn
        self.max_evaluations = max_evaluations
        self.consumed = 0
        self.strategies_requested = set()
        self._cache = {}

    def _record(self, ps):
        pv = float(self.pv_fn(ps.encoding_str))
        return EvaluationRecord(
            strategy=ps,
            baseline_ccdd=CcddScore(-0.2, 10),
            perturbed_ccdd=CcddScore(-0.2 - pv, 10),
            pv=pv,
            baseline_accuracy=0.9,
            perturbed_accuracy=0.8,
            master_seed=0,
            wall_time=0.0,
        )

    def evaluate(self, ps):
        key = ps.encoding_str
        self.strategies_requested.add(key)
        if key in self._cache:
            return self._cache[key]
        if self.max_evaluations is not None and self.consumed >= self.max_evaluations:
            raise BudgetExhausted("budget spent")
        self.consumed += 1
        rec = self._record(ps)
        self._cache[key] = rec
        return rec

    def evaluate_many(self, strategies):
        out = []
        for ps in strategies:
            try:
                out.append(self.evaluate(ps))
            except BudgetExhausted:
                break
        return out


@pytest.fixture
def fake_evaluator():
    return FakeEvaluator


def write_config(path, **overrides):
    """Write a small, fast experiment config; overrides patch top-level keys."""
    cfg = {
        "dataset": {
            "kind": "blobs",
            "num_classes": 3,
            "samples_per_class": 40,
            "dims": 2,
            "spread": 0.25,
            "seed": 11,
        },
        "split": {"test_fraction": 0.25, "seed": 11},
        "model": {"hidden_layers": [8]},
        "train": {"epochs": 40, "batch_size": 16, "lr": 0.1},
        "pool": {
            "factors": [
                {"kind": "adversarial", "levels": [0, 0.05]},
                {"kind": "weight_mod", "levels": [0, 0.5]},
            ]
        },
        "master_seed": 2,
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def small_config(tmp_path):
    return write_config(tmp_path / "config.json")
