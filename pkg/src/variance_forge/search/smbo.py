"""Surrogate-guided search: Gaussian-process posterior over the encoded
strategies plus expected improvement to pick the next evaluation.

The candidate set at every iteration is exactly the unevaluated remainder
of the pool, so no strategy is ever trained twice; the engine returns
early once the pool is exhausted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import erf

from ..errors import BudgetExhausted, ConfigError
from ..metrics import EvaluationRecord, StrategyEvaluator
from ..perturb import PerturbationPool
from ..rng import SplitMix64, derive_seed
from .common import SearchTrace, better, encode_real

_JITTER = 1e-12


@dataclass(frozen=True)
class SmboConfig:
    initial_samples: int = 5
    iterations: int = 10
    length_scale: float = 0.5
    noise: float = 1e-6
    xi: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.initial_samples < 2:
            raise ConfigError("initial_samples must be >= 2")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.length_scale <= 0:
            raise ConfigError("length_scale must be > 0")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        if self.xi < 0:
            raise ConfigError("xi must be >= 0")


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sum(diff * diff, axis=2)


class GpSurrogate:
    """Zero-mean (after centering) GP with a squared-exponential kernel."""

    def __init__(self, x: np.ndarray, y: np.ndarray, length_scale: float, noise: float):
        self.x = x
        self.y_mean = float(np.mean(y))
        self.length_scale = length_scale
        k = np.exp(-_sq_dists(x, x) / (2.0 * length_scale**2))
        k[np.diag_indices_from(k)] += noise**2 + _JITTER
        self._chol = cho_factor(k, lower=True)
        self._alpha = cho_solve(self._chol, y - self.y_mean)

    def predict(self, xc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ks = np.exp(-_sq_dists(xc, self.x) / (2.0 * self.length_scale**2))
        mu = self.y_mean + ks @ self._alpha
        v = cho_solve(self._chol, ks.T)
        var = np.maximum(1.0 - np.sum(ks * v.T, axis=1), 0.0)
        return mu, var


def expected_improvement(
    mu: np.ndarray, sigma: np.ndarray, best: float, xi: float
) -> np.ndarray:
    """EI for maximization; exactly 0 wherever the posterior is certain."""
    imp = mu - best - xi
    ei = np.zeros_like(mu)
    pos = sigma > 0
    z = imp[pos] / sigma[pos]
    cdf = 0.5 * (1.0 + erf(z / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    ei[pos] = imp[pos] * cdf + sigma[pos] * pdf
    return np.maximum(ei, 0.0)


def search_smbo(
    pool: PerturbationPool, evaluator: StrategyEvaluator, config: SmboConfig
) -> tuple[EvaluationRecord | None, SearchTrace]:
    gen = SplitMix64(derive_seed(config.seed, "smbo"))
    start = evaluator.consumed
    trace = SearchTrace(engine="smbo")
    best: EvaluationRecord | None = None

    strategies = list(pool.iter_strategies())
    vectors = np.array([encode_real(s, pool) for s in strategies])
    encodings = [s.encoding for s in strategies]

    n_seed = min(config.initial_samples, pool.size)
    seed_idx = gen.sample_distinct(pool.size, n_seed)
    seeds = [strategies[i] for i in seed_idx]
    records = evaluator.evaluate_many(seeds)
    evaluated: dict[int, float] = {}
    for idx, rec in zip(seed_idx, records):
        trace.add(rec.strategy, rec.pv)
        if better(rec, best):
            best = rec
        evaluated[idx] = rec.pv
    if len(records) < len(seeds):
        trace.evaluations_consumed = evaluator.consumed - start
        return best, trace

    try:
        for _ in range(config.iterations):
            remaining = [i for i in range(pool.size) if i not in evaluated]
            if not remaining:
                break
            obs_idx = list(evaluated.keys())
            gp = GpSurrogate(
                vectors[obs_idx],
                np.array([evaluated[i] for i in obs_idx]),
                config.length_scale,
                config.noise,
            )
            mu, var = gp.predict(vectors[remaining])
            ei = expected_improvement(mu, np.sqrt(var), best.pv, config.xi)
            pick = min(
                range(len(remaining)),
                key=lambda t: (-ei[t], encodings[remaining[t]]),
            )
            idx = remaining[pick]
            rec = evaluator.evaluate(strategies[idx])
            trace.add(rec.strategy, rec.pv)
            if better(rec, best):
                best = rec
            evaluated[idx] = rec.pv
    except BudgetExhausted:
        pass

    trace.evaluations_consumed = evaluator.consumed - start
    return best, trace
