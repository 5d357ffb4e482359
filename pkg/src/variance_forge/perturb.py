"""Perturbation factors, strategy pools, and the strategy-application operator.

A factor perturbs exactly one surface: adversarial/OOD factors hit the test
inputs, label flipping/noise hit the training labels, weight/bias noise hit
the trained parameters, and the architecture/seed factors hit the configs
before training. A strategy picks one level per factor; applying it yields
a bundle of perturbed inputs/labels/configs plus the modifiers that must
run after training (weight/bias noise, and the input attack, which needs
the trained model's gradients).

Every stochastic factor draws from a child seed derived from (master seed,
factor kind, strategy encoding), so strategies can be evaluated in any
order or in parallel without changing results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import net
from .errors import ConfigError, DataError, ShapeError
from .net import ModelConfig, Parameters, TrainConfig
from .rng import SplitMix64, derive_seed


class FactorKind(Enum):
    ADVERSARIAL = "adversarial"
    OOD_SHIFT = "ood_shift"
    LABEL_FLIP = "label_flip"
    LABEL_NOISE = "label_noise"
    WEIGHT_MOD = "weight_mod"
    BIAS_MOD = "bias_mod"
    FC_LAYER_MOD = "fc_layer_mod"
    SEED_OVERRIDE = "seed_override"


# Surfaces: which part of the pipeline each factor touches.
TEST_INPUT_FACTORS = frozenset({FactorKind.ADVERSARIAL, FactorKind.OOD_SHIFT})
TRAIN_LABEL_FACTORS = frozenset({FactorKind.LABEL_FLIP, FactorKind.LABEL_NOISE})
CONFIG_FACTORS = frozenset({FactorKind.FC_LAYER_MOD, FactorKind.SEED_OVERRIDE})
TRAINED_THETA_FACTORS = frozenset({FactorKind.WEIGHT_MOD, FactorKind.BIAS_MOD})

# Fixed application order: config/data factors before training, then noise
# on the trained parameters, then the input attack against the final model.
APPLICATION_ORDER = (
    FactorKind.OOD_SHIFT,
    FactorKind.LABEL_FLIP,
    FactorKind.LABEL_NOISE,
    FactorKind.FC_LAYER_MOD,
    FactorKind.SEED_OVERRIDE,
    FactorKind.WEIGHT_MOD,
    FactorKind.BIAS_MOD,
    FactorKind.ADVERSARIAL,
)


@dataclass(frozen=True)
class TauMatrix:
    """Row-stochastic label-transition matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ConfigError("tau must be a square matrix of size >= 2")
        if (m < 0).any() or (m > 1).any():
            raise ConfigError("tau entries must lie in [0, 1]")
        if np.abs(m.sum(axis=1) - 1.0).max() > 1e-12:
            raise ConfigError("tau rows must sum to 1 within 1e-12")

    @classmethod
    def identity(cls, m: int) -> "TauMatrix":
        return cls(np.eye(m))

    @classmethod
    def uniform_flip(cls, m: int, rate: float) -> "TauMatrix":
        """Keep the label with probability 1-rate, else uniform over the rest."""
        if not 0.0 <= rate <= 1.0:
            raise ConfigError("flip rate must lie in [0, 1]")
        t = np.full((m, m), rate / (m - 1))
        np.fill_diagonal(t, 1.0 - rate)
        return cls(t)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(self.size)))


@dataclass(frozen=True)
class FactorLevel:
    """One setting of one factor. Level 0 of every factor is its off level."""

    kind: FactorKind
    level_index: int
    parameter: float | int | TauMatrix | None

    def __post_init__(self):
        k, p = self.kind, self.parameter
        if k in (FactorKind.ADVERSARIAL, FactorKind.OOD_SHIFT):
            if not isinstance(p, (int, float)) or p < 0:
                raise ConfigError(f"{k.value} level needs a parameter >= 0")
        elif k == FactorKind.LABEL_FLIP:
            if isinstance(p, (int, float)):
                if not 0.0 <= p <= 1.0:
                    raise ConfigError("label_flip rate must lie in [0, 1]")
            elif not isinstance(p, TauMatrix):
                raise ConfigError("label_flip level needs a rate or a tau matrix")
        elif k == FactorKind.LABEL_NOISE:
            if not isinstance(p, (int, float)) or not 0.0 <= p <= 1.0:
                raise ConfigError("label_noise rate must lie in [0, 1]")
        elif k in (FactorKind.WEIGHT_MOD, FactorKind.BIAS_MOD):
            if not isinstance(p, (int, float)) or p < 0:
                raise ConfigError(f"{k.value} scale must be >= 0")
        elif k == FactorKind.FC_LAYER_MOD:
            if not isinstance(p, int) or isinstance(p, bool):
                raise ConfigError("fc_layer_mod width delta must be an integer")
        elif k == FactorKind.SEED_OVERRIDE:
            if p is not None and (not isinstance(p, int) or isinstance(p, bool)):
                raise ConfigError("seed_override level must be an integer seed or null")

    @property
    def off(self) -> bool:
        k, p = self.kind, self.parameter
        if k == FactorKind.SEED_OVERRIDE:
            return p is None
        if k == FactorKind.LABEL_FLIP and isinstance(p, TauMatrix):
            return p.is_identity
        return p == 0

    def param_as_json(self):
        if isinstance(self.parameter, TauMatrix):
            return {"tau": self.parameter.matrix.tolist()}
        return self.parameter


@dataclass(frozen=True, eq=False)
class PerturbationStrategy:
    """One level per pool factor. The encoding is the dot-joined index vector."""

    levels: tuple[FactorLevel, ...]

    @property
    def level_indices(self) -> tuple[int, ...]:
        return tuple(lv.level_index for lv in self.levels)

    @property
    def encoding(self) -> bytes:
        return ".".join(str(i) for i in self.level_indices).encode("ascii")

    @property
    def encoding_str(self) -> str:
        return self.encoding.decode("ascii")

    @property
    def kinds(self) -> tuple[FactorKind, ...]:
        return tuple(lv.kind for lv in self.levels)

    @property
    def is_all_off(self) -> bool:
        return all(lv.off for lv in self.levels)

    def __eq__(self, other):
        return (
            isinstance(other, PerturbationStrategy)
            and self.kinds == other.kinds
            and self.level_indices == other.level_indices
        )

    def __hash__(self):
        return hash((self.kinds, self.level_indices))

    def describe(self) -> str:
        on = [
            f"{lv.kind.value}={lv.parameter!r}" for lv in self.levels if not lv.off
        ]
        return "+".join(on) if on else "all-off"


@dataclass(frozen=True)
class PerturbationPool:
    """Ordered factors with their level sets; the strategy space is their product."""

    factors: tuple[tuple[FactorKind, tuple[FactorLevel, ...]], ...]

    def __post_init__(self):
        kinds = [k for k, _ in self.factors]
        if len(set(kinds)) != len(kinds):
            raise ConfigError("factor kinds must be unique within a pool")
        if not self.factors:
            raise ConfigError("pool must contain at least one factor")
        for kind, levels in self.factors:
            if not levels:
                raise ConfigError(f"{kind.value}: empty level set")
            offs = [lv for lv in levels if lv.off]
            if len(offs) != 1 or not levels[0].off:
                raise ConfigError(
                    f"{kind.value}: level 0 must be the single off level"
                )
            for i, lv in enumerate(levels):
                if lv.kind != kind:
                    raise ConfigError(f"{kind.value}: level {i} has kind {lv.kind.value}")
                if lv.level_index != i:
                    raise ConfigError(f"{kind.value}: level {i} has index {lv.level_index}")

    @classmethod
    def from_levels(
        cls, spec: list[tuple[FactorKind, list]], model_config: ModelConfig | None = None
    ) -> "PerturbationPool":
        """Build a pool from (kind, [level parameters]) pairs.

        Level parameters are raw values (floats, ints, None, TauMatrix).
        When model_config is given, architecture levels are validated
        against it here rather than failing mid-search.
        """
        factors = []
        for kind, params in spec:
            levels = tuple(
                FactorLevel(kind, i, p) for i, p in enumerate(params)
            )
            factors.append((kind, levels))
        pool = cls(tuple(factors))
        if model_config is not None:
            pool.validate_against(model_config)
        return pool

    def validate_against(self, model_config: ModelConfig) -> None:
        """Reject levels that would build an invalid architecture."""
        for kind, levels in self.factors:
            if kind == FactorKind.FC_LAYER_MOD and model_config.hidden_layers:
                for lv in levels:
                    if model_config.hidden_layers[0] + lv.parameter < 1:
                        raise ConfigError(
                            f"fc_layer_mod delta {lv.parameter} would shrink the "
                            f"first hidden layer below width 1"
                        )

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def level_counts(self) -> tuple[int, ...]:
        return tuple(len(levels) for _, levels in self.factors)

    @property
    def size(self) -> int:
        return pool_size(self)

    def strategy_from_indices(self, indices) -> PerturbationStrategy:
        indices = tuple(int(i) for i in indices)
        if len(indices) != self.n_factors:
            raise ConfigError(
                f"strategy needs {self.n_factors} level indices, got {len(indices)}"
            )
        levels = []
        for (kind, lvset), i in zip(self.factors, indices):
            if not 0 <= i < len(lvset):
                raise ConfigError(
                    f"{kind.value}: level index {i} out of range 0..{len(lvset) - 1}"
                )
            levels.append(lvset[i])
        return PerturbationStrategy(tuple(levels))

    def strategy_at(self, flat_index: int) -> PerturbationStrategy:
        """Mixed-radix decode; the last factor varies fastest."""
        if not 0 <= flat_index < self.size:
            raise ConfigError(f"flat index {flat_index} out of range")
        counts = self.level_counts
        indices = [0] * self.n_factors
        for i in range(self.n_factors - 1, -1, -1):
            indices[i] = flat_index % counts[i]
            flat_index //= counts[i]
        return self.strategy_from_indices(indices)

    def all_off(self) -> PerturbationStrategy:
        return self.strategy_from_indices([0] * self.n_factors)

    def iter_strategies(self):
        for flat in range(self.size):
            yield self.strategy_at(flat)

    def to_dict(self) -> dict:
        return {
            "factors": [
                {
                    "kind": kind.value,
                    "levels": [lv.param_as_json() for lv in levels],
                }
                for kind, levels in self.factors
            ]
        }

    def strategy_from_encoding(self, encoding: str | bytes) -> PerturbationStrategy:
        if isinstance(encoding, bytes):
            encoding = encoding.decode("ascii")
        try:
            indices = [int(part) for part in encoding.split(".")]
        except ValueError:
            raise ConfigError(f"malformed strategy encoding {encoding!r}") from None
        return self.strategy_from_indices(indices)


def pool_size(pool: PerturbationPool) -> int:
    """Number of strategies: the product of the level-set sizes."""
    size = 1
    for _, levels in pool.factors:
        size *= len(levels)
    return size


def apply_fgsm(
    params: Parameters,
    x: np.ndarray,
    y: np.ndarray,
    sigma: float,
    feature_ranges: np.ndarray | None = None,
) -> np.ndarray:
    """One-step sign-gradient attack within an exact L-inf ball of radius sigma.

    Components with zero input gradient are left bitwise unchanged. When
    feature_ranges is given, the attacked inputs are clamped to the recorded
    per-column (min, max) before the ball is enforced.
    """
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if sigma == 0:
        return x.copy()
    _, gx = net.backward(params, x, y)
    step = sigma * np.sign(gx)
    x_hat = np.where(step != 0.0, x + step, x)
    if feature_ranges is not None:
        x_hat = np.clip(x_hat, feature_ranges[:, 0], feature_ranges[:, 1])
    x_hat = np.clip(x_hat, x - sigma, x + sigma)
    # x + sigma can round outward by half an ulp; pull such components back
    # so the computed max-abs difference never exceeds sigma.
    over = np.abs(x_hat - x) > sigma
    while np.any(over):
        x_hat = np.where(over, np.nextafter(x_hat, x), x_hat)
        over = np.abs(x_hat - x) > sigma
    return x_hat


def apply_ood_shift(
    x: np.ndarray, magnitude: float, seed: int, include_scale: bool = True
) -> np.ndarray:
    """Distribution shift: per-feature rescale (bounded by magnitude) plus a
    shared shift along a random direction of exactly `magnitude`."""
    if magnitude < 0:
        raise ConfigError("magnitude must be >= 0")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if magnitude == 0:
        return x.copy()
    gen = SplitMix64(derive_seed(seed, "ood_shift"))
    d = x.shape[1]
    direction = np.array([gen.normal() for _ in range(d)])
    norm = float(np.sqrt(np.sum(direction * direction)))
    if norm == 0.0:
        direction = np.zeros(d)
        direction[0] = 1.0
        norm = 1.0
    shift = direction * (magnitude / norm)
    if include_scale:
        scale = np.array([1.0 + magnitude * (2.0 * gen.uniform() - 1.0) for _ in range(d)])
        return x * scale + shift
    return x + shift


def apply_label_flip(y: np.ndarray, tau: TauMatrix, seed: int) -> np.ndarray:
    """Resample each label from its tau row via inverse-CDF, one draw per label."""
    y = np.ascontiguousarray(y, dtype=np.int64)
    m = tau.size
    if y.size and (y.min() < 0 or y.max() >= m):
        raise DataError("label outside tau's class range")
    cum = np.cumsum(tau.matrix, axis=1)
    cum[:, -1] = 1.0  # guard against cumulative rounding at the top end
    gen = SplitMix64(derive_seed(seed, "label_flip"))
    out = np.empty_like(y)
    for i in range(y.size):
        u = gen.uniform()
        out[i] = np.searchsorted(cum[y[i]], u, side="right")
    return out


def apply_label_noise(
    y: np.ndarray, rate: float, seed: int, num_classes: int
) -> np.ndarray:
    """With probability rate, replace each label by a uniform other class."""
    if not 0.0 <= rate <= 1.0:
        raise ConfigError("rate must lie in [0, 1]")
    y = np.ascontiguousarray(y, dtype=np.int64)
    if num_classes < 2:
        raise ConfigError("num_classes must be >= 2")
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise DataError("label outside class range")
    gen = SplitMix64(derive_seed(seed, "label_noise"))
    out = y.copy()
    for i in range(y.size):
        if gen.uniform() < rate:
            k = gen.randint(num_classes - 1)
            out[i] = k if k < y[i] else k + 1
    return out


def _mod_one_array(arrays: list[np.ndarray], scale: float, seed: int, label: str):
    """Shared core of weight/bias modification: pick one array uniformly and
    add Gaussian noise of std = scale * (its entry std, or 1 if degenerate)."""
    gen = SplitMix64(derive_seed(seed, label))
    target = gen.randint(len(arrays))
    arr = arrays[target]
    sd = float(np.std(arr))
    if sd == 0.0 or not math.isfinite(sd):
        sd = 1.0
    noise = gen.normal_array(arr.shape) * (scale * sd)
    out = [a.copy() for a in arrays]
    out[target] = arr + noise
    return out


def apply_weight_mod(theta: Parameters, scale: float, seed: int) -> Parameters:
    """Add scaled Gaussian noise to one uniformly chosen weight matrix."""
    if scale < 0:
        raise ConfigError("scale must be >= 0")
    if scale == 0:
        return theta.copy()
    new_weights = _mod_one_array(theta.weights, scale, seed, "weight_mod")
    return Parameters(new_weights, [b.copy() for b in theta.biases], theta.config)


def apply_bias_mod(theta: Parameters, scale: float, seed: int) -> Parameters:
    """Add scaled Gaussian noise to one uniformly chosen bias vector."""
    if scale < 0:
        raise ConfigError("scale must be >= 0")
    if scale == 0:
        return theta.copy()
    new_biases = _mod_one_array(theta.biases, scale, seed, "bias_mod")
    return Parameters([w.copy() for w in theta.weights], new_biases, theta.config)


def apply_fc_layer_mod(config: ModelConfig, width_delta: int) -> ModelConfig:
    """Widen (or narrow) the first hidden layer; identity when there is none."""
    if width_delta == 0 or not config.hidden_layers:
        return config
    new_width = config.hidden_layers[0] + width_delta
    if new_width < 1:
        raise ConfigError(
            f"width delta {width_delta} would shrink the first hidden layer "
            f"below width 1"
        )
    return replace(config, hidden_layers=(new_width, *config.hidden_layers[1:]))


def apply_seed_override(
    model_config: ModelConfig, train_config: TrainConfig, new_seed: int
) -> tuple[ModelConfig, TrainConfig]:
    """Replace the shuffle seed, propagating the override to the init seed."""
    return (
        replace(model_config, init_seed=new_seed),
        replace(train_config, shuffle_seed=new_seed),
    )


@dataclass(frozen=True)
class ThetaModifier:
    """A post-training parameter modification queued by perturb()."""

    kind: FactorKind
    scale: float
    seed: int


@dataclass
class PerturbedBundle:
    """Everything evaluate_strategy needs to train and score one strategy.

    x_test / y_train / configs already carry the pre-training factors; the
    theta modifiers and the attack sigma are applied after training.
    """

    x_test: np.ndarray
    y_train: np.ndarray
    model_config: ModelConfig
    train_config: TrainConfig
    theta_modifiers: tuple[ThetaModifier, ...] = ()
    fgsm_sigma: float | None = None

    def apply_theta_modifiers(self, params: Parameters) -> Parameters:
        for mod in self.theta_modifiers:
            if mod.kind == FactorKind.WEIGHT_MOD:
                params = apply_weight_mod(params, mod.scale, mod.seed)
            elif mod.kind == FactorKind.BIAS_MOD:
                params = apply_bias_mod(params, mod.scale, mod.seed)
            else:
                raise ConfigError(f"{mod.kind.value} is not a theta modifier")
        return params


def perturb(
    ps: PerturbationStrategy,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_test: np.ndarray,
    y_test: np.ndarray,
    model_config: ModelConfig,
    train_config: TrainConfig,
    master_seed: int,
) -> PerturbedBundle:
    """Apply every non-off level of the strategy to its surface.

    Off levels are skipped outright, so the all-off strategy returns the
    inputs bitwise unchanged. The class count for label factors comes from
    model_config.output_dim.
    """
    del x_train, y_test  # untouched surfaces, listed for signature symmetry
    m = model_config.output_dim
    x_test_hat = x_test
    y_train_hat = y_train
    mc = model_config
    tc = train_config
    mods: list[ThetaModifier] = []
    sigma: float | None = None

    by_kind = {lv.kind: lv for lv in ps.levels}
    for kind in APPLICATION_ORDER:
        level = by_kind.get(kind)
        if level is None or level.off:
            continue
        child = derive_seed(master_seed, kind.value, ps.encoding_str)
        if kind == FactorKind.OOD_SHIFT:
            x_test_hat = apply_ood_shift(x_test_hat, level.parameter, child)
        elif kind == FactorKind.LABEL_FLIP:
            tau = (
                level.parameter
                if isinstance(level.parameter, TauMatrix)
                else TauMatrix.uniform_flip(m, level.parameter)
            )
            y_train_hat = apply_label_flip(y_train_hat, tau, child)
        elif kind == FactorKind.LABEL_NOISE:
            y_train_hat = apply_label_noise(y_train_hat, level.parameter, child, m)
        elif kind == FactorKind.FC_LAYER_MOD:
            mc = apply_fc_layer_mod(mc, level.parameter)
        elif kind == FactorKind.SEED_OVERRIDE:
            mc, tc = apply_seed_override(mc, tc, level.parameter)
        elif kind in (FactorKind.WEIGHT_MOD, FactorKind.BIAS_MOD):
            mods.append(ThetaModifier(kind, level.parameter, child))
        elif kind == FactorKind.ADVERSARIAL:
            sigma = level.parameter
    return PerturbedBundle(
        x_test=x_test_hat,
        y_train=y_train_hat,
        model_config=mc,
        train_config=tc,
        theta_modifiers=tuple(mods),
        fgsm_sigma=sigma,
    )


@dataclass
class RobustnessVerdict:
    """Diagnostic record for the input/configuration robustness conditions."""

    p_norm: float
    sigma: float
    eta: float
    input_distances: np.ndarray  # per-sample ||x - x_hat||_p
    input_premise: bool  # max distance < sigma
    input_ok: np.ndarray  # per-sample: base prediction unchanged on x_hat
    input_robust: bool
    config_distance: float  # ||theta - theta_hat||_p, inf if shapes differ
    config_premise: bool
    config_ok: np.ndarray  # per-sample: base and perturbed predictions agree on x
    config_robust: bool
    label_distances: np.ndarray | None = None
    delta: float | None = None
    label_premise: bool | None = None
    output_ok: np.ndarray | None = None
    output_robust: bool | None = None

    def to_dict(self) -> dict:
        out = {
            "p_norm": self.p_norm,
            "sigma": self.sigma,
            "eta": self.eta,
            "input": {
                "max_distance": float(self.input_distances.max()),
                "premise_holds": self.input_premise,
                "robust": self.input_robust,
                "violations": int((~self.input_ok).sum()),
            },
            "config": {
                "distance": self.config_distance,
                "premise_holds": self.config_premise,
                "robust": self.config_robust,
                "violations": int((~self.config_ok).sum()),
            },
        }
        if self.delta is not None:
            out["output"] = {
                "max_distance": float(self.label_distances.max()),
                "delta": self.delta,
                "premise_holds": self.label_premise,
                "robust": self.output_robust,
                "violations": int((~self.output_ok).sum()),
            }
        return out


def _vector_pnorm(diff: np.ndarray, p: float) -> np.ndarray:
    """Row-wise p-norm of a 2-D difference array."""
    if math.isinf(p):
        return np.abs(diff).max(axis=1)
    return (np.abs(diff) ** p).sum(axis=1) ** (1.0 / p)


def check_robustness_conditions(
    f_base: Parameters,
    f_pert: Parameters,
    x: np.ndarray,
    x_hat: np.ndarray,
    sigma: float,
    eta: float,
    p_norm: float = math.inf,
    train_inputs: np.ndarray | None = None,
    train_labels: np.ndarray | None = None,
    train_labels_pert: np.ndarray | None = None,
    delta: float | None = None,
) -> RobustnessVerdict:
    """Report premises and conclusions of the robustness implications.

    Input condition: inputs within sigma should keep the base model's
    prediction. Configuration condition: parameters within eta should keep
    predictions on the clean inputs. When delta and the train-side arrays
    are supplied, the output condition is also reported: training points
    whose perturbed-model output is within delta of the (possibly flipped)
    one-hot label should still be predicted as their clean class.

    Purely diagnostic; nothing is mutated.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    x_hat = np.ascontiguousarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeError("x and x_hat must have identical shapes")

    input_distances = _vector_pnorm(x_hat - x, p_norm)
    pred_clean = net.predict(f_base, x)
    pred_attacked = net.predict(f_base, x_hat)
    input_ok = pred_attacked == pred_clean
    input_premise = bool(input_distances.max() < sigma)

    same_arch = f_base.config.layer_widths == f_pert.config.layer_widths
    if same_arch:
        diff = np.concatenate(
            [
                (wb - wa).ravel()
                for wa, wb in zip(f_base.weights, f_pert.weights)
            ]
            + [(bb - ba).ravel() for ba, bb in zip(f_base.biases, f_pert.biases)]
        )
        config_distance = float(_vector_pnorm(diff.reshape(1, -1), p_norm)[0])
    else:
        config_distance = math.inf
    pred_pert = net.predict(f_pert, x)
    config_ok = pred_pert == pred_clean
    config_premise = config_distance < eta

    verdict = RobustnessVerdict(
        p_norm=p_norm,
        sigma=sigma,
        eta=eta,
        input_distances=input_distances,
        input_premise=input_premise,
        input_ok=input_ok,
        input_robust=bool(input_ok.all()),
        config_distance=config_distance,
        config_premise=config_premise,
        config_ok=config_ok,
        config_robust=bool(config_ok.all()),
    )

    if delta is not None:
        if train_inputs is None or train_labels is None or train_labels_pert is None:
            raise ConfigError(
                "output condition needs train_inputs, train_labels, and "
                "train_labels_pert alongside delta"
            )
        probs = net.forward(f_pert, train_inputs)
        onehot = np.zeros_like(probs)
        onehot[np.arange(len(train_labels_pert)), train_labels_pert] = 1.0
        verdict.label_distances = _vector_pnorm(probs - onehot, p_norm)
        verdict.delta = delta
        verdict.label_premise = bool(verdict.label_distances.max() < delta)
        verdict.output_ok = net.predict(f_pert, train_inputs) == np.asarray(train_labels)
        verdict.output_robust = bool(verdict.output_ok.all())
    return verdict
