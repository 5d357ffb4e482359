"""Experiment configuration: JSON schema, strict validation, instance building.

One JSON file describes a whole experiment: dataset, split, model, training,
the perturbation pool, the engine and its settings, budget, and seeds.
Unknown keys are rejected at every nesting level so typos fail loudly at
load time instead of silently running a different experiment. A handful of
top-level scalars (seed, engine, budget, out_dir) can be overridden by CLI
flags; flags win.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import data as data_mod
from .errors import ConfigError
from .net import ModelConfig, TrainConfig
from .perturb import FactorKind, PerturbationPool, TauMatrix
from .search import (
    EaConfig,
    RlConfig,
    SearchBudget,
    SmboConfig,
    SwayConfig,
    ENGINE_NAMES,
)

_MISSING = object()


def _check_unknown(d: dict, allowed, ctx: str):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{ctx}: unknown keys {extra}")


def _get(d: dict, key: str, ctx: str, default=_MISSING):
    if key in d:
        return d[key]
    if default is _MISSING:
        raise ConfigError(f"{ctx}: missing required key {key!r}")
    return default


def _as_int(v, ctx: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{ctx}: expected an integer, got {v!r}")
    return v


def _as_number(v, ctx: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{ctx}: expected a number, got {v!r}")
    return float(v)


def _as_str(v, ctx: str) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"{ctx}: expected a string, got {v!r}")
    return v


@dataclass
class FactorSpec:
    kind: FactorKind
    level_params: list
    grid_level: int


@dataclass
class ExperimentConfig:
    dataset: dict
    split_spec: dict
    model_spec: dict
    train_config: TrainConfig
    factor_specs: list[FactorSpec]
    engine: str
    engine_config: dict
    budget: SearchBudget
    master_seed: int
    parallelism: int
    out_dir: str | None
    base_dir: str = "."
    grid_levels: dict = field(default_factory=dict)


def _parse_dataset(d, ctx="dataset") -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{ctx}: expected an object")
    kind = _as_str(_get(d, "kind", ctx), f"{ctx}.kind")
    if kind == "blobs":
        _check_unknown(
            d,
            ("kind", "num_classes", "samples_per_class", "dims", "spread", "seed", "center_scale"),
            ctx,
        )
        return {
            "kind": kind,
            "num_classes": _as_int(_get(d, "num_classes", ctx), f"{ctx}.num_classes"),
            "samples_per_class": _as_int(
                _get(d, "samples_per_class", ctx), f"{ctx}.samples_per_class"
            ),
            "dims": _as_int(_get(d, "dims", ctx), f"{ctx}.dims"),
            "spread": _as_number(_get(d, "spread", ctx), f"{ctx}.spread"),
            "seed": _as_int(_get(d, "seed", ctx, 0), f"{ctx}.seed"),
            "center_scale": _as_number(
                _get(d, "center_scale", ctx, 4.0), f"{ctx}.center_scale"
            ),
        }
    if kind == "rings":
        _check_unknown(
            d, ("kind", "num_rings", "samples_per_ring", "noise", "seed"), ctx
        )
        return {
            "kind": kind,
            "num_rings": _as_int(_get(d, "num_rings", ctx), f"{ctx}.num_rings"),
            "samples_per_ring": _as_int(
                _get(d, "samples_per_ring", ctx), f"{ctx}.samples_per_ring"
            ),
            "noise": _as_number(_get(d, "noise", ctx), f"{ctx}.noise"),
            "seed": _as_int(_get(d, "seed", ctx, 0), f"{ctx}.seed"),
        }
    if kind == "csv":
        _check_unknown(d, ("kind", "path", "label_column"), ctx)
        return {
            "kind": kind,
            "path": _as_str(_get(d, "path", ctx), f"{ctx}.path"),
            "label_column": _as_str(
                _get(d, "label_column", ctx, "label"), f"{ctx}.label_column"
            ),
        }
    raise ConfigError(f"{ctx}.kind: {kind!r} is not one of blobs, rings, csv")


def _parse_level_param(kind: FactorKind, raw, ctx: str):
    if kind == FactorKind.LABEL_FLIP and isinstance(raw, dict):
        _check_unknown(raw, ("tau",), ctx)
        rows = _get(raw, "tau", ctx)
        try:
            return TauMatrix(np.array(rows, dtype=np.float64))
        except (ValueError, ConfigError) as e:
            raise ConfigError(f"{ctx}: {e}") from None
    if kind in (FactorKind.FC_LAYER_MOD, FactorKind.SEED_OVERRIDE):
        if raw is None and kind == FactorKind.SEED_OVERRIDE:
            return None
        return _as_int(raw, ctx)
    return _as_number(raw, ctx)


def _parse_pool(d, ctx="pool") -> list[FactorSpec]:
    if not isinstance(d, dict):
        raise ConfigError(f"{ctx}: expected an object")
    _check_unknown(d, ("factors",), ctx)
    factors = _get(d, "factors", ctx)
    if not isinstance(factors, list) or not factors:
        raise ConfigError(f"{ctx}.factors: expected a non-empty array")
    specs = []
    for i, f in enumerate(factors):
        fctx = f"{ctx}.factors[{i}]"
        if not isinstance(f, dict):
            raise ConfigError(f"{fctx}: expected an object")
        _check_unknown(f, ("kind", "levels", "grid_level"), fctx)
        kind_name = _as_str(_get(f, "kind", fctx), f"{fctx}.kind")
        try:
            kind = FactorKind(kind_name)
        except ValueError:
            valid = ", ".join(k.value for k in FactorKind)
            raise ConfigError(
                f"{fctx}.kind: {kind_name!r} is not one of {valid}"
            ) from None
        levels_raw = _get(f, "levels", fctx)
        if not isinstance(levels_raw, list) or not levels_raw:
            raise ConfigError(f"{fctx}.levels: expected a non-empty array")
        params = [
            _parse_level_param(kind, raw, f"{fctx}.levels[{j}]")
            for j, raw in enumerate(levels_raw)
        ]
        grid_level = _as_int(_get(f, "grid_level", fctx, 1), f"{fctx}.grid_level")
        if len(params) > 1 and not 1 <= grid_level < len(params):
            raise ConfigError(
                f"{fctx}.grid_level: must lie in 1..{len(params) - 1}"
            )
        specs.append(FactorSpec(kind=kind, level_params=params, grid_level=grid_level))
    return specs


def parse_experiment(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root: expected a JSON object")
    _check_unknown(
        raw,
        (
            "dataset",
            "split",
            "model",
            "train",
            "pool",
            "engine",
            "engine_config",
            "budget",
            "master_seed",
            "parallelism",
            "out_dir",
        ),
        "config root",
    )
    dataset = _parse_dataset(_get(raw, "dataset", "config root"))

    split_raw = _get(raw, "split", "config root", {"test_fraction": 0.25, "seed": 1})
    _check_unknown(split_raw, ("test_fraction", "seed"), "split")
    split_spec = {
        "test_fraction": _as_number(
            _get(split_raw, "test_fraction", "split", 0.25), "split.test_fraction"
        ),
        "seed": _as_int(_get(split_raw, "seed", "split", 1), "split.seed"),
    }

    model_raw = _get(raw, "model", "config root")
    _check_unknown(
        model_raw, ("hidden_layers", "activation", "init_scheme", "init_seed"), "model"
    )
    hidden = _get(model_raw, "hidden_layers", "model")
    if not isinstance(hidden, list):
        raise ConfigError("model.hidden_layers: expected an array of widths")
    model_spec = {
        "hidden_layers": tuple(
            _as_int(w, f"model.hidden_layers[{i}]") for i, w in enumerate(hidden)
        ),
        "activation": _as_str(
            _get(model_raw, "activation", "model", "relu"), "model.activation"
        ),
        "init_scheme": _as_str(
            _get(model_raw, "init_scheme", "model", "kaiming"), "model.init_scheme"
        ),
        "init_seed": _as_int(_get(model_raw, "init_seed", "model", 0), "model.init_seed"),
    }

    train_raw = _get(raw, "train", "config root")
    _check_unknown(train_raw, ("epochs", "batch_size", "lr", "shuffle_seed"), "train")
    train_config = TrainConfig(
        epochs=_as_int(_get(train_raw, "epochs", "train"), "train.epochs"),
        batch_size=_as_int(_get(train_raw, "batch_size", "train"), "train.batch_size"),
        learning_rate=_as_number(_get(train_raw, "lr", "train"), "train.lr"),
        shuffle_seed=_as_int(
            _get(train_raw, "shuffle_seed", "train", 0), "train.shuffle_seed"
        ),
    )

    factor_specs = _parse_pool(_get(raw, "pool", "config root"))

    engine = _as_str(_get(raw, "engine", "config root", "brute"), "engine")
    if engine not in ENGINE_NAMES:
        raise ConfigError(f"engine: {engine!r} is not one of {', '.join(ENGINE_NAMES)}")
    engine_config = _get(raw, "engine_config", "config root", {})
    if not isinstance(engine_config, dict):
        raise ConfigError("engine_config: expected an object")

    budget_raw = _get(raw, "budget", "config root", {})
    _check_unknown(budget_raw, ("max_evaluations", "max_iterations"), "budget")
    budget = SearchBudget(
        max_evaluations=_as_int(
            _get(budget_raw, "max_evaluations", "budget", 1_000_000),
            "budget.max_evaluations",
        ),
        max_generations_or_iterations=_as_int(
            _get(budget_raw, "max_iterations", "budget", 1_000_000),
            "budget.max_iterations",
        ),
    )

    master_seed = _as_int(_get(raw, "master_seed", "config root", 0), "master_seed")
    parallelism = _as_int(_get(raw, "parallelism", "config root", 1), "parallelism")
    if parallelism < 1:
        raise ConfigError("parallelism: must be >= 1")
    out_dir = raw.get("out_dir")
    if out_dir is not None:
        out_dir = _as_str(out_dir, "out_dir")

    return ExperimentConfig(
        dataset=dataset,
        split_spec=split_spec,
        model_spec=model_spec,
        train_config=train_config,
        factor_specs=factor_specs,
        engine=engine,
        engine_config=engine_config,
        budget=budget,
        master_seed=master_seed,
        parallelism=parallelism,
        out_dir=out_dir,
        base_dir=base_dir,
        grid_levels={s.kind: s.grid_level for s in factor_specs},
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return parse_experiment(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def build_dataset(cfg: ExperimentConfig) -> data_mod.Dataset:
    d = cfg.dataset
    if d["kind"] == "blobs":
        return data_mod.gen_blobs(
            num_classes=d["num_classes"],
            samples_per_class=d["samples_per_class"],
            dims=d["dims"],
            spread=d["spread"],
            seed=d["seed"],
            center_scale=d["center_scale"],
        )
    if d["kind"] == "rings":
        return data_mod.gen_rings(
            num_rings=d["num_rings"],
            samples_per_ring=d["samples_per_ring"],
            noise=d["noise"],
            seed=d["seed"],
        )
    path = d["path"]
    if not os.path.isabs(path):
        path = os.path.join(cfg.base_dir, path)
    return data_mod.load_csv(path, label_column=d["label_column"])


def build_instance(
    cfg: ExperimentConfig,
) -> tuple[data_mod.SplitDataset, ModelConfig, TrainConfig, PerturbationPool]:
    """Materialize the experiment: data, split, model/train configs, pool."""
    dataset = build_dataset(cfg)
    split = data_mod.split(
        dataset, cfg.split_spec["test_fraction"], cfg.split_spec["seed"]
    )
    model_config = ModelConfig(
        input_dim=dataset.n_features,
        hidden_layers=cfg.model_spec["hidden_layers"],
        output_dim=dataset.num_classes,
        activation=cfg.model_spec["activation"],
        init_scheme=cfg.model_spec["init_scheme"],
        init_seed=cfg.model_spec["init_seed"],
    )
    pool = PerturbationPool.from_levels(
        [(s.kind, s.level_params) for s in cfg.factor_specs], model_config
    )
    return split, model_config, cfg.train_config, pool


_ENGINE_CONFIGS = {
    "ea": EaConfig,
    "rl": RlConfig,
    "smbo": SmboConfig,
    "sway": SwayConfig,
}


def build_engine_config(engine: str, raw: dict, default_seed: int):
    """Instantiate the engine's config dataclass from raw JSON settings.

    The engine seed defaults to the experiment's master seed so that a
    bare config is fully reproducible; an explicit "seed" key wins.
    """
    if engine == "brute":
        if raw:
            raise ConfigError("engine_config: brute takes no settings")
        return None
    cls = _ENGINE_CONFIGS[engine]
    fields = cls.__dataclass_fields__
    _check_unknown(raw, set(fields), "engine_config")
    kwargs = dict(raw)
    kwargs.setdefault("seed", default_seed)
    for k, v in kwargs.items():
        ctx = f"engine_config.{k}"
        ann = fields[k].type
        if ann == "int" or ann.startswith("int |"):
            if v is not None:
                kwargs[k] = _as_int(v, ctx)
        else:
            kwargs[k] = _as_number(v, ctx)
    return cls(**kwargs)
