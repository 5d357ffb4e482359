"""Command-line front end.

Four commands, all driven by a JSON experiment config:

  baseline  train the clean model, report accuracy and the confidence gap
  grid      factorial on/off sweep over a small factor subset, with
            non-additivity reporting
  search    run one engine over the configured pool
  check     robustness-condition diagnostics for one strategy

Every command writes machine-readable files into the run directory
(summary.json, and for search trace.jsonl + trace.csv) next to the
evaluation cache (cache.jsonl), plus a short human-readable report on
stdout. Results are deterministic given config + seed; only timing fields
vary between identical runs.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import math
import os
import sys
import time

from . import net
from .config import (
    ExperimentConfig,
    build_engine_config,
    build_instance,
    load_config,
)
from .errors import ConfigError, DataError, ShapeError, VarianceForgeError
from .metrics import (
    EvalCache,
    StrategyEvaluator,
    c_cdd,
    run_fingerprint,
)
from .perturb import perturb
from .search import (
    SearchBudget,
    brute_force,
    search_ea,
    search_rl,
    search_smbo,
    search_sway,
)


def _parallelism(cfg: ExperimentConfig) -> int:
    raw = os.environ.get("VF_PARALLELISM")
    if raw is None:
        return cfg.parallelism
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise ConfigError(f"VF_PARALLELISM must be a positive integer, got {raw!r}")
    return value


def _setup(args, command: str):
    """Load config, apply flag overrides, materialize the run context."""
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    if getattr(args, "engine", None) is not None:
        cfg.engine = args.engine
    if getattr(args, "budget", None) is not None:
        cfg.budget = SearchBudget(
            max_evaluations=args.budget,
            max_generations_or_iterations=cfg.budget.max_generations_or_iterations,
        )
    out_dir = args.out or cfg.out_dir or os.path.join("runs", command)
    os.makedirs(out_dir, exist_ok=True)

    split, model_config, train_config, pool = build_instance(cfg)
    fingerprint = run_fingerprint(split, model_config, train_config, pool, cfg.master_seed)
    cache = EvalCache(fingerprint, path=os.path.join(out_dir, "cache.jsonl"))
    evaluator = StrategyEvaluator(
        split,
        model_config,
        train_config,
        cfg.master_seed,
        cache=cache,
        pool=pool,
        max_evaluations=cfg.budget.max_evaluations,
        parallelism=_parallelism(cfg),
    )
    return cfg, out_dir, split, pool, fingerprint, evaluator


def _write_summary(out_dir: str, payload: dict) -> str:
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _baseline_payload(evaluator: StrategyEvaluator) -> dict:
    score, acc = evaluator.baseline()
    params = evaluator.baseline_params()
    train_ds = evaluator.split.train
    train_score = c_cdd(params, train_ds.features, train_ds.labels)
    train_acc = float(
        (net.predict(params, train_ds.features) == train_ds.labels).mean()
    )
    return {
        "test_accuracy": acc,
        "test_ccdd": score.value,
        "train_accuracy": train_acc,
        "train_ccdd": train_score.value,
        "test_samples": score.sample_count,
        "train_samples": train_score.sample_count,
    }


def cmd_baseline(args) -> int:
    t0 = time.perf_counter()
    cfg, out_dir, split, pool, fingerprint, evaluator = _setup(args, "baseline")
    base = _baseline_payload(evaluator)
    payload = {
        "command": "baseline",
        "fingerprint": fingerprint,
        "master_seed": cfg.master_seed,
        "baseline": base,
        "timing": {"wall_seconds": time.perf_counter() - t0},
    }
    path = _write_summary(out_dir, payload)
    print(f"baseline  test acc {base['test_accuracy']:.4f}  "
          f"test gap {base['test_ccdd']:+.6f}  "
          f"train acc {base['train_accuracy']:.4f}  "
          f"train gap {base['train_ccdd']:+.6f}")
    print(f"wrote {path}")
    return 0


def cmd_grid(args) -> int:
    t0 = time.perf_counter()
    cfg, out_dir, split, pool, fingerprint, evaluator = _setup(args, "grid")
    pool_kinds = [kind for kind, _ in pool.factors]
    if args.factors:
        names = [s.strip() for s in args.factors.split(",") if s.strip()]
    else:
        names = [k.value for k in pool_kinds]
    if not 1 <= len(names) <= 4:
        raise ConfigError("grid takes between 1 and 4 factors")
    chosen = []
    for name in names:
        matches = [k for k in pool_kinds if k.value == name]
        if not matches:
            raise ConfigError(f"--factors: {name!r} is not a factor of the pool")
        kind = matches[0]
        if kind in chosen:
            raise ConfigError(f"--factors: {name!r} given twice")
        f_idx = pool_kinds.index(kind)
        if len(pool.factors[f_idx][1]) < 2:
            raise ConfigError(f"--factors: {name!r} has no on level to toggle")
        chosen.append(kind)

    on_level = {k: cfg.grid_levels[k] for k in chosen}
    combos = list(itertools.product((0, 1), repeat=len(chosen)))
    strategies = []
    for bits in combos:
        indices = [0] * pool.n_factors
        for kind, bit in zip(chosen, bits):
            if bit:
                indices[pool_kinds.index(kind)] = on_level[kind]
        strategies.append(pool.strategy_from_indices(indices))
    records = evaluator.evaluate_many(strategies)
    if len(records) < len(strategies):
        raise ConfigError(
            f"budget too small for the grid: needs {len(strategies)} evaluations"
        )

    rows = []
    by_bits = {}
    for bits, rec in zip(combos, records):
        label = "+".join(k.value for k, b in zip(chosen, bits) if b) or "(none)"
        by_bits[bits] = rec
        rows.append(
            {
                "combination": label,
                "encoding": rec.strategy.encoding_str,
                "pv": rec.pv,
                "perturbed_ccdd": None if rec.failed else rec.perturbed_ccdd.value,
                "perturbed_accuracy": rec.perturbed_accuracy,
                "failed": rec.failed,
            }
        )

    single = {}
    for kind in chosen:
        bits = tuple(1 if k == kind else 0 for k in chosen)
        single[kind] = by_bits[bits].pv
    non_additivity = []
    for size in (2, 3):
        for subset in itertools.combinations(range(len(chosen)), size):
            bits = tuple(1 if i in subset else 0 for i in range(len(chosen)))
            combined = by_bits[bits].pv
            total = sum(single[chosen[i]] for i in subset)
            non_additivity.append(
                {
                    "factors": [chosen[i].value for i in subset],
                    "combined_pv": combined,
                    "sum_single_pv": total,
                    "gap": combined - total,
                }
            )

    payload = {
        "command": "grid",
        "fingerprint": fingerprint,
        "master_seed": cfg.master_seed,
        "factors": [k.value for k in chosen],
        "baseline": _baseline_payload(evaluator),
        "rows": rows,
        "non_additivity": non_additivity,
        "evaluations_consumed": evaluator.consumed,
        "timing": {"wall_seconds": time.perf_counter() - t0},
    }
    path = _write_summary(out_dir, payload)

    width = max(len(r["combination"]) for r in rows)
    print(f"{'combination':<{width}}  {'pv':>10}  {'accuracy':>8}")
    for r in rows:
        acc = "-" if r["perturbed_accuracy"] is None else f"{r['perturbed_accuracy']:.4f}"
        print(f"{r['combination']:<{width}}  {r['pv']:>10.6f}  {acc:>8}")
    for na in non_additivity:
        print(
            f"non-additivity {'+'.join(na['factors'])}: "
            f"combined {na['combined_pv']:.6f} vs sum {na['sum_single_pv']:.6f} "
            f"(gap {na['gap']:+.6f})"
        )
    print(f"wrote {path}")
    return 0


_ENGINES = {
    "ea": search_ea,
    "rl": search_rl,
    "smbo": search_smbo,
    "sway": search_sway,
}

_ITERATION_FIELD = {"ea": "generations", "rl": "episodes", "smbo": "iterations"}


def _clamp_iterations(engine: str, econf, budget: SearchBudget):
    """The budget's iteration bound wins when tighter than the engine's own."""
    field = _ITERATION_FIELD.get(engine)
    if field is None:
        return econf
    cap = budget.max_generations_or_iterations
    if getattr(econf, field) > cap:
        econf = dataclasses.replace(econf, **{field: cap})
    return econf


def cmd_search(args) -> int:
    t0 = time.perf_counter()
    cfg, out_dir, split, pool, fingerprint, evaluator = _setup(args, "search")
    engine = cfg.engine
    ranked_head = None
    if engine == "brute":
        build_engine_config(engine, cfg.engine_config, cfg.master_seed)
        ranked, trace = brute_force(pool, evaluator, cfg.budget)
        best = ranked[0] if ranked else None
        ranked_head = [
            {"encoding": r.strategy.encoding_str, "pv": r.pv} for r in ranked[:5]
        ]
    else:
        econf = build_engine_config(engine, cfg.engine_config, cfg.master_seed)
        econf = _clamp_iterations(engine, econf, cfg.budget)
        best, trace = _ENGINES[engine](pool, evaluator, econf)
    if best is None:
        raise ConfigError("budget too small to evaluate any strategy")

    trace_path = os.path.join(out_dir, "trace.jsonl")
    with open(trace_path, "w", encoding="utf-8") as f:
        for e in trace.entries:
            f.write(
                json.dumps(
                    {
                        "step": e.step,
                        "strategy": e.strategy.encoding_str,
                        "pv": e.pv,
                        "incumbent_pv": e.incumbent_pv,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    csv_path = os.path.join(out_dir, "trace.csv")
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write("step,pv,incumbent\n")
        for e in trace.entries:
            f.write(f"{e.step},{e.pv!r},{e.incumbent_pv!r}\n")

    payload = {
        "command": "search",
        "engine": engine,
        "fingerprint": fingerprint,
        "master_seed": cfg.master_seed,
        "baseline": _baseline_payload(evaluator),
        "best": {
            "encoding": best.strategy.encoding_str,
            "description": best.strategy.describe(),
            "pv": best.pv,
            "perturbed_accuracy": best.perturbed_accuracy,
            "failed": best.failed,
        },
        "evaluations_consumed": trace.evaluations_consumed,
        "strategies_requested": trace.strategies_requested,
        "trace_length": len(trace.entries),
        "timing": {"wall_seconds": time.perf_counter() - t0},
    }
    if ranked_head is not None:
        payload["ranked_head"] = ranked_head
    path = _write_summary(out_dir, payload)

    print(
        f"{engine}: best {best.strategy.describe()} "
        f"(encoding {best.strategy.encoding_str}) pv {best.pv:.6f} "
        f"after {trace.evaluations_consumed} trainings "
        f"({trace.strategies_requested} distinct strategies)"
    )
    print(f"wrote {path}, {trace_path}, {csv_path}")
    return 0


def _parse_p_norm(raw: str) -> float:
    if raw.lower() in ("inf", "infinity"):
        return math.inf
    try:
        p = float(raw)
    except ValueError:
        raise ConfigError(f"--p-norm: expected a number or 'inf', got {raw!r}") from None
    if p < 1:
        raise ConfigError("--p-norm: must be >= 1")
    return p


def cmd_check(args) -> int:
    from .perturb import apply_fgsm, check_robustness_conditions

    cfg, out_dir, split, pool, fingerprint, evaluator = _setup(args, "check")
    ps = pool.strategy_from_encoding(args.strategy)
    p_norm = _parse_p_norm(args.p_norm)

    f_base = evaluator.baseline_params()
    bundle = perturb(
        ps,
        split.train.features,
        split.train.labels,
        split.test.features,
        split.test.labels,
        evaluator.model_config,
        evaluator.train_config,
        cfg.master_seed,
    )
    f_pert = net.train(
        split.train.features, bundle.y_train, bundle.model_config, bundle.train_config
    )
    f_pert = bundle.apply_theta_modifiers(f_pert)
    x_hat = bundle.x_test
    if bundle.fgsm_sigma is not None:
        x_hat = apply_fgsm(
            f_pert,
            x_hat,
            split.test.labels,
            bundle.fgsm_sigma,
            split.test.feature_ranges,
        )

    kwargs = {}
    if args.delta is not None:
        kwargs = {
            "train_inputs": split.train.features,
            "train_labels": split.train.labels,
            "train_labels_pert": bundle.y_train,
            "delta": args.delta,
        }
    verdict = check_robustness_conditions(
        f_base,
        f_pert,
        split.test.features,
        x_hat,
        sigma=args.sigma,
        eta=args.eta,
        p_norm=p_norm,
        **kwargs,
    )
    payload = {
        "command": "check",
        "fingerprint": fingerprint,
        "strategy": ps.encoding_str,
        "description": ps.describe(),
        "verdict": verdict.to_dict(),
    }
    print(json.dumps(payload["verdict"], indent=2, sort_keys=True))
    path = _write_summary(out_dir, payload)
    print(f"wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="variance-forge",
        description="Search for training/inference perturbations that maximize "
        "model performance variance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--out", default=None, help="override output directory")

    p = sub.add_parser("baseline", help="train and score the clean model")
    common(p)

    p = sub.add_parser("grid", help="factorial on/off sweep over chosen factors")
    common(p)
    p.add_argument(
        "--factors",
        default=None,
        help="comma-separated factor kinds (at most 4; default: all pool factors)",
    )

    p = sub.add_parser("search", help="run a search engine over the pool")
    common(p)
    p.add_argument(
        "--engine",
        choices=("brute", "ea", "rl", "smbo", "sway"),
        default=None,
        help="override the configured engine",
    )
    p.add_argument(
        "--budget", type=int, default=None, help="override max evaluations"
    )

    p = sub.add_parser("check", help="robustness-condition diagnostics")
    common(p)
    p.add_argument("--strategy", required=True, help="strategy encoding, e.g. 1.0.2")
    p.add_argument("--sigma", type=float, required=True, help="input-distance premise")
    p.add_argument("--eta", type=float, required=True, help="parameter-distance premise")
    p.add_argument("--delta", type=float, default=None, help="output-distance premise")
    p.add_argument("--p-norm", default="inf", help="distance norm (default inf)")
    return parser


_COMMANDS = {
    "baseline": cmd_baseline,
    "grid": cmd_grid,
    "search": cmd_search,
    "check": cmd_check,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataError, ShapeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except VarianceForgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
