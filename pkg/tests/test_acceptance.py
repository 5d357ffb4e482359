"""End-to-end acceptance checks.

Each test emits one `[criterion N] PASS/FAIL` line with the measured
values. The lines are replayed in the terminal summary (see conftest),
so every run reports all nine verdicts even though pytest captures
output from the tests themselves.
"""

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from variance_forge import data as data_mod
from variance_forge import metrics, net
from variance_forge.cli import main as cli_main
from variance_forge.perturb import (
    TauMatrix,
    apply_fgsm,
    apply_label_flip,
    apply_seed_override,
)
from variance_forge.rng import SplitMix64
from variance_forge.search import (
    EaConfig,
    RlConfig,
    SmboConfig,
    SwayConfig,
    search_ea,
    search_rl,
    search_smbo,
    search_sway,
)

from _criteria import report as _report
from _gradcheck import fd_max_rel_error

REPO_ROOT = Path(__file__).resolve().parents[1]
STANDARD_CONFIG = REPO_ROOT / "configs" / "standard.json"


def test_criterion_1_gradients_match_finite_differences():
    t0 = time.perf_counter()
    gen = SplitMix64(101)
    worst = 0.0
    for _ in range(10):
        depth = 1 + gen.randint(3)
        hidden = tuple(1 + gen.randint(20) for _ in range(depth))
        mc = net.ModelConfig(
            input_dim=2 + gen.randint(5),
            hidden_layers=hidden,
            output_dim=2 + gen.randint(4),
            activation=("relu", "tanh")[gen.randint(2)],
            init_scheme=("kaiming", "xavier")[gen.randint(2)],
            init_seed=gen.randint(10_000),
        )
        params = net.init_parameters(mc)
        # fresh inits keep biases at zero; a dead relu layer then parks the
        # next preactivation exactly on the kink where the gradient is not
        # defined. Jitter the biases so every net sits at a generic point.
        for b in params.biases:
            b += 0.05 * gen.normal_array(b.shape) + 0.01
        rows = 3 + gen.randint(4)
        x = gen.normal_array((rows, mc.input_dim))
        y = np.array([gen.randint(mc.output_dim) for _ in range(rows)], dtype=np.int64)
        worst = max(worst, fd_max_rel_error(params, x, y, h=1e-5))
    elapsed = time.perf_counter() - t0
    _report(
        1,
        worst < 1e-4 and elapsed < 5.0,
        f"max relative gradient error {worst:.3e} over 10 nets "
        f"(limit 1e-4) in {elapsed:.2f}s (limit 5s)",
    )


def test_criterion_2_ccdd_contract():
    t0 = time.perf_counter()
    err_one = abs(
        metrics.ccdd_from_probs(np.array([[0.2, 0.8]]), np.array([0])).value + 0.6
    )
    err_two = abs(
        metrics.ccdd_from_probs(
            np.array([[0.3, 0.7], [0.1, 0.9]]), np.array([0, 1])
        ).value
        + 0.2
    )

    gen = SplitMix64(7)
    checked = 0
    properties_ok = True
    while checked < 200:
        n = 1 + gen.randint(40)
        m = 2 + gen.randint(5)
        raw = np.array([[gen.uniform() + 1e-9 for _ in range(m)] for _ in range(n)])
        probs = raw / raw.sum(axis=1, keepdims=True)
        pred = np.argmax(probs, axis=1)
        # skip argmax ties; the zero-iff-correct law is stated for the
        # generic tie-free case
        sorted_rows = np.sort(probs, axis=1)
        if np.any(sorted_rows[:, -1] - sorted_rows[:, -2] < 1e-9):
            continue
        if gen.uniform() < 0.3:
            desired = pred.copy()
        else:
            desired = np.array([gen.randint(m) for _ in range(n)], dtype=np.int64)
        score = metrics.ccdd_from_probs(probs, desired)
        acc = float(np.mean(pred == desired))
        if not (-1.0 <= score.value <= 0.0):
            properties_ok = False
        if (score.value == 0.0) != (acc == 1.0):
            properties_ok = False
        checked += 1
    elapsed = time.perf_counter() - t0
    _report(
        2,
        err_one <= 1e-12 and err_two <= 1e-12 and properties_ok and elapsed < 1.0,
        f"hand-case errors {err_one:.1e}/{err_two:.1e} (limit 1e-12), "
        f"range and zero-iff-correct held on {checked} random matrices, "
        f"in {elapsed:.2f}s (limit 1s)",
    )


def test_criterion_3_all_off_strategy_has_zero_pv(standard):
    t0 = time.perf_counter()
    ev = standard.evaluator(cache=False)
    record = ev.evaluate(standard.pool.all_off())
    elapsed = time.perf_counter() - t0
    exact_zero = record.pv == 0.0
    same_score = record.perturbed_ccdd.value == record.baseline_ccdd.value
    _report(
        3,
        exact_zero and same_score and elapsed < 10.0,
        f"all-off pv {record.pv!r} (bitwise zero: {exact_zero}), "
        f"perturbed ccdd == baseline ccdd: {same_score}, "
        f"in {elapsed:.2f}s (limit 10s)",
    )


def test_criterion_4_fgsm_respects_the_ball(standard):
    t0 = time.perf_counter()
    params = net.init_parameters(standard.model_config)
    x = standard.split.test.features
    y = standard.split.test.labels
    max_norms = {}
    ok = True
    for sigma in (0.0, 0.003, 0.05):
        x_hat = apply_fgsm(params, x, y, sigma)
        norm = float(np.max(np.abs(x_hat - x))) if len(x) else 0.0
        max_norms[sigma] = norm
        if norm > sigma:
            ok = False
    elapsed = time.perf_counter() - t0
    norms = ", ".join(f"sigma={s:g}: {v:.17g}" for s, v in max_norms.items())
    _report(
        4,
        ok and elapsed < 5.0,
        f"max per-sample Linf distances [{norms}] all <= sigma exactly, "
        f"in {elapsed:.2f}s (limit 5s)",
    )


def test_criterion_5_engines_match_the_brute_force_oracle(standard, standard_oracle):
    t0 = time.perf_counter()
    optimum = standard_oracle[0].pv
    top10_cut = standard_oracle[2].pv  # ceil(0.10 * 27) = 3 -> third best
    top15_cut = standard_oracle[4].pv  # ceil(0.15 * 27) = 5 -> fifth best
    seeds = range(20)

    ea_hits = 0
    for seed in seeds:
        best, _ = search_ea(
            standard.pool, standard.evaluator(max_evaluations=60), EaConfig(seed=seed)
        )
        ea_hits += best is not None and best.pv == optimum

    smbo_hits = 0
    for seed in seeds:
        best, _ = search_smbo(
            standard.pool, standard.evaluator(max_evaluations=60), SmboConfig(seed=seed)
        )
        smbo_hits += best is not None and best.pv == optimum

    rl_hits = 0
    for seed in seeds:
        best, _ = search_rl(
            standard.pool, standard.evaluator(max_evaluations=60), RlConfig(seed=seed)
        )
        rl_hits += best is not None and best.pv >= top10_cut

    sway_hits = 0
    sway_max_requested = 0
    for seed in seeds:
        ev = standard.evaluator(max_evaluations=60)
        best, _ = search_sway(standard.pool, ev, SwayConfig(seed=seed))
        requested = len(ev.strategies_requested)
        sway_max_requested = max(sway_max_requested, requested)
        sway_hits += best is not None and best.pv >= top15_cut and requested <= 12

    elapsed = time.perf_counter() - t0
    ok = (
        ea_hits >= 18
        and smbo_hits >= 16
        and rl_hits >= 16
        and sway_hits >= 15
        and sway_max_requested <= 12
        and elapsed < 600.0
    )
    _report(
        5,
        ok,
        f"EA optimum {ea_hits}/20 (need 18), SMBO optimum {smbo_hits}/20 (need 16), "
        f"RL top-10% {rl_hits}/20 (need 16), SWAY top-15% {sway_hits}/20 (need 15) "
        f"with max {sway_max_requested} strategies requested (limit 12), "
        f"in {elapsed:.1f}s (limit 600s)",
    )


def test_criterion_6_factor_grid_shows_non_additivity(tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "grid"
    code = cli_main(["grid", "--config", str(STANDARD_CONFIG), "--out", str(out)])
    summary = json.loads((out / "summary.json").read_text())
    rows = summary["rows"]
    gaps = [abs(entry["gap"]) for entry in summary["non_additivity"]]
    biggest = max(gaps) if gaps else 0.0
    elapsed = time.perf_counter() - t0
    _report(
        6,
        code == 0 and len(rows) == 8 and biggest > 0.01 and elapsed < 120.0,
        f"exit {code}, {len(rows)} grid rows, largest |combined - sum of singles| "
        f"gap {biggest:.6f} (need > 0.01), in {elapsed:.1f}s (limit 120s)",
    )


def test_criterion_7_parallelism_does_not_change_results(tmp_path):
    t0 = time.perf_counter()
    traces = {}
    codes = {}
    for workers in (1, 4):
        out = tmp_path / f"p{workers}"
        env = dict(os.environ, VF_PARALLELISM=str(workers))
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "variance_forge.cli",
                "search",
                "--config",
                str(STANDARD_CONFIG),
                "--out",
                str(out),
            ],
            env=env,
            capture_output=True,
            cwd=tmp_path,
        )
        codes[workers] = proc.returncode
        traces[workers] = (out / "trace.jsonl").read_bytes()
    identical = traces[1] == traces[4]
    elapsed = time.perf_counter() - t0
    _report(
        7,
        codes == {1: 0, 4: 0} and identical and elapsed < 120.0,
        f"exit codes {codes[1]}/{codes[4]}, trace.jsonl byte-identical at "
        f"VF_PARALLELISM 1 vs 4: {identical} ({len(traces[1])} bytes), "
        f"in {elapsed:.1f}s (limit 120s)",
    )


def test_criterion_8_label_flip_statistics():
    t0 = time.perf_counter()
    label_gen = SplitMix64(123)
    y = np.array([label_gen.randint(3) for _ in range(1000)], dtype=np.int64)
    tau = TauMatrix.uniform_flip(3, 0.2)
    in_band = 0
    fractions = []
    for seed in range(50):
        flipped = apply_label_flip(y, tau, seed)
        frac = float(np.mean(flipped != y))
        fractions.append(frac)
        in_band += 0.16 <= frac <= 0.24
    identity_flips = sum(
        int(np.sum(apply_label_flip(y, TauMatrix.identity(3), seed) != y))
        for seed in range(5)
    )
    elapsed = time.perf_counter() - t0
    _report(
        8,
        in_band >= 48 and identity_flips == 0 and elapsed < 5.0,
        f"{in_band}/50 seeds flipped a fraction in [0.16, 0.24] "
        f"(min {min(fractions):.3f}, max {max(fractions):.3f}, need 48), "
        f"identity tau flips {identity_flips}, in {elapsed:.2f}s (limit 5s)",
    )


def test_criterion_9_training_seed_alone_moves_accuracy(standard):
    t0 = time.perf_counter()
    train = standard.split.train
    test = standard.split.test
    accuracies = set()
    for seed in range(10):
        mc, tc = apply_seed_override(standard.model_config, standard.train_config, seed)
        params = net.train(train.features, train.labels, mc, tc)
        accuracies.add(metrics.accuracy(params, test.features, test.labels))
    elapsed = time.perf_counter() - t0
    _report(
        9,
        len(accuracies) >= 2 and elapsed < 60.0,
        f"{len(accuracies)} distinct test accuracies across 10 seed overrides "
        f"(need >= 2): {sorted(accuracies)}, in {elapsed:.1f}s (limit 60s)",
    )
