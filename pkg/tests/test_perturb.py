"""Factor application: surfaces, seeds, bounds, and the strategy operator."""

import numpy as np
import pytest

from variance_forge import data as data_mod
from variance_forge import net
from variance_forge.errors import ConfigError, DataError
from variance_forge.perturb import (
    APPLICATION_ORDER,
    FactorKind,
    FactorLevel,
    PerturbationPool,
    PerturbationStrategy,
    TauMatrix,
    ThetaModifier,
    apply_bias_mod,
    apply_fc_layer_mod,
    apply_fgsm,
    apply_label_flip,
    apply_label_noise,
    apply_ood_shift,
    apply_seed_override,
    apply_weight_mod,
    check_robustness_conditions,
    perturb,
    pool_size,
)
from variance_forge.rng import SplitMix64, derive_seed


def _pool333():
    return PerturbationPool.from_levels(
        [
            (FactorKind.ADVERSARIAL, [0, 0.003, 0.05]),
            (FactorKind.LABEL_FLIP, [0, 0.1, 0.2]),
            (FactorKind.WEIGHT_MOD, [0, 0.25, 0.5]),
        ]
    )


def _params(widths=(3, 4, 2), seed=0):
    mc = net.ModelConfig(widths[0], tuple(widths[1:-1]), widths[-1], init_seed=seed)
    return net.init_parameters(mc)


def _batch(n, d, m, seed):
    gen = SplitMix64(seed)
    x = gen.normal_array((n, d))
    y = np.array([gen.randint(m) for _ in range(n)], dtype=np.int64)
    return x, y


# ---------------------------------------------------------------- pools


def test_pool_size_and_counts():
    pool = _pool333()
    assert pool.n_factors == 3
    assert pool.level_counts == (3, 3, 3)
    assert pool.size == 27
    assert pool_size(pool) == 27


def test_strategy_at_mixed_radix_last_factor_fastest():
    pool = _pool333()
    assert pool.strategy_at(0).level_indices == (0, 0, 0)
    assert pool.strategy_at(1).level_indices == (0, 0, 1)
    assert pool.strategy_at(3).level_indices == (0, 1, 0)
    assert pool.strategy_at(5).level_indices == (0, 1, 2)
    assert pool.strategy_at(26).level_indices == (2, 2, 2)
    with pytest.raises(ConfigError):
        pool.strategy_at(27)


def test_encodings_are_unique_and_round_trip():
    pool = _pool333()
    seen = set()
    for ps in pool.iter_strategies():
        seen.add(ps.encoding)
        assert pool.strategy_from_encoding(ps.encoding_str) == ps
    assert len(seen) == 27


def test_strategy_equality_and_hash():
    pool = _pool333()
    a = pool.strategy_at(5)
    b = pool.strategy_from_indices((0, 1, 2))
    assert a == b
    assert hash(a) == hash(b)
    assert a != pool.strategy_at(6)
    assert len({a, b}) == 1


def test_all_off_strategy():
    pool = _pool333()
    off = pool.all_off()
    assert off.is_all_off
    assert off.encoding_str == "0.0.0"
    assert off.describe() == "all-off"
    assert not pool.strategy_at(1).is_all_off


def test_malformed_encoding_rejected():
    pool = _pool333()
    with pytest.raises(ConfigError):
        pool.strategy_from_encoding("0.x.0")
    with pytest.raises(ConfigError):
        pool.strategy_from_encoding("0.0")
    with pytest.raises(ConfigError):
        pool.strategy_from_encoding("0.0.9")


def test_pool_validation():
    with pytest.raises(ConfigError):
        PerturbationPool.from_levels([])
    with pytest.raises(ConfigError):
        PerturbationPool.from_levels(
            [
                (FactorKind.ADVERSARIAL, [0, 0.1]),
                (FactorKind.ADVERSARIAL, [0, 0.2]),
            ]
        )
    with pytest.raises(ConfigError):
        # level 0 must be off
        PerturbationPool.from_levels([(FactorKind.ADVERSARIAL, [0.1, 0.2])])
    with pytest.raises(ConfigError):
        # two off levels
        PerturbationPool.from_levels([(FactorKind.LABEL_NOISE, [0, 0, 0.5])])


def test_pool_architecture_validation():
    mc = net.ModelConfig(2, (4,), 3)
    with pytest.raises(ConfigError):
        PerturbationPool.from_levels([(FactorKind.FC_LAYER_MOD, [0, -4])], mc)
    PerturbationPool.from_levels([(FactorKind.FC_LAYER_MOD, [0, -3])], mc)


def test_factor_level_validation():
    with pytest.raises(ConfigError):
        FactorLevel(FactorKind.ADVERSARIAL, 1, -0.1)
    with pytest.raises(ConfigError):
        FactorLevel(FactorKind.LABEL_NOISE, 1, 1.5)
    with pytest.raises(ConfigError):
        FactorLevel(FactorKind.FC_LAYER_MOD, 1, 2.5)
    with pytest.raises(ConfigError):
        FactorLevel(FactorKind.SEED_OVERRIDE, 1, "seven")
    # off-level spellings
    assert FactorLevel(FactorKind.SEED_OVERRIDE, 0, None).off
    assert FactorLevel(FactorKind.LABEL_FLIP, 0, TauMatrix.identity(3)).off
    assert not FactorLevel(FactorKind.LABEL_FLIP, 1, 0.2).off


def test_tau_matrix_validation():
    with pytest.raises(ConfigError):
        TauMatrix(np.ones((2, 3)))
    with pytest.raises(ConfigError):
        TauMatrix(np.array([[0.5, 0.6], [0.5, 0.5]]))
    with pytest.raises(ConfigError):
        TauMatrix(np.array([[1.5, -0.5], [0.0, 1.0]]))
    t = TauMatrix.uniform_flip(3, 0.2)
    assert np.allclose(t.matrix.sum(axis=1), 1.0)
    assert np.allclose(np.diag(t.matrix), 0.8)
    assert t.matrix[0, 1] == pytest.approx(0.1)
    assert TauMatrix.identity(4).is_identity
    assert not t.is_identity


# ---------------------------------------------------------------- fgsm


def test_fgsm_sigma_zero_is_a_copy():
    params = _params()
    x, y = _batch(6, 3, 2, 1)
    out = apply_fgsm(params, x, y, 0.0)
    assert np.array_equal(out, x)
    assert out is not x


def test_fgsm_ball_bound_is_exact():
    params = _params(seed=2)
    x, y = _batch(40, 3, 2, 3)
    for sigma in (0.003, 0.05, 0.7):
        out = apply_fgsm(params, x, y, sigma)
        diff = np.abs(out - x)
        assert float(diff.max()) <= sigma
        # non-zero-gradient components sit on the ball boundary
        _, gx = net.backward(params, x, y)
        moved = gx != 0.0
        assert np.all(diff[moved] >= sigma * (1 - 1e-12))


def test_fgsm_zero_gradient_components_unchanged():
    params = _params(widths=(3, 4, 2), seed=4)
    # Kill feature 2's influence: its gradient is exactly zero everywhere.
    params.weights[0][:, 2] = 0.0
    x, y = _batch(10, 3, 2, 5)
    out = apply_fgsm(params, x, y, 0.05)
    assert np.array_equal(out[:, 2], x[:, 2])
    _, gx = net.backward(params, x, y)
    assert np.all(gx[:, 2] == 0.0)


def test_fgsm_increases_loss():
    params = _params(seed=6)
    x, y = _batch(30, 3, 2, 7)
    base = net.loss(net.forward(params, x), y)
    attacked = net.loss(net.forward(params, apply_fgsm(params, x, y, 0.05)), y)
    assert attacked > base


def test_fgsm_respects_feature_ranges():
    params = _params(seed=8)
    x, y = _batch(25, 3, 2, 9)
    ranges = np.stack([x.min(axis=0), x.max(axis=0)], axis=1)
    sigma = 0.5
    out = apply_fgsm(params, x, y, sigma, feature_ranges=ranges)
    assert np.all(out >= ranges[:, 0])
    assert np.all(out <= ranges[:, 1])
    assert float(np.abs(out - x).max()) <= sigma


def test_fgsm_rejects_negative_sigma():
    params = _params()
    x, y = _batch(4, 3, 2, 10)
    with pytest.raises(ConfigError):
        apply_fgsm(params, x, y, -0.1)


# ---------------------------------------------------------------- ood


def test_ood_magnitude_zero_is_a_copy():
    x, _ = _batch(8, 4, 2, 11)
    out = apply_ood_shift(x, 0.0, seed=1)
    assert np.array_equal(out, x)
    assert out is not x


def test_ood_pure_shift_has_exact_norm():
    x, _ = _batch(50, 4, 2, 12)
    for magnitude in (0.1, 1.0, 3.5):
        out = apply_ood_shift(x, magnitude, seed=13, include_scale=False)
        delta = out - x
        # one shared shift vector
        assert np.allclose(delta, delta[0], atol=0)
        assert float(np.linalg.norm(delta[0])) == pytest.approx(magnitude, abs=1e-9)


def test_ood_matches_reconstructed_draws():
    x, _ = _batch(20, 3, 2, 14)
    magnitude, seed = 0.4, 21
    out = apply_ood_shift(x, magnitude, seed)

    gen = SplitMix64(derive_seed(seed, "ood_shift"))
    direction = np.array([gen.normal() for _ in range(3)])
    shift = direction * (magnitude / np.linalg.norm(direction))
    scale = np.array([1.0 + magnitude * (2.0 * gen.uniform() - 1.0) for _ in range(3)])
    assert np.array_equal(out, x * scale + shift)
    assert np.all(np.abs(scale - 1.0) <= magnitude)


def test_ood_determinism_and_seed_sensitivity():
    x, _ = _batch(10, 3, 2, 15)
    a = apply_ood_shift(x, 0.5, seed=3)
    b = apply_ood_shift(x, 0.5, seed=3)
    c = apply_ood_shift(x, 0.5, seed=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ConfigError):
        apply_ood_shift(x, -0.5, seed=3)


# ---------------------------------------------------------------- labels


def test_label_flip_identity_changes_nothing():
    y = np.array([0, 1, 2, 1, 0] * 40)
    out = apply_label_flip(y, TauMatrix.identity(3), seed=5)
    assert np.array_equal(out, y)


def test_label_flip_rate_one_changes_everything():
    y = np.array([0, 1, 2] * 50)
    out = apply_label_flip(y, TauMatrix.uniform_flip(3, 1.0), seed=6)
    assert np.all(out != y)
    assert set(out.tolist()) <= {0, 1, 2}


def test_label_flip_fraction_near_rate():
    y = np.zeros(1000, dtype=np.int64)
    y[::3] = 1
    y[1::3] = 2
    for seed in range(5):
        out = apply_label_flip(y, TauMatrix.uniform_flip(3, 0.2), seed=seed)
        frac = float((out != y).mean())
        assert 0.16 <= frac <= 0.24


def test_label_flip_matches_inverse_cdf_walk():
    y = np.array([2, 0, 1, 1, 2, 0, 0, 1], dtype=np.int64)
    tau = TauMatrix(
        np.array(
            [
                [0.7, 0.2, 0.1],
                [0.0, 0.5, 0.5],
                [0.3, 0.3, 0.4],
            ]
        )
    )
    seed = 9
    out = apply_label_flip(y, tau, seed)

    cum = np.cumsum(tau.matrix, axis=1)
    cum[:, -1] = 1.0
    gen = SplitMix64(derive_seed(seed, "label_flip"))
    expected = []
    for lab in y:
        u = gen.uniform()
        k = 0
        while u >= cum[lab][k]:
            k += 1
        expected.append(k)
    assert out.tolist() == expected


def test_label_flip_rejects_out_of_range_labels():
    with pytest.raises(DataError):
        apply_label_flip(np.array([0, 3]), TauMatrix.identity(3), seed=0)


def test_label_noise_rate_edges():
    y = np.array([0, 1, 2, 3] * 100)
    assert np.array_equal(apply_label_noise(y, 0.0, 1, 4), y)
    flipped = apply_label_noise(y, 1.0, 1, 4)
    assert np.all(flipped != y)
    assert flipped.min() >= 0 and flipped.max() < 4


def test_label_noise_fraction_near_rate():
    y = np.tile(np.arange(4), 250)
    for seed in range(5):
        out = apply_label_noise(y, 0.3, seed, 4)
        frac = float((out != y).mean())
        assert 0.25 <= frac <= 0.35


def test_label_noise_validation():
    y = np.array([0, 1])
    with pytest.raises(ConfigError):
        apply_label_noise(y, 1.5, 0, 2)
    with pytest.raises(ConfigError):
        apply_label_noise(y, 0.5, 0, 1)
    with pytest.raises(DataError):
        apply_label_noise(np.array([0, 2]), 0.5, 0, 2)


# ---------------------------------------------------------------- theta


def test_weight_mod_scale_zero_is_identity_copy():
    params = _params(seed=20)
    out = apply_weight_mod(params, 0.0, seed=1)
    assert out.same_values(params)
    assert out.weights[0] is not params.weights[0]


def test_weight_mod_touches_exactly_one_matrix():
    params = _params(widths=(4, 6, 5, 3), seed=21)
    out = apply_weight_mod(params, 0.5, seed=2)
    changed = [
        i
        for i in range(params.n_layers)
        if not np.array_equal(out.weights[i], params.weights[i])
    ]
    assert len(changed) == 1
    for i in range(params.n_layers):
        assert np.array_equal(out.biases[i], params.biases[i])
    # the source is never mutated
    assert params.same_values(_params(widths=(4, 6, 5, 3), seed=21))


def test_weight_mod_noise_magnitude_tracks_scale():
    mc = net.ModelConfig(60, (), 50, init_seed=22)
    params = net.init_parameters(mc)
    scale = 0.25
    out = apply_weight_mod(params, scale, seed=3)
    diff = out.weights[0] - params.weights[0]
    expected_sd = scale * float(params.weights[0].std())
    assert float(diff.std()) == pytest.approx(expected_sd, rel=0.15)


def test_weight_mod_degenerate_spread_falls_back_to_unit():
    mc = net.ModelConfig(40, (), 40)
    params = net.Parameters(
        [np.zeros((40, 40))], [np.zeros(40)], mc
    )
    out = apply_weight_mod(params, 0.5, seed=4)
    diff = out.weights[0] - params.weights[0]
    # zero matrix has zero std; noise falls back to std = scale * 1.0
    assert float(diff.std()) == pytest.approx(0.5, rel=0.15)


def test_bias_mod_touches_exactly_one_vector():
    params = _params(widths=(4, 6, 5, 3), seed=23)
    out = apply_bias_mod(params, 0.5, seed=5)
    changed = [
        i
        for i in range(params.n_layers)
        if not np.array_equal(out.biases[i], params.biases[i])
    ]
    assert len(changed) == 1
    for i in range(params.n_layers):
        assert np.array_equal(out.weights[i], params.weights[i])


def test_theta_mod_rejects_negative_scale():
    params = _params()
    with pytest.raises(ConfigError):
        apply_weight_mod(params, -0.1, seed=0)
    with pytest.raises(ConfigError):
        apply_bias_mod(params, -0.1, seed=0)


def test_fc_layer_mod():
    mc = net.ModelConfig(2, (8, 4), 3)
    wider = apply_fc_layer_mod(mc, 4)
    assert wider.hidden_layers == (12, 4)
    assert apply_fc_layer_mod(mc, 0) == mc
    narrow = apply_fc_layer_mod(mc, -7)
    assert narrow.hidden_layers == (1, 4)
    with pytest.raises(ConfigError):
        apply_fc_layer_mod(mc, -8)
    flat = net.ModelConfig(2, (), 3)
    assert apply_fc_layer_mod(flat, 5) == flat


def test_seed_override_replaces_both_seeds():
    mc = net.ModelConfig(2, (4,), 3, init_seed=1)
    tc = net.TrainConfig(10, 8, 0.1, shuffle_seed=2)
    mc2, tc2 = apply_seed_override(mc, tc, 99)
    assert mc2.init_seed == 99 and tc2.shuffle_seed == 99
    assert mc2.hidden_layers == mc.hidden_layers
    assert tc2.epochs == tc.epochs


# ---------------------------------------------------------------- perturb()


def _blob_instance():
    ds = data_mod.gen_blobs(3, 30, 2, 0.25, seed=30)
    sp = data_mod.split(ds, 0.25, seed=30)
    mc = net.ModelConfig(2, (8,), 3)
    tc = net.TrainConfig(20, 16, 0.1)
    return sp, mc, tc


def _bundle(ps, sp, mc, tc, master_seed=2):
    return perturb(
        ps,
        sp.train.features,
        sp.train.labels,
        sp.test.features,
        sp.test.labels,
        mc,
        tc,
        master_seed,
    )


def test_perturb_all_off_returns_the_originals():
    sp, mc, tc = _blob_instance()
    pool = _pool333()
    bundle = _bundle(pool.all_off(), sp, mc, tc)
    assert bundle.x_test is sp.test.features
    assert bundle.y_train is sp.train.labels
    assert bundle.model_config == mc
    assert bundle.train_config == tc
    assert bundle.theta_modifiers == ()
    assert bundle.fgsm_sigma is None


def test_perturb_touches_only_the_factor_surface():
    sp, mc, tc = _blob_instance()
    pool = _pool333()
    flip_only = pool.strategy_from_indices((0, 2, 0))
    bundle = _bundle(flip_only, sp, mc, tc)
    assert bundle.x_test is sp.test.features
    assert not np.array_equal(bundle.y_train, sp.train.labels)
    assert bundle.fgsm_sigma is None

    adv_only = pool.strategy_from_indices((2, 0, 0))
    bundle = _bundle(adv_only, sp, mc, tc)
    # the attack is deferred until the model exists
    assert bundle.x_test is sp.test.features
    assert bundle.y_train is sp.train.labels
    assert bundle.fgsm_sigma == 0.05

    wmod_only = pool.strategy_from_indices((0, 0, 1))
    bundle = _bundle(wmod_only, sp, mc, tc)
    assert bundle.theta_modifiers == (
        ThetaModifier(
            FactorKind.WEIGHT_MOD,
            0.25,
            derive_seed(2, "weight_mod", wmod_only.encoding_str),
        ),
    )


def test_perturb_child_seeds_depend_on_whole_encoding():
    sp, mc, tc = _blob_instance()
    pool = _pool333()
    a = _bundle(pool.strategy_from_indices((0, 2, 0)), sp, mc, tc)
    b = _bundle(pool.strategy_from_indices((1, 2, 0)), sp, mc, tc)
    # same flip level, different strategy: different child stream
    assert not np.array_equal(a.y_train, b.y_train)


def test_perturb_is_deterministic():
    sp, mc, tc = _blob_instance()
    pool = _pool333()
    ps = pool.strategy_from_indices((1, 2, 1))
    a = _bundle(ps, sp, mc, tc)
    b = _bundle(ps, sp, mc, tc)
    assert np.array_equal(a.y_train, b.y_train)
    assert a.theta_modifiers == b.theta_modifiers
    assert a.fgsm_sigma == b.fgsm_sigma


def test_perturb_config_factors():
    sp, mc, tc = _blob_instance()
    pool = PerturbationPool.from_levels(
        [
            (FactorKind.FC_LAYER_MOD, [0, 4]),
            (FactorKind.SEED_OVERRIDE, [None, 77]),
        ],
        mc,
    )
    bundle = _bundle(pool.strategy_from_indices((1, 1)), sp, mc, tc)
    assert bundle.model_config.hidden_layers == (12,)
    assert bundle.model_config.init_seed == 77
    assert bundle.train_config.shuffle_seed == 77


def test_bundle_rejects_non_theta_modifier():
    from variance_forge.perturb import PerturbedBundle

    sp, mc, tc = _blob_instance()
    bundle = PerturbedBundle(
        x_test=sp.test.features,
        y_train=sp.train.labels,
        model_config=mc,
        train_config=tc,
        theta_modifiers=(ThetaModifier(FactorKind.ADVERSARIAL, 0.1, 0),),
    )
    with pytest.raises(ConfigError):
        bundle.apply_theta_modifiers(net.init_parameters(mc))


def test_application_order_covers_every_kind():
    assert set(APPLICATION_ORDER) == set(FactorKind)
    # input attack runs last, against the final parameters
    assert APPLICATION_ORDER[-1] == FactorKind.ADVERSARIAL


# ---------------------------------------------------------------- robustness


def test_robustness_identical_models_are_robust():
    params = _params(seed=40)
    x, y = _batch(12, 3, 2, 41)
    v = check_robustness_conditions(params, params.copy(), x, x.copy(), 0.1, 0.1)
    assert v.input_premise and v.input_robust
    assert v.config_distance == 0.0
    assert v.config_premise and v.config_robust
    assert v.to_dict()["input"]["violations"] == 0


def test_robustness_premise_fails_when_inputs_move_too_far():
    params = _params(seed=42)
    x, y = _batch(12, 3, 2, 43)
    v = check_robustness_conditions(params, params, x, x + 1.0, 0.5, 0.1)
    assert not v.input_premise


def test_robustness_architecture_mismatch_is_infinite_distance():
    a = _params(widths=(3, 4, 2), seed=44)
    b = _params(widths=(3, 6, 2), seed=44)
    x, _ = _batch(6, 3, 2, 45)
    v = check_robustness_conditions(a, b, x, x, 0.1, 1e9)
    assert v.config_distance == np.inf
    assert not v.config_premise


def test_robustness_attack_exposes_fragility():
    ds = data_mod.gen_blobs(3, 40, 2, 0.25, seed=46)
    params = net.train(
        ds.features,
        ds.labels,
        net.ModelConfig(2, (8,), 3),
        net.TrainConfig(60, 16, 0.1),
    )
    sigma = 0.3
    x_hat = apply_fgsm(params, ds.features, ds.labels, sigma)
    v = check_robustness_conditions(
        params, params, ds.features, x_hat, sigma * 1.01, 0.1
    )
    assert v.input_premise  # attack stayed inside the (slightly padded) ball
    assert not v.input_robust  # but it flipped predictions
    assert int((~v.input_ok).sum()) > 0


def test_robustness_output_condition_fields():
    ds = data_mod.gen_blobs(2, 30, 2, 0.25, seed=47)
    params = net.train(
        ds.features,
        ds.labels,
        net.ModelConfig(2, (8,), 2),
        net.TrainConfig(40, 16, 0.1),
    )
    v = check_robustness_conditions(
        params,
        params,
        ds.features,
        ds.features,
        0.1,
        0.1,
        train_inputs=ds.features,
        train_labels=ds.labels,
        train_labels_pert=ds.labels,
        delta=2.0,
    )
    assert v.label_premise  # inf-norm distance to a one-hot row is < 2 always
    assert v.output_robust == bool(v.output_ok.all())
    assert "output" in v.to_dict()


def test_robustness_output_condition_needs_train_arrays():
    params = _params(seed=48)
    x, _ = _batch(5, 3, 2, 49)
    with pytest.raises(ConfigError):
        check_robustness_conditions(params, params, x, x, 0.1, 0.1, delta=0.5)
