"""Training loop: determinism, checkpoints, divergence, persistence, generation."""

import numpy as np
import pytest

from conftest import toy_gan_config
from esgan.data import Scaling
from esgan.errors import ConfigError, TrainingDiverged, UntrainedModel
from esgan.gan.adam import AdamParams
from esgan.gan.config import GanConfig
from esgan.gan.model import (
    GanModel,
    build_gan_networks,
    generate_scenarios,
    load_model,
    sample_latent,
    save_model,
)
from esgan.gan.train import train_gan
from esgan.validation import make_checkpoint_evaluator


class TestSampleLatent:
    def test_moments(self):
        cfg = toy_gan_config(latent_dim=20, latent_std=0.02)
        rng = np.random.default_rng(0)
        z = sample_latent(100_000, cfg, rng)
        assert z.shape == (100_000, 20)
        # mean within 3 standard errors of zero
        assert abs(z.mean()) < 3.0 * 0.02 / np.sqrt(z.size)
        assert z.std() == pytest.approx(0.02, rel=1e-2)

    def test_deterministic_for_same_seed(self):
        cfg = toy_gan_config()
        a = sample_latent(10, cfg, np.random.default_rng(42))
        b = sample_latent(10, cfg, np.random.default_rng(42))
        np.testing.assert_array_equal(a, b)

    def test_zero_std_degenerate(self):
        cfg = toy_gan_config(latent_std=0.0)
        z = sample_latent(5, cfg, np.random.default_rng(0))
        np.testing.assert_array_equal(z, np.zeros((5, cfg.latent_dim)))

    def test_positive_count_required(self):
        with pytest.raises(ValueError):
            sample_latent(0, toy_gan_config(), np.random.default_rng(0))


class TestDefaults:
    def test_production_configuration(self):
        cfg = GanConfig()
        assert cfg.n_layers_g == 4 and cfg.n_layers_d == 4
        assert cfg.neurons_d == 400 and cfg.neurons_g == 200
        assert cfg.k_ratio == 10
        assert cfg.batch_size == 200
        assert cfg.latent_dim == 200
        assert cfg.latent_std == 0.02
        assert cfg.init_std == 0.02
        assert cfg.leaky_alpha == 0.2
        assert cfg.adam == AdamParams(0.0002, 0.5, 0.999, 1e-7)

    def test_architecture_shapes(self):
        cfg = toy_gan_config(latent_dim=6, neurons_g=10, neurons_d=12)
        gen, disc = build_gan_networks(cfg, data_dim=3, rng=np.random.default_rng(0))
        assert gen.in_dim == 6 and gen.out_dim == 3
        assert disc.in_dim == 3 and disc.out_dim == 1
        assert gen.specs[-1].activation == "linear"
        assert disc.specs[-1].activation == "sigmoid"
        assert all(s.batch_norm for s in gen.specs[:-1])
        assert not gen.specs[-1].batch_norm
        assert all(s.activation == "leaky_relu" for s in disc.specs[:-1])

    def test_config_round_trip(self):
        cfg = toy_gan_config(non_saturating=True, seed=99)
        assert GanConfig.from_dict(cfg.to_dict()) == cfg


class TestTrainGan:
    def test_same_seed_identical_history(self, toy_data):
        cfg = toy_gan_config(iterations=60)
        hook_a = make_checkpoint_evaluator(toy_data, seed=cfg.seed)
        hook_b = make_checkpoint_evaluator(toy_data, seed=cfg.seed)
        a = train_gan(cfg, toy_data, checkpoint_hook=hook_a)
        b = train_gan(cfg, toy_data, checkpoint_hook=hook_b)
        assert [c.iteration for c in a.history] == [c.iteration for c in b.history]
        for ca, cb in zip(a.history, b.history):
            np.testing.assert_array_equal(ca.metrics, cb.metrics)
        for pa, pb in zip(a.generator.params, b.generator.params):
            np.testing.assert_array_equal(pa.weights, pb.weights)

    def test_different_seed_different_weights(self, toy_data):
        a = train_gan(toy_gan_config(iterations=10, seed=1), toy_data)
        b = train_gan(toy_gan_config(iterations=10, seed=2), toy_data)
        assert not np.array_equal(a.generator.params[0].weights, b.generator.params[0].weights)

    def test_checkpoint_schedule(self, toy_data):
        model = train_gan(toy_gan_config(iterations=120, checkpoint_every=50), toy_data)
        assert [c.iteration for c in model.history] == [0, 50, 100, 120]

    def test_k_direction_discriminator(self, toy_data):
        cfg = toy_gan_config(iterations=10, k_direction="discriminator", k_ratio=3)
        model = train_gan(cfg, toy_data)
        assert model.trained
        assert model.generator.all_finite()

    def test_non_saturating_variant_trains(self, toy_data):
        cfg = toy_gan_config(iterations=20, non_saturating=True)
        model = train_gan(cfg, toy_data)
        assert model.generator.all_finite()
        # the flag changes the generator's descent path
        other = train_gan(toy_gan_config(iterations=20, non_saturating=False), toy_data)
        assert not np.array_equal(model.generator.params[0].weights,
                                  other.generator.params[0].weights)

    def test_data_smaller_than_batch_rejected(self, toy_data):
        cfg = toy_gan_config(batch_size=10_000)
        with pytest.raises(ConfigError):
            train_gan(cfg, toy_data)

    def test_divergence_detected_by_checkpoint_sweep(self, toy_data):
        # poison a running statistic through the checkpoint hook: losses stay
        # finite (train mode uses batch statistics) so only the checkpoint
        # finiteness sweep can catch it, surfacing the last clean snapshot
        def poisoning_hook(model, iteration):
            if iteration == 10:
                model.generator.params[0].bn_mean[0] = np.nan
            return None

        cfg = toy_gan_config(iterations=50, checkpoint_every=10)
        with pytest.raises(TrainingDiverged) as err:
            train_gan(cfg, toy_data, checkpoint_hook=poisoning_hook)
        assert err.value.iteration == 20
        last_good = err.value.last_good
        assert last_good["iteration"] == 10
        assert last_good["generator"].all_finite()

    def test_nan_parameters_fail_fast_between_checkpoints(self, toy_data):
        # NaN weights make the very next loss non-finite; the loop raises
        # immediately with the last snapshot attached
        def poisoning_hook(model, iteration):
            if iteration == 10:
                model.generator.params[0].weights[0, 0] = np.nan
            return None

        cfg = toy_gan_config(iterations=50, checkpoint_every=10)
        with pytest.raises(TrainingDiverged) as err:
            train_gan(cfg, toy_data, checkpoint_hook=poisoning_hook)
        assert err.value.iteration == 11
        assert err.value.last_good["iteration"] == 10


class TestGenerateScenarios:
    def test_shapes_and_finiteness(self, toy_model):
        ss = generate_scenarios(toy_model, 500)
        assert ss.values.shape == (500, 2)
        assert np.isfinite(ss.values).all()
        assert ss.factor_ids() == ["rate_a", "rate_b"]

    def test_single_row(self, toy_model):
        assert generate_scenarios(toy_model, 1).values.shape == (1, 2)

    def test_deterministic_default_stream(self, toy_model):
        a = generate_scenarios(toy_model, 50)
        b = generate_scenarios(toy_model, 50)
        np.testing.assert_array_equal(a.values, b.values)

    def test_distinct_explicit_seeds(self, toy_model):
        a = generate_scenarios(toy_model, 50, seed=1)
        b = generate_scenarios(toy_model, 50, seed=2)
        assert not np.array_equal(a.values, b.values)

    def test_denormalization_applied(self, toy_model):
        # scaling with huge mean shifts the output accordingly
        base = generate_scenarios(toy_model, 200, seed=7)
        shifted_scaling = Scaling(
            factors=toy_model.scaling.factors,
            means=toy_model.scaling.means + 100.0,
            stds=toy_model.scaling.stds,
        )
        shifted = generate_scenarios(toy_model, 200, scaling=shifted_scaling, seed=7)
        np.testing.assert_allclose(shifted.values, base.values + 100.0, atol=1e-9)

    def test_untrained_model_rejected(self, toy_data):
        cfg = toy_gan_config()
        gen, disc = build_gan_networks(cfg, 2, np.random.default_rng(0))
        model = GanModel(config=cfg, generator=gen, discriminator=disc,
                         data_dim=2, scaling=toy_data.scaling, trained=False)
        with pytest.raises(UntrainedModel):
            generate_scenarios(model, 10)

    def test_scaling_width_checked(self, toy_model):
        bad = Scaling(factors=(toy_model.scaling.factors[0],),
                      means=np.zeros(1), stds=np.ones(1))
        with pytest.raises(ConfigError):
            generate_scenarios(toy_model, 10, scaling=bad)


class TestPersistence:
    def test_save_load_round_trip(self, toy_model, tmp_path):
        path = tmp_path / "model.npz"
        save_model(toy_model, path)
        loaded = load_model(path)
        assert loaded.config == toy_model.config
        assert loaded.data_dim == toy_model.data_dim
        assert loaded.trained
        for pa, pb in zip(loaded.generator.params, toy_model.generator.params):
            np.testing.assert_array_equal(pa.weights, pb.weights)
            np.testing.assert_array_equal(pa.bias, pb.bias)
            if pa.bn_mean is not None:
                np.testing.assert_array_equal(pa.bn_mean, pb.bn_mean)
        assert [c.iteration for c in loaded.history] == [c.iteration for c in toy_model.history]
        for ca, cb in zip(loaded.history, toy_model.history):
            np.testing.assert_array_equal(ca.metrics, cb.metrics)

    def test_generation_identical_after_reload(self, toy_model, tmp_path):
        path = tmp_path / "model.npz"
        save_model(toy_model, path)
        loaded = load_model(path)
        a = generate_scenarios(toy_model, 100)
        b = generate_scenarios(loaded, 100)
        np.testing.assert_array_equal(a.values, b.values)


class TestBatchNormConsistency:
    def test_running_statistics_track_activations(self, toy_data):
        """After training, inference activations of the training set stay in
        the same ballpark as the running statistics (momentum-lagged)."""
        cfg = toy_gan_config(iterations=150)
        model = train_gan(cfg, toy_data)
        disc = model.discriminator
        x = toy_data.returns
        # first hidden layer pre-activation stats vs stored running stats
        z = x @ disc.params[0].weights + disc.params[0].bias
        run_mean = disc.params[0].bn_mean
        run_var = disc.params[0].bn_var
        assert np.abs(z.mean(axis=0) - run_mean).max() < 1.0
        assert np.all(run_var > 0.0)
