"""Shared fixtures: toy data sets and a small trained model."""

import numpy as np
import pytest

from esgan.data import FactorSpec, ReturnKind, ReturnMatrix, normalize
from esgan.gan.config import GanConfig
from esgan.gan.train import train_gan
from esgan.validation import make_checkpoint_evaluator


def correlated_gaussian_matrix(n=500, rho=0.8, seed=7, means=(0.5, -0.2)) -> ReturnMatrix:
    """Two correlated Gaussian columns wrapped as a raw return matrix."""
    rng = np.random.default_rng(seed)
    cov = np.array([[1.0, rho], [rho, 1.0]])
    x = rng.multivariate_normal(list(means), cov, size=n)
    factors = [
        FactorSpec("rate_a", ReturnKind.ABSOLUTE),
        FactorSpec("rate_b", ReturnKind.ABSOLUTE),
    ]
    return ReturnMatrix(factors=factors, returns=x, window=1)


def toy_gan_config(**overrides) -> GanConfig:
    """Small 2-layer/2-layer configuration for fast training tests.

    Adam constants stay at the production values (2e-4, 0.5, 0.999, 1e-7).
    """
    base = dict(
        latent_dim=8,
        latent_std=0.02,
        n_layers_g=2,
        n_layers_d=2,
        neurons_g=32,
        neurons_d=32,
        k_ratio=10,
        k_direction="generator",
        batch_size=100,
        init_std=0.02,
        iterations=200,
        checkpoint_every=50,
        seed=123,
    )
    base.update(overrides)
    return GanConfig(**base)


@pytest.fixture(scope="session")
def toy_data() -> ReturnMatrix:
    return normalize(correlated_gaussian_matrix())


@pytest.fixture(scope="session")
def toy_model(toy_data):
    """A briefly trained toy model shared by generation/validation tests."""
    cfg = toy_gan_config(iterations=100)
    hook = make_checkpoint_evaluator(toy_data, seed=cfg.seed)
    return train_gan(cfg, toy_data, checkpoint_hook=hook)
