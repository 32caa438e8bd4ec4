"""Training configuration with the production defaults."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

from ..errors import ConfigError
from .adam import AdamParams

#: Which network takes the k_ratio extra steps per iteration.
K_GENERATOR = "generator"
K_DISCRIMINATOR = "discriminator"


@dataclass(frozen=True)
class GanConfig:
    """Architecture and training hyperparameters.

    Defaults are the production configuration: 4 hidden layers per
    network, 400 discriminator / 200 generator neurons, k_ratio 10 with
    the generator trained more often, batch size 200, latent dimension
    200 sampled normal(0, 0.02), and Adam(2e-4, 0.5, 0.999, 1e-7).
    """

    latent_dim: int = 200
    latent_std: float = 0.02
    n_layers_g: int = 4
    n_layers_d: int = 4
    neurons_g: int = 200
    neurons_d: int = 400
    k_ratio: int = 10
    k_direction: str = K_GENERATOR
    batch_size: int = 200
    init_std: float = 0.02
    leaky_alpha: float = 0.2
    adam: AdamParams = AdamParams()
    iterations: int = 2500
    checkpoint_every: int = 50
    non_saturating: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in (
            "latent_dim",
            "n_layers_g",
            "n_layers_d",
            "neurons_g",
            "neurons_d",
            "k_ratio",
            "batch_size",
            "iterations",
            "checkpoint_every",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.k_direction not in (K_GENERATOR, K_DISCRIMINATOR):
            raise ConfigError(
                f"k_direction must be 'generator' or 'discriminator', got {self.k_direction!r}"
            )
        if self.latent_std < 0.0 or self.init_std < 0.0:
            raise ConfigError("latent_std and init_std must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def with_seed(self, seed: int) -> "GanConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        d = {
            name: getattr(self, name)
            for name in (
                "latent_dim",
                "latent_std",
                "n_layers_g",
                "n_layers_d",
                "neurons_g",
                "neurons_d",
                "k_ratio",
                "k_direction",
                "batch_size",
                "init_std",
                "leaky_alpha",
                "iterations",
                "checkpoint_every",
                "non_saturating",
                "seed",
            )
        }
        d["adam"] = self.adam.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GanConfig":
        d = dict(d)
        adam = d.pop("adam", None)
        try:
            return cls(adam=AdamParams.from_dict(adam) if adam else AdamParams(), **d)
        except TypeError as exc:
            raise ConfigError(f"bad GAN config: {exc}") from exc
