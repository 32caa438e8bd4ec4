"""From-scratch feed-forward GAN: layers, optimizer, training, sampling."""

from .adam import AdamParams, AdamState, adam_step
from .config import K_DISCRIMINATOR, K_GENERATOR, GanConfig
from .layers import LayerParams, LayerSpec, leaky_relu
from .loss import BceResult, bce_loss_and_grads, discriminator_pass, generator_pass
from .model import (
    Checkpoint,
    GanModel,
    build_gan_networks,
    generate_scenarios,
    load_model,
    sample_latent,
    save_model,
)
from .network import Network, mlp_specs
from .train import train_gan

__all__ = [
    "AdamParams",
    "AdamState",
    "adam_step",
    "BceResult",
    "bce_loss_and_grads",
    "build_gan_networks",
    "Checkpoint",
    "discriminator_pass",
    "GanConfig",
    "GanModel",
    "generate_scenarios",
    "generator_pass",
    "K_DISCRIMINATOR",
    "K_GENERATOR",
    "LayerParams",
    "LayerSpec",
    "leaky_relu",
    "load_model",
    "mlp_specs",
    "Network",
    "sample_latent",
    "save_model",
    "train_gan",
]
