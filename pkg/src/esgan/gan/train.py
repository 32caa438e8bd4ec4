"""Adversarial training loop.

Each iteration runs ``k_ratio`` updates of one network followed by a
single update of the other; the direction is configurable and defaults
to training the generator more often. Every discriminator update draws a
fresh data batch (without replacement) and a fresh latent batch; every
generator update draws a fresh latent batch.

Randomness comes from three independent streams spawned from the config
seed, in this order: weight initialization, data-batch sampling, latent
sampling. Changing k_ratio therefore never shifts the weight stream.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..data import ReturnMatrix
from ..errors import ConfigError, TrainingDiverged
from .adam import AdamState, adam_step
from .config import K_GENERATOR, GanConfig
from .loss import discriminator_pass, generator_pass
from .model import Checkpoint, GanModel, build_gan_networks, sample_latent

#: Called at every checkpoint with (model, iteration); whatever per-factor
#: metric vector it returns is stored in the model history.
CheckpointHook = Callable[[GanModel, int], np.ndarray | None]


def train_gan(
    config: GanConfig,
    data: ReturnMatrix,
    checkpoint_hook: CheckpointHook | None = None,
) -> GanModel:
    """Train on a normalized return matrix; fully deterministic per seed.

    Checkpoints are recorded at iteration 0, every ``checkpoint_every``
    iterations, and at the final iteration. Non-finite losses or
    parameters raise :class:`TrainingDiverged` carrying the last good
    parameter snapshot.
    """
    x = np.asarray(data.returns, dtype=float)
    if x.ndim != 2:
        raise ConfigError("training data must be a 2-D return matrix")
    n_rows, data_dim = x.shape
    if n_rows < config.batch_size:
        raise ConfigError(
            f"data has {n_rows} rows, need at least batch_size={config.batch_size}"
        )
    if not np.isfinite(x).all():
        raise ConfigError("training data contains non-finite values")

    weight_ss, batch_ss, latent_ss = np.random.SeedSequence(config.seed).spawn(3)
    rng_weights = np.random.default_rng(weight_ss)
    rng_batches = np.random.default_rng(batch_ss)
    rng_latents = np.random.default_rng(latent_ss)

    generator, discriminator = build_gan_networks(config, data_dim, rng_weights)
    model = GanModel(
        config=config,
        generator=generator,
        discriminator=discriminator,
        data_dim=data_dim,
        scaling=data.scaling,
        trained=True,
    )
    gen_state = AdamState(generator.trainables())
    disc_state = AdamState(discriminator.trainables())

    last_good: dict | None = None

    def record_checkpoint(iteration: int) -> None:
        nonlocal last_good
        if not (generator.all_finite() and discriminator.all_finite()):
            raise TrainingDiverged(
                f"non-finite parameters at iteration {iteration}",
                iteration=iteration,
                last_good=last_good,
            )
        # snapshot the verified-finite state before handing the model to the hook
        last_good = {
            "iteration": iteration,
            "generator": generator.copy(),
            "discriminator": discriminator.copy(),
        }
        metrics = checkpoint_hook(model, iteration) if checkpoint_hook else None
        model.history.append(Checkpoint(iteration=iteration, metrics=metrics))

    def _diverged(message: str, iteration: int):
        return TrainingDiverged(message, iteration=iteration, last_good=last_good)

    def discriminator_update(iteration: int) -> None:
        idx = rng_batches.choice(n_rows, size=config.batch_size, replace=False)
        z = sample_latent(config.batch_size, config, rng_latents)
        value, grads = discriminator_pass(
            generator, discriminator, x[idx], z, update_running=True
        )
        if not np.isfinite(value):
            raise _diverged("non-finite discriminator loss", iteration)
        try:
            adam_step(discriminator.trainables(), grads, disc_state, config.adam)
        except ValueError as exc:
            raise _diverged(f"discriminator update failed: {exc}", iteration) from exc

    def generator_update(iteration: int) -> None:
        z = sample_latent(config.batch_size, config, rng_latents)
        loss, grads = generator_pass(
            generator, discriminator, z,
            non_saturating=config.non_saturating, update_running=True,
        )
        if not np.isfinite(loss):
            raise _diverged("non-finite generator loss", iteration)
        try:
            adam_step(generator.trainables(), grads, gen_state, config.adam)
        except ValueError as exc:
            raise _diverged(f"generator update failed: {exc}", iteration) from exc

    record_checkpoint(0)
    for iteration in range(1, config.iterations + 1):
        if config.k_direction == K_GENERATOR:
            for _ in range(config.k_ratio):
                generator_update(iteration)
            discriminator_update(iteration)
        else:
            for _ in range(config.k_ratio):
                discriminator_update(iteration)
            generator_update(iteration)
        if iteration % config.checkpoint_every == 0 or iteration == config.iterations:
            record_checkpoint(iteration)
    return model
