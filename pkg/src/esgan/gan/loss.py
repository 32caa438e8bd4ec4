"""Binary cross-entropy objectives and their gradients.

The discriminator value

    V = mean(log D(x)) + mean(log(1 - D(G(z))))

is maximized in its own update and the generator minimizes
mean(log(1 - D(G(z)))) (or the non-saturating -mean(log D(G(z)))).
Both gradients returned here are descent gradients for the respective
network, so the optimizer has a single code path: the discriminator
gradient is the gradient of -V.

Discriminator probabilities are clamped to [1e-7, 1 - 1e-7] before any
log; clamped entries get zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Network

PROB_CLIP = 1e-7


def _clamped_log_grad(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(clamped probabilities, pass-through mask for the clamp)."""
    clamped = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    mask = (p > PROB_CLIP) & (p < 1.0 - PROB_CLIP)
    return clamped, mask.astype(float)


def discriminator_pass(
    generator: Network,
    discriminator: Network,
    real_batch: np.ndarray,
    latent_batch: np.ndarray,
    update_running: bool = False,
) -> tuple[float, list[np.ndarray]]:
    """Discriminator objective V and descent gradients on -V.

    Real and generated rows go through the discriminator as one stacked
    batch, so batch-norm statistics are shared between them exactly as
    the batch means in V suggest.
    """
    if real_batch.shape[0] == 0 or latent_batch.shape[0] == 0:
        raise ValueError("batches must be non-empty")
    fakes = generator.forward(latent_batch, train=True, update_running=update_running)
    if fakes.shape[1] != real_batch.shape[1]:
        raise ValueError(
            f"generator output width {fakes.shape[1]} != data width {real_batch.shape[1]}"
        )
    n_real = real_batch.shape[0]
    n_fake = fakes.shape[0]
    stacked = np.vstack([real_batch, fakes])
    out, caches = discriminator.forward_with_cache(
        stacked, train=True, update_running=update_running
    )
    p, mask = _clamped_log_grad(out[:, 0])

    value = float(np.mean(np.log(p[:n_real])) + np.mean(np.log(1.0 - p[n_real:])))

    # d(-V)/dp, zero where the clamp is active
    d_p = np.empty_like(p)
    d_p[:n_real] = -1.0 / (n_real * p[:n_real])
    d_p[n_real:] = 1.0 / (n_fake * (1.0 - p[n_real:]))
    d_out = (d_p * mask)[:, None]
    _, grads = discriminator.backward(caches, d_out)
    return value, grads


def generator_pass(
    generator: Network,
    discriminator: Network,
    latent_batch: np.ndarray,
    non_saturating: bool = False,
    update_running: bool = False,
) -> tuple[float, list[np.ndarray]]:
    """Generator objective and its descent gradients.

    The discriminator runs in train mode with its parameters held fixed;
    its input gradient is pushed back through the generator.
    """
    if latent_batch.shape[0] == 0:
        raise ValueError("latent batch must be non-empty")
    fakes, g_caches = generator.forward_with_cache(
        latent_batch, train=True, update_running=update_running
    )
    out, d_caches = discriminator.forward_with_cache(
        fakes, train=True, update_running=update_running
    )
    p, mask = _clamped_log_grad(out[:, 0])
    n = p.size

    if non_saturating:
        loss = float(-np.mean(np.log(p)))
        d_p = -1.0 / (n * p)
    else:
        loss = float(np.mean(np.log(1.0 - p)))
        d_p = -1.0 / (n * (1.0 - p))
    d_out = (d_p * mask)[:, None]
    d_fakes, _ = discriminator.backward(d_caches, d_out)
    _, g_grads = generator.backward(g_caches, d_fakes)
    return loss, g_grads


@dataclass
class BceResult:
    disc_objective: float            # V, to be maximized
    gen_objective: float             # minimized by the generator
    disc_grads: list[np.ndarray]     # descent gradients on -V
    gen_grads: list[np.ndarray]      # descent gradients on the generator objective


def bce_loss_and_grads(
    generator: Network,
    discriminator: Network,
    real_batch: np.ndarray,
    latent_batch: np.ndarray,
    non_saturating: bool = False,
) -> BceResult:
    """Evaluate both objectives and gradients on one (real, latent) pair.

    Side-effect free: running statistics are not touched. The training
    loop calls the two passes separately with fresh batches instead.
    """
    real_batch = np.asarray(real_batch, dtype=float)
    latent_batch = np.asarray(latent_batch, dtype=float)
    d_value, d_grads = discriminator_pass(generator, discriminator, real_batch, latent_batch)
    g_value, g_grads = generator_pass(
        generator, discriminator, latent_batch, non_saturating=non_saturating
    )
    return BceResult(d_value, g_value, d_grads, g_grads)
