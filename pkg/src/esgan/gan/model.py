"""Trained model container, sampling, scenario generation, persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..data import Scaling, ScenarioSet, denormalize
from ..errors import ConfigError, UntrainedModel
from .config import GanConfig
from .layers import LayerParams
from .network import Network, mlp_specs

FORMAT_VERSION = 1

#: Entropy tag appended to the training seed for the default generation stream,
#: keeping it independent of the weight/batch/latent training streams.
GENERATION_STREAM = 0x5C11


@dataclass
class Checkpoint:
    iteration: int
    metrics: np.ndarray | None   # per-factor validation distances, if evaluated


@dataclass
class GanModel:
    """Generator/discriminator pair plus everything needed to reproduce it."""

    config: GanConfig
    generator: Network
    discriminator: Network
    data_dim: int
    scaling: Scaling | None = None
    history: list[Checkpoint] = field(default_factory=list)
    trained: bool = False


def build_gan_networks(
    config: GanConfig, data_dim: int, rng: np.random.Generator
) -> tuple[Network, Network]:
    """Fresh generator (latent -> data) and discriminator (data -> [0,1]).

    Hidden layers use leaky-relu plus batch norm; output activations are
    linear for the generator and sigmoid for the discriminator. The
    generator is initialized first, then the discriminator, both from the
    single weight stream passed in.
    """
    gen = Network.initialized(
        mlp_specs(
            config.latent_dim,
            data_dim,
            config.n_layers_g,
            config.neurons_g,
            out_activation="linear",
            alpha=config.leaky_alpha,
        ),
        rng,
        config.init_std,
    )
    disc = Network.initialized(
        mlp_specs(
            data_dim,
            1,
            config.n_layers_d,
            config.neurons_d,
            out_activation="sigmoid",
            alpha=config.leaky_alpha,
        ),
        rng,
        config.init_std,
    )
    return gen, disc


def sample_latent(n: int, config: GanConfig, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. latent rows, normal with mean 0 and std ``latent_std``."""
    if n <= 0:
        raise ValueError(f"sample count must be positive, got {n}")
    return rng.normal(0.0, config.latent_std, size=(n, config.latent_dim))


def generate_scenarios(
    model: GanModel,
    n: int,
    scaling: Scaling | None = None,
    seed: int | None = None,
) -> ScenarioSet:
    """Draw n scenarios: latent sample -> generator (inference) -> de-normalize.

    ``seed=None`` uses a documented stream derived from the training seed,
    so repeated calls with the same arguments are identical.
    """
    if not model.trained:
        raise UntrainedModel("model has not been trained")
    scaling = scaling if scaling is not None else model.scaling
    if scaling is None:
        raise ConfigError("no scaling available; pass the training ReturnMatrix scaling")
    if scaling.n_factors != model.data_dim:
        raise ConfigError(
            f"scaling covers {scaling.n_factors} factors, model generates {model.data_dim}"
        )
    if seed is None:
        ss = np.random.SeedSequence([model.config.seed, GENERATION_STREAM])
    else:
        ss = np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    z = sample_latent(n, model.config, rng)
    normalized = model.generator.forward(z, train=False)
    values = denormalize(normalized, scaling)
    return ScenarioSet(factors=list(scaling.factors), values=values)


# --------------------------------------------------------------------------
# persistence (single .npz file: config JSON + layer arrays + history)
# --------------------------------------------------------------------------

_BN_KEYS = ("bn_gain", "bn_shift", "bn_mean", "bn_var")


def _pack_network(prefix: str, net: Network, arrays: dict) -> None:
    for i, params in enumerate(net.params):
        arrays[f"{prefix}{i}_weights"] = params.weights
        arrays[f"{prefix}{i}_bias"] = params.bias
        for key in _BN_KEYS:
            value = getattr(params, key)
            if value is not None:
                arrays[f"{prefix}{i}_{key}"] = value


def _unpack_network(prefix: str, specs, arrays) -> Network:
    params = []
    for i, spec in enumerate(specs):
        kwargs = {}
        for key in _BN_KEYS:
            name = f"{prefix}{i}_{key}"
            if name in arrays:
                kwargs[key] = arrays[name]
        params.append(
            LayerParams(
                weights=arrays[f"{prefix}{i}_weights"],
                bias=arrays[f"{prefix}{i}_bias"],
                **kwargs,
            )
        )
    return Network(specs, params)


def save_model(model: GanModel, path) -> None:
    """Write the model as one self-describing .npz archive."""
    meta = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "data_dim": model.data_dim,
        "trained": model.trained,
        "scaling": None if model.scaling is None else model.scaling.to_dict(),
    }
    arrays: dict = {"meta": np.array(json.dumps(meta, sort_keys=True))}
    _pack_network("g", model.generator, arrays)
    _pack_network("d", model.discriminator, arrays)
    iters = [c.iteration for c in model.history]
    arrays["hist_iterations"] = np.asarray(iters, dtype=np.int64)
    metric_rows = [c.metrics for c in model.history if c.metrics is not None]
    if metric_rows and len(metric_rows) == len(model.history):
        arrays["hist_metrics"] = np.vstack(metric_rows)
    np.savez(path, **arrays)


def load_model(path) -> GanModel:
    with np.load(path, allow_pickle=False) as archive:
        arrays = {k: archive[k] for k in archive.files}
    meta = json.loads(str(arrays.pop("meta")))
    if meta["format_version"] != FORMAT_VERSION:
        raise ConfigError(f"unsupported model format version {meta['format_version']}")
    config = GanConfig.from_dict(meta["config"])
    data_dim = int(meta["data_dim"])

    gen_specs = mlp_specs(
        config.latent_dim, data_dim, config.n_layers_g, config.neurons_g,
        out_activation="linear", alpha=config.leaky_alpha,
    )
    disc_specs = mlp_specs(
        data_dim, 1, config.n_layers_d, config.neurons_d,
        out_activation="sigmoid", alpha=config.leaky_alpha,
    )
    generator = _unpack_network("g", gen_specs, arrays)
    discriminator = _unpack_network("d", disc_specs, arrays)

    history = []
    iters = arrays.get("hist_iterations")
    metrics = arrays.get("hist_metrics")
    if iters is not None:
        for i, it in enumerate(iters):
            row = metrics[i] if metrics is not None and i < len(metrics) else None
            history.append(Checkpoint(iteration=int(it), metrics=row))

    scaling = None
    if meta.get("scaling"):
        scaling = Scaling.from_dict(meta["scaling"])
    return GanModel(
        config=config,
        generator=generator,
        discriminator=discriminator,
        data_dim=data_dim,
        scaling=scaling,
        history=history,
        trained=bool(meta["trained"]),
    )
