"""A multilayer perceptron as a plain list of layers."""

from __future__ import annotations

import numpy as np

from .layers import (
    LayerParams,
    LayerSpec,
    init_layer_params,
    layer_backward,
    layer_forward,
    layer_trainables,
)


def mlp_specs(
    in_dim: int,
    out_dim: int,
    n_hidden: int,
    width: int,
    out_activation: str,
    alpha: float = 0.2,
    batch_norm: bool = True,
) -> list[LayerSpec]:
    """Hidden layers of equal width with leaky-relu and batch norm,
    then a plain output layer (no batch norm)."""
    if n_hidden < 1:
        raise ValueError("need at least one hidden layer")
    specs = []
    prev = in_dim
    for _ in range(n_hidden):
        specs.append(
            LayerSpec(prev, width, activation="leaky_relu", alpha=alpha, batch_norm=batch_norm)
        )
        prev = width
    specs.append(LayerSpec(prev, out_dim, activation=out_activation, batch_norm=False))
    return specs


class Network:
    """Stack of layers with forward / backward passes.

    Parameters are numpy arrays owned by the network; the optimizer
    updates them in place through :meth:`trainables`.
    """

    def __init__(self, specs: list[LayerSpec], params: list[LayerParams]):
        if len(specs) != len(params):
            raise ValueError("specs and params length mismatch")
        for a, b in zip(specs[:-1], specs[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        if specs and specs[-1].batch_norm:
            raise ValueError("output layer must not use batch norm")
        self.specs = list(specs)
        self.params = list(params)

    @classmethod
    def initialized(
        cls, specs: list[LayerSpec], rng: np.random.Generator, init_std: float
    ) -> "Network":
        return cls(specs, [init_layer_params(s, rng, init_std) for s in specs])

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim

    def forward(self, x: np.ndarray, train: bool, update_running: bool = False) -> np.ndarray:
        out, _ = self.forward_with_cache(x, train, update_running)
        return out

    def forward_with_cache(
        self, x: np.ndarray, train: bool, update_running: bool = False
    ) -> tuple[np.ndarray, list[dict]]:
        x = np.asarray(x, dtype=float)
        caches = []
        for spec, params in zip(self.specs, self.params):
            x, cache = layer_forward(spec, params, x, train, update_running)
            caches.append(cache)
        return x, caches

    def backward(
        self, caches: list[dict], d_out: np.ndarray
    ) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (gradient at network input, flat gradient list aligned
        with :meth:`trainables`)."""
        grads_reversed: list[list[np.ndarray]] = []
        d = d_out
        for spec, params, cache in zip(
            reversed(self.specs), reversed(self.params), reversed(caches)
        ):
            d, layer_grads = layer_backward(spec, params, cache, d)
            grads_reversed.append(layer_grads)
        flat: list[np.ndarray] = []
        for layer_grads in reversed(grads_reversed):
            flat.extend(layer_grads)
        return d, flat

    def trainables(self) -> list[np.ndarray]:
        arrays: list[np.ndarray] = []
        for spec, params in zip(self.specs, self.params):
            arrays.extend(layer_trainables(spec, params))
        return arrays

    def n_parameters(self) -> int:
        return sum(a.size for a in self.trainables())

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for p in self.params for a in _arrays_of(p))

    def copy(self) -> "Network":
        return Network(self.specs, [p.copy() for p in self.params])


def _arrays_of(params: LayerParams) -> list[np.ndarray]:
    arrays = [params.weights, params.bias]
    for a in (params.bn_gain, params.bn_shift, params.bn_mean, params.bn_var):
        if a is not None:
            arrays.append(a)
    return arrays
