"""Feed-forward layers with hand-written backpropagation.

Each layer is affine -> optional batch normalization -> activation.
Forward passes return a cache with everything the matching backward pass
needs; gradients are returned in the fixed trainable order
(weights, bias, then batch-norm gain and shift when present).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("linear", "leaky_relu", "sigmoid")

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.99


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "linear"
    alpha: float = 0.2          # leaky-relu slope for x < 0
    batch_norm: bool = False

    def __post_init__(self):
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise ValueError(f"layer dims must be positive, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class LayerParams:
    """Trainable arrays plus batch-norm running statistics."""

    weights: np.ndarray                 # (in_dim, out_dim)
    bias: np.ndarray                    # (out_dim,)
    bn_gain: np.ndarray | None = None
    bn_shift: np.ndarray | None = None
    bn_mean: np.ndarray | None = None   # running, inference only
    bn_var: np.ndarray | None = None

    def copy(self) -> "LayerParams":
        return LayerParams(
            weights=self.weights.copy(),
            bias=self.bias.copy(),
            bn_gain=None if self.bn_gain is None else self.bn_gain.copy(),
            bn_shift=None if self.bn_shift is None else self.bn_shift.copy(),
            bn_mean=None if self.bn_mean is None else self.bn_mean.copy(),
            bn_var=None if self.bn_var is None else self.bn_var.copy(),
        )


def init_layer_params(spec: LayerSpec, rng: np.random.Generator, init_std: float) -> LayerParams:
    """Weights i.i.d. normal(0, init_std), zero biases, identity batch norm."""
    weights = rng.normal(0.0, init_std, size=(spec.in_dim, spec.out_dim))
    bias = np.zeros(spec.out_dim)
    if not spec.batch_norm:
        return LayerParams(weights=weights, bias=bias)
    return LayerParams(
        weights=weights,
        bias=bias,
        bn_gain=np.ones(spec.out_dim),
        bn_shift=np.zeros(spec.out_dim),
        bn_mean=np.zeros(spec.out_dim),
        bn_var=np.ones(spec.out_dim),
    )


def leaky_relu(x, alpha: float = 0.2):
    """x for x >= 0, alpha * x below zero (zero sits on the identity branch)."""
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0.0, x, alpha * x)


def _activate(h: np.ndarray, spec: LayerSpec) -> np.ndarray:
    if spec.activation == "linear":
        return h
    if spec.activation == "leaky_relu":
        return np.where(h >= 0.0, h, spec.alpha * h)
    return expit(h)


def _activation_grad(h: np.ndarray, out: np.ndarray, spec: LayerSpec) -> np.ndarray:
    if spec.activation == "linear":
        return np.ones_like(h)
    if spec.activation == "leaky_relu":
        return np.where(h >= 0.0, 1.0, spec.alpha)
    return out * (1.0 - out)   # sigmoid'(h) = s(h)(1 - s(h))


def layer_forward(
    spec: LayerSpec,
    params: LayerParams,
    x: np.ndarray,
    train: bool,
    update_running: bool = False,
) -> tuple[np.ndarray, dict]:
    """Run one layer; returns (output, cache-for-backward).

    In train mode batch normalization uses batch statistics and, when
    ``update_running`` is set, moves the running statistics toward them
    with momentum ``BN_MOMENTUM``. Inference mode uses running statistics.
    """
    if x.ndim != 2 or x.shape[1] != spec.in_dim:
        raise ValueError(f"input has shape {x.shape}, layer expects (*, {spec.in_dim})")
    z = x @ params.weights + params.bias
    cache: dict = {"x": x, "z": z, "train": train}

    if spec.batch_norm:
        if train:
            if x.shape[0] < 2:
                raise ValueError("batch normalization needs at least 2 rows in train mode")
            mean = z.mean(axis=0)
            var = z.var(axis=0)
            if update_running:
                params.bn_mean *= BN_MOMENTUM
                params.bn_mean += (1.0 - BN_MOMENTUM) * mean
                params.bn_var *= BN_MOMENTUM
                params.bn_var += (1.0 - BN_MOMENTUM) * var
        else:
            mean = params.bn_mean
            var = params.bn_var
        inv_std = 1.0 / np.sqrt(var + BN_EPSILON)
        z_hat = (z - mean) * inv_std
        h = params.bn_gain * z_hat + params.bn_shift
        cache.update(z_hat=z_hat, inv_std=inv_std, z_centered=z - mean)
    else:
        h = z

    out = _activate(h, spec)
    cache.update(h=h, out=out)
    return out, cache


def layer_backward(
    spec: LayerSpec,
    params: LayerParams,
    cache: dict,
    d_out: np.ndarray,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Backpropagate through one layer.

    Returns (gradient w.r.t. layer input, [dW, db] or
    [dW, db, d_gain, d_shift] for batch-norm layers). Train-mode batch
    normalization differentiates through the batch statistics.
    """
    d_h = d_out * _activation_grad(cache["h"], cache["out"], spec)

    if spec.batch_norm:
        z_hat = cache["z_hat"]
        inv_std = cache["inv_std"]
        d_gain = (d_h * z_hat).sum(axis=0)
        d_shift = d_h.sum(axis=0)
        d_zhat = d_h * params.bn_gain
        if cache["train"]:
            n = z_hat.shape[0]
            zc = cache["z_centered"]
            d_var = (d_zhat * zc).sum(axis=0) * (-0.5) * inv_std**3
            d_mean = -(d_zhat.sum(axis=0)) * inv_std + d_var * (-2.0 / n) * zc.sum(axis=0)
            d_z = d_zhat * inv_std + d_var * (2.0 / n) * zc + d_mean / n
        else:
            d_z = d_zhat * inv_std
        extra = [d_gain, d_shift]
    else:
        d_z = d_h
        extra = []

    d_w = cache["x"].T @ d_z
    d_b = d_z.sum(axis=0)
    d_x = d_z @ params.weights.T
    return d_x, [d_w, d_b, *extra]


def layer_trainables(spec: LayerSpec, params: LayerParams) -> list[np.ndarray]:
    """Trainable arrays in the order used by gradients and the optimizer."""
    arrays = [params.weights, params.bias]
    if spec.batch_norm:
        arrays += [params.bn_gain, params.bn_shift]
    return arrays
