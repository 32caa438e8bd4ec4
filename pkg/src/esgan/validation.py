"""Scenario-quality metrics and architecture search.

The workhorse is the one-dimensional Wasserstein distance between
empirical samples, computed per risk factor between training returns and
generated returns (both in normalized space). A grid search over network
shapes ranks configurations by the minimum over training checkpoints of
the maximum per-factor distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .data import ReturnMatrix
from .errors import TrainingError
from .gan.config import GanConfig
from .gan.model import GanModel, sample_latent
from .gan.train import train_gan

#: Entropy tag for the checkpoint-evaluation stream (independent of the
#: training streams derived from the same seed).
EVALUATION_STREAM = 0xE7A1


def wasserstein_1d(a, b, p: float = 1.0) -> float:
    """p-Wasserstein distance between two empirical samples.

    Exact integral of |F^-1(t) - G^-1(t)|^p over the merged quantile
    grid; for equal sample sizes and p=1 this reduces to the mean
    absolute difference of sorted order statistics.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    if p < 1.0:
        raise ValueError(f"order p must be >= 1, got {p}")
    n, m = a.size, b.size
    cuts = np.union1d(np.arange(1, n) / n, np.arange(1, m) / m)
    edges = np.concatenate([[0.0], cuts, [1.0]])
    widths = np.diff(edges)
    mids = (edges[:-1] + edges[1:]) / 2.0
    ia = np.minimum((mids * n).astype(int), n - 1)
    ib = np.minimum((mids * m).astype(int), m - 1)
    diffs = np.abs(a[ia] - b[ib])
    if p == 1.0:
        return float(np.dot(widths, diffs))
    return float(np.dot(widths, diffs**p) ** (1.0 / p))


@dataclass
class ValidationReport:
    per_factor_wasserstein: np.ndarray
    checkpoint_index: int
    tf_value: float                        # max over factors at this checkpoint
    novelty_distances: np.ndarray | None = None


def evaluate_checkpoint(
    model: GanModel,
    data: ReturnMatrix | np.ndarray,
    n_samples: int | None = None,
    rng: np.random.Generator | None = None,
    checkpoint_index: int = 0,
) -> ValidationReport:
    """Per-factor Wasserstein distances of a generated batch vs. training data.

    Generation happens in normalized space (no de-normalization) so the
    comparison matches the scale the networks are trained on. The batch
    size defaults to the number of training rows, giving both empirical
    distributions the same resolution.
    """
    x = data.returns if isinstance(data, ReturnMatrix) else np.asarray(data, dtype=float)
    n = n_samples if n_samples is not None else x.shape[0]
    if rng is None:
        rng = np.random.default_rng(
            np.random.SeedSequence([model.config.seed, EVALUATION_STREAM, checkpoint_index])
        )
    z = sample_latent(n, model.config, rng)
    generated = model.generator.forward(z, train=False)
    distances = np.array(
        [wasserstein_1d(x[:, j], generated[:, j]) for j in range(x.shape[1])]
    )
    return ValidationReport(
        per_factor_wasserstein=distances,
        checkpoint_index=checkpoint_index,
        tf_value=float(distances.max()),
    )


def make_checkpoint_evaluator(
    data: ReturnMatrix | np.ndarray,
    n_samples: int | None = None,
    seed: int = 0,
):
    """Build a checkpoint hook for :func:`esgan.gan.train_gan`.

    The hook owns a single random stream seeded once, so the sequence of
    checkpoint evaluations is reproducible for a fixed training run.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, EVALUATION_STREAM]))

    def hook(model: GanModel, iteration: int) -> np.ndarray:
        report = evaluate_checkpoint(
            model, data, n_samples=n_samples, rng=rng, checkpoint_index=iteration
        )
        return report.per_factor_wasserstein

    return hook


def target_function(history: Iterable) -> float:
    """min over checkpoints of (max over factors) of the distance vectors.

    Accepts either raw per-factor vectors or training checkpoints; entries
    without metrics are skipped.
    """
    maxima = []
    for entry in history:
        vector = getattr(entry, "metrics", entry)
        if vector is None:
            continue
        maxima.append(float(np.max(np.asarray(vector, dtype=float))))
    if not maxima:
        raise ValueError("history holds no checkpoint metrics")
    return min(maxima)


@dataclass
class SearchResult:
    grid_index: int
    config: GanConfig
    tf_value: float          # inf for failed runs
    n_parameters: int
    failed: bool = False
    error: str = ""


def derive_seed(base_seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed for (base_seed, key...)."""
    ss = np.random.SeedSequence([base_seed, *key])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def architecture_search(
    grid: Sequence[GanConfig],
    data: ReturnMatrix,
    base_seed: int = 0,
    eval_samples: int | None = None,
) -> list[SearchResult]:
    """Train every grid member and rank by the checkpoint target function.

    Each configuration trains with its own seed derived from
    (base_seed, grid index), so results do not depend on evaluation
    order. Diverged trainings are kept, marked failed, and sorted last.
    Ties break toward fewer parameters, then grid order.
    """
    if not grid:
        raise ValueError("architecture grid is empty")
    results = []
    for i, config in enumerate(grid):
        seeded = config.with_seed(derive_seed(base_seed, i))
        hook = make_checkpoint_evaluator(data, n_samples=eval_samples, seed=seeded.seed)
        try:
            model = train_gan(seeded, data, checkpoint_hook=hook)
            results.append(
                SearchResult(
                    grid_index=i,
                    config=seeded,
                    tf_value=target_function(model.history),
                    n_parameters=model.generator.n_parameters()
                    + model.discriminator.n_parameters(),
                )
            )
        except TrainingError as exc:
            results.append(
                SearchResult(
                    grid_index=i,
                    config=seeded,
                    tf_value=float("inf"),
                    n_parameters=_parameter_count(seeded, data.n_factors),
                    failed=True,
                    error=str(exc),
                )
            )
    results.sort(key=lambda r: (r.failed, r.tf_value, r.n_parameters, r.grid_index))
    return results


def _parameter_count(config: GanConfig, data_dim: int) -> int:
    def mlp(in_dim, out_dim, n_hidden, width, bn_hidden=True):
        total = 0
        prev = in_dim
        for _ in range(n_hidden):
            total += prev * width + width + (2 * width if bn_hidden else 0)
            prev = width
        return total + prev * out_dim + out_dim

    return mlp(config.latent_dim, data_dim, config.n_layers_g, config.neurons_g) + mlp(
        data_dim, 1, config.n_layers_d, config.neurons_d
    )


def novelty_distances(generated: np.ndarray, empirical: np.ndarray) -> np.ndarray:
    """Euclidean distance from each generated row to its nearest empirical row.

    Both matrices must live in the same (normalized) space and have equal
    width. Zero distances flag rows the generator copied outright.
    """
    generated = np.asarray(generated, dtype=float)
    empirical = np.asarray(empirical, dtype=float)
    if generated.ndim != 2 or empirical.ndim != 2:
        raise ValueError("inputs must be 2-D matrices")
    if generated.shape[1] != empirical.shape[1]:
        raise ValueError(
            f"column mismatch: generated {generated.shape[1]}, empirical {empirical.shape[1]}"
        )
    tree = cKDTree(empirical)
    distances, _ = tree.query(generated, k=1)
    return np.asarray(distances, dtype=float)
