"""Synthetic weight and calibration generators for benchmarks and tests."""

import numpy as np

from .errors import ConfigurationError
from .tensor import make_rng, read_tensor


def gaussian(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    return rng.normal(size=(n, m))


def two_cluster(rng: np.random.Generator, n: int, m: int,
                sep: float = 10.0) -> np.ndarray:
    """Columns from two well-separated centroids, randomly interleaved.

    One cluster sits at the origin, the other at distance ``sep`` along a
    random direction (unit within-cluster noise).  The asymmetric
    placement keeps band rows away from the symmetric two-level special
    case that a centered-sign quantizer represents exactly.
    """
    direction = rng.normal(size=n)
    direction /= np.linalg.norm(direction)
    offset = sep * direction
    labels = rng.permutation(np.repeat([0.0, 1.0], (m + 1) // 2)[:m])
    return rng.normal(size=(n, m)) + labels[None, :] * offset[:, None]


def heavy_tail_cols(rng: np.random.Generator, n: int, m: int,
                    frac: float = 0.1, scale: float = 15.0) -> np.ndarray:
    """Gaussian matrix with a random column subset scaled up."""
    w = rng.normal(size=(n, m))
    count = max(1, int(round(frac * m)))
    cols = rng.choice(m, size=count, replace=False)
    w[:, cols] *= scale
    return w


def calibration(rng: np.random.Generator, m: int,
                tokens: int = 512) -> np.ndarray:
    """Plain Gaussian activation slice (features x tokens)."""
    return rng.normal(size=(m, tokens))


def dual_dominance_instance(rng: np.random.Generator, n: int, m: int,
                            tokens: int = 1024, boost: float = 10.0,
                            group_size: int = 16):
    """Weight/calibration/importance triple with the dual-dominance skew.

    The weight matrix carries two outlier column groups.  Background
    tokens (90%, importance 1) activate one group with large magnitude;
    task tokens (10%, importance ``boost``) concentrate on the other.
    A magnitude-driven Hessian protects the background group; the
    reweighted Hessian protects the task group.
    """
    group_a = rng.choice(m, size=group_size, replace=False)
    rest = np.setdiff1d(np.arange(m), group_a)
    group_b = rng.choice(rest, size=group_size, replace=False)
    w = rng.normal(size=(n, m))
    w[:, group_a] *= 8.0
    w[:, group_b] *= 8.0
    x = rng.normal(size=(m, tokens))
    s = np.ones(tokens)
    n_task = tokens // 10
    task_idx = rng.choice(tokens, size=n_task, replace=False)
    bg_idx = np.setdiff1d(np.arange(tokens), task_idx)
    x[np.ix_(group_b, bg_idx)] = 2.5 * rng.normal(size=(group_size, bg_idx.size))
    x[np.ix_(group_a, task_idx)] = 4.0 * rng.normal(size=(group_size, n_task))
    s[task_idx] = boost
    return w, x, s, group_a, group_b


_GENERATORS = {
    "gaussian": gaussian,
    "two-cluster": two_cluster,
    "heavy-tail-cols": heavy_tail_cols,
}


def generate_case(generator: str, dims, seed: int,
                  path: str | None = None) -> np.ndarray:
    """Weight matrix for one bench case."""
    n, m = dims
    if generator == "fixture":
        if path is None:
            raise ConfigurationError("fixture generator needs a 'path'")
        return np.asarray(read_tensor(path), dtype=np.float64)
    if generator not in _GENERATORS:
        raise ConfigurationError(f"unknown generator: {generator!r}")
    return _GENERATORS[generator](make_rng(seed), n, m)
