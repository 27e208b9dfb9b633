"""Kernel two-sample and independence statistics.

All statistics use the Gaussian kernel ``k(a, b) = exp(-||a-b||^2 / (2 s^2))``
with the bandwidth either given explicitly or set per call by the median
heuristic (median pairwise distance of the relevant sample; falls back to 1
when the median is zero).  The estimators are the biased V-statistics, so
MMD^2 and HSIC are non-negative up to floating-point noise.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import ConfigError, ShapeError
from .rng import stream

MEDIAN = "median"


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth selection: the string ``"median"`` or a positive float."""

    bandwidth: object = MEDIAN

    def __post_init__(self):
        if self.bandwidth != MEDIAN:
            if not (isinstance(self.bandwidth, (int, float)) and self.bandwidth > 0):
                raise ConfigError("bandwidth must be 'median' or a positive number")


def _as_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError("expected a vector or matrix of observations")
    return X


def median_heuristic(X):
    """Median pairwise Euclidean distance (over distinct pairs); 0 -> 1."""
    X = _as_matrix(X)
    if X.shape[0] < 2:
        raise ShapeError("median heuristic needs at least two rows")
    med = float(np.median(pdist(X)))
    return med if med > 0 else 1.0


def _resolve_bandwidth(cfg, pooled):
    cfg = cfg or KernelConfig()
    if cfg.bandwidth == MEDIAN:
        return median_heuristic(pooled)
    return float(cfg.bandwidth)


def _gram(A, B, bandwidth):
    sq = cdist(A, B, "sqeuclidean")
    return np.exp(-sq / (2.0 * bandwidth ** 2))


def mmd2(X, Y, config=None):
    """Biased squared maximum mean discrepancy between two samples.

    Bandwidth defaults to the median heuristic on the pooled sample.
    """
    X, Y = _as_matrix(X), _as_matrix(Y)
    if X.shape[1] != Y.shape[1]:
        raise ShapeError("samples must share dimensionality")
    if X.shape[0] < 1 or Y.shape[0] < 1:
        raise ShapeError("both samples must be non-empty")
    bw = _resolve_bandwidth(config, np.vstack([X, Y]))
    kxx = _gram(X, X, bw).mean()
    kyy = _gram(Y, Y, bw).mean()
    kxy = _gram(X, Y, bw).mean()
    return float(kxx + kyy - 2.0 * kxy)


def _centered_gram(K):
    row = K.mean(axis=0, keepdims=True)
    col = K.mean(axis=1, keepdims=True)
    return K - row - col + K.mean()


def hsic(X, Y, config_x=None, config_y=None):
    """Biased HSIC estimate ``trace(K H L H) / n^2``.

    Per-variable bandwidths default to the median heuristic of each input.
    """
    X, Y = _as_matrix(X), _as_matrix(Y)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ShapeError("paired samples must have equal length")
    if n < 2:
        raise ShapeError("HSIC needs at least two rows")
    K = _gram(X, X, _resolve_bandwidth(config_x, X))
    L = _gram(Y, Y, _resolve_bandwidth(config_y, Y))
    return float(np.sum(_centered_gram(K) * L) / n ** 2)


def dhsic(variables, configs=None):
    """Joint-independence statistic for d >= 2 variables.

    Implements the V-statistic with three terms: the mean of elementwise
    Gram products, the product of Gram means, and the cross term coupling
    row means.  For d = 2 this coincides with :func:`hsic`.
    """
    mats = [_as_matrix(V) for V in variables]
    d = len(mats)
    if d < 2:
        raise ShapeError("joint independence needs at least two variables")
    n = mats[0].shape[0]
    for V in mats:
        if V.shape[0] != n:
            raise ShapeError("all variables must share the sample size")
    if n < 2:
        raise ShapeError("dHSIC needs at least two rows")
    if configs is None:
        configs = [None] * d
    grams = [_gram(V, V, _resolve_bandwidth(c, V)) for V, c in zip(mats, configs)]
    elementwise = np.ones((n, n))
    mean_product = 1.0
    row_product = np.ones(n)
    for K in grams:
        elementwise *= K
        mean_product *= K.mean()
        row_product *= K.mean(axis=1)
    return float(elementwise.mean() + mean_product - 2.0 * row_product.mean())


def permutation_pvalue(statistic, variables, n_permutations=199, seed=0):
    """Permutation p-value ``(1 + #{perm >= observed}) / (B + 1)``.

    ``variables`` is a sequence of equal-length arrays; the first is held
    fixed and every other variable's rows are permuted independently, which
    simulates the null of joint independence for both two-variable
    statistics (``statistic(X, Y)``) and d-variable ones
    (``statistic([V1, ..., Vd])``).
    """
    B = int(n_permutations)
    if B < 19:
        raise ConfigError("need at least 19 permutations")
    mats = [_as_matrix(V) for V in variables]
    if len(mats) < 2:
        raise ShapeError("permutation test needs at least two variables")
    n = mats[0].shape[0]

    def call(parts):
        if len(parts) == 2:
            return statistic(parts[0], parts[1])
        return statistic(parts)

    observed = call(mats)
    rng = stream(seed, "permutation")
    count = 0
    for _ in range(B):
        parts = [mats[0]] + [V[rng.permutation(n)] for V in mats[1:]]
        if call(parts) >= observed:
            count += 1
    return float(observed), float((1 + count) / (B + 1))
