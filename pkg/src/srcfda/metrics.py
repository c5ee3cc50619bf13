"""Clustering agreement (Rand index, adjusted Rand index) and curve recovery error."""

from __future__ import annotations

import warnings

import numpy as np


def _contingency(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("labelings must be 1-d and the same length")
    if a.size < 2:
        raise ValueError("need at least two items to compare labelings")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def rand_index(a, b) -> float:
    """Fraction of item pairs on which the two labelings agree."""
    table = _contingency(a, b)
    n = table.sum()
    total = _comb2(n)
    same_both = _comb2(table).sum()
    same_a = _comb2(table.sum(axis=1)).sum()
    same_b = _comb2(table.sum(axis=0)).sum()
    agreements = total + 2 * same_both - same_a - same_b
    return float(agreements / total)


def adjusted_rand_index(a, b) -> float:
    """Rand index corrected for chance via the contingency-table form.

    When the expected index equals the maximum index (both labelings trivial),
    returns 1.0 for identical partitions and 0.0 otherwise, with a warning.
    """
    table = _contingency(a, b)
    n = table.sum()
    index = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        warnings.warn("degenerate labelings: adjusted Rand index undefined", stacklevel=2)
        # identical partitions iff every row and column has a single nonzero cell
        same = np.all((table > 0).sum(axis=0) <= 1) and np.all((table > 0).sum(axis=1) <= 1)
        return 1.0 if bool(same) else 0.0
    return float((index - expected) / (max_index - expected))


def rase(mu_hat: np.ndarray, mu: np.ndarray) -> float:
    """Root average squared error between two (A, m) curves on the same grid."""
    mu_hat = np.atleast_2d(np.asarray(mu_hat, dtype=float))
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    if mu_hat.shape != mu.shape:
        raise ValueError(f"curve shapes differ: {mu_hat.shape} vs {mu.shape}")
    m = mu.shape[1]
    return float(np.sqrt(np.sum((mu_hat - mu) ** 2) / m))
