"""Success measures: permutation overlap, coefficient cosine, train/test error."""

from __future__ import annotations

import numpy as np

from .core import Coefficients, Dataset, Permutation


def _beta_array(b) -> np.ndarray:
    if isinstance(b, Coefficients):
        return b.beta
    return np.asarray(b, dtype=float)


def perm_overlap(est: Permutation, truth: Permutation) -> float:
    """Fraction of indices mapped identically; equals <Pi_est, Pi_true>/n."""
    if est.n != truth.n:
        raise ValueError(f"size mismatch: {est.n} vs {truth.n}")
    return float(np.mean(est.mapping == truth.mapping))


def beta_correlation(est, ref) -> float:
    """Frobenius cosine <b1, b2> / (||b1|| ||b2||)."""
    b1 = _beta_array(est)
    b2 = _beta_array(ref)
    if b1.shape != b2.shape:
        raise ValueError(f"shape mismatch: {b1.shape} vs {b2.shape}")
    n1 = np.linalg.norm(b1)
    n2 = np.linalg.norm(b2)
    if n1 == 0 or n2 == 0:
        raise ValueError("beta_correlation is undefined for an all-zero matrix")
    return float(np.sum(b1 * b2) / (n1 * n2))


def train_error(data: Dataset, est: Permutation, beta) -> float:
    """||Pi_est Y - X beta||_F / ||Y||_F."""
    b = _beta_array(beta)
    norm_y = np.linalg.norm(data.Y)
    if norm_y == 0:
        raise ValueError("train_error is undefined for Y = 0")
    return float(np.linalg.norm(est.apply(data.Y) - data.X @ b) / norm_y)


def test_error(test_data: Dataset, beta) -> float:
    """Held-out error with no shuffling: ||Y - X beta||_F / ||Y||_F."""
    return train_error(test_data, Permutation.identity(test_data.n), beta)
