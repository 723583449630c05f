"""Synthetic shuffled-regression instances and the recovery-threshold check.

Generation draws X, beta, the hidden permutation and the noise from four
labeled substreams of one seed (spawned in that order), so instances are
reproducible independent of draw order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Coefficients, Dataset, Permutation


@dataclass(frozen=True)
class SynthInstance:
    data: Dataset
    truth_perm: Permutation
    truth_beta: Coefficients
    sigma: float


def generate(n: int, d_x: int, d_y: int, sigma: float, rng_seed) -> SynthInstance:
    """Draw an instance of Y = Pi X beta + eps.

    X and beta have i.i.d. standard normal entries, the permutation is
    uniform, eps is i.i.d. N(0, sigma^2). The stored permutation follows the
    X-to-Y orientation: X-row i pairs with Y-row mapping[i], so de-shuffling
    Y with it re-aligns the labels to X.
    """
    if n < 1 or d_x < 1 or d_y < 1:
        raise ValueError("dimensions must be positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    ss = rng_seed if isinstance(rng_seed, np.random.SeedSequence) else np.random.SeedSequence(rng_seed)
    x_ss, beta_ss, perm_ss, noise_ss = ss.spawn(4)
    X = np.random.default_rng(x_ss).standard_normal((n, d_x))
    beta = np.random.default_rng(beta_ss).standard_normal((d_x, d_y))
    mapping = np.random.default_rng(perm_ss).permutation(n)
    eps = sigma * np.random.default_rng(noise_ss).standard_normal((n, d_y))
    aligned = X @ beta + eps
    Y = np.empty_like(aligned)
    Y[mapping] = aligned
    return SynthInstance(
        data=Dataset(X=X, Y=Y),
        truth_perm=Permutation(mapping),
        truth_beta=Coefficients(beta=beta),
        sigma=float(sigma),
    )


def snr(beta, sigma: float) -> float:
    """||beta||_F^2 / sigma^2; infinite for noiseless data."""
    b = beta.beta if isinstance(beta, Coefficients) else np.asarray(beta, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return math.inf
    return float(np.sum(b * b) / sigma**2)


def recovery_feasible(n: int, snr_value: float, c1: float = 3.0) -> bool:
    """Information-theoretic recovery test: log(1 + snr) / log(n) > c1."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if snr_value < 0:
        raise ValueError("snr must be nonnegative")
    if math.isinf(snr_value):
        return True
    return math.log1p(snr_value) / math.log(n) > c1
