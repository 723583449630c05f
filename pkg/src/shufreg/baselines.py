"""Reference methods: ordinary least squares and naive alternating optimization."""

from __future__ import annotations

import numpy as np

from .assignment import hungarian, sort_assignment
from .core import Coefficients, Dataset, Permutation, default_lambda, ridge_solve
from .gncr import SolveResult, StageTrace


def ols_unshuffled(data: Dataset, lam: float | None = None) -> Coefficients:
    """Ridge fit with the identity pairing (the unshuffled baseline)."""
    lam = lam if lam is not None else default_lambda(data.X)
    return ridge_solve(data.X, data.Y, Permutation.identity(data.n), lam)


def _best_permutation(data: Dataset, beta: np.ndarray, use_fast_path: bool) -> Permutation:
    # argmin_Pi ||Pi Y - X beta||^2 reduces to the assignment with gain
    # -<(X beta)_i, Y_j>; rank-1 when d_y = 1.
    pred = data.X @ beta
    if data.d_y == 1 and use_fast_path:
        return sort_assignment(-pred[:, 0], data.Y[:, 0]).perm
    return hungarian(-(pred @ data.Y.T)).perm


def naive_ao(
    data: Dataset,
    lam: float | None = None,
    init_beta: Coefficients | None = None,
    tol: float = 1e-8,
    max_iters: int = 100,
    use_fast_path: bool = True,
) -> SolveResult:
    """Alternate exact permutation and ridge steps until beta stabilizes.

    Each half-step is an exact minimization, so the training objective is
    non-increasing; with finitely many permutations the loop terminates.
    """
    lam = lam if lam is not None else default_lambda(data.X)
    beta = (init_beta or ols_unshuffled(data, lam)).beta
    perm = Permutation.identity(data.n)
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        perm = _best_permutation(data, beta, use_fast_path)
        beta_next = ridge_solve(data.X, data.Y, perm, lam).beta
        delta = float(np.linalg.norm(beta_next - beta))
        beta = beta_next
        if delta <= tol * max(float(np.linalg.norm(beta)), 1e-30):
            converged = True
            break
    objective = float(
        np.linalg.norm(perm.apply(data.Y) - data.X @ beta) ** 2 + lam * np.sum(beta * beta)
    )
    trace = [StageTrace(mu=0.0, iterations=iterations, objective=objective,
                        alpha=1.0, converged=converged)]
    return SolveResult(
        perm=perm,
        beta=Coefficients(beta=beta),
        Y_est=perm.apply(data.Y),
        trace=trace,
        converged=converged,
    )
