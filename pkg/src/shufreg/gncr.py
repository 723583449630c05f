"""Seeded shuffled regression by graduated non-convexity and Frank-Wolfe.

The solver relaxes the permutation search to the Birkhoff polytope and
minimizes

    g_mu(D) = 2 tr(Yt^T Lt D Yh) + tr(Yh^T D^T (Lh - mu H) D Yh),

tracking the product Z = D Yh instead of D itself. H = I - (1/m) 11^T is
the centering matrix, applied implicitly. For small mu the objective is
near-convex; mu grows geometrically until the problem is concave, which
drives the iterate to a vertex (a permutation of the unseeded rows). Seed
pairs are fixed throughout and re-attached at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .assignment import hungarian, sort_assignment
from .core import (
    Coefficients,
    Dataset,
    Permutation,
    SeedSet,
    default_lambda,
    objective_matrix,
    ridge_solve,
)


class ConvergenceError(RuntimeError):
    """An iterative kernel failed to converge within its iteration cap."""


@dataclass(frozen=True)
class GncrConfig:
    """Solver hyperparameters.

    ``lam=None`` resolves to the scale-aware default ridge weight;
    ``mu0=None`` starts the continuation at mu_max/1000.
    """

    lam: float | None = None
    gamma: float = 1.3
    mu0: float | None = None
    inner_tol: float = 1e-6
    max_inner_iters: int = 300
    max_outer_iters: int = 200
    use_fast_path: bool = True

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if self.mu0 is not None and not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if not self.inner_tol > 0:
            raise ValueError("inner_tol must be positive")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration caps must be positive")


@dataclass(frozen=True)
class SeededPartition:
    """Submatrices of Y and L induced by a seed set.

    ``Y_hat`` holds the unclaimed Y rows (ascending Y index) and ``L_hat``
    the unseeded block of L (ascending X index on both axes). ``Y_tilde``
    row k is the Y row seeded to X-row ``seeds.c[k]``; ``L_tilde`` rows
    follow the same order, restricted to unseeded columns. ``cbar`` and
    ``cbar_star`` are the ascending X-side and Y-side complements.
    """

    Y_hat: np.ndarray
    Y_tilde: np.ndarray
    L_hat: np.ndarray
    L_tilde: np.ndarray
    cbar: np.ndarray
    cbar_star: np.ndarray

    @property
    def m(self) -> int:
        return self.Y_hat.shape[0]

    @property
    def d_y(self) -> int:
        return self.Y_hat.shape[1]

    @cached_property
    def _yhat_desc_order(self) -> np.ndarray:
        # d_y = 1 fast path: Y_hat is sorted once per solve and reused.
        return np.argsort(-self.Y_hat[:, 0], kind="stable")

    @cached_property
    def _yhat_has_ties(self) -> bool:
        ys = self.Y_hat[self._yhat_desc_order, 0]
        return bool(np.any(ys[1:] == ys[:-1]))


@dataclass(frozen=True)
class StageTrace:
    mu: float
    iterations: int
    objective: float
    alpha: float
    converged: bool


@dataclass(frozen=True)
class InnerStep:
    """Per-iteration diagnostics passed to an observer callback."""

    mu: float
    iteration: int
    g_before: float
    g_after: float
    alpha: float
    eta1: float
    eta2: float
    y_est_hat: np.ndarray


@dataclass(frozen=True)
class SolveResult:
    perm: Permutation
    beta: Coefficients
    Y_est: np.ndarray
    trace: list[StageTrace] = field(default_factory=list)
    converged: bool = True


def partition_seeds(data: Dataset, L, seeds: SeedSet) -> SeededPartition:
    """Slice Y and L into seeded and unseeded blocks."""
    L = np.asarray(L, dtype=float)
    n = data.n
    if L.shape != (n, n):
        raise ValueError(f"L must be {n}x{n}, got {L.shape}")
    cbar, cbar_star = seeds.complements(n)
    return SeededPartition(
        Y_hat=data.Y[cbar_star],
        Y_tilde=data.Y[seeds.c_star],
        L_hat=L[np.ix_(cbar, cbar)],
        L_tilde=L[np.ix_(seeds.c, cbar)],
        cbar=cbar,
        cbar_star=cbar_star,
    )


def _centered(Z: np.ndarray) -> np.ndarray:
    """H Z with H = I - (1/m) 11^T, never materialized."""
    return Z - Z.mean(axis=0, keepdims=True)


def _lmu_apply(part: SeededPartition, Z: np.ndarray, mu: float) -> np.ndarray:
    """(L_hat - mu H) Z."""
    return part.L_hat @ Z - mu * _centered(Z)


def g_mu(partition: SeededPartition, Y_est_hat, mu: float) -> float:
    """Evaluate the continuation objective at Z = D Y_hat."""
    Z = np.asarray(Y_est_hat, dtype=float)
    if Z.shape != partition.Y_hat.shape:
        raise ValueError(f"expected shape {partition.Y_hat.shape}, got {Z.shape}")
    if Z.size == 0:
        return 0.0
    val = float(np.sum(Z * _lmu_apply(partition, Z, mu)))
    return val + 2.0 * _cross_trace(partition, Z)


def _cross_trace(part: SeededPartition, Z: np.ndarray) -> float:
    """tr(Y_tilde^T L_tilde Z); zero when unseeded."""
    if part.Y_tilde.shape[0] == 0:
        return 0.0
    return float(np.sum((part.L_tilde.T @ part.Y_tilde) * Z))


def _linear_scores(part: SeededPartition, Z: np.ndarray, mu: float) -> np.ndarray:
    """Half-gradient row scores R with grad g_mu(D) = 2 R Y_hat^T."""
    R = _lmu_apply(part, Z, mu)
    if part.Y_tilde.shape[0]:
        R = R + part.L_tilde.T @ part.Y_tilde
    return R


def fw_linear_step(partition: SeededPartition, Y_est_hat, mu: float, cfg: GncrConfig):
    """Minimize the linearized objective over the Birkhoff polytope.

    The minimizer is a vertex: the permutation minimizing
    tr(R Y_hat^T Pi) for the score matrix R. With d_y = 1 the gain matrix
    is rank-1 and the sort fast path applies.
    """
    Z = np.asarray(Y_est_hat, dtype=float)
    R = _linear_scores(partition, Z, mu)
    if partition.d_y == 1 and cfg.use_fast_path:
        r = R[:, 0]
        order_a = np.argsort(r, kind="stable")
        r_sorted = r[order_a]
        if partition._yhat_has_ties or np.any(r_sorted[1:] == r_sorted[:-1]):
            perm = sort_assignment(r, partition.Y_hat[:, 0]).perm
        else:
            mapping = np.empty(partition.m, dtype=np.intp)
            mapping[order_a] = partition._yhat_desc_order
            perm = Permutation(mapping)
    else:
        perm = hungarian(R @ partition.Y_hat.T).perm
    return perm, partition.Y_hat[perm.mapping]


def line_search_coeffs(partition: SeededPartition, Y_est_hat, Y_star, mu: float):
    """Quadratic line-search model g_mu(Z + a (Y*-Z)) - g_mu(Z) = eta2 a^2 - 2 eta1 a."""
    Z = np.asarray(Y_est_hat, dtype=float)
    V = np.asarray(Y_star, dtype=float)
    if Z.shape != partition.Y_hat.shape or V.shape != partition.Y_hat.shape:
        raise ValueError("iterate and vertex must match Y_hat's shape")
    LZ = _lmu_apply(partition, Z, mu)
    LV = _lmu_apply(partition, V, mu)
    c1 = float(np.sum(V * LV))
    c2 = float(np.sum(Z * LZ))
    c3 = float(np.sum(Z * LV))
    c4 = _cross_trace(partition, V)
    cross_here = _cross_trace(partition, Z)
    eta2 = c1 - 2.0 * c3 + c2
    # Exact directional coefficient; the seeded cross term at the current
    # iterate does not cancel and must enter eta1.
    eta1 = c2 - c3 - c4 + cross_here
    return eta1, eta2


def optimal_step(eta1: float, eta2: float) -> float:
    """argmin over [0, 1] of eta2 a^2 - 2 eta1 a (closed form, four cases)."""
    if math.isnan(eta1) or math.isnan(eta2):
        raise ValueError("NaN line-search coefficients")
    if eta1 >= 0.0:
        if eta2 > 0.0:
            return min(1.0, eta1 / eta2)
        return 1.0
    if eta2 >= 0.0:
        return 0.0
    # Both negative: concave, compare the endpoints. f(1) = eta2 - 2 eta1.
    return 1.0 if eta1 >= 0.5 * eta2 else 0.0


def top_eigenvalue(L, tol: float = 1e-6, max_iters: int = 10_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if n == 1:
        return float(L[0, 0])
    rng = np.random.default_rng(0x5EED)
    vec = rng.standard_normal(n)
    vec /= np.linalg.norm(vec)
    lam = 0.0
    for _ in range(max_iters):
        w = L @ vec
        norm_w = np.linalg.norm(w)
        if norm_w <= 1e-300:
            return 0.0
        vec = w / norm_w
        lam_next = float(vec @ (L @ vec))
        if abs(lam_next - lam) <= tol * max(abs(lam_next), 1e-300):
            return lam_next
        lam = lam_next
    raise ConvergenceError(
        f"power iteration did not converge in {max_iters} iterations "
        f"(last estimate {lam:.6e}); the top eigenspace may be degenerate"
    )


def mu_schedule(L, cfg: GncrConfig):
    """Continuation endpoints: (mu0, mu_max) with mu_max = lambda_max(L)."""
    mu_max = top_eigenvalue(L)
    if cfg.mu0 is not None:
        return cfg.mu0, mu_max
    mu0 = max(1e-12 * mu_max, mu_max / 1000.0)
    return mu0, mu_max


def _stage_values(mu0: float, mu_max: float, cfg: GncrConfig):
    """Geometric mu ladder; the last stage strictly exceeds mu_max.

    A final super-critical stage makes the problem concave so the iterate
    settles on a vertex. When L is (numerically) zero -- perfect
    interpolation is possible and every permutation scores ~0 -- the ladder
    degenerates to a single concave rounding stage at mu = 1.
    """
    if mu_max <= 1e-24:
        return [1.0], True
    stages = []
    mu = mu0
    while mu <= mu_max and len(stages) < cfg.max_outer_iters:
        stages.append(mu)
        mu *= cfg.gamma
    if len(stages) < cfg.max_outer_iters:
        stages.append(mu)
        return stages, True
    return stages, False


def extract_permutation(partition: SeededPartition, Y_est_hat) -> Permutation:
    """Nearest vertex: Pi minimizing ||Pi Y_hat - Y_est_hat||_F^2."""
    Z = np.asarray(Y_est_hat, dtype=float)
    if Z.shape != partition.Y_hat.shape:
        raise ValueError("Y_est_hat must match Y_hat's shape")
    return hungarian(-(Z @ partition.Y_hat.T)).perm


def collate(Y_est_hat, Y_tilde, seeds: SeedSet) -> np.ndarray:
    """Re-assemble the full n x d_y label estimate in X-row order."""
    Z = np.asarray(Y_est_hat, dtype=float)
    Yt = np.asarray(Y_tilde, dtype=float)
    if Yt.ndim == 1:
        Yt = Yt.reshape(len(seeds), -1)
    if Yt.shape[0] != len(seeds):
        raise ValueError("Y_tilde row count must equal the seed count")
    n = Z.shape[0] + len(seeds)
    seeds.validate(n)
    d_y = Z.shape[1] if Z.size else Yt.shape[1]
    if len(seeds) and Z.size and Yt.shape[1] != d_y:
        raise ValueError("Y_est_hat and Y_tilde disagree on d_y")
    out = np.empty((n, d_y))
    cbar = np.setdiff1d(np.arange(n), seeds.c)
    out[cbar] = Z
    if len(seeds):
        out[seeds.c] = Yt
    return out


def _seed_only_result(data: Dataset, seeds: SeedSet, lam: float) -> SolveResult:
    mapping = np.empty(data.n, dtype=np.intp)
    mapping[seeds.c] = seeds.c_star
    perm = Permutation(mapping)
    beta = ridge_solve(data.X, data.Y, perm, lam)
    return SolveResult(perm=perm, beta=beta, Y_est=perm.apply(data.Y))


def gncr_solve(
    data: Dataset,
    seeds: SeedSet | None = None,
    cfg: GncrConfig | None = None,
    inner_callback=None,
) -> SolveResult:
    """Run the full continuation solve.

    Starts from the barycenter iterate (1/m) 11^T Y_hat and alternates
    linear-minimization vertices with exact line searches at each mu; the
    recovered permutation is the seed map joined with the nearest-vertex
    rounding of the final iterate.
    """
    seeds = seeds if seeds is not None else SeedSet()
    cfg = cfg if cfg is not None else GncrConfig()
    seeds.validate(data.n)
    lam = cfg.lam if cfg.lam is not None else default_lambda(data.X)
    if len(seeds) == data.n:
        return _seed_only_result(data, seeds, lam)

    om = objective_matrix(data.X, lam)
    part = partition_seeds(data, om.L, seeds)
    mu0, mu_max = mu_schedule(om.L, cfg)
    stages, schedule_complete = _stage_values(mu0, mu_max, cfg)

    Z = np.tile(part.Y_hat.mean(axis=0), (part.m, 1))
    trace: list[StageTrace] = []
    all_converged = schedule_complete
    for mu in stages:
        converged = False
        alpha = 0.0
        iterations = 0
        for it in range(1, cfg.max_inner_iters + 1):
            iterations = it
            _, Y_star = fw_linear_step(part, Z, mu, cfg)
            eta1, eta2 = line_search_coeffs(part, Z, Y_star, mu)
            alpha = optimal_step(eta1, eta2)
            Z_next = Z + alpha * (Y_star - Z)
            delta = float(np.linalg.norm(Z_next - Z))
            if inner_callback is not None:
                inner_callback(InnerStep(
                    mu=mu,
                    iteration=it,
                    g_before=g_mu(part, Z, mu),
                    g_after=g_mu(part, Z_next, mu),
                    alpha=alpha,
                    eta1=eta1,
                    eta2=eta2,
                    y_est_hat=Z_next.copy(),
                ))
            Z = Z_next
            if delta <= cfg.inner_tol * max(float(np.linalg.norm(Z)), 1e-30):
                converged = True
                break
        trace.append(StageTrace(
            mu=mu,
            iterations=iterations,
            objective=g_mu(part, Z, mu),
            alpha=alpha,
            converged=converged,
        ))
        all_converged = all_converged and converged

    perm_free = extract_permutation(part, Z)
    mapping = np.empty(data.n, dtype=np.intp)
    mapping[seeds.c] = seeds.c_star
    mapping[part.cbar] = part.cbar_star[perm_free.mapping]
    perm = Permutation(mapping)
    beta = ridge_solve(data.X, data.Y, perm, lam)
    Y_est = collate(Z, part.Y_tilde, seeds)
    return SolveResult(perm=perm, beta=beta, Y_est=Y_est, trace=trace, converged=all_converged)
