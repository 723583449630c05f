"""Domain types and closed-form linear algebra for shuffled regression.

Everything here is a pure function of its inputs. The central object is the
objective matrix L: minimizing tr(Y^T Pi^T L Pi Y) over permutations Pi is
equivalent to the joint ridge problem min_{Pi, beta} ||Pi Y - X beta||_F^2
+ lam * ||beta||_F^2 after eliminating beta in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

# Condition number of X^T X above which lam=0 is refused.
COND_LIMIT = 1e12


class SingularMatrixError(np.linalg.LinAlgError):
    """X^T X is numerically singular and no ridge term was supplied."""


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class Dataset:
    """Feature matrix X (n x d_x) and label matrix Y (n x d_y)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", _as_matrix(self.X, "X"))
        object.__setattr__(self, "Y", _as_matrix(self.Y, "Y"))
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError(
                f"X and Y must have the same number of rows "
                f"({self.X.shape[0]} vs {self.Y.shape[0]})"
            )
        if self.X.shape[0] < 1 or self.X.shape[1] < 1 or self.Y.shape[1] < 1:
            raise ValueError("X and Y must be non-empty")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d_x(self) -> int:
        return self.X.shape[1]

    @property
    def d_y(self) -> int:
        return self.Y.shape[1]


class Permutation:
    """A bijection on {0..n-1}.

    ``mapping[i] = j`` pairs X-row i with Y-row j; equivalently the matrix
    view has a 1 at (i, j). Applying the permutation to Y re-orders it so
    that row i of the result is the Y-row paired with X-row i.
    """

    __slots__ = ("mapping",)

    def __init__(self, mapping):
        m = np.asarray(mapping)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("mapping must be a non-empty 1-D index array")
        if not np.issubdtype(m.dtype, np.integer):
            mf = np.asarray(mapping, dtype=float)
            if not np.all(mf == np.round(mf)):
                raise ValueError("mapping entries must be integers")
            m = mf.astype(np.intp)
        n = m.size
        seen = np.zeros(n, dtype=bool)
        if m.min() < 0 or m.max() >= n:
            raise ValueError("mapping entries out of range")
        seen[m] = True
        if not seen.all():
            raise ValueError("mapping is not a bijection")
        self.mapping = m.astype(np.intp)
        self.mapping.setflags(write=False)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @property
    def n(self) -> int:
        return self.mapping.size

    def matrix(self) -> np.ndarray:
        """Dense 0/1 matrix view with a single 1 per row and column."""
        P = np.zeros((self.n, self.n))
        P[np.arange(self.n), self.mapping] = 1.0
        return P

    def apply(self, Y) -> np.ndarray:
        """Return Pi Y, i.e. Y re-indexed so row i corresponds to X-row i."""
        Y = np.asarray(Y, dtype=float)
        return Y[self.mapping]

    def inverse(self) -> "Permutation":
        inv = np.empty(self.n, dtype=np.intp)
        inv[self.mapping] = np.arange(self.n)
        return Permutation(inv)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.mapping, other.mapping)

    def __hash__(self):
        return hash(self.mapping.tobytes())

    def __repr__(self):
        return f"Permutation({self.mapping.tolist()})"


class SeedSet:
    """Known (X-row, Y-row) pairs; an injective partial correspondence.

    The k-th entry of ``c`` aligns with the k-th entry of ``c_star``:
    X-row c[k] is known to pair with Y-row c_star[k].
    """

    __slots__ = ("c", "c_star")

    def __init__(self, pairs=()):
        pairs = list(pairs)
        if pairs:
            c = np.asarray([p[0] for p in pairs], dtype=np.intp)
            c_star = np.asarray([p[1] for p in pairs], dtype=np.intp)
        else:
            c = np.empty(0, dtype=np.intp)
            c_star = np.empty(0, dtype=np.intp)
        if c.size and (len(set(c.tolist())) != c.size or len(set(c_star.tolist())) != c_star.size):
            raise ValueError("seed pairs must be injective on both sides")
        if c.size and (c.min() < 0 or c_star.min() < 0):
            raise ValueError("seed indices must be nonnegative")
        self.c = c
        self.c_star = c_star

    def __len__(self) -> int:
        return self.c.size

    def validate(self, n: int) -> None:
        if len(self) and (self.c.max() >= n or self.c_star.max() >= n):
            raise ValueError(f"seed index out of range for n={n}")
        if len(self) > n:
            raise ValueError("more seeds than rows")

    def complements(self, n: int):
        """Ascending complements (X side, Y side) of the seeded indices."""
        self.validate(n)
        cbar = np.setdiff1d(np.arange(n), self.c)
        cbar_star = np.setdiff1d(np.arange(n), self.c_star)
        return cbar, cbar_star

    def pairs(self):
        return list(zip(self.c.tolist(), self.c_star.tolist()))

    def __repr__(self):
        return f"SeedSet({self.pairs()})"


@dataclass(frozen=True)
class Coefficients:
    """Regression coefficient matrix, d_x x d_y."""

    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", _as_matrix(self.beta, "beta"))


@dataclass(frozen=True)
class ObjectiveMatrices:
    """M = (X^T X + lam I)^-1, S = X M X^T, L = (S - I)^2 + lam X M^T M X^T."""

    M: np.ndarray
    S: np.ndarray
    L: np.ndarray


def default_lambda(X) -> float:
    """Scale-aware near-OLS default ridge weight: 1e-6 * tr(X^T X) / d_x."""
    X = _as_matrix(X, "X")
    return 1e-6 * float(np.sum(X * X)) / X.shape[1]


def _gram_factor(X: np.ndarray, lam: float):
    """Cholesky factor of X^T X + lam I, with a conditioning check at lam=0."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    G = X.T @ X + lam * np.eye(X.shape[1])
    G = 0.5 * (G + G.T)
    if lam == 0.0:
        w = np.linalg.eigvalsh(G)
        if w[0] <= 0 or w[-1] / w[0] > COND_LIMIT:
            raise SingularMatrixError(
                "X^T X is rank-deficient or ill-conditioned; pass lambda > 0"
            )
    try:
        return cho_factor(G, lower=True)
    except np.linalg.LinAlgError as exc:  # lam > 0 should make this unreachable
        raise SingularMatrixError(str(exc)) from exc


def ridge_gram(X, lam: float) -> np.ndarray:
    """Return M = (X^T X + lam I)^-1 via an SPD factorization.

    Raises SingularMatrixError when lam = 0 and X^T X is rank-deficient
    (condition number above COND_LIMIT).
    """
    X = _as_matrix(X, "X")
    factor = _gram_factor(X, lam)
    M = cho_solve(factor, np.eye(X.shape[1]))
    return 0.5 * (M + M.T)


def objective_matrix(X, lam: float) -> ObjectiveMatrices:
    """Build M, S and the n x n objective matrix L for the given ridge weight."""
    X = _as_matrix(X, "X")
    M = ridge_gram(X, lam)
    XM = X @ M
    S = XM @ X.T
    S = 0.5 * (S + S.T)
    SmI = S - np.eye(X.shape[0])
    L = SmI @ SmI + lam * (XM @ XM.T)
    return ObjectiveMatrices(M=M, S=S, L=0.5 * (L + L.T))


def ridge_solve(X, Y, pi: Permutation, lam: float) -> Coefficients:
    """Minimize ||Pi Y - X beta||_F^2 + lam ||beta||_F^2 over beta."""
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    if pi.n != X.shape[0] or Y.shape[0] != X.shape[0]:
        raise ValueError("permutation and data sizes disagree")
    factor = _gram_factor(X, lam)
    beta = cho_solve(factor, X.T @ pi.apply(Y))
    return Coefficients(beta=beta)


def objective_value(L, pi: Permutation, Y) -> float:
    """Evaluate tr(Y^T Pi^T L Pi Y)."""
    L = np.asarray(L, dtype=float)
    Y = _as_matrix(Y, "Y")
    if L.shape[0] != L.shape[1] or L.shape[0] != Y.shape[0] or pi.n != Y.shape[0]:
        raise ValueError("dimension mismatch between L, pi and Y")
    Z = pi.apply(Y)
    return float(np.sum(Z * (L @ Z)))
