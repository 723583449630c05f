"""Linear assignment kernels.

Two solvers for min_Pi sum_i cost[i, Pi(i)]:

* ``hungarian`` -- exact O(m^3) augmenting-path algorithm with dual
  potentials, for arbitrary square cost matrices.
* ``sort_assignment`` -- O(m log m) fast path for rank-1 costs
  cost[i, j] = a[i] * b[j], by the rearrangement inequality (pair a
  ascending with b descending).

Both tie-break deterministically: among equal-cost assignments the
lexicographically smallest mapping is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Permutation


@dataclass(frozen=True)
class AssignmentResult:
    perm: Permutation
    cost: float


def _check_square(cost) -> np.ndarray:
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1] or cost.shape[0] == 0:
        raise ValueError(f"cost must be a non-empty square matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost contains non-finite entries")
    return cost


def _solve_potentials(cost: np.ndarray):
    """Augmenting-path Hungarian core. Returns (col_of_row, u, v)."""
    n = cost.shape[0]
    u = np.zeros(n + 1)           # row potentials (virtual slot n unused)
    v = np.zeros(n + 1)           # column potentials, index n = virtual column
    owner = np.full(n + 1, -1, dtype=np.intp)  # owner[j] = row matched to column j
    for i in range(n):
        owner[n] = i
        j0 = n
        minv = np.full(n, np.inf)          # tentative reduced costs to free columns
        way = np.full(n, n, dtype=np.intp)  # predecessor column on the alternating tree
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used[:n]
            idx = np.nonzero(free)[0]
            cur = cost[i0, idx] - u[i0] - v[idx]
            better = cur < minv[idx]
            minv[idx[better]] = cur[better]
            way[idx[better]] = j0
            k = int(np.argmin(minv[idx]))   # first minimum: smallest column index wins ties
            j1 = int(idx[k])
            delta = minv[j1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if owner[j0] < 0:
                break
        while j0 != n:  # augment along the stored path
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=np.intp)
    col_of_row[owner[:n]] = np.arange(n)
    return col_of_row, u[:n], v[:n]


def _lex_smallest_on_tight_graph(cost, mapping, u, v):
    """Lexicographically smallest optimal mapping.

    Every optimal assignment uses only edges that are tight for the optimal
    duals (complementary slackness), and any perfect matching of tight edges
    is optimal. Greedily fix rows in order to their smallest tight column
    that still admits a completion, re-matching displaced rows via
    augmenting paths.
    """
    n = len(mapping)
    scale = max(1.0, float(np.abs(cost).max()))
    tol = 1e-12 * scale
    slack = cost - u[:, None] - v[None, :]
    adj = [np.nonzero(slack[i] <= tol)[0] for i in range(n)]

    row_of = np.full(n, -1, dtype=np.intp)
    row_of[mapping] = np.arange(n)
    col_of = mapping.copy()
    fixed = np.zeros(n, dtype=bool)

    def rematch(row, banned_col, visited):
        for jj in adj[row]:
            if fixed[jj] or jj == banned_col or visited[jj]:
                continue
            visited[jj] = True
            holder = row_of[jj]
            if holder < 0 or rematch(holder, banned_col, visited):
                row_of[jj] = row
                col_of[row] = jj
                return True
        return False

    for i in range(n):
        for j in adj[i]:
            if fixed[j]:
                continue
            if col_of[i] == j:
                break
            displaced = row_of[j]
            old = col_of[i]
            # Free i's column, hand j to i, and try to re-seat the displaced row.
            row_of[old] = -1
            row_of[j] = i
            col_of[i] = j
            visited = np.zeros(n, dtype=bool)
            visited[j] = True
            if rematch(displaced, j, visited):
                break
            # Revert.
            row_of[j] = displaced
            row_of[old] = i
            col_of[i] = old
        fixed[col_of[i]] = True
    return col_of


def hungarian(cost) -> AssignmentResult:
    """Globally minimize sum_i cost[i, mapping[i]] over permutations."""
    cost = _check_square(cost)
    mapping, u, v = _solve_potentials(cost)
    mapping = _lex_smallest_on_tight_graph(cost, mapping, u, v)
    perm = Permutation(mapping)
    total = float(cost[np.arange(cost.shape[0]), mapping].sum())
    return AssignmentResult(perm=perm, cost=total)


def _value_blocks(sorted_vals: np.ndarray) -> np.ndarray:
    """Block id per sorted slot; a block is a maximal run of equal values."""
    if sorted_vals.size == 0:
        return np.empty(0, dtype=np.intp)
    return np.concatenate(([0], np.cumsum(sorted_vals[1:] != sorted_vals[:-1]))).astype(np.intp)


def sort_assignment(a, b) -> AssignmentResult:
    """Minimize sum_i a[i] * b[mapping[i]] by opposite-order pairing.

    For the rank-1 cost matrix a b^T this equals the Hungarian optimum at
    O(m log m) cost. Ties (repeated values in a or b) are resolved to the
    lexicographically smallest optimal mapping.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("vectors must be non-empty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("inputs contain non-finite entries")

    m = a.size
    order_a = np.argsort(a, kind="stable")
    order_b = np.argsort(-b, kind="stable")
    a_sorted = a[order_a]
    b_sorted = b[order_b]

    no_ties = (
        m == 1
        or (np.all(a_sorted[1:] != a_sorted[:-1]) and np.all(b_sorted[1:] != b_sorted[:-1]))
    )
    if no_ties:
        mapping = np.empty(m, dtype=np.intp)
        mapping[order_a] = order_b
    else:
        mapping = _sort_assignment_with_ties(a, b, order_a, order_b, a_sorted, b_sorted)

    perm = Permutation(mapping)
    total = float(np.dot(a, b[mapping]))
    return AssignmentResult(perm=perm, cost=total)


def _sort_assignment_with_ties(a, b, order_a, order_b, a_sorted, b_sorted):
    """Lexicographic tie resolution via block capacities.

    Slot k of a-ascending pairs with slot k of b-descending; equal-value
    blocks make the pairing unique only at block level. The number of pairs
    between a-block t and b-block u equals the overlap of their slot
    intervals, and any assignment realizing those counts is optimal. Rows in
    index order greedily take the smallest available column with remaining
    block capacity.
    """
    m = a.size
    a_blk = _value_blocks(a_sorted)
    b_blk = _value_blocks(b_sorted)
    n_ablk = int(a_blk[-1]) + 1
    n_bblk = int(b_blk[-1]) + 1

    a_start = np.searchsorted(a_blk, np.arange(n_ablk), side="left")
    a_end = np.searchsorted(a_blk, np.arange(n_ablk), side="right")
    b_start = np.searchsorted(b_blk, np.arange(n_bblk), side="left")
    b_end = np.searchsorted(b_blk, np.arange(n_bblk), side="right")

    block_of_row = np.empty(m, dtype=np.intp)
    block_of_row[order_a] = a_blk

    # Columns of each b-block in ascending index order, consumed front-first.
    cols_by_block = [sorted(order_b[b_start[u]:b_end[u]].tolist()) for u in range(n_bblk)]
    heads = [0] * n_bblk

    caps = []  # per a-block: {b-block: remaining pair count}
    for t in range(n_ablk):
        lo = int(np.searchsorted(b_end, a_start[t], side="right"))
        hi = int(np.searchsorted(b_start, a_end[t], side="left"))
        caps.append({
            u: int(min(a_end[t], b_end[u]) - max(a_start[t], b_start[u]))
            for u in range(lo, hi)
            if min(a_end[t], b_end[u]) > max(a_start[t], b_start[u])
        })

    mapping = np.empty(m, dtype=np.intp)
    for i in range(m):
        t = block_of_row[i]
        best_u = -1
        best_col = None
        for u, cap in caps[t].items():
            if cap <= 0:
                continue
            col = cols_by_block[u][heads[u]]
            if best_col is None or col < best_col:
                best_col = col
                best_u = u
        if best_u < 0:  # unreachable if capacities are consistent
            raise RuntimeError("block capacities exhausted; tie resolution failed")
        mapping[i] = best_col
        heads[best_u] += 1
        caps[t][best_u] -= 1
    return mapping
