"""Minimum-cost rectangular assignment.

Shortest-augmenting-path variant of the Hungarian method (Jonker and
Volgenant), O(n^2 * m) with n = min(rows, cols). Infinite entries mark
forbidden pairs; they are replaced by a finite sentinel strictly larger
than any achievable matching cost, and any pair still resting on the
sentinel afterwards is dropped from the result.

Ties between equal-cost matchings resolve by scan order (lowest column
index wins while building each augmenting path), which is fixed, so
repeated runs on the same matrix return byte-identical results.
"""

from __future__ import annotations

import numpy as np

from .. import accel
from ..accel import maybe_njit


@maybe_njit(cache=True)
def _solve_core(a):
    # a: (n, m) float64, finite, n <= m. Returns col index per row.
    n, m = a.shape
    u = np.zeros(n + 1, dtype=np.float64)
    v = np.zeros(m + 1, dtype=np.float64)
    p = np.zeros(m + 1, dtype=np.int64)  # p[j]: 1-based row matched to col j
    way = np.zeros(m + 1, dtype=np.int64)
    inf = np.inf
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, inf, dtype=np.float64)
        used = np.zeros(m + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            row_to_col[p[j] - 1] = j - 1
    return row_to_col


def solve_assignment(cost: np.ndarray) -> list[tuple[int, int]]:
    """Return the minimum-cost matching as (row, col) pairs sorted by row.

    cost may be rectangular; the smaller side is matched completely except
    for rows/columns whose only options are infinite. np.inf forbids a pair.
    NaN entries are rejected.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    rows, cols = cost.shape
    if rows == 0 or cols == 0:
        return []
    if np.isnan(cost).any():
        raise ValueError("cost matrix contains NaN")

    transposed = rows > cols
    a = cost.T if transposed else cost
    n, m = a.shape

    finite = np.isfinite(a)
    if finite.any():
        bound = max(float(np.abs(a[finite]).max()), 1.0)
    else:
        bound = 1.0
    # One extra sentinel must cost more than any possible finite-cost swing
    # (2 * n * bound when entries may be negative).
    big = bound * (2 * n + 1) + 1.0
    work = np.where(finite, a, big)

    row_to_col = _solve_core(np.ascontiguousarray(work))

    pairs = []
    for r in range(n):
        c = int(row_to_col[r])
        if c < 0 or not finite[r, c]:
            continue
        pairs.append((c, r) if transposed else (r, c))
    pairs.sort()
    return pairs
