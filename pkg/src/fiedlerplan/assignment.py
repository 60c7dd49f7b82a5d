"""Minimum-cost assignment of rows to distinct columns (Hungarian method)."""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import NDArray

from .exceptions import InvalidArgumentError, NoFeasibleAssignmentError


def hungarian(cost: NDArray[np.float64]) -> NDArray[np.int64]:
    """Assign each row of an ``L x N`` cost matrix (``L <= N``) to a distinct column.

    Shortest augmenting path with row/column potentials, ``O(L^2 N)``.
    Infinite entries are forbidden pairings. Among equally short augmenting
    paths the lowest column index wins, so ties resolve deterministically.

    Returns:
        ``cols`` with ``cols[i]`` the column assigned to row ``i``.

    Raises:
        NoFeasibleAssignmentError: if no matching of finite cost exists.
    """
    a = np.asarray(cost, dtype=float)
    if a.ndim != 2:
        raise InvalidArgumentError("cost must be a matrix")
    n_rows, n_cols = a.shape
    if n_rows > n_cols:
        raise InvalidArgumentError(f"need rows <= columns, got {a.shape}")
    if np.any(np.isnan(a)) or np.any(a == -np.inf):
        raise InvalidArgumentError("cost entries must be finite or +inf")
    for i in range(n_rows):
        if not np.any(np.isfinite(a[i])):
            raise NoFeasibleAssignmentError(f"row {i} has no finite entry")

    inf = math.inf
    # 1-based arrays; column 0 is the virtual root of each augmenting search
    u = [0.0] * (n_rows + 1)
    v = [0.0] * (n_cols + 1)
    match = [0] * (n_cols + 1)
    way = [0] * (n_cols + 1)
    rows = a.tolist()
    for i in range(1, n_rows + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (n_cols + 1)
        used = [False] * (n_cols + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            row = rows[i0 - 1]
            delta, j1 = inf, -1
            for j in range(1, n_cols + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta, j1 = minv[j], j
            if j1 < 0 or delta == inf:
                raise NoFeasibleAssignmentError(f"row {i - 1} cannot be matched at finite cost")
            for j in range(n_cols + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    cols = np.full(n_rows, -1, dtype=np.int64)
    for j in range(1, n_cols + 1):
        if match[j]:
            cols[match[j] - 1] = j - 1
    return cols
