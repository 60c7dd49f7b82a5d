"""Independent reference implementations shared by unit and acceptance tests."""

from __future__ import annotations

from itertools import permutations

import numpy as np

from fiedlerplan.qp import QpProblem


def brute_force_assignment(cost):
    """Minimum total cost and argmin over all injections rows -> columns."""
    L, N = cost.shape
    best, arg = np.inf, None
    for cols in permutations(range(N), L):
        total = sum(cost[i, c] for i, c in enumerate(cols))
        if total < best:
            best, arg = total, cols
    return best, arg


def dual_projected_gradient(problem, iters=100_000, tol=1e-12):
    """Independent oracle: projected gradient ascent on the Lagrange dual.

    The dual of ``min 1/2 x'Hx + g'x s.t. Gx <= h`` is
    ``max_{y >= 0} -1/2 (g + G'y)' H^-1 (g + G'y) - h'y``; with step ``1/L``
    the ascent is monotone. Returns the dual value and the trace of values.
    By weak duality the value never exceeds the primal optimum.
    """
    H, g = problem.H, problem.g
    rows = [problem.A]
    rhs = [problem.b]
    eye = np.eye(problem.nv)
    for i in range(problem.nv):
        if np.isfinite(problem.ub[i]):
            rows.append(eye[i:i + 1])
            rhs.append(problem.ub[i:i + 1])
        if np.isfinite(problem.lb[i]):
            rows.append(-eye[i:i + 1])
            rhs.append(-problem.lb[i:i + 1])
    G = np.vstack(rows)
    h = np.concatenate(rhs)
    Hinv = np.linalg.inv(H)
    Q = G @ Hinv @ G.T
    c = G @ Hinv @ g + h
    L = np.linalg.eigvalsh(Q).max()

    def value(y):
        w = g + G.T @ y
        return -0.5 * w @ Hinv @ w - h @ y

    # monotone FISTA: momentum steps are kept only when they do not lose value
    y = np.zeros(G.shape[0])
    z = y.copy()
    t = 1.0
    best = value(y)
    values = [best]
    for _ in range(iters):
        cand = np.maximum(0.0, z - (Q @ z + c) / L)
        cand_value = value(cand)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if cand_value >= best:
            z = cand + (t - 1.0) / t_next * (cand - y)
            step = np.max(np.abs(cand - y), initial=0.0)
            y, best = cand, cand_value
        else:
            z = y + t / t_next * (cand - y)
            step = np.inf
        t = t_next
        values.append(best)
        if step < tol:
            break
        if len(values) % 100 == 0:
            # the primal point recovered from y certifies the gap once feasible
            x = -Hinv @ (g + G.T @ y)
            if np.max(G @ x - h, initial=0.0) <= 1e-10 and 0.5 * x @ H @ x + g @ x - best <= 1e-9:
                break
    return best, np.array(values)


def random_instance(rng):
    nv = int(rng.integers(1, 11))
    mc = int(rng.integers(0, 21))
    Q = rng.normal(size=(nv, nv))
    H = Q @ Q.T + rng.uniform(0.5, 2.0) * np.eye(nv)
    g = rng.normal(scale=3.0, size=nv)
    x0 = rng.normal(size=nv)
    A = rng.normal(size=(mc, nv))
    b = A @ x0 + rng.uniform(0.0, 1.0, mc)
    lb = np.where(rng.random(nv) < 0.5, x0 - rng.uniform(0.1, 2.0, nv), -np.inf)
    ub = np.where(rng.random(nv) < 0.5, x0 + rng.uniform(0.1, 2.0, nv), np.inf)
    return QpProblem(H, g, A, b, lb, ub)
