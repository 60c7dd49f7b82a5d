"""Single-step planner on the exact (nonlinear) constraints.

Used as an oracle for the linearised planner: the Fiedler value of the next
configuration is computed by a full eigendecomposition and collision
avoidance uses true pairwise distances. The inequality-constrained problem
is solved by an augmented Lagrangian with bound-constrained L-BFGS-B inner
solves.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from .comm import PositionState, comm_snapshot
from .exceptions import InvalidArgumentError
from .horizon import horizon_model, robot_bounds
from .objectives import inspection_objective, stochastic_reference

ACCEPT_TOL = 1e-4
MAX_N = 6


@dataclass
class BaselineResult:
    u: NDArray[np.float64]
    converged: bool
    objective: float
    outer_iterations: int
    max_violation: float
    relaxed: bool = False


def _objective_terms(state, config, ctx, snapshot):
    """Single-step ``(H, g)`` plus an optional soft-bound penalty weight."""
    p = state.stacked
    if config.mode == "inspection":
        model = horizon_model(p, snapshot.gradient, 1)
        H, g = inspection_objective(ctx.assignment.S, p, ctx.pois, model, config.zeta, config.eta)
        return H, g, 0.0
    u_ref = stochastic_reference(ctx.prev_u, config.sigma_v_scale, ctx.rng, state.dim)
    soft = config.cis_params().slack_matrix(1)[0, 0] if config.cis_enabled else 0.0
    return np.eye(p.size), -u_ref, soft


def nonlinear_baseline_step(state: PositionState, config, ctx, snapshot=None,
                            max_outer: int = 40) -> BaselineResult:
    """Solve the exact single-step problem from ``state``.

    Constraints: ``lambda2(p + u) >= lambda2_min`` (when the run has a
    connectivity bound), ``|p_i + u_i - p_j - u_j| >= r_i + r_j + eps`` and the
    infinity-norm box. In CIS mode the soft bound enters as the penalty
    ``h * max(0, soft - lambda2(p + u))^2``, which is what the slack reduces
    to at its optimum. A result is accepted only if every exact constraint
    holds within ``1e-4``.
    """
    if state.count > MAX_N or config.K != 1:
        raise InvalidArgumentError(f"baseline supports N <= {MAX_N} and K = 1")
    link = config.link_params()
    if snapshot is None:
        snapshot = comm_snapshot(state, link)
    H, g, soft_weight = _objective_terms(state, config, ctx, snapshot)

    N, n = state.count, state.dim
    p0 = state.positions
    radii = config.radii
    pairs = np.array(list(combinations(range(N), 2)))
    need = radii[pairs[:, 0]] + radii[pairs[:, 1]] + config.eps
    # an already violated clearance may only not get worse
    current = np.linalg.norm(p0[pairs[:, 0]] - p0[pairs[:, 1]], axis=1)
    relaxed = bool(np.any(current < need))
    need = np.minimum(need, current)
    use_lambda = config.mode == "inspection" or config.cis_enabled
    lam_min = min(config.lambda2_min, snapshot.fiedler_value) if use_lambda else None
    umax = np.repeat(robot_bounds(config.horizon_params(), N), n)
    bounds = list(zip(-umax, umax))

    def constraints(u):
        """Scaled constraint values ``c(u) >= 0`` and their Jacobian."""
        q = p0 + u.reshape(N, n)
        diff = q[pairs[:, 0]] - q[pairs[:, 1]]
        dist = np.linalg.norm(diff, axis=1)
        c = [(dist - need) / need]
        jac = np.zeros((len(pairs), N * n))
        unit = diff / np.maximum(dist, 1e-12)[:, None]
        for k, (i, j) in enumerate(pairs):
            jac[k, i * n:(i + 1) * n] = unit[k] / need[k]
            jac[k, j * n:(j + 1) * n] = -unit[k] / need[k]
        jacs = [jac]
        snap = comm_snapshot(PositionState(q, radii), link)
        if use_lambda:
            c.insert(0, np.array([(snap.fiedler_value - lam_min) / config.lambda2_min]))
            jacs.insert(0, snap.gradient[None, :] / config.lambda2_min)
        return np.concatenate(c), np.vstack(jacs), snap

    def cost(u, snap):
        val = 0.5 * u @ H @ u + g @ u
        grad = H @ u + g
        if soft_weight:
            short = config.lambda2_soft - snap.fiedler_value
            if short > 0:
                val += soft_weight * short**2
                grad = grad - 2.0 * soft_weight * short * snap.gradient
        return val, grad

    y = np.zeros(len(pairs) + (1 if use_lambda else 0))
    rho = 10.0
    u = np.zeros(N * n)
    prev_viol = np.inf
    outer = 0
    for outer in range(1, max_outer + 1):
        def lagrangian(v):
            c, jac, snap = constraints(v)
            val, grad = cost(v, snap)
            shifted = np.maximum(0.0, y - rho * c)
            val += (shifted @ shifted - y @ y) / (2.0 * rho)
            grad = grad - jac.T @ shifted
            return val, grad

        res = minimize(lagrangian, u, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 1000, "ftol": 1e-15, "gtol": 1e-10})
        u = res.x
        c, _, _ = constraints(u)
        viol = float(np.max(np.maximum(0.0, -c), initial=0.0))
        y_new = np.maximum(0.0, y - rho * c)
        step_y = float(np.max(np.abs(y_new - y), initial=0.0))
        y = y_new
        if viol < 1e-9 and step_y < 1e-7 * max(1.0, float(np.max(y, initial=0.0))):
            break
        if viol > 0.25 * prev_viol:
            rho *= 10.0
        prev_viol = viol

    c, _, snap = constraints(u)
    exact = []
    if use_lambda:
        exact.append(lam_min - snap.fiedler_value)
    q = p0 + u.reshape(N, n)
    exact.extend(need - np.linalg.norm(q[pairs[:, 0]] - q[pairs[:, 1]], axis=1))
    max_violation = float(max(0.0, max(exact)))
    val, _ = cost(u, snap)
    return BaselineResult(u=u, converged=max_violation <= ACCEPT_TOL, objective=float(val),
                          outer_iterations=outer, max_violation=max_violation, relaxed=relaxed)
