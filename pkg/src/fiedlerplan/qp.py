"""Dense strictly convex QP solver (Goldfarb-Idnani dual active set).

Solves::

    minimize    1/2 x^T H x + g^T x
    subject to  A x <= b,  lb <= x <= ub

The dual method starts at the unconstrained minimizer and adds the most
violated constraint each iteration, keeping the iterate optimal for the
current working set. The working set is represented through a matrix ``J``
with ``J^T H J = I`` whose leading columns span ``H^{-1} N`` (``N`` the
active normals) and an upper-triangular ``R`` with ``J_1^T N = R``.
Constraints are added with one Householder reflection and dropped with a
sweep of Givens rotations. When a violated constraint cannot be satisfied
by any primal or dual step the problem is infeasible and the dual ray is
returned as a Farkas certificate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_factor, solve_triangular

from .exceptions import InvalidArgumentError

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal-infeasible"
MAX_ITERATIONS = "max-iterations"


@dataclass
class QpProblem:
    """Problem data; ``A``/``b`` may be empty and bounds may be infinite."""

    H: NDArray[np.float64]
    g: NDArray[np.float64]
    A: NDArray[np.float64] | None = None
    b: NDArray[np.float64] | None = None
    lb: NDArray[np.float64] | None = None
    ub: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        nv = self.g.size
        if self.H.shape != (nv, nv):
            raise InvalidArgumentError(f"H has shape {self.H.shape}, expected {(nv, nv)}")
        if not np.allclose(self.H, self.H.T, rtol=0.0, atol=1e-10):
            raise InvalidArgumentError("H must be symmetric")
        if self.A is None or np.size(self.A) == 0:
            self.A = np.zeros((0, nv))
            self.b = np.zeros(0)
        else:
            self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
            self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[1] != nv or self.A.shape[0] != self.b.size:
            raise InvalidArgumentError(f"A {self.A.shape} and b {self.b.shape} do not match {nv} variables")
        self.lb = np.full(nv, -np.inf) if self.lb is None else np.broadcast_to(
            np.asarray(self.lb, dtype=float), (nv,)).copy()
        self.ub = np.full(nv, np.inf) if self.ub is None else np.broadcast_to(
            np.asarray(self.ub, dtype=float), (nv,)).copy()

    @property
    def nv(self) -> int:
        return self.g.size

    def objective(self, x: NDArray[np.float64]) -> float:
        return float(0.5 * x @ self.H @ x + self.g @ x)

    def primal_violation(self, x: NDArray[np.float64]) -> float:
        parts = [np.zeros(1), self.lb - x, x - self.ub]
        if self.b.size:
            parts.append(self.A @ x - self.b)
        return float(max(np.max(p) for p in parts))


@dataclass
class QpSettings:
    max_iter: int = 10_000
    ridge: float = 1e-9
    feas_tol: float = 1e-10


@dataclass
class QpSolution:
    """Solver output.

    ``mu`` holds the multipliers of ``A x <= b`` (non-negative). ``nu`` holds
    the bound multipliers in signed form: positive where the upper bound is
    active, negative where the lower bound is active, so stationarity reads
    ``H x + g + A^T mu + nu = 0``.
    """

    x: NDArray[np.float64]
    status: str
    objective: float
    iterations: int
    solve_time: float
    mu: NDArray[np.float64] = field(default=None)
    nu: NDArray[np.float64] = field(default=None)
    certificate: dict | None = None


@dataclass(frozen=True)
class KktResiduals:
    stationarity: float
    primal: float
    dual: float
    complementarity: float

    def max(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)


def _stack_constraints(problem: QpProblem):
    """All constraints as ``G x >= h`` plus a map back to their origin."""
    nv = problem.nv
    eye = np.eye(nv)
    lo = np.flatnonzero(np.isfinite(problem.lb))
    hi = np.flatnonzero(np.isfinite(problem.ub))
    G = np.vstack([-problem.A, eye[lo], -eye[hi]])
    h = np.concatenate([-problem.b, problem.lb[lo], -problem.ub[hi]])
    kind = np.concatenate([np.zeros(problem.b.size, int), np.ones(lo.size, int), np.full(hi.size, 2)])
    index = np.concatenate([np.arange(problem.b.size), lo, hi]).astype(int)
    return G, h, kind, index


def _unpack_multipliers(problem: QpProblem, kind, index, active, u):
    mu = np.zeros(problem.b.size)
    nu = np.zeros(problem.nv)
    for c, val in zip(active, u):
        if kind[c] == 0:
            mu[index[c]] += val
        elif kind[c] == 1:
            nu[index[c]] -= val
        else:
            nu[index[c]] += val
    return mu, nu


def solve(problem: QpProblem, settings: QpSettings | None = None) -> QpSolution:
    """Solve ``problem``; see the module docstring for the method."""
    settings = settings or QpSettings()
    start = time.perf_counter()
    nv = problem.nv

    bad = np.flatnonzero(problem.lb > problem.ub)
    if bad.size:
        i = int(bad[0])
        return QpSolution(
            x=np.zeros(nv), status=PRIMAL_INFEASIBLE, objective=np.nan, iterations=0,
            solve_time=time.perf_counter() - start,
            certificate={"empty_box": i, "lb": float(problem.lb[i]), "ub": float(problem.ub[i])},
        )

    G, h, kind, index = _stack_constraints(problem)
    row_norm = np.linalg.norm(G, axis=1)
    row_norm[row_norm == 0] = 1.0

    Hr = problem.H + settings.ridge * np.eye(nv)
    try:
        chol, _ = cho_factor(Hr, lower=True)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgumentError("H is not positive semidefinite") from exc
    chol = np.tril(chol)
    # J = L^{-T}, so J^T Hr J = I
    J = solve_triangular(chol, np.eye(nv), lower=True).T.copy()
    x = -J @ (J.T @ problem.g)

    R = np.zeros((nv, nv))
    active: list[int] = []
    u = np.zeros(0)
    is_active = np.zeros(G.shape[0], dtype=bool)
    iterations = 0
    status = OPTIMAL
    certificate = None

    def drop(l: int) -> None:
        nonlocal u
        q = len(active)
        for k in range(l, q - 1):
            R[:, k] = R[:, k + 1]
        R[:, q - 1] = 0.0
        for k in range(l, q - 1):
            a, b_ = R[k, k], R[k + 1, k]
            rr = np.hypot(a, b_)
            if rr == 0.0:
                continue
            c, s = a / rr, b_ / rr
            rk, rk1 = R[k, k:].copy(), R[k + 1, k:].copy()
            R[k, k:] = c * rk + s * rk1
            R[k + 1, k:] = -s * rk + c * rk1
            jk, jk1 = J[:, k].copy(), J[:, k + 1].copy()
            J[:, k] = c * jk + s * jk1
            J[:, k + 1] = -s * jk + c * jk1
        R[q - 1, :] = 0.0
        is_active[active[l]] = False
        del active[l]
        u = np.delete(u, l)

    while True:
        slack = (G @ x - h) / row_norm
        slack[is_active] = np.inf
        if slack.size == 0 or slack.min() >= -settings.feas_tol:
            break
        p = int(np.argmin(slack))
        n_p = G[p]
        u_new = 0.0

        while True:
            iterations += 1
            if iterations > settings.max_iter:
                status = MAX_ITERATIONS
                break
            q = len(active)
            d = J.T @ n_p
            z = J[:, q:] @ d[q:]
            r = solve_triangular(R[:q, :q], d[:q]) if q else np.zeros(0)

            t1, l = np.inf, -1
            if q:
                pos = r > 1e-13 * max(1.0, np.max(np.abs(r)))
                if np.any(pos):
                    ratios = np.full(q, np.inf)
                    ratios[pos] = u[pos] / r[pos]
                    l = int(np.argmin(ratios))
                    t1 = float(ratios[l])

            ztn = float(z @ n_p)
            dependent = ztn <= 1e-18 * float(d @ d)
            t2 = np.inf if dependent else float((h[p] - n_p @ x) / ztn)

            if not np.isfinite(t1) and not np.isfinite(t2):
                status = PRIMAL_INFEASIBLE
                y = np.zeros(G.shape[0])
                y[active] = -r
                y[p] = 1.0
                mu_c, nu_c = _unpack_multipliers(problem, kind, index, range(G.shape[0]), y)
                certificate = {"violated": p, "dual_ray_ineq": mu_c, "dual_ray_bounds": nu_c,
                               "ray_value": float(h @ y)}
                break

            if not np.isfinite(t2):
                u = u - t1 * r
                u_new += t1
                drop(l)
                continue

            t = min(t1, t2)
            x = x + t * z
            u = u - t * r
            u_new += t
            if t2 <= t1:
                w = d[q:].copy()
                alpha = -np.copysign(np.linalg.norm(w), w[0])
                v = w
                v[0] -= alpha
                vv = float(v @ v)
                if w.size > 1 and vv > 0.0:
                    Jq = J[:, q:]
                    J[:, q:] = Jq - np.outer(Jq @ v, (2.0 / vv) * v)
                else:
                    alpha = d[q]
                R[:q, q] = d[:q]
                R[q, q] = alpha
                active.append(p)
                is_active[p] = True
                u = np.append(u, u_new)
                break
            drop(l)

        if status != OPTIMAL:
            break

    mu, nu = _unpack_multipliers(problem, kind, index, active, np.maximum(u, 0.0))
    return QpSolution(
        x=x,
        status=status,
        objective=problem.objective(x) if status != PRIMAL_INFEASIBLE else np.nan,
        iterations=iterations,
        solve_time=time.perf_counter() - start,
        mu=mu,
        nu=nu,
        certificate=certificate,
    )


def kkt_residuals(
    problem: QpProblem,
    solution: QpSolution,
    mu: NDArray[np.float64] | None = None,
    nu: NDArray[np.float64] | None = None,
) -> KktResiduals:
    """Infinity-norm KKT residuals at ``solution.x``.

    Multipliers default to those stored in ``solution``.
    """
    x = solution.x
    mu = solution.mu if mu is None else mu
    nu = solution.nu if nu is None else nu
    mu = np.zeros(problem.b.size) if mu is None else np.asarray(mu, dtype=float)
    nu = np.zeros(problem.nv) if nu is None else np.asarray(nu, dtype=float)
    grad = problem.H @ x + problem.g + problem.A.T @ mu + nu
    stationarity = float(np.max(np.abs(grad), initial=0.0))
    primal = problem.primal_violation(x)

    nu_up = np.maximum(nu, 0.0)
    nu_lo = np.maximum(-nu, 0.0)
    dual = float(max(np.max(-mu, initial=0.0), 0.0))
    # a signed bound multiplier pointing at an infinite bound is infeasible
    dual = max(dual, float(np.max(np.where(np.isfinite(problem.ub), 0.0, nu_up), initial=0.0)),
               float(np.max(np.where(np.isfinite(problem.lb), 0.0, nu_lo), initial=0.0)))

    comp = 0.0
    if problem.b.size:
        comp = float(np.max(np.abs(mu * (problem.A @ x - problem.b)), initial=0.0))
    with np.errstate(invalid="ignore"):
        up = np.where(nu_up > 0, nu_up * (problem.ub - x), 0.0)
        lo = np.where(nu_lo > 0, nu_lo * (x - problem.lb), 0.0)
    comp = max(comp, float(np.max(np.abs(up), initial=0.0)), float(np.max(np.abs(lo), initial=0.0)))
    return KktResiduals(stationarity, primal, dual, comp)
