"""Seeded closed-loop simulation of the inspection task and the CIS filter.

Each step builds the communication snapshot, buffered Voronoi half-spaces
and the K-step lifted QP, solves it and applies the first input block. If
the QP is infeasible the robots either climb the Fiedler gradient under the
box and collision constraints (``recover``) or hold position (``hold``).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .comm import PositionState, comm_snapshot, exact_fiedler
from .config import ScenarioConfig
from .exceptions import InvalidArgumentError
from .geometry import buffered_voronoi, min_separation_margin, neighbor_pairs, separation_margins
from .horizon import (
    collision_horizon_constraint,
    fiedler_horizon_constraint,
    horizon_model,
    input_box,
    robot_bounds,
)
from .objectives import (
    BASE_STATION,
    AssignmentMatrix,
    assign_pois,
    cis_objective,
    inspection_objective,
    stochastic_reference,
)
from .qp import OPTIMAL, PRIMAL_INFEASIBLE, QpProblem, solve

log = logging.getLogger(__name__)

RECOVERY = "infeasible-recovery"
INIT_RETRIES = 100
DART_ATTEMPTS = 2000


@dataclass
class StepRecord:
    k: int
    positions: NDArray[np.float64]
    u: NDArray[np.float64]
    lambda2_exact: float
    lambda2_pred: float
    lambda2_pred_rows: NDArray[np.float64]
    solver_status: str
    solve_ms: float
    min_margin: float
    slack_max: float = 0.0
    relaxed: bool = False
    degenerate: bool = False


@dataclass
class SimTrace:
    """Per-step records plus the position reached after the last step."""

    dim: int
    records: list[StepRecord] = field(default_factory=list)
    final_positions: NDArray[np.float64] | None = None
    pois: NDArray[np.float64] | None = None
    assignment: NDArray[np.int64] | None = None
    aborted: str | None = None

    def __len__(self) -> int:
        return len(self.records)

    def positions(self) -> NDArray[np.float64]:
        """All visited positions, shape ``(T + 1, N, n)``."""
        pos = [r.positions for r in self.records]
        if self.final_positions is not None:
            pos.append(self.final_positions)
        return np.array(pos)

    def inputs(self) -> NDArray[np.float64]:
        return np.array([r.u for r in self.records])

    def column(self, name: str) -> NDArray:
        return np.array([getattr(r, name) for r in self.records])


@dataclass
class RuntimeStats:
    min: float
    median: float
    mean: float
    max: float
    var: float


@dataclass
class RunReport:
    runtime_ms: RuntimeStats
    min_lambda2: float
    final_lambda2: float
    min_margin: float
    poi_errors: list[float]
    infeasible_steps: int
    relaxed_steps: int
    lambda2_violations: int
    separation_violations: int


@dataclass
class VerificationReport:
    min_lambda2: float
    max_lambda2_shortfall: float
    lambda2_violations: list[int]
    min_margin: float
    separation_violations: list[tuple[int, int, int, float]]

    @property
    def ok(self) -> bool:
        return not self.lambda2_violations and not self.separation_violations


@dataclass
class SimContext:
    """Mutable per-run state that is not part of the robot positions."""

    config: ScenarioConfig
    assignment: AssignmentMatrix | None = None
    pois: NDArray[np.float64] | None = None
    rng: np.random.Generator | None = None
    prev_u: NDArray[np.float64] | None = None


def runtime_stats(trace_or_times) -> RuntimeStats:
    """Min/median/mean/max/variance of per-iteration assembly + solve time (ms)."""
    times = trace_or_times.column("solve_ms") if isinstance(trace_or_times, SimTrace) else trace_or_times
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise InvalidArgumentError("no timings to summarise")
    return RuntimeStats(float(times.min()), float(np.median(times)), float(times.mean()),
                        float(times.max()), float(times.var()))


def _disc_samples(rng: np.random.Generator, count: int, radius: float, dim: int) -> NDArray[np.float64]:
    """Uniform samples in a ``dim``-ball of the given radius."""
    direction = rng.standard_normal((count, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * radius * rng.random((count, 1)) ** (1.0 / dim)


def initial_positions(config: ScenarioConfig, rng: np.random.Generator) -> NDArray[np.float64]:
    """Base station at the origin, the others dart-thrown in a disc of radius ``init_radius * d50``.

    A sample is kept when all clearances hold and the Fiedler value meets the
    hard bound; otherwise the disc shrinks by 10% and sampling restarts.
    """
    if config.initial_positions is not None:
        p = np.asarray(config.initial_positions, dtype=float)
        if p.shape != (config.N, config.dim):
            raise InvalidArgumentError(f"initial_positions must be {config.N} x {config.dim}")
        return p
    radius = config.init_radius * config.d50
    radii = config.radii
    link = config.link_params()
    for _ in range(INIT_RETRIES):
        p = np.zeros((config.N, config.dim))
        placed = 1
        for _ in range(DART_ATTEMPTS):
            if placed == config.N:
                break
            cand = _disc_samples(rng, 1, radius, config.dim)[0]
            gaps = np.linalg.norm(p[:placed] - cand, axis=1) - radii[:placed] - radii[placed] - config.eps
            if np.all(gaps > 0):
                p[placed] = cand
                placed += 1
        if placed == config.N:
            state = PositionState(p, radii)
            if exact_fiedler(state, link) >= config.lambda2_min:
                return p
        radius *= 0.9
    raise InvalidArgumentError("could not generate a feasible initial configuration")


def sample_pois(config: ScenarioConfig, rng: np.random.Generator) -> NDArray[np.float64]:
    if config.pois is not None:
        pois = np.atleast_2d(np.asarray(config.pois, dtype=float))
        if pois.shape != (config.L, config.dim):
            raise InvalidArgumentError(f"pois must be {config.L} x {config.dim}")
        return pois
    return _disc_samples(rng, config.L, config.poi_radius * config.d50, config.dim)


def make_context(config: ScenarioConfig) -> tuple[PositionState, SimContext]:
    """Initial state and context, with independent RNG streams per purpose."""
    init_ss, poi_ss, noise_ss = np.random.SeedSequence(config.seed).spawn(3)
    p0 = initial_positions(config, np.random.default_rng(init_ss))
    state = PositionState(p0, config.radii)
    ctx = SimContext(config, prev_u=np.zeros(config.N * config.dim), rng=np.random.default_rng(noise_ss))
    if config.mode == "inspection":
        ctx.pois = sample_pois(config, np.random.default_rng(poi_ss))
        ctx.assignment = assign_pois(p0, ctx.pois)
    return state, ctx


def build_qp(state: PositionState, config: ScenarioConfig, ctx: SimContext, snapshot=None):
    """Assemble the lifted QP for the current state.

    Returns ``(problem, snapshot, M, halfspaces)``; ``M`` is ``None`` when no
    connectivity rows are present (CIS disabled).
    """
    if snapshot is None:
        snapshot = comm_snapshot(state, config.link_params())
    K, N, n = config.K, state.count, state.dim
    p = state.stacked
    pairs, _ = neighbor_pairs(state, config.neighbor_mode)
    halfspaces = buffered_voronoi(state, config.body_params(), pairs)
    Cc, dc = collision_horizon_constraint(halfspaces, p, K)
    lb, ub = input_box(config.horizon_params(), N, n)
    model = horizon_model(p, snapshot.gradient, K)

    if config.mode == "inspection":
        H, g = inspection_objective(ctx.assignment.S, p, ctx.pois, model, config.zeta, config.eta)
        Af, bf = fiedler_horizon_constraint(snapshot.fiedler_value, snapshot.gradient, config.lambda2_min, K)
        problem = QpProblem(H, g, np.vstack([Af, Cc]), np.concatenate([bf, dc]), lb, ub)
        return problem, snapshot, model.M, halfspaces

    u_ref = stochastic_reference(ctx.prev_u, config.sigma_v_scale, ctx.rng, n)
    if not config.cis_enabled:
        problem = QpProblem(np.eye(K * N * n), -np.tile(u_ref, K), Cc, dc, lb, ub)
        return problem, snapshot, None, halfspaces
    terms = cis_objective(u_ref, K, config.cis_params(), snapshot.fiedler_value, model.M)
    A = np.vstack([terms.A, np.hstack([Cc, np.zeros((Cc.shape[0], terms.n_slack))])])
    b = np.concatenate([terms.b, dc])
    problem = QpProblem(terms.H, terms.g, A, b,
                        np.concatenate([lb, terms.lb[lb.size:]]),
                        np.concatenate([ub, terms.ub[ub.size:]]))
    return problem, snapshot, model.M, halfspaces


def recovery_qp(state: PositionState, config: ScenarioConfig, snapshot, halfspaces) -> QpProblem:
    """Every robot acts as a relay: ``min 1/2 zeta |U|^2 - eta m^T sum_k u^k``.

    Only box and collision rows are kept, so ``U = 0`` is always feasible.
    """
    K, N, n = config.K, state.count, state.dim
    model = horizon_model(state.stacked, snapshot.gradient, K)
    Cc, dc = collision_horizon_constraint(halfspaces, state.stacked, K)
    lb, ub = input_box(config.horizon_params(), N, n)
    return QpProblem(config.zeta * np.eye(K * N * n), -config.eta * model.M[-1], Cc, dc, lb, ub)


def step(state: PositionState, config: ScenarioConfig, ctx: SimContext, k: int = 0):
    """Plan, apply the first input block and return ``(next_state, record)``."""
    t0 = time.perf_counter()
    snapshot = comm_snapshot(state, config.link_params())
    nu = state.count * state.dim
    umax = np.repeat(robot_bounds(config.horizon_params(), state.count), state.dim)
    slack_max = 0.0
    if config.baseline:
        from .baseline import nonlinear_baseline_step

        result = nonlinear_baseline_step(state, config, ctx, snapshot=snapshot)
        u0 = result.u if result.converged else np.zeros(nu)
        status = OPTIMAL if result.converged else "baseline-failed"
        rows = np.array([snapshot.fiedler_value + snapshot.gradient @ u0])
        relaxed = result.relaxed
    else:
        problem, snapshot, M, halfspaces = build_qp(state, config, ctx, snapshot)
        sol = solve(problem)
        status = sol.status
        relaxed = halfspaces.violation
        if sol.status == OPTIMAL:
            U = sol.x[:config.K * nu]
            u0 = U[:nu]
            rows = snapshot.fiedler_value + M @ U if M is not None else np.array([np.nan])
            if config.mode == "cis" and config.cis_enabled:
                slack_max = float(np.max(sol.x[config.K * nu:], initial=0.0))
        else:
            u0 = np.zeros(nu)
            rows = np.array([np.nan])
            if sol.status == PRIMAL_INFEASIBLE and M is not None and config.infeasible_policy == "recover":
                rec = solve(recovery_qp(state, config, snapshot, halfspaces))
                if rec.status == OPTIMAL:
                    u0 = rec.x[:nu]
                    status = RECOVERY
            log.debug("step %d: %s", k, status)
    u0 = np.clip(u0, -umax, umax)
    solve_ms = 1e3 * (time.perf_counter() - t0)

    record = StepRecord(
        k=k,
        positions=state.positions.copy(),
        u=u0.copy(),
        lambda2_exact=snapshot.fiedler_value,
        lambda2_pred=float(snapshot.fiedler_value + snapshot.gradient @ u0),
        lambda2_pred_rows=np.atleast_1d(rows),
        solver_status=status,
        solve_ms=solve_ms,
        min_margin=min_separation_margin(state, config.body_params()),
        slack_max=slack_max,
        relaxed=bool(relaxed),
        degenerate=snapshot.degenerate,
    )
    ctx.prev_u = u0
    return state.moved(u0), record


def run_scenario(config: ScenarioConfig, progress=None) -> tuple[SimTrace, RunReport]:
    """Run ``config.iterations`` closed-loop steps from the seeded initial state."""
    state, ctx = make_context(config)
    trace = SimTrace(dim=config.dim, pois=ctx.pois,
                     assignment=None if ctx.assignment is None else ctx.assignment.S)
    for k in range(config.iterations):
        try:
            state, record = step(state, config, ctx, k)
        except (np.linalg.LinAlgError, ValueError) as exc:
            trace.aborted = f"step {k}: {exc}"
            log.error("aborting run: %s", trace.aborted)
            break
        trace.records.append(record)
        if progress is not None:
            progress(k, record)
    trace.final_positions = state.positions.copy()
    return trace, make_report(trace, config)


def _bound_applies(config: ScenarioConfig) -> bool:
    return config.mode == "inspection" or config.cis_enabled


def verify_trace(trace: SimTrace, config: ScenarioConfig, lambda_tol: float = 1e-6,
                 sep_tol: float = 1e-6) -> VerificationReport:
    """Recompute exact constraints at every visited position.

    A Fiedler violation is any position with ``lambda2 < bound - lambda_tol``
    (skipped when the run has no connectivity constraint); a separation
    violation is any pair closer than ``r_i + r_j + eps - sep_tol``.
    """
    link = config.link_params()
    radii = config.radii
    positions = trace.positions()
    lam = np.array([exact_fiedler(PositionState(p, radii), link) for p in positions])
    lambda_viol: list[int] = []
    shortfall = 0.0
    if _bound_applies(config) and lam.size:
        lambda_viol = [int(k) for k in np.flatnonzero(lam < config.lambda2_min - lambda_tol)]
        shortfall = float(max(0.0, config.lambda2_min - lam.min()))
    sep_viol = []
    min_margin = np.inf
    for k, p in enumerate(positions):
        margins = separation_margins(p, radii, config.eps)
        min_margin = min(min_margin, float(margins.min()))
        for i, j in zip(*np.nonzero(np.triu(margins < -sep_tol, 1))):
            sep_viol.append((k, int(i), int(j), float(margins[i, j])))
    return VerificationReport(
        min_lambda2=float(lam.min()) if lam.size else np.nan,
        max_lambda2_shortfall=shortfall,
        lambda2_violations=lambda_viol,
        min_margin=float(min_margin),
        separation_violations=sep_viol,
    )


def poi_errors(trace: SimTrace) -> list[float]:
    if trace.pois is None or trace.assignment is None or trace.final_positions is None:
        return []
    robots = np.argmax(trace.assignment, axis=1)
    return [float(e) for e in np.linalg.norm(trace.final_positions[robots] - trace.pois, axis=1)]


def make_report(trace: SimTrace, config: ScenarioConfig) -> RunReport:
    verification = verify_trace(trace, config)
    lam = [r.lambda2_exact for r in trace.records]
    final_lambda = exact_fiedler(PositionState(trace.final_positions, config.radii), config.link_params())
    stats = runtime_stats(trace) if len(trace) else RuntimeStats(*(np.nan,) * 5)
    return RunReport(
        runtime_ms=stats,
        min_lambda2=float(min(lam + [final_lambda])),
        final_lambda2=final_lambda,
        min_margin=verification.min_margin,
        poi_errors=poi_errors(trace),
        infeasible_steps=sum(r.solver_status != OPTIMAL for r in trace.records),
        relaxed_steps=sum(r.relaxed for r in trace.records),
        lambda2_violations=len(verification.lambda2_violations),
        separation_violations=len(verification.separation_violations),
    )
