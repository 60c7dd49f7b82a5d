"""End-to-end acceptance criteria, each at its stated tolerance.

Scenario choices (seeds, POI radii) are fixed here; the reasoning behind
them lives in the decisions ledger kept alongside the repository.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from fiedlerplan.assignment import hungarian
from fiedlerplan.comm import LinkParams, PositionState, comm_snapshot, exact_fiedler, predict_fiedler
from fiedlerplan.config import ScenarioConfig
from fiedlerplan.geometry import BodyParams, buffered_voronoi
from fiedlerplan.qp import OPTIMAL, kkt_residuals, solve
from fiedlerplan.sim import run_scenario, verify_trace

from oracles import brute_force_assignment, dual_projected_gradient, random_instance

LAMBDA_TOL = 0.02
SEP_TOL = 1e-6
CIS_SEEDS = range(5)

# inspection scenario where the bound is approached before the POIs are reached
FEASIBLE = dict(seed=8, poi_radius=2.6)
INFEASIBLE = dict(seed=0, poi_radius=6.0)
COMPARE = dict(N=6, L=2, K=1, iterations=200, seed=0)


def _lambda_series(trace, config):
    link = config.link_params()
    return np.array([exact_fiedler(PositionState(p, config.radii), link) for p in trace.positions()])


@pytest.fixture(scope="module")
def feasible_run():
    config = ScenarioConfig.inspection(**FEASIBLE)
    t0 = time.perf_counter()
    trace, report = run_scenario(config)
    return config, trace, report, time.perf_counter() - t0


@pytest.fixture(scope="module")
def infeasible_run():
    config = ScenarioConfig.inspection(**INFEASIBLE)
    trace, report = run_scenario(config)
    return config, trace, report


@pytest.fixture(scope="module")
def cis_off_runs():
    configs = [ScenarioConfig.cis(seed=s, iterations=500, cis_enabled=False) for s in CIS_SEEDS]
    return [(c, *run_scenario(c)) for c in configs]


@pytest.fixture(scope="module")
def cis_on_runs():
    configs = [ScenarioConfig.cis(seed=s, iterations=1000) for s in CIS_SEEDS]
    return [(c, *run_scenario(c)) for c in configs]


@pytest.fixture(scope="module")
def compare_runs():
    approx = ScenarioConfig.inspection(**COMPARE)
    base = approx.replace(baseline=True)
    return (approx, *run_scenario(approx)), (base, *run_scenario(base))


# -- closed-loop scenarios ------------------------------------------------

def test_criterion_01_connectivity_bound(feasible_run, criterion):
    config, trace, report, wall = feasible_run
    lam = _lambda_series(trace, config)
    k_min = int(np.argmin(lam))
    floor_ok = lam.min() >= config.lambda2_min - LAMBDA_TOL
    approaches = lam[0] > lam.min() and lam.min() <= config.lambda2_min + 0.05
    recovers = lam[k_min:].max() - lam.min() >= 0.05 and lam[-1] - lam.min() >= 0.05
    criterion(1, floor_ok and approaches and recovers and wall <= 60.0,
              f"min lambda2 {lam.min():.4f} at k={k_min}, start {lam[0]:.3f}, final {lam[-1]:.3f}, "
              f"wall {wall:.1f} s")


def test_criterion_02_feasible_completion(feasible_run, criterion):
    _, _, report, _ = feasible_run
    worst = max(report.poi_errors)
    criterion(2, worst <= 1.0, f"max terminal POI distance {worst:.3g} m over {len(report.poi_errors)} POIs")


def test_criterion_03_infeasible_inspection(infeasible_run, criterion):
    config, trace, _ = infeasible_run
    lam = _lambda_series(trace, config)[-50:]
    in_band = lam.min() >= config.lambda2_min - LAMBDA_TOL and lam.max() <= config.lambda2_min + 0.1
    u_inf = np.abs(trace.inputs()[-50:]).max(axis=1)
    halted = u_inf.mean() <= 1e-2 * config.u_max
    criterion(3, in_band and halted,
              f"last-50 lambda2 in [{lam.min():.4f}, {lam.max():.4f}], "
              f"mean |u|_inf {u_inf.mean():.3f} (limit {1e-2 * config.u_max:.3f})")


def test_criterion_04_cis_off_disconnects(cis_off_runs, criterion):
    finals = [exact_fiedler(PositionState(t.positions()[500], c.radii), c.link_params())
              for c, t, _ in cis_off_runs]
    med = float(np.median(finals))
    criterion(4, med <= 0.05, f"median lambda2 at k=500 {med:.3g}")


def test_criterion_05_cis_on_holds_bound(cis_on_runs, criterion):
    mins = [_lambda_series(t, c).min() for c, t, _ in cis_on_runs]
    criterion(5, min(mins) >= 0.23, "min lambda2 per seed " + ", ".join(f"{m:.4f}" for m in mins))


def test_criterion_06_collision(feasible_run, infeasible_run, cis_off_runs, cis_on_runs, compare_runs,
                                criterion):
    runs = [feasible_run[:2], infeasible_run[:2]]
    runs += [(c, t) for c, t, _ in cis_off_runs + cis_on_runs]
    runs += [(c, t) for c, t, _ in compare_runs]
    reports = [verify_trace(t, c, sep_tol=SEP_TOL) for c, t in runs]
    violations = sum(len(r.separation_violations) for r in reports)
    margin = min(r.min_margin for r in reports)
    criterion(6, violations == 0, f"{len(runs)} runs, min margin {margin:.2e} m, violations {violations}")


# -- component oracles ----------------------------------------------------

def test_criterion_07_gradient(criterion):
    rng = np.random.default_rng(7)
    link = LinkParams(0.1, 50.0)
    h = 1e-5
    worst, checked = 0.0, 0
    while checked < 100:
        s = PositionState(rng.uniform(-80, 80, (5, 2)), np.full(5, 0.1))
        snap = comm_snapshot(s, link)
        ev = np.linalg.eigvalsh(snap.laplacian)
        if ev[2] - ev[1] <= 1e-3:
            continue
        m = snap.gradient
        fd = np.empty_like(m)
        for k in range(m.size):
            e = np.zeros(m.size)
            e[k] = h
            fd[k] = (exact_fiedler(PositionState.from_stacked(s.stacked + e, 2, s.radii), link)
                     - exact_fiedler(PositionState.from_stacked(s.stacked - e, 2, s.radii), link)) / (2 * h)
        worst = max(worst, np.linalg.norm(fd - m) / np.linalg.norm(m))
        checked += 1
    criterion(7, worst <= 1e-5, f"max relative error {worst:.2e} over {checked} configs")


def test_criterion_08_prediction_order(criterion):
    rng = np.random.default_rng(8)
    link = LinkParams(0.1, 50.0)
    ratios = []
    for _ in range(50):
        s = PositionState(rng.uniform(-80, 80, (6, 2)), np.full(6, 0.1))
        snap = comm_snapshot(s, link)
        u = rng.uniform(-2, 2, s.stacked.size)
        errs = [abs(predict_fiedler(snap.fiedler_value, snap.gradient, a * u) - exact_fiedler(s.moved(a * u), link))
                for a in (1.0, 0.5)]
        ratios.append(errs[0] / errs[1])
    med = float(np.median(ratios))
    criterion(8, 3.0 <= med <= 5.0, f"median error ratio {med:.3f}")


def _spaced(rng, N, clearance, spread):
    pts = []
    while len(pts) < N:
        c = rng.uniform(-spread, spread, 2)
        if all(np.linalg.norm(c - q) > clearance for q in pts):
            pts.append(c)
    return np.array(pts)


def test_criterion_09_buffered_voronoi(criterion):
    rng = np.random.default_rng(9)
    samples, violations, checked = 10_000, 0, 0
    for _ in range(20):
        N = int(rng.integers(3, 9))
        r = rng.uniform(0.0, 0.5, N)
        eps = float(rng.uniform(0.5, 10.0))
        p = _spaced(rng, N, 1.0 + eps + 0.1, 20.0)
        hs = buffered_voronoi(PositionState(p, r), BodyParams(r, eps))
        feasible = []
        for i in range(N):
            pts = np.empty((0, 2))
            while len(pts) < samples:
                cand = p[i] + rng.uniform(-15, 15, (4 * samples, 2))
                pts = np.vstack([pts, cand[hs.contains(i, cand)]])
            feasible.append(pts[:samples])
        pairs = np.array([(i, j) for i in range(N) for j in range(i + 1, N)])
        pick = pairs[rng.integers(0, len(pairs), samples)]
        xi = np.array(feasible)[pick[:, 0], rng.integers(0, samples, samples)]
        xj = np.array(feasible)[pick[:, 1], rng.integers(0, samples, samples)]
        need = r[pick[:, 0]] + r[pick[:, 1]] + eps
        violations += int(np.sum(np.linalg.norm(xi - xj, axis=1) < need - 1e-9))
        checked += samples
    criterion(9, violations == 0, f"{violations} violations in {checked} sampled pairs over 20 configs")


def test_criterion_10_hungarian(criterion):
    rng = np.random.default_rng(10)
    mismatches = 0
    for _ in range(50):
        N = int(rng.integers(1, 8))
        L = int(rng.integers(1, min(4, N) + 1))
        cost = rng.uniform(0, 100, (L, N))
        best, _ = brute_force_assignment(cost)
        cols = hungarian(cost)
        mismatches += cost[np.arange(L), cols].sum() != pytest.approx(best, abs=1e-12)
    criterion(10, mismatches == 0, f"{mismatches} mismatches in 50 instances")


def test_criterion_11_qp(criterion):
    rng = np.random.default_rng(11)
    worst_gap = worst_kkt = 0.0
    failures = 0
    for _ in range(100):
        prob = random_instance(rng)
        sol = solve(prob)
        if sol.status != OPTIMAL:
            failures += 1
            continue
        worst_kkt = max(worst_kkt, kkt_residuals(prob, sol).max())
        dual, _ = dual_projected_gradient(prob)
        worst_gap = max(worst_gap, abs(sol.objective - dual))
    criterion(11, failures == 0 and worst_gap <= 1e-6 and worst_kkt <= 1e-6,
              f"max objective gap {worst_gap:.2e}, max KKT residual {worst_kkt:.2e}, non-optimal {failures}")


# -- approximate vs nonlinear planner ------------------------------------

def test_criterion_12_runtime_ordering(feasible_run, compare_runs, criterion):
    (_, _, approx), (_, _, base) = compare_runs
    ratio = base.runtime_ms.median / approx.runtime_ms.median
    full = feasible_run[2].runtime_ms.median
    criterion(12, ratio >= 10.0 and full <= 50.0,
              f"baseline/approximate median ratio {ratio:.1f} (need >= 10), "
              f"N=10 K=5 median {full:.1f} ms (need <= 50)")


def test_criterion_13_baseline_equivalence(compare_runs, criterion):
    (ca, ta, ra), (cb, tb, rb) = compare_runs
    robots = np.argmax(ta.assignment, axis=1)
    np.testing.assert_array_equal(robots, np.argmax(tb.assignment, axis=1))
    cloud = np.vstack([ta.positions()[0], ta.pois])
    diameter = float(np.max(np.linalg.norm(cloud[:, None] - cloud[None], axis=2)))
    dev = float(np.max(np.linalg.norm(ta.final_positions[robots] - tb.final_positions[robots], axis=1)))
    lam_a = _lambda_series(ta, ca).min()
    lam_b = _lambda_series(tb, cb).min()
    floor = ca.lambda2_min - LAMBDA_TOL
    criterion(13, dev <= 0.05 * diameter and lam_a >= floor and lam_b >= floor,
              f"terminal deviation {dev:.3f} m vs 5% of diameter {0.05 * diameter:.2f} m, "
              f"min lambda2 {lam_a:.4f} / {lam_b:.4f}")
