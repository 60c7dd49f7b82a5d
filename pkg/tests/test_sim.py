from __future__ import annotations

import numpy as np
import pytest

from fiedlerplan.comm import PositionState, exact_fiedler
from fiedlerplan.config import ScenarioConfig, config_from_mapping, load_config
from fiedlerplan.exceptions import InvalidArgumentError
from fiedlerplan.qp import OPTIMAL, PRIMAL_INFEASIBLE
from fiedlerplan.sim import (
    RECOVERY,
    SimTrace,
    StepRecord,
    initial_positions,
    make_context,
    run_scenario,
    runtime_stats,
    step,
    verify_trace,
)


def small_inspection(**kw):
    return ScenarioConfig.inspection(**{"N": 5, "L": 2, "K": 3, "iterations": 25, "seed": 1, **kw})


# -- runtime statistics --------------------------------------------------

def test_runtime_stats_hand_values():
    s = runtime_stats([1.0, 2.0, 3.0, 4.0, 100.0])
    assert (s.min, s.median, s.mean, s.max) == (1.0, 3.0, 22.0, 100.0)
    assert s.var == pytest.approx(np.var([1, 2, 3, 4, 100]))


def test_runtime_stats_constant_and_empty():
    assert runtime_stats([5.0] * 4).var == 0.0
    with pytest.raises(InvalidArgumentError):
        runtime_stats([])


# -- configuration -------------------------------------------------------

def test_table_defaults():
    c = ScenarioConfig.inspection()
    assert (c.N, c.L, c.K, c.lambda2_min, c.eps, c.eta, c.zeta) == (10, 4, 5, 0.1, 10.0, 1e3, 0.1)
    c = ScenarioConfig.cis()
    assert (c.lambda2_min, c.lambda2_soft, c.iterations) == (0.25, 1.0, 1000)
    assert c.horizon_params().per_robot_u_max[0] == 0.0


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        ScenarioConfig(mode="patrol")
    with pytest.raises(InvalidArgumentError):
        ScenarioConfig.inspection(L=10)
    with pytest.raises(InvalidArgumentError):
        ScenarioConfig.inspection(baseline=True, K=3)
    with pytest.raises(InvalidArgumentError):
        ScenarioConfig.inspection(infeasible_policy="panic")
    with pytest.raises(InvalidArgumentError):
        config_from_mapping({"mode": "cis", "bogus": 1})


def test_yaml_nested_sections(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("mode: cis\nlink:\n  alpha: 0.2\n  d50: 40\nhorizon:\n  K: 2\nseed: 3\n")
    c = load_config(path)
    assert (c.mode, c.alpha, c.d50, c.K, c.seed, c.lambda2_min) == ("cis", 0.2, 40, 2, 3, 0.25)


# -- initial conditions ---------------------------------------------------

def test_initial_positions_feasible_and_seeded():
    c = ScenarioConfig.inspection(seed=4)
    a = initial_positions(c, np.random.default_rng(0))
    b = initial_positions(c, np.random.default_rng(0))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a[0], 0.0)
    d = np.linalg.norm(a[:, None] - a[None], axis=2) + 1e9 * np.eye(c.N)
    assert d.min() > 2 * 0.1 + c.eps
    assert exact_fiedler(PositionState(a, c.radii), c.link_params()) >= c.lambda2_min


def test_explicit_positions_checked():
    with pytest.raises(InvalidArgumentError):
        initial_positions(small_inspection(initial_positions=[[0, 0]]), np.random.default_rng(0))


# -- closed loop ----------------------------------------------------------

def test_run_is_deterministic():
    a, ra = run_scenario(small_inspection())
    b, rb = run_scenario(small_inspection())
    np.testing.assert_array_equal(a.positions(), b.positions())
    assert ra.min_lambda2 == rb.min_lambda2


def test_box_bounds_and_pinned_base_station():
    trace, _ = run_scenario(small_inspection())
    U = trace.inputs()
    assert np.max(np.abs(U)) <= 2.0
    np.testing.assert_array_equal(U[:, 0], 0.0)


def test_predicted_rows_respect_bound_on_optimal_steps():
    trace, report = run_scenario(small_inspection(iterations=40))
    for r in trace.records:
        if r.solver_status == OPTIMAL:
            assert r.lambda2_pred_rows.min() >= 0.1 - 1e-6
    assert report.separation_violations == 0


def test_two_robot_inspection_reaches_poi():
    c = ScenarioConfig.inspection(N=2, L=1, K=3, iterations=30, eps=1.0,
                                  initial_positions=[[0.0, 0.0], [20.0, 0.0]], pois=[[30.0, 0.0]])
    trace, report = run_scenario(c)
    # the single non-base robot is assigned and travels at the box limit
    assert trace.assignment.tolist() == [[0, 1]]
    np.testing.assert_allclose(trace.records[0].u, [0.0, 0.0, 2.0, 0.0], atol=1e-6)
    assert report.poi_errors[0] == pytest.approx(0.0, abs=1e-6)


def test_resting_cis_stays_put():
    # compact square: lambda2 is well above the soft bound
    square = [[0.0, 0.0], [12.0, 0.0], [12.0, 12.0], [0.0, 12.0]]
    c = ScenarioConfig.cis(N=4, K=2, iterations=15, sigma_v_scale=0.0, initial_positions=square)
    assert exact_fiedler(PositionState(np.array(square), c.radii), c.link_params()) > 1.0
    trace, report = run_scenario(c)
    np.testing.assert_allclose(trace.inputs(), 0.0, atol=1e-7)
    assert report.infeasible_steps == 0
    np.testing.assert_allclose(trace.final_positions, trace.records[0].positions, atol=1e-6)


def test_cis_disabled_has_no_connectivity_rows():
    c = ScenarioConfig.cis(N=4, K=2, iterations=5, cis_enabled=False)
    trace, _ = run_scenario(c)
    assert all(np.isnan(r.lambda2_pred_rows).all() for r in trace.records)


def _stretched(policy):
    return ScenarioConfig.inspection(
        N=3, L=1, K=2, iterations=1, lambda2_min=0.5, infeasible_policy=policy,
        initial_positions=[[0.0, 0.0], [60.0, 0.0], [120.0, 0.0]], pois=[[200.0, 0.0]])


def test_hold_policy_applies_zero_input():
    c = _stretched("hold")
    state, ctx = make_context(c)
    nxt, rec = step(state, c, ctx)
    assert rec.solver_status == PRIMAL_INFEASIBLE
    np.testing.assert_array_equal(rec.u, 0.0)
    np.testing.assert_array_equal(nxt.positions, state.positions)


def test_recover_policy_climbs_connectivity():
    c = _stretched("recover")
    state, ctx = make_context(c)
    nxt, rec = step(state, c, ctx)
    assert rec.solver_status == RECOVERY
    assert np.max(np.abs(rec.u)) <= 2.0 and np.all(rec.u[:2] == 0)
    link = c.link_params()
    assert exact_fiedler(nxt, link) > exact_fiedler(state, link)


# -- verification ---------------------------------------------------------

def _static_trace(positions, steps=3):
    p = np.asarray(positions, dtype=float)
    records = [StepRecord(k, p, np.zeros(p.size), 0.0, 0.0, np.zeros(1), OPTIMAL, 0.0, 0.0)
               for k in range(steps)]
    return SimTrace(dim=2, records=records, final_positions=p)


def test_verify_static_feasible():
    c = small_inspection(N=3, L=1)
    rep = verify_trace(_static_trace([[0, 0], [20, 0], [0, 20]]), c)
    assert rep.ok and rep.min_margin == pytest.approx(20 - 0.2 - 10)


def test_verify_flags_constructed_violations():
    c = small_inspection(N=3, L=1)
    rep = verify_trace(_static_trace([[0, 0], [5, 0], [0, 20]]), c)
    assert {(i, j) for _, i, j, _ in rep.separation_violations} == {(0, 1)}
    far = verify_trace(_static_trace([[0, 0], [20, 0], [500, 0]]), c)
    assert far.lambda2_violations == [0, 1, 2, 3]
    assert far.max_lambda2_shortfall > 0
