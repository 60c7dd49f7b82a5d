"""Connectivity-constrained receding-horizon planning for robot swarms.

The planner keeps the Fiedler value of a logistic link-quality graph above a
bound by linearising it around the current configuration, avoids collisions
with buffered Voronoi half-spaces, and solves the resulting QP every step.
"""

from .comm import CommGraphSnapshot, LinkParams, PositionState, comm_snapshot, exact_fiedler, predict_fiedler
from .config import ScenarioConfig, config_from_mapping, load_config
from .exceptions import DegenerateGeometryError, InvalidArgumentError, NoFeasibleAssignmentError
from .geometry import BodyParams, HalfspaceSystem, buffered_voronoi, neighbor_pairs
from .horizon import HorizonModel, HorizonParams
from .qp import QpProblem, QpSettings, QpSolution, solve
from .sim import RunReport, SimTrace, run_scenario, step, verify_trace

__all__ = [
    "BodyParams",
    "CommGraphSnapshot",
    "DegenerateGeometryError",
    "HalfspaceSystem",
    "HorizonModel",
    "HorizonParams",
    "InvalidArgumentError",
    "LinkParams",
    "NoFeasibleAssignmentError",
    "PositionState",
    "QpProblem",
    "QpSettings",
    "QpSolution",
    "RunReport",
    "ScenarioConfig",
    "SimTrace",
    "buffered_voronoi",
    "comm_snapshot",
    "config_from_mapping",
    "exact_fiedler",
    "load_config",
    "neighbor_pairs",
    "predict_fiedler",
    "run_scenario",
    "solve",
    "step",
    "verify_trace",
]

__version__ = "0.1.0"
