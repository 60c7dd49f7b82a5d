"""K-step lifting of the single-step dynamics and linear constraints.

The decision vector is ``U = (u^0, ..., u^{K-1})``, each block the stacked
inputs of all robots. Predicted positions are cumulative sums, which is what
the lower-triangular matrix of ones ``L_K`` encodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .exceptions import InvalidArgumentError
from .geometry import HalfspaceSystem


@dataclass(frozen=True)
class HorizonParams:
    """Horizon length and per-step infinity-norm input bounds.

    ``per_robot_u_max`` overrides ``u_max`` robot by robot; a zero entry pins
    that robot in place (base station).
    """

    K: int = 5
    u_max: float = 2.0
    per_robot_u_max: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.K < 1:
            raise InvalidArgumentError("horizon length must be at least 1")
        if self.u_max < 0:
            raise InvalidArgumentError("u_max must be non-negative")
        if self.per_robot_u_max is not None:
            vals = tuple(float(v) for v in self.per_robot_u_max)
            if any(v < 0 for v in vals):
                raise InvalidArgumentError("per-robot bounds must be non-negative")
            object.__setattr__(self, "per_robot_u_max", vals)


@dataclass(frozen=True)
class HorizonModel:
    """``B = L_K (x) I``, ``M = L_K (x) m^T`` and the base ``1_K (x) p``."""

    K: int
    B: NDArray[np.float64]
    base: NDArray[np.float64]
    M: NDArray[np.float64] | None = None

    def predict_positions(self, U: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.base + self.B @ U


def lower_ones(K: int) -> NDArray[np.float64]:
    return np.tril(np.ones((K, K)))


def lift_positions(p: NDArray[np.float64], K: int) -> HorizonModel:
    """Lifting matrix and base so that ``P = base + B U`` stacks ``p^{k+1..k+K}``."""
    if K < 1:
        raise InvalidArgumentError("horizon length must be at least 1")
    p = np.asarray(p, dtype=float).reshape(-1)
    B = np.kron(lower_ones(K), np.eye(p.size))
    return HorizonModel(K=K, B=B, base=np.tile(p, K))


def horizon_model(p: NDArray[np.float64], m: NDArray[np.float64], K: int) -> HorizonModel:
    """Lifting plus the connectivity matrix ``M = L_K (x) m^T``."""
    model = lift_positions(p, K)
    M = np.kron(lower_ones(K), np.asarray(m, dtype=float).reshape(1, -1))
    return HorizonModel(K=K, B=model.B, base=model.base, M=M)


def fiedler_horizon_constraint(
    lambda2: float, m: NDArray[np.float64], lambda2_min: float, K: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Rows ``-M U <= lambda2 - lambda2_min``, one per predicted step."""
    M = np.kron(lower_ones(K), np.asarray(m, dtype=float).reshape(1, -1))
    return -M, np.full(K, lambda2 - lambda2_min)


def collision_horizon_constraint(
    halfspaces: HalfspaceSystem, p: NDArray[np.float64], K: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """``(I_K (x) C) B U <= 1_K (x) (d - C p)``.

    ``(I_K (x) C)(L_K (x) I)`` equals ``L_K (x) C``, which is what gets built.
    """
    C, d = halfspaces.block_form()
    p = np.asarray(p, dtype=float).reshape(-1)
    return np.kron(lower_ones(K), C), np.tile(d - C @ p, K)


def robot_bounds(params: HorizonParams, N: int) -> NDArray[np.float64]:
    if params.per_robot_u_max is None:
        return np.full(N, params.u_max)
    if len(params.per_robot_u_max) != N:
        raise InvalidArgumentError(f"expected {N} per-robot bounds, got {len(params.per_robot_u_max)}")
    return np.asarray(params.per_robot_u_max, dtype=float)


def input_box(params: HorizonParams, N: int, n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Component-wise bounds ``-u_i <= U <= u_i`` over the whole horizon."""
    ub = np.tile(np.repeat(robot_bounds(params, N), n), params.K)
    return -ub, ub
