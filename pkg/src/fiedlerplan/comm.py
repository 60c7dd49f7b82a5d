"""Weighted communication graph and the Fiedler value of its Laplacian.

Link quality between two robots is a logistic function of their distance.
The graph is complete by construction (the logistic weight never reaches
zero), which keeps the Fiedler value continuously differentiable in the
robot positions away from eigenvalue crossings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.special import expit

from .exceptions import DegenerateGeometryError, InvalidArgumentError

_SYM_TOL = 1e-10
_DEGENERATE_GAP = 1e-9
_COINCIDENT = 1e-12


@dataclass(frozen=True)
class LinkParams:
    """Logistic link-quality parameters.

    Attributes:
        alpha: attenuation rate in 1/m (four times the slope at ``d50``).
        d50: distance in m at which the link quality is 0.5.
    """

    alpha: float = 0.1
    d50: float = 50.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")
        if not (np.isfinite(self.d50) and self.d50 > 0):
            raise InvalidArgumentError(f"d50 must be positive, got {self.d50}")


@dataclass(frozen=True)
class PositionState:
    """Positions of ``N`` robots in ``n`` dimensions plus their body radii."""

    positions: NDArray[np.float64]
    radii: NDArray[np.float64]

    def __post_init__(self) -> None:
        p = np.array(self.positions, dtype=float)
        if p.ndim != 2 or p.shape[1] not in (2, 3) or p.shape[0] < 2:
            raise InvalidArgumentError(f"positions must be N x n with N >= 2, n in {{2, 3}}; got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidArgumentError("positions must be finite")
        r = np.broadcast_to(np.asarray(self.radii, dtype=float), (p.shape[0],)).copy()
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise InvalidArgumentError("radii must be finite and non-negative")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "radii", r)

    @classmethod
    def from_stacked(cls, p: NDArray[np.float64], dim: int, radii) -> "PositionState":
        """Build a state from a stacked ``(p_1, ..., p_N)`` vector."""
        return cls(np.asarray(p, dtype=float).reshape(-1, dim), radii)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def stacked(self) -> NDArray[np.float64]:
        return self.positions.reshape(-1)

    def moved(self, u: NDArray[np.float64]) -> "PositionState":
        """Return the state after applying the stacked input ``u``."""
        return PositionState(self.positions + np.reshape(u, self.positions.shape), self.radii)


@dataclass(frozen=True)
class CommGraphSnapshot:
    """Communication graph quantities at one time step."""

    adjacency: NDArray[np.float64]
    laplacian: NDArray[np.float64]
    fiedler_value: float
    fiedler_vector: NDArray[np.float64]
    gradient: NDArray[np.float64]
    degenerate: bool


def link_quality(d, params: LinkParams):
    """Logistic link quality ``exp(-a(d - d50)) / (1 + exp(-a(d - d50)))``.

    Accepts a scalar or an array of distances.
    """
    d_arr = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(d_arr)) or np.any(d_arr < 0):
        raise InvalidArgumentError("distances must be finite and non-negative")
    w = expit(-params.alpha * (d_arr - params.d50))
    return float(w) if w.ndim == 0 else w


def pairwise_distances(positions: NDArray[np.float64]) -> NDArray[np.float64]:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def build_adjacency(state: PositionState, params: LinkParams) -> NDArray[np.float64]:
    """Hollow symmetric adjacency with logistic link weights."""
    a = link_quality(pairwise_distances(state.positions), params)
    np.fill_diagonal(a, 0.0)
    return a


def build_laplacian(adjacency: NDArray[np.float64]) -> NDArray[np.float64]:
    """``L = D - A`` where ``D`` holds the row sums of ``A``."""
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError("adjacency must be square")
    if not np.allclose(a, a.T, rtol=0.0, atol=_SYM_TOL):
        raise InvalidArgumentError("adjacency must be symmetric")
    return np.diag(a.sum(axis=1)) - a


def _canonical_sign(v: NDArray[np.float64]) -> NDArray[np.float64]:
    idx = np.flatnonzero(np.abs(v) > 1e-9)
    if idx.size and v[idx[0]] < 0:
        return -v
    return v


def fiedler_pair(laplacian: NDArray[np.float64]) -> tuple[float, NDArray[np.float64], bool]:
    """Second-smallest eigenpair of a graph Laplacian.

    Returns ``(lambda2, v2, degenerate)``. ``v2`` is a unit vector orthogonal
    to the all-ones vector, with its first non-negligible component positive.
    ``degenerate`` is set when ``lambda3 - lambda2 < 1e-9``; ``v2`` is then an
    arbitrary unit vector of that eigenspace.
    """
    lap = np.asarray(laplacian, dtype=float)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1] or lap.shape[0] < 2:
        raise InvalidArgumentError("laplacian must be square with N >= 2")
    if not np.allclose(lap, lap.T, rtol=0.0, atol=_SYM_TOL):
        raise InvalidArgumentError("laplacian must be symmetric")
    n = lap.shape[0]
    vals, vecs = np.linalg.eigh(0.5 * (lap + lap.T))
    lam2 = float(vals[1])
    degenerate = n > 2 and vals[2] - vals[1] < _DEGENERATE_GAP

    # When lambda1 == lambda2 (disconnected graph) eigh may mix the ones
    # vector into column 1; pick the candidate with most mass orthogonal to it.
    candidates = [vecs[:, 1]]
    if vals[1] - vals[0] < _DEGENERATE_GAP:
        candidates.append(vecs[:, 0])
    best = None
    for c in candidates:
        c = c - c.mean()
        if best is None or np.linalg.norm(c) > np.linalg.norm(best):
            best = c
    v2 = _canonical_sign(best / np.linalg.norm(best))
    return lam2, v2, bool(degenerate)


def _pair_derivative_weights(state: PositionState, params: LinkParams, adjacency):
    """``-alpha (1 - a_ij) a_ij / d_ij`` and the position differences."""
    p = state.positions
    diff = p[:, None, :] - p[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    off = ~np.eye(state.count, dtype=bool)
    if np.any(dist[off] < _COINCIDENT):
        raise DegenerateGeometryError("two robots are coincident; gradient is undefined")
    np.fill_diagonal(dist, 1.0)
    coef = -params.alpha * (1.0 - adjacency) * adjacency / dist
    np.fill_diagonal(coef, 0.0)
    return coef, diff


def laplacian_position_gradient(
    state: PositionState, params: LinkParams, robot: int, axis: int
) -> NDArray[np.float64]:
    """Derivative of the Laplacian with respect to coordinate ``axis`` of ``robot``."""
    n_rob = state.count
    if not (0 <= robot < n_rob and 0 <= axis < state.dim):
        raise InvalidArgumentError("robot or axis index out of range")
    p = state.positions
    others = np.arange(n_rob) != robot
    dist = np.linalg.norm(p[others] - p[robot], axis=1)
    if np.any(dist < _COINCIDENT):
        raise DegenerateGeometryError("two robots are coincident; gradient is undefined")
    a = build_adjacency(state, params)
    row = np.zeros(n_rob)
    row[others] = -params.alpha * (1.0 - a[robot, others]) * a[robot, others] * (
        p[robot, axis] - p[others, axis]
    ) / dist
    d_adj = np.zeros((n_rob, n_rob))
    d_adj[robot, :] = row
    d_adj[:, robot] = row
    return np.diag(d_adj.sum(axis=1)) - d_adj


def fiedler_gradient(
    state: PositionState, params: LinkParams, snapshot: CommGraphSnapshot | None = None
) -> NDArray[np.float64]:
    """Gradient ``m`` of the Fiedler value with respect to stacked positions.

    Uses ``v^T L v = sum_{i<j} a_ij (v_i - v_j)^2`` so that
    ``m_i = sum_j da_ij/dp_i (v_i - v_j)^2`` without forming each ``dL``.
    """
    if snapshot is None:
        adjacency = build_adjacency(state, params)
        _, v2, _ = fiedler_pair(build_laplacian(adjacency))
    else:
        adjacency, v2 = snapshot.adjacency, snapshot.fiedler_vector
    coef, diff = _pair_derivative_weights(state, params, adjacency)
    sq = (v2[:, None] - v2[None, :]) ** 2
    m = np.einsum("ij,ijk->ik", coef * sq, diff)
    return m.reshape(-1)


def comm_snapshot(state: PositionState, params: LinkParams) -> CommGraphSnapshot:
    """Adjacency, Laplacian, Fiedler pair and its position gradient."""
    adjacency = build_adjacency(state, params)
    laplacian = build_laplacian(adjacency)
    lam2, v2, degenerate = fiedler_pair(laplacian)
    coef, diff = _pair_derivative_weights(state, params, adjacency)
    sq = (v2[:, None] - v2[None, :]) ** 2
    m = np.einsum("ij,ijk->ik", coef * sq, diff).reshape(-1)
    return CommGraphSnapshot(adjacency, laplacian, lam2, v2, m, degenerate)


def exact_fiedler(state: PositionState, params: LinkParams) -> float:
    """Fiedler value of the graph at ``state`` (full eigendecomposition)."""
    lap = build_laplacian(build_adjacency(state, params))
    return float(np.linalg.eigvalsh(lap)[1])


def predict_fiedler(lambda2: float, m: NDArray[np.float64], u: NDArray[np.float64]) -> float:
    """First-order prediction ``lambda2 + m^T u``."""
    m = np.asarray(m, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if m.shape != u.shape:
        raise InvalidArgumentError(f"dimension mismatch: m {m.shape} vs u {u.shape}")
    return float(lambda2 + m @ u)
