"""Buffered Voronoi cells as linear collision-avoidance constraints."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import Delaunay, QhullError

from .comm import PositionState, pairwise_distances
from .exceptions import DegenerateGeometryError, InvalidArgumentError

_COINCIDENT = 1e-9


@dataclass(frozen=True)
class BodyParams:
    """Robot radii and the required clearance between bodies (m)."""

    radii: NDArray[np.float64]
    clearance: float = 0.0

    def __post_init__(self) -> None:
        r = np.asarray(self.radii, dtype=float).reshape(-1)
        if np.any(r < 0) or self.clearance < 0:
            raise InvalidArgumentError("radii and clearance must be non-negative")
        object.__setattr__(self, "radii", r)


@dataclass
class HalfspaceSystem:
    """Per-robot half-spaces ``c_ij^T x <= d_ij`` describing buffered cells.

    ``rows`` lists ``(i, j)`` for each half-space; ``normals`` and
    ``offsets`` are aligned with it. ``relaxed`` marks rows whose offset was
    loosened because the robots already violated the clearance.
    """

    count: int
    dim: int
    rows: list[tuple[int, int]]
    normals: NDArray[np.float64]
    offsets: NDArray[np.float64]
    relaxed: NDArray[np.bool_] = field(default=None)

    def __post_init__(self) -> None:
        if self.relaxed is None:
            self.relaxed = np.zeros(len(self.rows), dtype=bool)

    @property
    def violation(self) -> bool:
        return bool(np.any(self.relaxed))

    def robot_cell(self, i: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """``(C_i, d_i)`` for robot ``i``."""
        mask = np.array([r[0] == i for r in self.rows], dtype=bool)
        return self.normals[mask], self.offsets[mask]

    def block_form(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Stacked ``(C, d)`` acting on the stacked position vector."""
        n = self.dim
        c = np.zeros((len(self.rows), self.count * n))
        for k, (i, _) in enumerate(self.rows):
            c[k, i * n:(i + 1) * n] = self.normals[k]
        return c, self.offsets.copy()

    def contains(self, i: int, x: NDArray[np.float64], tol: float = 0.0) -> NDArray[np.bool_]:
        """Membership of points ``x`` (shape ``(..., n)``) in robot ``i``'s cell."""
        c, d = self.robot_cell(i)
        x = np.asarray(x, dtype=float)
        return np.all(x @ c.T <= d + tol, axis=-1)


def _check_separated(positions: NDArray[np.float64]) -> None:
    dist = pairwise_distances(positions)
    np.fill_diagonal(dist, np.inf)
    if np.min(dist) <= _COINCIDENT:
        raise DegenerateGeometryError("coincident robots have no separating hyperplane")


def neighbor_pairs(state: PositionState, mode: str = "all-pairs") -> tuple[list[tuple[int, int]], bool]:
    """Index pairs ``(i, j)``, ``i < j``, that receive a separating half-space.

    ``mode="delaunay"`` keeps only Delaunay edges (planar only). Returns the
    sorted pair list and a flag that is set when a collinear point set forced
    the all-pairs fallback.
    """
    _check_separated(state.positions)
    all_pairs = list(combinations(range(state.count), 2))
    if mode == "all-pairs":
        return all_pairs, False
    if mode != "delaunay":
        raise InvalidArgumentError(f"unknown neighbor mode {mode!r}")
    if state.dim != 2:
        raise InvalidArgumentError("delaunay mode requires planar positions")
    if state.count < 3:
        return all_pairs, False
    # lexicographic point order fixes how qhull resolves cocircular ties
    order = np.lexsort((state.positions[:, 1], state.positions[:, 0]))
    try:
        tri = Delaunay(state.positions[order])
    except QhullError:
        return all_pairs, True
    edges = set()
    for simplex in tri.simplices:
        for a, b in combinations(simplex, 2):
            i, j = sorted((int(order[a]), int(order[b])))
            edges.add((i, j))
    return sorted(edges), False


def buffered_voronoi(
    state: PositionState, bodies: BodyParams, pairs: list[tuple[int, int]] | None = None
) -> HalfspaceSystem:
    """Buffered Voronoi half-spaces for every listed pair, both directions.

    For the pair ``(i, j)`` robot ``i`` gets ``c = (p_j - p_i)/|p_j - p_i|``
    and ``d = c^T (p_i + p_j)/2 - (r_i + eps/2)``. If robot ``i`` already
    sits outside that half-space the offset is raised to ``c^T p_i`` and the
    row is marked as relaxed.
    """
    p = state.positions
    if pairs is None:
        pairs = list(combinations(range(state.count), 2))
    r = bodies.radii
    eps = bodies.clearance
    rows, normals, offsets, relaxed = [], [], [], []
    for i, j in pairs:
        delta = p[j] - p[i]
        dist = np.linalg.norm(delta)
        if dist <= _COINCIDENT:
            raise DegenerateGeometryError(f"robots {i} and {j} are coincident")
        c = delta / dist
        mid = 0.5 * c @ (p[i] + p[j])
        for a, b, sign in ((i, j, 1.0), (j, i, -1.0)):
            normal = sign * c
            off = sign * mid - (r[a] + 0.5 * eps)
            own = normal @ p[a]
            loosened = own > off
            rows.append((a, b))
            normals.append(normal)
            offsets.append(own if loosened else off)
            relaxed.append(loosened)
    order = sorted(range(len(rows)), key=lambda k: rows[k])
    n = state.dim
    return HalfspaceSystem(
        count=state.count,
        dim=n,
        rows=[rows[k] for k in order],
        normals=np.array([normals[k] for k in order]).reshape(-1, n),
        offsets=np.array([offsets[k] for k in order], dtype=float),
        relaxed=np.array([relaxed[k] for k in order], dtype=bool),
    )


def separation_margins(positions: NDArray[np.float64], radii, clearance: float) -> NDArray[np.float64]:
    """Matrix of ``|p_i - p_j| - r_i - r_j - eps`` (``inf`` on the diagonal)."""
    r = np.broadcast_to(np.asarray(radii, dtype=float), (len(positions),))
    margins = pairwise_distances(np.asarray(positions, dtype=float)) - r[:, None] - r[None, :] - clearance
    np.fill_diagonal(margins, np.inf)
    return margins


def min_separation_margin(state: PositionState, bodies: BodyParams) -> float:
    """Smallest ``|p_i - p_j| - r_i - r_j - eps``; negative means a violation."""
    return float(np.min(separation_margins(state.positions, bodies.radii, bodies.clearance)))
