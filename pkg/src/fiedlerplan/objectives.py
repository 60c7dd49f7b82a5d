"""Cost terms for the two applications.

Inspection: assigned robots are driven towards their points of interest
over the horizon; the remaining robots act as relays and receive a linear
reward along the Fiedler-value gradient.

Communication insurance (CIS): inputs deviate as little as possible from a
reference while a slack-penalised soft bound sits above the hard bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .assignment import hungarian
from .exceptions import InvalidArgumentError
from .horizon import HorizonModel, lower_ones

BASE_STATION = 0


@dataclass(frozen=True)
class AssignmentMatrix:
    """Binary ``L x N`` matrix, ``S[i, j] = 1`` when POI ``i`` goes to robot ``j``."""

    S: NDArray[np.int64]

    def __post_init__(self) -> None:
        S = np.asarray(self.S)
        if S.ndim != 2 or not np.all((S == 0) | (S == 1)):
            raise InvalidArgumentError("assignment must be a binary matrix")
        if not np.all(S.sum(axis=1) == 1):
            raise InvalidArgumentError("every POI must be assigned exactly once")
        if np.any(S.sum(axis=0) > 1):
            raise InvalidArgumentError("a robot can hold at most one POI")
        if np.any(S[:, BASE_STATION]):
            raise InvalidArgumentError("the base station cannot be assigned a POI")
        object.__setattr__(self, "S", S.astype(np.int64))

    @property
    def assigned_robots(self) -> NDArray[np.int64]:
        """Robot index for each POI, in POI order."""
        return np.argmax(self.S, axis=1)

    @property
    def relay_mask(self) -> NDArray[np.bool_]:
        return self.S.sum(axis=0) == 0


@dataclass(frozen=True)
class InspectionParams:
    pois: NDArray[np.float64]
    zeta: float = 0.1
    eta: float = 1e3

    def __post_init__(self) -> None:
        if self.zeta < 0 or self.eta < 0 or not np.isfinite(self.zeta) or not np.isfinite(self.eta):
            raise InvalidArgumentError("zeta and eta must be finite and non-negative")
        object.__setattr__(self, "pois", np.atleast_2d(np.asarray(self.pois, dtype=float)))


@dataclass(frozen=True)
class CisParams:
    """Soft/hard connectivity bounds, slack weight and reference noise.

    ``slack_weight`` is either a scalar ``h`` (meaning ``h I_K``) or a
    ``K x K`` matrix. ``ref_noise_cov`` is per robot (``n x n``) or for the
    whole stacked input (``Nn x Nn``).
    """

    soft_bound: float = 1.0
    hard_bound: float = 0.25
    slack_weight: float | NDArray[np.float64] = 0.5
    ref_noise_cov: float | NDArray[np.float64] = 0.1

    def __post_init__(self) -> None:
        if not self.soft_bound >= self.hard_bound > 0:
            raise InvalidArgumentError("need soft_bound >= hard_bound > 0")
        w = np.asarray(self.slack_weight, dtype=float)
        if w.ndim == 0 and w < 0:
            raise InvalidArgumentError("slack weight must be non-negative")
        if w.ndim == 2 and np.min(np.linalg.eigvalsh(0.5 * (w + w.T))) < -1e-12:
            raise InvalidArgumentError("slack weight must be positive semidefinite")

    def slack_matrix(self, K: int) -> NDArray[np.float64]:
        w = np.asarray(self.slack_weight, dtype=float)
        if w.ndim == 0:
            return float(w) * np.eye(K)
        if w.shape != (K, K):
            raise InvalidArgumentError(f"slack weight must be {K}x{K}")
        return w


def assign_pois(initial_positions: NDArray[np.float64], pois: NDArray[np.float64]) -> AssignmentMatrix:
    """Match POIs to robots by total Euclidean distance; the base station is excluded."""
    p = np.asarray(initial_positions, dtype=float)
    gamma = np.atleast_2d(np.asarray(pois, dtype=float))
    if gamma.shape[0] >= p.shape[0]:
        raise InvalidArgumentError("need fewer POIs than robots")
    cost = np.linalg.norm(gamma[:, None, :] - p[None, :, :], axis=2)
    cost[:, BASE_STATION] = np.inf
    cols = hungarian(cost)
    S = np.zeros((gamma.shape[0], p.shape[0]), dtype=np.int64)
    S[np.arange(gamma.shape[0]), cols] = 1
    return AssignmentMatrix(S)


def _selector(S: NDArray, n: int) -> NDArray[np.float64]:
    return np.kron(np.asarray(S, dtype=float), np.eye(n))


def relay_gradient_term(M: NDArray[np.float64], S: NDArray, K: int, N: int, n: int) -> NDArray[np.float64]:
    """Negated last-step Fiedler gradient row, restricted to unassigned robots."""
    M = np.asarray(M, dtype=float)
    if M.shape != (K, K * N * n):
        raise InvalidArgumentError(f"M has shape {M.shape}, expected {(K, K * N * n)}")
    sel = _selector(S, n)
    assigned = np.ones(sel.shape[0]) @ sel
    mask = np.tile(1.0 - assigned, K)
    return -M[-1] * mask


def inspection_objective(
    S: NDArray,
    p: NDArray[np.float64],
    pois: NDArray[np.float64],
    model: HorizonModel,
    zeta: float,
    eta: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Quadratic ``(H, g)`` over ``U`` for the inspection task.

    ``H = S~^T S~ + zeta I`` and ``g = -S~^T E_S + eta r`` with
    ``S~ = L_K (x) (S (x) I_n)``, ``E_S`` the current POI errors repeated over
    the horizon, and ``r`` the relay term. Minimising ``eta r^T U`` moves relays
    up the Fiedler gradient.
    """
    S = np.asarray(S, dtype=float)
    p = np.asarray(p, dtype=float).reshape(-1)
    gamma = np.atleast_2d(np.asarray(pois, dtype=float))
    K = model.K
    n = gamma.shape[1]
    N = p.size // n
    if S.shape != (gamma.shape[0], N):
        raise InvalidArgumentError(f"assignment {S.shape} does not match {gamma.shape[0]} POIs, {N} robots")
    sel = _selector(S, n)
    S_tilde = np.kron(lower_ones(K), sel)
    err = np.tile(gamma.reshape(-1) - sel @ p, K)
    H = S_tilde.T @ S_tilde + zeta * np.eye(K * N * n)
    g = -S_tilde.T @ err
    if eta and model.M is not None:
        g = g + eta * relay_gradient_term(model.M, S, K, N, n)
    return H, g


@dataclass
class CisTerms:
    """QP pieces over ``[U, s]``: cost, connectivity rows and slack bounds."""

    H: NDArray[np.float64]
    g: NDArray[np.float64]
    A: NDArray[np.float64]
    b: NDArray[np.float64]
    lb: NDArray[np.float64]
    ub: NDArray[np.float64]
    n_slack: int


def cis_objective(
    u_ref: NDArray[np.float64],
    K: int,
    cis: CisParams,
    lambda2: float,
    M: NDArray[np.float64],
) -> CisTerms:
    """Minimal-deviation cost with hard and slack-softened connectivity rows.

    Cost ``1/2 U^T U - U_ref^T U + s^T H_s s``; rows
    ``-M U <= lambda2 - hard`` (no slack) and ``-M U - s <= lambda2 - soft``.
    Only the slack block is bounded here (``s >= 0``); input bounds are
    added by the caller.
    """
    u_ref = np.asarray(u_ref, dtype=float).reshape(-1)
    nu = K * u_ref.size
    Hs = cis.slack_matrix(K)
    H = np.zeros((nu + K, nu + K))
    H[:nu, :nu] = np.eye(nu)
    H[nu:, nu:] = Hs + Hs.T
    g = np.concatenate([-np.tile(u_ref, K), np.zeros(K)])
    hard = np.hstack([-M, np.zeros((K, K))])
    soft = np.hstack([-M, -np.eye(K)])
    A = np.vstack([hard, soft])
    b = np.concatenate([np.full(K, lambda2 - cis.hard_bound), np.full(K, lambda2 - cis.soft_bound)])
    lb = np.concatenate([np.full(nu, -np.inf), np.zeros(K)])
    ub = np.full(nu + K, np.inf)
    return CisTerms(H, g, A, b, lb, ub, K)


def _cov_factor(cov: NDArray[np.float64]) -> NDArray[np.float64]:
    cov = np.asarray(cov, dtype=float)
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise InvalidArgumentError("covariance must be symmetric")
    vals, vecs = np.linalg.eigh(cov)
    if vals.size and vals.min() < -1e-12 * max(1.0, np.abs(vals).max()):
        raise InvalidArgumentError("covariance must be positive semidefinite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def stochastic_reference(
    prev_applied_u: NDArray[np.float64],
    cov,
    rng: np.random.Generator,
    dim: int = 2,
) -> NDArray[np.float64]:
    """Random-walk input reference ``u_ref,i = u_i^{k-1} + noise_i``.

    The base station's reference is zero. ``cov`` may be a scalar
    (``cov * I``), an ``n x n`` per-robot covariance or a full ``Nn x Nn`` one.
    """
    prev = np.asarray(prev_applied_u, dtype=float).reshape(-1)
    total = prev.size
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = cov * np.eye(dim)
    if cov.shape == (dim, dim):
        factor = _cov_factor(cov)
        noise = (rng.standard_normal((total // dim, dim)) @ factor.T).reshape(-1)
    elif cov.shape == (total, total):
        factor = _cov_factor(cov)
        noise = factor @ rng.standard_normal(total)
    else:
        raise InvalidArgumentError(f"covariance shape {cov.shape} fits neither {dim} nor {total}")
    ref = prev + noise
    ref[BASE_STATION * dim:(BASE_STATION + 1) * dim] = 0.0
    return ref
