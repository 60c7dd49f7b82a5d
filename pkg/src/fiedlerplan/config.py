"""Scenario configuration and YAML loading."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .comm import LinkParams
from .exceptions import InvalidArgumentError
from .geometry import BodyParams
from .horizon import HorizonParams
from .objectives import BASE_STATION, CisParams

MODES = ("inspection", "cis")


@dataclass
class ScenarioConfig:
    """Everything needed to run one seeded scenario.

    Field names follow the usual symbols: ``lambda2_min`` is the hard
    connectivity bound, ``lambda2_soft`` the CIS soft bound, ``r`` the body
    radius (scalar or per robot), ``eps`` the clearance, ``Hs_scale`` and
    ``sigma_v_scale`` multiply identity matrices. ``dt`` and ``t_s`` are
    carried for completeness; the planner works in steps.
    """

    mode: str = "inspection"
    N: int = 10
    L: int = 4
    dim: int = 2
    dt: float = 0.4
    t_s: float = 0.2
    alpha: float = 0.1
    d50: float = 50.0
    lambda2_min: float = 0.1
    lambda2_soft: float = 1.0
    r: float | list[float] = 0.1
    eps: float = 10.0
    zeta: float = 0.1
    eta: float = 1e3
    Hs_scale: float = 0.5
    sigma_v_scale: float = 0.1
    K: int = 5
    u_max: float = 2.0
    per_robot_u_max: list[float] | None = None
    iterations: int = 400
    seed: int = 0
    initial_positions: list[list[float]] | None = None
    pois: list[list[float]] | None = None
    poi_radius: float = 2.0
    init_radius: float = 1.0
    cis_enabled: bool = True
    baseline: bool = False
    neighbor_mode: str = "all-pairs"
    infeasible_policy: str = "recover"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.N < 2 or self.dim not in (2, 3):
            raise InvalidArgumentError("need N >= 2 and dim in {2, 3}")
        if self.mode == "inspection" and not 0 < self.L < self.N:
            raise InvalidArgumentError("inspection needs 0 < L < N")
        if self.lambda2_min <= 0:
            raise InvalidArgumentError("lambda2_min must be positive")
        if self.iterations < 0 or self.K < 1:
            raise InvalidArgumentError("iterations must be >= 0 and K >= 1")
        if self.infeasible_policy not in ("recover", "hold"):
            raise InvalidArgumentError("infeasible_policy must be 'recover' or 'hold'")
        if self.baseline and self.K != 1:
            raise InvalidArgumentError("the nonlinear baseline is single-step; set K = 1")

    @classmethod
    def inspection(cls, **overrides: Any) -> "ScenarioConfig":
        return cls(**{"mode": "inspection", "lambda2_min": 0.1, **overrides})

    @classmethod
    def cis(cls, **overrides: Any) -> "ScenarioConfig":
        return cls(**{"mode": "cis", "lambda2_min": 0.25, "lambda2_soft": 1.0, "iterations": 1000, **overrides})

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def radii(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.r, dtype=float), (self.N,)).copy()

    def link_params(self) -> LinkParams:
        return LinkParams(self.alpha, self.d50)

    def body_params(self) -> BodyParams:
        return BodyParams(self.radii, self.eps)

    def horizon_params(self) -> HorizonParams:
        bounds = self.per_robot_u_max
        if bounds is None:
            bounds = [self.u_max] * self.N
            bounds[BASE_STATION] = 0.0
        return HorizonParams(self.K, self.u_max, tuple(bounds))

    def cis_params(self) -> CisParams:
        return CisParams(self.lambda2_soft, self.lambda2_min, self.Hs_scale, self.sigma_v_scale)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_FIELDS = {f.name for f in dataclasses.fields(ScenarioConfig)}


def _flatten(data: dict[str, Any], out: dict[str, Any]) -> dict[str, Any]:
    for key, value in data.items():
        if isinstance(value, dict):
            _flatten(value, out)
        else:
            out[key] = value
    return out


def config_from_mapping(data: dict[str, Any]) -> ScenarioConfig:
    """Build a config from a (possibly nested) mapping.

    Nested sections are flattened, so ``link: {alpha: 0.1}`` and
    ``alpha: 0.1`` are equivalent. Mode-specific table defaults are applied
    before the given keys.
    """
    flat = _flatten(data or {}, {})
    unknown = sorted(set(flat) - _FIELDS)
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {', '.join(unknown)}")
    mode = flat.get("mode", "inspection")
    factory = ScenarioConfig.cis if mode == "cis" else ScenarioConfig.inspection
    return factory(**flat)


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_mapping(yaml.safe_load(fh) or {})
