"""Periodic tensor grids on the unit box and precision-driven mesh choices.

Every axis holds M = 2**m nodes x_j = j/M, j = 0..M-1, with wrap-around.
Flattening is row-major base M, so axis 0 is the most significant digit.
When M = 2 this coincides with the qubit-register ordering.

The ``mesh_for_*`` helpers turn a target precision eps into concrete
spacings.  Every asymptotic relation is evaluated with unit constants
(unless overridden) and then rounded: dx down to a power-of-two
reciprocal, omega up to an integer multiple of dx (at least 2 cells), and
dt down so that a supplied horizon is an integer number of steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetError, ValidationError

DEFAULT_POINT_BUDGET = 2**24

POSITION = "x"
MOMENTUM = "p"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    dim: int
    points_per_axis: int
    axis_roles: tuple[str, ...] = ()
    budget: int = DEFAULT_POINT_BUDGET

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dimension must be >= 1", "dim")
        if not _is_power_of_two(self.points_per_axis) or self.points_per_axis < 2:
            raise ValidationError(
                f"points per axis must be a power of two >= 2, got {self.points_per_axis}",
                "points_per_axis",
            )
        roles = tuple(self.axis_roles) or (POSITION,) * self.dim
        if len(roles) != self.dim or any(r not in (POSITION, MOMENTUM) for r in roles):
            raise ValidationError(f"axis roles {roles!r} do not match dim {self.dim}", "axis_roles")
        object.__setattr__(self, "axis_roles", roles)
        if self.size > self.budget:
            raise BudgetError(
                f"grid of {self.points_per_axis}^{self.dim} = {self.size} points exceeds budget {self.budget}"
            )

    @classmethod
    def phase_space(cls, d: int, M: int, budget: int = DEFAULT_POINT_BUDGET) -> "GridSpec":
        return cls(2 * d, M, (POSITION,) * d + (MOMENTUM,) * d, budget)

    @property
    def M(self) -> int:
        return self.points_per_axis

    @property
    def spacing(self) -> float:
        return 1.0 / self.points_per_axis

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def position_axes(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.axis_roles) if r == POSITION)

    @property
    def momentum_axes(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.axis_roles) if r == MOMENTUM)

    def nodes(self) -> np.ndarray:
        return np.arange(self.points_per_axis) / self.points_per_axis

    def coordinates(self) -> np.ndarray:
        """Array of shape (dim, M, ..., M) with the coordinate of every node."""
        return np.stack(np.meshgrid(*([self.nodes()] * self.dim), indexing="ij"))


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    steps: int

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError(f"dt must be positive and finite, got {self.dt}", "dt")
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}", "steps")

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    @classmethod
    def from_horizon(cls, T: float, dt_max: float) -> "TimeGrid":
        """Largest dt <= dt_max that divides T into an integer number of steps."""
        if T <= 0 or dt_max <= 0:
            raise ValidationError("horizon and dt must be positive")
        steps = max(1, math.ceil(T / dt_max - 1e-9))
        return cls(T / steps, steps)


def flatten_index(j: Sequence[int], g: GridSpec) -> int:
    if len(j) != g.dim:
        raise IndexError(f"multi-index of length {len(j)} on a {g.dim}-dimensional grid")
    k = 0
    for c in j:
        if not 0 <= c < g.M:
            raise IndexError(f"component {c} outside [0, {g.M - 1}]")
        k = k * g.M + int(c)
    return k


def unflatten_index(k: int, g: GridSpec) -> tuple[int, ...]:
    if not 0 <= k < g.size:
        raise IndexError(f"flat index {k} outside [0, {g.size})")
    out = []
    for _ in range(g.dim):
        k, r = divmod(k, g.M)
        out.append(r)
    return tuple(reversed(out))


@dataclass(frozen=True)
class MeshStrategy:
    target_eps: float
    dim: int
    sobolev_order: float
    time_order: int
    dx: float
    dt: float
    omega: float | None
    dx_target: float
    dt_target: float
    hbar: float | None = None
    support_cells: int | None = None
    kind: str = ""
    constants: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return round(1.0 / self.dx)

    def grid(self, budget: int = DEFAULT_POINT_BUDGET) -> GridSpec:
        return GridSpec(self.dim, self.M, budget=budget)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "target_eps": self.target_eps,
            "dim": self.dim,
            "sobolev_order": self.sobolev_order,
            "time_order": self.time_order,
            "dx": self.dx,
            "dt": self.dt,
            "omega": self.omega,
            "dx_target": self.dx_target,
            "dt_target": self.dt_target,
            "hbar": self.hbar,
            "support_cells": self.support_cells,
            "constants": dict(self.constants),
        }


def _check_eps(eps: float, d: int, ell: float = 1.0) -> None:
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}", "eps")
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}", "d")
    if not ell >= 1:
        raise ValidationError(f"ell must be >= 1, got {ell}", "ell")


def round_dx(target: float, d: int = 1, budget: int = DEFAULT_POINT_BUDGET) -> float:
    """Largest 1/2**m (m >= 1) not exceeding ``target``."""
    if target <= 0:
        raise BudgetError(f"mesh target {target} underflows")
    m = max(1, math.ceil(-math.log2(target) - 1e-12))
    if 2.0 ** (-m) > target * (1 + 1e-12):
        m += 1
    M = 2**m
    if M**d > budget:
        raise BudgetError(f"mesh target dx={target:.3g} needs {M}^{d} points, budget is {budget}")
    return 1.0 / M


def round_omega(target: float, dx: float, min_cells: int = 2) -> tuple[float, int]:
    cells = max(min_cells, math.ceil(target / dx - 1e-9))
    return cells * dx, cells


def _round_dt(target: float, horizon: float | None) -> float:
    if horizon is None:
        return target
    return TimeGrid.from_horizon(horizon, target).dt


def _inv(ell: float) -> float:
    return 0.0 if math.isinf(ell) else 1.0 / ell


def mesh_for_upwind(
    eps: float,
    d: int,
    c_f: float = 1.0,
    *,
    horizon: float | None = None,
    const: float = 1.0,
    budget: int = DEFAULT_POINT_BUDGET,
) -> MeshStrategy:
    """dx ~ eps^3/d, dt = dx/(d*C_F), omega = (d*dx)^(1/3)."""
    _check_eps(eps, d)
    if c_f <= 0:
        raise ValidationError("C_F must be positive", "c_f")
    dx_target = const * eps**3 / d
    dx = round_dx(dx_target, d, budget)
    dt_target = dx / (d * c_f)
    dt = _round_dt(dt_target, horizon)
    omega, cells = round_omega((d * dx) ** (1.0 / 3.0), dx)
    return MeshStrategy(
        eps, d, math.inf, 1, dx, dt, omega, dx_target, dt_target,
        support_cells=cells, kind="upwind", constants={"C": const, "C_F": c_f},
    )


def mesh_for_spectral(
    eps: float,
    d: int,
    ell: float,
    *,
    horizon: float | None = None,
    const: float = 1.0,
    budget: int = DEFAULT_POINT_BUDGET,
) -> MeshStrategy:
    """dx ~ eps^(1+2/ell)/d^(1/ell), dt ~ eps^2, omega ~ eps."""
    _check_eps(eps, d, ell)
    inv = _inv(ell)
    dx_target = const * eps ** (1 + 2 * inv) / d**inv
    dx = round_dx(dx_target, d, budget)
    dt_target = const * eps**2
    dt = _round_dt(dt_target, horizon)
    omega, cells = round_omega(const * eps, dx)
    return MeshStrategy(
        eps, d, ell, 1, dx, dt, omega, dx_target, dt_target,
        support_cells=cells, kind="spectral", constants={"C": const},
    )


def mesh_for_schrodinger(
    eps: float,
    d: int,
    ell: float,
    purpose: str = "observable",
    *,
    horizon: float | None = None,
    const: float = 1.0,
    budget: int = DEFAULT_POINT_BUDGET,
) -> MeshStrategy:
    """Semiclassical mesh with hbar = sqrt(eps).

    ``wavefunction``: dt ~ eps^(3/2), dx ~ eps^(1/2+5/(2 ell))/d^(1/ell).
    ``observable``:   dt ~ eps,       dx ~ eps^(1/2+2/ell)/d^(1/ell).
    """
    _check_eps(eps, d, ell)
    inv = _inv(ell)
    if purpose == "wavefunction":
        dx_target = const * eps ** (0.5 + 2.5 * inv) / d**inv
        dt_target = const * eps**1.5
    elif purpose == "observable":
        dx_target = const * eps ** (0.5 + 2 * inv) / d**inv
        dt_target = const * eps
    else:
        raise ValidationError(f"unknown purpose {purpose!r}", "purpose")
    dx = round_dx(dx_target, d, budget)
    dt = _round_dt(dt_target, horizon)
    return MeshStrategy(
        eps, d, ell, 1, dx, dt, None, dx_target, dt_target,
        hbar=math.sqrt(eps), kind=f"schrodinger-{purpose}", constants={"C": const},
    )


def iter_multi_indices(g: GridSpec) -> Iterable[tuple[int, ...]]:
    return np.ndindex(*g.shape)
