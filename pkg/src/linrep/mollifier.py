"""Smoothed deltas and initial states for the four linear representations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, UnderResolvedError, ValidationError
from .grid import GridSpec

KERNELS = ("hat", "cosine")


@dataclass(frozen=True)
class MolliferSpec:
    kind: str
    width: float
    support_cells: int | None = None

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValidationError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}", "kind")
        if not self.width > 0:
            raise ValidationError(f"width must be positive, got {self.width}", "width")

    @classmethod
    def on_grid(cls, g: GridSpec, support_cells: int, kind: str = "hat") -> "MolliferSpec":
        return cls(kind, support_cells * g.spacing, support_cells)


def kernel(kind: str, s: np.ndarray) -> np.ndarray:
    s = np.abs(s)
    if kind == "hat":
        vals = 1.0 - s
    else:
        vals = 0.5 * (1.0 + np.cos(np.pi * s))
    return np.where(s < 1.0, vals, 0.0)


def periodic_offset(x, center):
    r = np.asarray(x, dtype=float) - center
    return r - np.round(r)


def delta_eval(spec: MolliferSpec, x, center):
    return kernel(spec.kind, periodic_offset(x, center) / spec.width) / spec.width


@dataclass
class InitialState:
    representation: str
    values: np.ndarray
    grid: GridSpec
    center: object = None
    mass: float = 0.0
    meta: dict = field(default_factory=dict)


def _require_resolved(g: GridSpec, spec: MolliferSpec) -> None:
    if spec.width < 2 * g.spacing * (1 - 1e-12):
        raise UnderResolvedError(
            f"mollifier width {spec.width:.4g} is below two cells ({2 * g.spacing:.4g})", "omega"
        )


def _sqrt_delta_product(g: GridSpec, spec: MolliferSpec, q0) -> np.ndarray:
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    if q0.shape != (g.dim,):
        raise ValidationError(f"center has shape {q0.shape}, grid has dim {g.dim}", "q0")
    if np.any((q0 < 0) | (q0 > 1)):
        raise DomainError(f"center {q0} lies outside the unit box", "q0")
    x = g.nodes()
    out = np.ones(())
    for c in q0:
        out = np.multiply.outer(out, np.sqrt(delta_eval(spec, x, c)))
    return out.reshape(-1)


def init_kvn(g: GridSpec, spec: MolliferSpec, q0) -> InitialState:
    _require_resolved(g, spec)
    psi = _sqrt_delta_product(g, spec, q0)
    rho = psi * psi
    return InitialState("kvn", psi, g, np.atleast_1d(q0).astype(float), float(rho.sum() * g.spacing**g.dim))


def init_liouville(g: GridSpec, spec: MolliferSpec, q0) -> InitialState:
    # Stored as the square of the KvN amplitude so the pair agrees to the bit.
    psi = init_kvn(g, spec, q0)
    rho = psi.values * psi.values
    return InitialState("liouville", rho, g, psi.center, psi.mass)


def init_levelset(
    g2d: GridSpec,
    spec: MolliferSpec,
    u0: Callable[[np.ndarray], np.ndarray],
    a0sq: Callable[[np.ndarray], np.ndarray] | None = None,
) -> InitialState:
    """w(0, x, p) = a0sq(x) * prod_i delta_omega(p_i - u0_i(x)).

    ``u0`` receives x-coordinates of shape (d, ...) and returns (d, ...).
    """
    xa, pa = g2d.position_axes, g2d.momentum_axes
    d = len(xa)
    if d == 0 or len(pa) != d:
        raise ValidationError("level-set state needs a phase grid with matching x and p axes", "grid")
    _require_resolved(g2d, spec)
    coords = g2d.coordinates()
    x = coords[list(xa)]
    p = coords[list(pa)]
    u = np.asarray(u0(x), dtype=float).reshape(x.shape)
    lo, hi = spec.width, 1.0 - spec.width
    if np.any(u < lo - 1e-12) or np.any(u > hi + 1e-12):
        raise DomainError(
            f"u0 ranges over [{u.min():.4g}, {u.max():.4g}], needs margin omega={spec.width:.4g} inside [0, 1]",
            "u0",
        )
    w = np.ones(g2d.shape)
    for i in range(d):
        w = w * delta_eval(spec, p[i], u[i])
    if a0sq is not None:
        w = w * np.asarray(a0sq(x), dtype=float).reshape(g2d.shape)
    vals = w.reshape(-1)
    return InitialState("levelset", vals, g2d, u0, float(vals.sum() * g2d.spacing**g2d.dim))


def init_wkb(
    g: GridSpec,
    A0: Callable[[np.ndarray], np.ndarray],
    S0: Callable[[np.ndarray], np.ndarray],
    hbar: float,
) -> InitialState:
    if not hbar > 0:
        raise ValidationError(f"hbar must be positive, got {hbar}", "hbar")
    x = g.coordinates()
    amp = np.asarray(A0(x), dtype=float).reshape(g.shape)
    phase = np.asarray(S0(x), dtype=float).reshape(g.shape)
    u = (amp * np.exp(1j * phase / hbar)).reshape(-1)
    mass = float(np.sum(np.abs(u) ** 2) * g.spacing**g.dim)
    return InitialState("schrodinger", u, g, (A0, S0), mass, {"hbar": hbar})
