"""Time-splitting propagators.

Four schemes share one plan type:

* ``schrodinger``: kinetic phase in frequency space, then the potential phase.
* ``liouville_phase``: x-transport in x-frequency space, then p-transport
  in p-frequency space, for H = |p|^2/2 + V.
* ``kvn_trotter``: exp(-i H_d dt) ... exp(-i H_1 dt); axis 0 acts first.
* ``liouville_nonunitary``: per axis, the Strang sandwich
  exp(-i A+ dt/2) exp(i A- dt) exp(-i A+ dt/2), where each factor runs
  through a diagonal substitution into a Hermitian generator and back.
  The copy ledger tracks the post-selection cost of those substitutions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ValidationError
from .grid import GridSpec
from .spectral import (
    build_asym_generator,
    frequency_grid,
    from_frequency,
    kinetic_symbol,
    momentum_matrix,
    to_frequency,
    unitary,
)
from .upwind import UpwindScheme, step as upwind_step

SCHEMES = ("schrodinger", "liouville_phase", "kvn_trotter", "liouville_nonunitary")
ORDERS = ("lie", "strang")


@dataclass
class CopyLedger:
    per_step_success_prob: list[float] = field(default_factory=list)
    stage_probs: list[list[float]] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.per_step_success_prob)

    @property
    def cumulative_copy_estimate(self) -> float:
        out = 1.0
        for p in self.per_step_success_prob:
            out /= p
        return out

    def record(self, stage_probs: list[float]) -> None:
        self.stage_probs.append(list(stage_probs))
        self.per_step_success_prob.append(float(np.prod(stage_probs)) if stage_probs else 1.0)


@dataclass
class SplitPlan:
    scheme: str
    grid: GridSpec
    dt: float
    order: str = "lie"
    tables: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown splitting scheme {self.scheme!r}", "scheme")
        if self.order not in ORDERS:
            raise ValidationError(f"unknown splitting order {self.order!r}", "order")
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}", "dt")

    @property
    def unitary(self) -> bool:
        return self.scheme != "liouville_nonunitary"


def _check_state(plan: SplitPlan, u) -> np.ndarray:
    u = np.asarray(u)
    if u.shape != (plan.grid.size,):
        raise ValidationError(f"state of shape {u.shape} does not match grid size {plan.grid.size}", "state")
    return u.astype(complex, copy=False)


def _nodal(values, g: GridSpec) -> np.ndarray:
    if callable(values):
        values = values(g.coordinates())
    return np.broadcast_to(np.asarray(values, dtype=float), g.shape).copy()


# --- Schrodinger -------------------------------------------------------------

def schrodinger_plan(g: GridSpec, V, hbar: float, dt: float, order: str = "lie",
                     kinetic: bool = True) -> SplitPlan:
    if not hbar > 0:
        raise ValidationError(f"hbar must be positive, got {hbar}", "hbar")
    vals = _nodal(V, g)
    sym = kinetic_symbol(g, hbar) if kinetic else np.zeros(g.shape)
    plan = SplitPlan("schrodinger", g, dt, order)
    pot_dt = 0.5 * dt if order == "strang" else dt
    plan.tables = {
        "kinetic": np.exp(-1j * dt * sym),
        "potential": np.exp(-1j * pot_dt * vals / hbar),
        "hbar": hbar,
        "V": vals,
    }
    return plan


def schrodinger_split_step(plan: SplitPlan, u) -> np.ndarray:
    g = plan.grid
    v = _check_state(plan, u).reshape(g.shape)
    axes = tuple(range(g.dim))
    D1, D2 = plan.tables["potential"], plan.tables["kinetic"]
    if plan.order == "strang":
        v = D1 * v
    # v = S u; inverse transform; kinetic diagonal; forward transform; undo S
    v = from_frequency(D2 * to_frequency(v, axes), axes)
    v = D1 * v
    return v.reshape(-1)


# --- phase-space Liouville -----------------------------------------------------

def liouville_phase_plan(g2d: GridSpec, grad_v=None, dt: float = 0.01, order: str = "lie") -> SplitPlan:
    xa, pa = g2d.position_axes, g2d.momentum_axes
    if not xa or len(xa) != len(pa):
        raise ValidationError("phase-space splitting needs matching x and p axes", "grid")
    coords = g2d.coordinates()
    L = np.zeros(g2d.shape)
    U = np.zeros(g2d.shape)
    gv = None
    if grad_v is not None:
        gv = np.broadcast_to(np.asarray(grad_v(coords[list(xa)]), dtype=float), (len(xa),) + g2d.shape)
    for l, (a, b) in enumerate(zip(xa, pa)):
        L = L + frequency_grid(g2d, a) * coords[b]
        if gv is not None:
            U = U + gv[l] * frequency_grid(g2d, b)
    plan = SplitPlan("liouville_phase", g2d, dt, order)
    half = 0.5 if order == "strang" else 1.0
    plan.tables = {
        "transport": np.exp(-1j * dt * L),
        "force": np.exp(1j * half * dt * U),
        "has_force": bool(np.any(U)),
    }
    return plan


def liouville_phase_split_step(plan: SplitPlan, w) -> np.ndarray:
    g = plan.grid
    xa, pa = g.position_axes, g.momentum_axes
    v = _check_state(plan, w).reshape(g.shape)
    force = plan.tables["has_force"]
    if force and plan.order == "strang":
        v = from_frequency(plan.tables["force"] * to_frequency(v, pa), pa)
    v = from_frequency(plan.tables["transport"] * to_frequency(v, xa), xa)
    if force:
        v = from_frequency(plan.tables["force"] * to_frequency(v, pa), pa)
    return v.reshape(-1)


# --- KvN Trotter -------------------------------------------------------------------

def _line_unitaries(F_axis: np.ndarray, axis: int, t: float) -> np.ndarray:
    """exp(-i t (Lambda P + P Lambda)/2) for every grid line along ``axis``; shape (..., M, M)."""
    M = F_axis.shape[axis]
    P = momentum_matrix(M)
    lines = np.moveaxis(F_axis, axis, -1)
    H = 0.5 * (lines[..., :, None] * P + P * lines[..., None, :])
    w, Q = np.linalg.eigh(H)
    return (Q * np.exp(-1j * t * w)[..., None, :]) @ np.conj(np.swapaxes(Q, -1, -2))


def kvn_trotter_plan(g: GridSpec, field, dt: float, order: str = "lie") -> SplitPlan:
    F = np.asarray(field.eval(g.coordinates()), dtype=float).reshape((g.dim,) + g.shape)
    plan = SplitPlan("kvn_trotter", g, dt, order)
    if order == "strang" and g.dim > 1:
        plan.tables["half"] = [_line_unitaries(F[a], a, 0.5 * dt) for a in range(g.dim - 1)]
    plan.tables["full"] = [_line_unitaries(F[a], a, dt) for a in range(g.dim)]
    return plan


def _apply_lines(U: np.ndarray, v: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(v, axis, -1)
    out = np.einsum("...ij,...j->...i", U, moved)
    return np.moveaxis(out, -1, axis)


def kvn_trotter_step(plan: SplitPlan, psi) -> np.ndarray:
    g = plan.grid
    v = _check_state(plan, psi).reshape(g.shape)
    full = plan.tables["full"]
    if plan.order == "strang" and g.dim > 1:
        half = plan.tables["half"]
        for a in range(g.dim - 1):
            v = _apply_lines(half[a], v, a)
        v = _apply_lines(full[-1], v, g.dim - 1)
        for a in reversed(range(g.dim - 1)):
            v = _apply_lines(half[a], v, a)
    else:
        for a in range(g.dim):
            v = _apply_lines(full[a], v, a)
    return v.reshape(-1)


# --- non-unitary Liouville splitting -----------------------------------------------

def liouville_nonunitary_plan(g: GridSpec, field, dt: float, alpha: float = 1.0) -> SplitPlan:
    plan = SplitPlan("liouville_nonunitary", g, dt, "strang")
    axes = []
    for a in range(g.dim):
        gen = build_asym_generator(g, field, a, alpha)
        axes.append({
            "gen": gen,
            "sqrt_plus": np.sqrt(gen.lam_plus),
            "sqrt_minus": np.sqrt(gen.lam_minus),
            "U_plus_half": unitary(gen.symmetrized("+"), 0.5 * dt),
            "U_minus": unitary(gen.symmetrized("-"), -dt),
        })
    plan.tables = {"axes": axes, "alpha": alpha}
    return plan


def _substitute(v: np.ndarray, diag: np.ndarray, probs: list[float]) -> np.ndarray:
    """Apply a positive diagonal; log ||K v||^2/||v||^2 with K scaled to ||K|| = 1."""
    out = diag * v
    nv = np.vdot(v, v).real
    if nv > 0:
        scaled = out / diag.max()
        probs.append(float(np.vdot(scaled, scaled).real / nv))
    return out


def liouville_nonunitary_split_step(plan: SplitPlan, w, ledger: CopyLedger | None = None) -> np.ndarray:
    v = _check_state(plan, w).copy()
    probs: list[float] = []
    for ax in plan.tables["axes"]:
        sp_, sm = ax["sqrt_plus"], ax["sqrt_minus"]
        if np.any(sp_ <= 0) or np.any(sm <= 0):
            raise RuntimeError("non-positive Lambda entry in the positive splitting")
        for U, root in ((ax["U_plus_half"], sp_), (ax["U_minus"], sm), (ax["U_plus_half"], sp_)):
            v = _substitute(v, root, probs)
            v = U @ v
            v = _substitute(v, 1.0 / root, probs)
    if ledger is not None:
        ledger.record(probs)
    return v


# --- driver --------------------------------------------------------------------------

def split_step(plan: SplitPlan, state, ledger: CopyLedger | None = None) -> np.ndarray:
    if plan.scheme == "schrodinger":
        return schrodinger_split_step(plan, state)
    if plan.scheme == "liouville_phase":
        return liouville_phase_split_step(plan, state)
    if plan.scheme == "kvn_trotter":
        return kvn_trotter_step(plan, state)
    return liouville_nonunitary_split_step(plan, state, ledger)


@dataclass
class EvolutionResult:
    state: np.ndarray
    trace: list[dict]
    history: list[np.ndarray] | None = None
    ledger: CopyLedger | None = None


def _mass(kind: str, state: np.ndarray, g: GridSpec) -> float:
    cell = g.spacing**g.dim
    if kind in ("schrodinger", "kvn_trotter", "kvn"):
        return float(np.vdot(state, state).real * cell)
    return float(np.sum(state.real) * cell)


def evolve(plan, state0, n_steps: int, observer: Callable | None = None,
           record_history: bool = False, ledger: CopyLedger | None = None) -> EvolutionResult:
    """Apply ``n_steps`` steps of a split plan (or an upwind scheme) and trace norms."""
    if n_steps < 0:
        raise ValidationError("n_steps must be nonnegative", "n_steps")
    if isinstance(plan, UpwindScheme):
        kind, g, dt = plan.kind, plan.grid, plan.dt

        def advance(s):
            return upwind_step(plan, s)
    else:
        kind, g, dt = plan.scheme, plan.grid, plan.dt
        if kind == "liouville_nonunitary" and ledger is None:
            ledger = CopyLedger()

        def advance(s):
            return split_step(plan, s, ledger)

    state = np.array(state0, copy=True)
    history = [state.copy()] if record_history else None
    trace = []

    def snapshot(n):
        row = {
            "step": n,
            "time": n * dt,
            "l2_norm": float(np.linalg.norm(state)),
            "l1_norm": float(np.abs(state).sum()),
            "mass": _mass(kind, state, g),
            "ledger_cumulative": ledger.cumulative_copy_estimate if ledger is not None else 1.0,
        }
        trace.append(row)
        if observer is not None:
            view = state.view()
            view.flags.writeable = False
            observer(n, view, row)

    snapshot(0)
    for n in range(1, n_steps + 1):
        state = advance(state)
        if not np.all(np.isfinite(state)):
            from .errors import DivergenceError
            raise DivergenceError(f"non-finite state at step {n}")
        snapshot(n)
        if history is not None:
            history.append(state.copy())
    return EvolutionResult(state, trace, history, ledger)


TRACE_COLUMNS = ("step", "time", "l2_norm", "l1_norm", "mass", "ledger_cumulative")


def write_trace_csv(path: str | Path, trace: list[dict], extra_columns: tuple[str, ...] = (),
                    header_comment: str | None = None) -> None:
    cols = TRACE_COLUMNS + tuple(extra_columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in trace:
            w.writerow([_fmt(row.get(c, "")) for c in cols])


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g") if math.isfinite(v) else str(v)
    return str(v)
