"""Named built-in problems for the runner.

Every problem takes a flat ``params`` dict; unknown keys are rejected and
missing keys fall back to the defaults listed on the entry.
"""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import ValidationError
from .oracle import burgers_characteristics, burgers_density
from .upwind import FlowField, HamiltonianField


@dataclass(frozen=True)
class Problem:
    name: str
    kind: str  # ode | hje | schrodinger
    summary: str
    anchor: str
    defaults: dict
    build: Callable[[dict], "ProblemInstance"]

    def instantiate(self, params: dict | None = None) -> "ProblemInstance":
        params = dict(params or {})
        unknown = sorted(set(params) - set(self.defaults))
        if unknown:
            raise ValidationError(f"unknown parameter(s) {unknown} for problem {self.name!r}; "
                                  f"known: {sorted(self.defaults)}", "problem.params")
        merged = {**self.defaults, **params}
        return self.build(merged)


@dataclass
class ProblemInstance:
    name: str
    kind: str
    params: dict
    dim: int
    horizon: float
    field: FlowField | None = None
    q0: tuple[float, ...] | None = None
    exact: Callable[[float], np.ndarray] | None = None
    hamiltonian: HamiltonianField | None = None
    grad_v: Callable | None = None
    u0: Callable | None = None
    potential: Callable | float | None = None
    amplitude: Callable | None = None
    phase: Callable | None = None
    hbar: float | None = None
    extras: dict = dc_field(default_factory=dict)


def _linear_decay(p: dict) -> ProblemInstance:
    rate, center, q0 = float(p["rate"]), float(p["center"]), float(p["q0"])

    def F(x):
        return -rate * (np.asarray(x, dtype=float) - center)

    def div(x):
        return np.full(np.shape(x)[1:], -rate)

    def exact(t):
        return np.array([center + (q0 - center) * math.exp(-rate * t)])

    fld = FlowField(1, F, (rate * max(center, 1 - center),), abs(rate), div, "linear-decay")
    return ProblemInstance("linear-decay", "ode", p, 1, float(p["T"]), fld, (q0,), exact)


def _logistic(p: dict) -> ProblemInstance:
    r, q0 = float(p["rate"]), float(p["q0"])

    def F(x):
        x = np.asarray(x, dtype=float)
        return r * x * (1 - x)

    def div(x):
        return r * (1 - 2 * np.asarray(x, dtype=float)[0])

    def exact(t):
        return np.array([1.0 / (1.0 + (1.0 / q0 - 1.0) * math.exp(-r * t))])

    fld = FlowField(1, F, (r / 4,), abs(r), div, "logistic")
    return ProblemInstance("logistic", "ode", p, 1, float(p["T"]), fld, (q0,), exact)


def _rotation(p: dict) -> ProblemInstance:
    om = float(p["omega"])
    q0 = (float(p["q0_x"]), float(p["q0_y"]))

    def F(x):
        x = np.asarray(x, dtype=float)
        return np.stack([-om * (x[1] - 0.5), om * (x[0] - 0.5)])

    def div(x):
        return np.zeros(np.shape(x)[1:])

    def exact(t):
        a, b = q0[0] - 0.5, q0[1] - 0.5
        c, s = math.cos(om * t), math.sin(om * t)
        return np.array([0.5 + c * a - s * b, 0.5 + s * a + c * b])

    fld = FlowField(2, F, (0.5 * abs(om), 0.5 * abs(om)), 0.0, div, "rotation")
    return ProblemInstance("rotation", "ode", p, 2, float(p["T"]), fld, q0, exact)


def _wkb(p: dict) -> ProblemInstance:
    V = float(p["V"])
    k = float(p["steepness"])

    def A0(x):
        return np.exp(-25.0 * (np.asarray(x)[0] - 0.5) ** 2)

    def S0(x):
        y = k * (np.asarray(x)[0] - 0.5)
        # -(1/k) log(e^y + e^-y), written to avoid overflow
        return -(np.abs(y) + np.log1p(np.exp(-2 * np.abs(y)))) / k

    inst = ProblemInstance("wkb-constant-potential", "schrodinger", p, 1, float(p["T"]),
                           potential=V, amplitude=A0, phase=S0, hbar=float(p["hbar"]))
    inst.extras["M"] = int(p["M"])
    inst.extras["steps"] = int(p["steps"])
    return inst


def _burgers(p: dict) -> ProblemInstance:
    base, amp = float(p["base"]), float(p["amplitude"])

    def u0(x):
        return base + amp * np.sin(2 * np.pi * np.asarray(x, dtype=float))

    def hje_exact(t, x):
        u = burgers_characteristics(u0, t, x).values
        return burgers_density(u0, t, x, u), u

    ham = HamiltonianField.kinetic_plus_potential(1, name="burgers")
    inst = ProblemInstance("burgers-hje", "hje", p, 1, float(p["T"]), hamiltonian=ham, u0=u0)
    inst.extras["hje_exact"] = hje_exact
    return inst


def _constant_gradient(p: dict) -> ProblemInstance:
    c, level = float(p["gradient"]), float(p["u0"])

    def grad_v(x):
        return np.full(np.shape(x), c)

    def u0(x):
        return np.full(np.shape(x), level)

    def exact(t):
        return np.array([level - c * t])

    def hje_exact(t, x):
        x = np.asarray(x, dtype=float)
        return np.ones_like(x), np.full_like(x, level - c * t)

    ham = HamiltonianField.kinetic_plus_potential(1, grad_v, (abs(c),), name="constant-gradient")
    inst = ProblemInstance("constant-gradient-hje", "hje", p, 1, float(p["T"]), exact=exact,
                           hamiltonian=ham, grad_v=grad_v, u0=u0)
    inst.extras["hje_exact"] = hje_exact
    return inst


PROBLEMS: dict[str, Problem] = {
    p.name: p for p in (
        Problem("linear-decay", "ode", "dq/dt = -(q - 1/2), closed form q(t) = 1/2 + (q0 - 1/2) e^{-t}",
                "linear ODE with exact first-moment recovery", {"rate": 1.0, "center": 0.5, "q0": 0.7, "T": 0.5},
                _linear_decay),
        Problem("logistic", "ode", "dq/dt = q(1 - q), logistic growth", "scalar nonlinear ODE",
                {"rate": 1.0, "q0": 0.1, "T": 1.0}, _logistic),
        Problem("rotation", "ode", "rigid rotation about (1/2, 1/2); divergence free",
                "divergence-free field where |psi|^2 and rho coincide",
                {"omega": 1.0, "q0_x": 0.65, "q0_y": 0.5, "T": 0.5}, _rotation),
        Problem("wkb-constant-potential", "schrodinger",
                "WKB data A0 = exp(-25(x-1/2)^2), S0 = -(1/5) log(e^{5(x-1/2)} + e^{-5(x-1/2)}), V = 10",
                "semiclassical position-density benchmark at t = 0.54",
                {"V": 10.0, "steepness": 5.0, "hbar": 0.0256, "M": 16, "T": 0.54, "steps": 54}, _wkb),
        Problem("burgers-hje", "hje", "H = p^2/2, u0 = 0.25 + 0.1 sin(2 pi x), before the caustic",
                "level-set Burgers benchmark", {"base": 0.25, "amplitude": 0.1, "T": 0.2}, _burgers),
        Problem("constant-gradient-hje", "hje", "H = p^2/2 + c x, u0 = 1/2, so u = 1/2 - c t",
                "exact level-set transport", {"gradient": 0.5, "u0": 0.5, "T": 0.2}, _constant_gradient),
    )
}


def get_problem(name: str) -> Problem:
    try:
        return PROBLEMS[name]
    except KeyError:
        near = difflib.get_close_matches(name, list(PROBLEMS), n=1, cutoff=0.0)
        hint = f"; did you mean {near[0]!r}?" if near else ""
        raise ValidationError(f"unknown problem {name!r}{hint}", "problem.name") from None


def list_problems() -> list[dict]:
    return [{"name": p.name, "kind": p.kind, "summary": p.summary, "anchor": p.anchor, "defaults": dict(p.defaults)}
            for p in PROBLEMS.values()]
