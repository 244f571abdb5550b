"""Quadrature observables, Born-rule sampling emulation, dilation and norm estimation.

Quadrature uses the periodic trapezoid rule.  On M distinct nodes of the
circle the end weights 1/2 at x=0 and x=1 fall on the same node, so every
node carries weight one and <G> ~ M^-d sum_j G_j rho_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import UnsupportedError, ValidationError
from .grid import GridSpec
from .spectral import apply_momentum


def quadrature_weights(M: int, rule: str = "periodic") -> np.ndarray:
    """Per-axis trapezoid weights.

    ``periodic``: M nodes on the circle, all weights 1.
    ``closed``: M+1 nodes including both ends, weights [1/2, 1, ..., 1, 1/2].
    """
    if rule == "periodic":
        return np.ones(M)
    if rule == "closed":
        w = np.ones(M + 1)
        w[0] = w[-1] = 0.5
        return w
    raise ValidationError(f"unknown quadrature rule {rule!r}", "rule")


@dataclass(frozen=True)
class ObservableSpec:
    weight_fn: Callable[[np.ndarray], np.ndarray]
    target: str = "all"
    name: str = ""

    def __post_init__(self):
        if self.target not in ("all", "momentum"):
            raise ValidationError(f"unknown integration target {self.target!r}", "target")

    @classmethod
    def coordinate(cls, axis: int) -> "ObservableSpec":
        return cls(lambda x: x[axis], name=f"x{axis}")

    @classmethod
    def constant(cls, c: float = 1.0, target: str = "all") -> "ObservableSpec":
        return cls(lambda x: np.full(np.shape(x)[1:], c), target, "one")


def _check_grid(state: np.ndarray, g: GridSpec) -> np.ndarray:
    state = np.asarray(state)
    if state.shape != (g.size,):
        raise ValidationError(f"state of shape {state.shape} does not live on a grid of {g.size} nodes", "grid")
    return state


def observable_vector(spec: ObservableSpec, g: GridSpec) -> np.ndarray:
    vals = np.broadcast_to(np.asarray(spec.weight_fn(g.coordinates()), dtype=float), g.shape)
    return vals.reshape(-1)


def expect_liouville(rho, spec: ObservableSpec, g: GridSpec) -> float:
    rho = _check_grid(rho, g)
    G = observable_vector(spec, g)
    return float(np.sum(G * np.real(rho)) / g.size)


def expect_kvn(psi, spec: ObservableSpec, g: GridSpec) -> float:
    """(1/M^(d/2)) psi^H G_M psi with diagonal G_M = G_j / M^(d/2)."""
    psi = _check_grid(psi, g)
    scale = math.sqrt(g.size)
    gm = observable_vector(spec, g) / scale
    return float(np.real(np.vdot(psi, gm * psi)) / scale)


def expect_hje(w, spec: ObservableSpec, g2d: GridSpec) -> np.ndarray:
    """M^-d sum over the momentum axes of G(p) w(x, p); returns values on the x-grid."""
    if spec.target != "momentum":
        raise ValidationError("phase-space observables integrate the momentum axes only", "target")
    w = _check_grid(w, g2d)
    pa = g2d.momentum_axes
    if not pa:
        raise ValidationError("grid has no momentum axes", "grid")
    coords = g2d.coordinates()
    G = np.broadcast_to(np.asarray(spec.weight_fn(coords[list(pa)]), dtype=float), g2d.shape)
    vals = (G * np.real(w).reshape(g2d.shape)).sum(axis=pa) / g2d.M ** len(pa)
    return vals.reshape(-1)


def hje_spec(kind: str) -> ObservableSpec:
    """``density`` (G=1), ``momentum`` (G=p_0) or ``energy`` (G=|p|^2/2)."""
    if kind == "density":
        return ObservableSpec(lambda p: np.ones(np.shape(p)[1:]), "momentum", kind)
    if kind == "momentum":
        return ObservableSpec(lambda p: p[0], "momentum", kind)
    if kind == "energy":
        return ObservableSpec(lambda p: 0.5 * np.sum(p**2, axis=0), "momentum", kind)
    raise ValidationError(f"unknown phase-space observable {kind!r}", "observable")


def recover_ode_solution(rho, g: GridSpec) -> np.ndarray:
    return np.array([expect_liouville(rho, ObservableSpec.coordinate(i), g) for i in range(g.dim)])


def schrodinger_observables(u, g: GridSpec, hbar: float, which: str, at: int | None = None):
    """rho = |u|^2, J = hbar Im(conj(u) du/dx), E = (hbar^2/2)|du/dx|^2 with du/dx = i P u."""
    u = _check_grid(u, g).astype(complex)
    if which == "density":
        vals = np.abs(u) ** 2
    elif which in ("current", "energy"):
        if g.dim != 1:
            raise UnsupportedError(f"{which} is only available in one dimension", "dim")
        du = 1j * apply_momentum(u, 0)
        if which == "current":
            vals = hbar * np.imag(np.conj(u) * du)
        else:
            vals = 0.5 * hbar**2 * np.abs(du) ** 2
    else:
        raise ValidationError(f"unknown observable {which!r}", "which")
    return vals if at is None else float(vals[at])


def schrodinger_sampling_factors(n_u0: float, M: int, eps: float) -> dict:
    """Variance factors for density, current and energy estimates."""
    return {
        "density": n_u0**4 / eps**2,
        "current": M**2 * n_u0**4 / eps,
        "energy": M**4 * n_u0**4,
    }


def c_observable(kind: str, d: int, eps: float, ell: float) -> float:
    inv = 0.0 if math.isinf(ell) else 1.0 / ell
    if kind == "density":
        return 1.0
    if kind == "current":
        return d ** (2 * inv) / eps ** (4 * inv)
    if kind == "energy":
        return d ** (4 * inv) / eps ** (8 * inv)
    raise ValidationError(f"unknown observable kind {kind!r}", "kind")


# --- sampling ----------------------------------------------------------------------

@dataclass(frozen=True)
class DiagonalObservable:
    """Measured in the computational basis; outcome j reports values[j]."""

    values: np.ndarray


@dataclass(frozen=True)
class RankOneObservable:
    """scale * |g><g| for a unit vector g; outcomes are scale or 0."""

    vector: np.ndarray
    scale: float = 1.0


def _born(state, observable):
    psi = np.asarray(state, dtype=complex).reshape(-1)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValidationError("cannot sample a zero state", "state")
    psi = psi / nrm
    if isinstance(observable, DiagonalObservable):
        vals = np.asarray(observable.values, dtype=float).reshape(-1)
        if vals.shape != psi.shape:
            raise ValidationError("observable and state sizes differ", "observable")
        probs = np.abs(psi) ** 2
    elif isinstance(observable, RankOneObservable):
        g = np.asarray(observable.vector, dtype=complex).reshape(-1)
        g = g / np.linalg.norm(g)
        ups = min(1.0, abs(np.vdot(g, psi)) ** 2)
        vals = np.array([observable.scale, 0.0])
        probs = np.array([ups, 1.0 - ups])
    else:
        raise UnsupportedError("only diagonal or rank-one observables can be sampled", "observable")
    probs = probs / probs.sum()
    return vals, probs


def exact_moments(state, observable) -> tuple[float, float]:
    vals, probs = _born(state, observable)
    mean = float(np.dot(probs, vals))
    var = float(max(0.0, np.dot(probs, (vals - mean) ** 2)))
    return mean, var


def samples_required(variance: float, eps: float, confidence: float) -> int:
    if not 0 < confidence < 1:
        raise ValidationError(f"confidence must lie in (0, 1), got {confidence}", "confidence")
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps}", "eps")
    raw = variance / ((1.0 - confidence) * eps**2)
    return max(1, math.ceil(raw - 1e-9 * max(1.0, raw)))


@dataclass(frozen=True)
class SamplingPlan:
    eps: float
    confidence: float
    variance: float
    n_samples: int
    seed: int = 0
    factor_symbol: str = ""
    factor_value: float = 1.0
    decay_factor: float = 1.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def make_sampling_plan(state, observable, eps: float, confidence: float, seed: int = 0,
                       factor_symbol: str = "", factor_value: float = 1.0,
                       decay_factor: float = 1.0) -> SamplingPlan:
    _, var = exact_moments(state, observable)
    return SamplingPlan(eps, confidence, var, samples_required(var, eps, confidence), seed,
                        factor_symbol, factor_value, decay_factor)


@dataclass(frozen=True)
class SampleResult:
    empirical_mean: float
    n_used: int
    exact: float
    variance: float


def born_sample(state, observable, plan: SamplingPlan) -> SampleResult:
    vals, probs = _born(state, observable)
    rng = np.random.default_rng(plan.seed)
    idx = rng.choice(len(vals), size=plan.n_samples, p=probs)
    mean, var = float(np.dot(probs, vals)), float(np.dot(probs, (vals - np.dot(probs, vals)) ** 2))
    return SampleResult(float(vals[idx].mean()), plan.n_samples, mean, var)


def reconstruct_expectation(upsilon: float, n_psi: float, n_g: float) -> float:
    """<G> = n_psi * n_G * sqrt(Upsilon)."""
    return n_psi * n_g * math.sqrt(max(upsilon, 0.0))


def sampling_factors(rho0=None, psi0=None, w0=None, u0=None, d: int = 1) -> dict:
    """n_L, n_K, n_H and N_u0 from the initial states that are supplied.

    With rho0 = |psi0|^2 the identity n_K^2 = ||rho0||_1 / M^(d/2) holds
    exactly; ``n_L`` uses the Euclidean norm of rho0 and is reported separately.
    """
    out = {}
    if rho0 is not None:
        rho0 = np.asarray(rho0)
        Md = rho0.size
        out["n_L"] = float(np.linalg.norm(rho0) / math.sqrt(Md))
        out["n_L_l1"] = float(np.abs(rho0).sum() / math.sqrt(Md))
    if psi0 is not None:
        psi0 = np.asarray(psi0)
        out["n_K"] = float(np.linalg.norm(psi0) / psi0.size**0.25)
    if w0 is not None:
        w0 = np.asarray(w0)
        out["n_H"] = float(np.linalg.norm(w0) / w0.size**0.25)
    if u0 is not None:
        out["N_u0"] = float(np.linalg.norm(u0))
    return out


def decay_factor(norms: Sequence[float]) -> float:
    norms = np.asarray(norms, dtype=float)
    if norms.size == 0 or norms[-1] == 0:
        return math.inf
    return float(norms.max() / norms[-1])


# --- dilation ----------------------------------------------------------------------

@dataclass
class DilatedHistory:
    blocks: list[np.ndarray]
    steps: int
    final_share: float
    tail_share: float

    def padded(self) -> np.ndarray:
        return np.concatenate([np.asarray(b).reshape(-1) for b in self.blocks])

    def tail_expectation(self, O: np.ndarray) -> float:
        """<w^|O^|w^>/||w^||^2 with O acting on the appended copies only."""
        y = self.padded()
        total = np.vdot(y, y).real
        acc = 0.0
        for b in self.blocks[self.steps:]:
            acc += np.vdot(b, O @ b).real
        return float(acc / total)

    def final_expectation(self, padded_value: float) -> float:
        """Undo the padding: divide by the squared-norm share of the appended copies."""
        return padded_value / self.tail_share


def dilate_history(history: Sequence[np.ndarray]) -> DilatedHistory:
    """Append N_t + 1 identity steps (n = N_t..2N_t) to a history of N_t states.

    ``final_share`` is the squared-norm share of the appended copies, so an
    equal-norm history gives (N_t + 1)/(2N_t + 1).
    """
    if len(history) == 0:
        raise ValidationError("history must be nonempty", "history")
    blocks = [np.asarray(h) for h in history]
    n_t = len(blocks)
    blocks = blocks + [blocks[-1].copy() for _ in range(n_t + 1)]
    sq = np.array([np.vdot(b, b).real for b in blocks])
    total = sq.sum()
    share = float(sq[n_t:].sum() / total) if total else 0.0
    return DilatedHistory(blocks, n_t, share, share)


# --- norm estimation -------------------------------------------------------------------

@dataclass(frozen=True)
class NormEstimate:
    true_norm: float
    estimate: float
    eta: float

    @property
    def relative_error(self) -> float:
        return abs(self.estimate - self.true_norm) / self.true_norm if self.true_norm else 0.0


def norm_estimate_draws(true_norm: float, eta: float, seed: int, size: int) -> np.ndarray:
    if not 0 <= eta < 1:
        raise ValidationError(f"eta must lie in [0, 1), got {eta}", "eta")
    xi = np.random.default_rng(seed).uniform(-eta, eta, size)
    return true_norm * (1.0 + xi)


def emulate_norm_estimate(x, eta: float, seed: int = 0) -> NormEstimate:
    nrm = float(np.linalg.norm(np.asarray(x)))
    return NormEstimate(nrm, float(norm_estimate_draws(nrm, eta, seed, 1)[0]), eta)


def observable_error_from_norm(estimate: NormEstimate, exact_value: float) -> float:
    """|<O>~ - <O>| when <O> scales with the squared norm estimate."""
    ratio = estimate.estimate / estimate.true_norm if estimate.true_norm else 1.0
    return abs(ratio**2 - 1.0) * abs(exact_value)


def write_observable_csv(path, rows: Sequence[dict]) -> None:
    import csv

    cols = ("time", "value", "exact_oracle", "budget_bound")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([format(r[c], ".17g") if isinstance(r.get(c), float) else r.get(c, "") for c in cols])
