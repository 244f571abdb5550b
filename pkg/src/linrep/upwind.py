"""First-order upwind schemes on periodic grids, plus the time-history block system.

Three schemes share one stencil builder:

* ``liouville``: conservative form with face velocities averaged from the
  two adjacent nodes, so every column of B sums to one.
* ``kvn``: nodal velocities with the extra reaction term -dt/2 * div F.
* ``hje``: nodal velocities on the (x, p) phase grid, transporting x with
  dH/dp and p with -dH/dx.

B acts on row-major flattened grid functions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import StabilityError, ValidationError
from .grid import GridSpec, TimeGrid

log = logging.getLogger(__name__)

DROP_TOL = 1e-15
DENSE_DIAGNOSTIC_BUDGET = 4096
CFL_SLACK = 1e-12


@dataclass(frozen=True)
class FlowField:
    """Right-hand side F of dq/dt = F(q).

    ``eval`` maps coordinates of shape (d, ...) to values of the same shape.
    ``div``, when given, maps coordinates (d, ...) to the divergence (...).
    """

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    sup_per_axis: tuple[float, ...]
    div_sup: float
    div: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __post_init__(self):
        sups = tuple(float(s) for s in self.sup_per_axis)
        if len(sups) != self.dim:
            raise ValidationError(f"{len(sups)} sup values for a {self.dim}-dimensional field", "sup_per_axis")
        if not all(math.isfinite(s) and s >= 0 for s in sups + (self.div_sup,)):
            raise ValidationError("sup metadata must be finite and nonnegative", "sup_per_axis")
        object.__setattr__(self, "sup_per_axis", sups)

    @classmethod
    def from_function(cls, fn, dim: int, div=None, samples: int | None = None, name: str = "") -> "FlowField":
        """Estimate sup metadata by sampling ``fn`` (and ``div``) on a fine box grid."""
        samples = samples or {1: 4097, 2: 257}.get(dim, 33)
        axes = np.linspace(0.0, 1.0, samples)
        x = np.stack(np.meshgrid(*([axes] * dim), indexing="ij"))
        vals = np.asarray(fn(x), dtype=float).reshape((dim, -1))
        sups = tuple(np.abs(vals).max(axis=1))
        if div is not None:
            div_sup = float(np.abs(div(x)).max())
        else:
            h = 1e-6
            total = 0.0
            for i in range(dim):
                e = np.zeros((dim,) + (1,) * dim)
                e[i] = h
                total = total + (np.asarray(fn(x + e))[i] - np.asarray(fn(x - e))[i]) / (2 * h)
            div_sup = float(np.abs(total).max())
        return cls(dim, fn, sups, div_sup, div, name)

    @classmethod
    def zero(cls, dim: int) -> "FlowField":
        return cls(dim, lambda x: np.zeros_like(np.asarray(x, dtype=float)), (0.0,) * dim, 0.0,
                   lambda x: np.zeros(np.shape(x)[1:]), "zero")

    @classmethod
    def constant(cls, c: Sequence[float]) -> "FlowField":
        c = np.asarray(c, dtype=float)
        d = c.size

        def fn(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(c.reshape((d,) + (1,) * (x.ndim - 1)), x.shape).copy()

        return cls(d, fn, tuple(np.abs(c)), 0.0, lambda x: np.zeros(np.shape(x)[1:]), "constant")


@dataclass(frozen=True)
class HamiltonianField:
    """Gradients of H(x, p); each callable takes (x, p) of shape (d, ...)."""

    dim: int
    dHdx: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dHdp: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sup_dHdx: tuple[float, ...]
    sup_dHdp: tuple[float, ...]
    name: str = ""

    @classmethod
    def kinetic_plus_potential(cls, d: int, grad_v=None, sup_grad_v: Sequence[float] | None = None,
                               name: str = "") -> "HamiltonianField":
        """H = |p|^2/2 + V(x) on the momentum box [0, 1]^d, so sup|dH/dp_i| = 1."""
        if grad_v is None:
            def dHdx(x, p):
                return np.zeros_like(np.asarray(x, dtype=float))
            sup_x = (0.0,) * d
        else:
            def dHdx(x, p):
                return np.broadcast_to(np.asarray(grad_v(x), dtype=float), np.shape(x)).copy()
            sup_x = tuple(float(s) for s in sup_grad_v)

        def dHdp(x, p):
            return np.asarray(p, dtype=float).copy()

        return cls(d, dHdx, dHdp, sup_x, (1.0,) * d, name)


class CflCheck(NamedTuple):
    ok: bool
    margin: float


def _cfl_total(field) -> float:
    if isinstance(field, HamiltonianField):
        return float(sum(field.sup_dHdx) + sum(field.sup_dHdp))
    return float(sum(field.sup_per_axis))


def check_cfl(field, lam: float) -> CflCheck:
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}", "lambda")
    margin = 1.0 - lam * _cfl_total(field)
    return CflCheck(margin >= -CFL_SLACK, margin)


@dataclass
class UpwindScheme:
    B: sp.csr_matrix
    lam: float
    dt: float
    grid: GridSpec
    kind: str
    div_sup: float
    cfl_margin: float
    face_coefficients: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.B.shape[0]

    def row_sparsity(self) -> int:
        return int(np.diff(self.B.indptr).max())


def _upwind_matrix(g: GridSpec, velocities: Sequence[np.ndarray | None], lam: float,
                   faces: bool, reaction: np.ndarray | None = None):
    n = g.size
    idx = np.arange(n).reshape(g.shape)
    diag = np.ones(g.shape)
    if reaction is not None:
        diag = diag + reaction
    rows, cols, vals = [idx.ravel()], [idx.ravel()], []
    coeffs = {}
    for axis, vel in enumerate(velocities):
        if vel is None:
            continue
        if faces:
            a = 0.5 * (np.roll(vel, -1, axis) + vel)
            b = 0.5 * (np.roll(vel, 1, axis) + vel)
        else:
            a = b = vel
        a_plus, a_minus = np.maximum(a, 0.0), np.minimum(a, 0.0)
        b_plus, b_minus = np.maximum(b, 0.0), np.minimum(b, 0.0)
        diag = diag - lam * (a_plus - b_minus)
        rows += [idx.ravel(), idx.ravel()]
        cols += [np.roll(idx, -1, axis).ravel(), np.roll(idx, 1, axis).ravel()]
        vals += [(-lam * a_minus).ravel(), (lam * b_plus).ravel()]
        coeffs[axis] = {"a": a, "b": b}
    vals.insert(0, diag.ravel())
    B = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    B.sum_duplicates()
    B.data[np.abs(B.data) < DROP_TOL] = 0.0
    B.eliminate_zeros()
    return B, coeffs


def _require_cfl(field, lam: float, nodal_sups: Sequence[float]) -> float:
    meta = _cfl_total(field)
    total = max(meta, float(sum(nodal_sups)))
    margin = 1.0 - lam * total
    if margin < -CFL_SLACK:
        raise StabilityError(f"CFL violated: lambda * sum sup = {lam * total:.6g} > 1", "dt")
    return margin


def divergence_nodal(field: FlowField, g: GridSpec) -> np.ndarray:
    """Analytic divergence when supplied, else periodic central differences."""
    x = g.coordinates()
    if field.div is not None:
        return np.broadcast_to(np.asarray(field.div(x), dtype=float), g.shape).copy()
    F = np.asarray(field.eval(x), dtype=float)
    out = np.zeros(g.shape)
    for i in range(g.dim):
        out += (np.roll(F[i], -1, i) - np.roll(F[i], 1, i)) / (2 * g.spacing)
    return out


def _flow_setup(g: GridSpec, tg: TimeGrid, field: FlowField):
    if field.dim != g.dim:
        raise ValidationError(f"field dim {field.dim} does not match grid dim {g.dim}", "field")
    lam = tg.dt / g.spacing
    F = np.asarray(field.eval(g.coordinates()), dtype=float).reshape((g.dim,) + g.shape)
    margin = _require_cfl(field, lam, np.abs(F).reshape(g.dim, -1).max(axis=1))
    return lam, F, margin


def assemble_liouville(g: GridSpec, tg: TimeGrid, field: FlowField) -> UpwindScheme:
    lam, F, margin = _flow_setup(g, tg, field)
    B, coeffs = _upwind_matrix(g, list(F), lam, faces=True)
    return UpwindScheme(B, lam, tg.dt, g, "liouville", field.div_sup, margin, coeffs)


def assemble_kvn(g: GridSpec, tg: TimeGrid, field: FlowField) -> UpwindScheme:
    lam, F, margin = _flow_setup(g, tg, field)
    div = divergence_nodal(field, g)
    B, coeffs = _upwind_matrix(g, list(F), lam, faces=False, reaction=-0.5 * tg.dt * div)
    div_sup = max(field.div_sup, float(np.abs(div).max()))
    return UpwindScheme(B, lam, tg.dt, g, "kvn", div_sup, margin, coeffs)


def assemble_hje(g2d: GridSpec, tg: TimeGrid, ham: HamiltonianField) -> UpwindScheme:
    xa, pa = g2d.position_axes, g2d.momentum_axes
    if len(xa) != ham.dim or len(pa) != ham.dim:
        raise ValidationError("phase grid axis roles do not match the Hamiltonian dimension", "grid")
    lam = tg.dt / g2d.spacing
    coords = g2d.coordinates()
    x, p = coords[list(xa)], coords[list(pa)]
    vx = np.asarray(ham.dHdp(x, p), dtype=float).reshape((ham.dim,) + g2d.shape)
    vp = -np.asarray(ham.dHdx(x, p), dtype=float).reshape((ham.dim,) + g2d.shape)
    nodal = [np.abs(v).max() for v in (*vx, *vp)]
    margin = _require_cfl(ham, lam, nodal)
    velocities: list[np.ndarray | None] = [None] * g2d.dim
    for i in range(ham.dim):
        velocities[xa[i]] = vx[i]
        velocities[pa[i]] = vp[i] if np.any(vp[i]) else None
    B, coeffs = _upwind_matrix(g2d, velocities, lam, faces=False)
    return UpwindScheme(B, lam, tg.dt, g2d, "hje", 0.0, margin, coeffs)


def step(scheme: UpwindScheme, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w)
    if w.shape != (scheme.size,):
        raise ValidationError(f"state of shape {w.shape} does not match scheme size {scheme.size}", "state")
    return scheme.B @ w


@dataclass
class BlockSystem:
    """L w = f with I on the block diagonal, -B (or -I in the dilation tail) below it."""

    scheme: UpwindScheme
    w0: np.ndarray
    steps: int
    dilation: int = 0

    @property
    def blocks(self) -> int:
        return self.steps + self.dilation

    @property
    def size(self) -> int:
        return self.blocks * self.scheme.size

    def rhs(self) -> np.ndarray:
        f = np.zeros((self.blocks, self.scheme.size), dtype=np.result_type(self.w0, float))
        f[0] = self.scheme.B @ self.w0
        return f.reshape(-1)

    def matrix(self) -> sp.csr_matrix:
        K, n = self.blocks, self.scheme.size
        if K == 1:
            return sp.identity(n, format="csr")
        sub_b = sp.diags([np.r_[np.ones(self.steps - 1), np.zeros(self.dilation)]], [-1], shape=(K, K))
        sub_i = sp.diags([np.r_[np.zeros(self.steps - 1), np.ones(self.dilation)]], [-1], shape=(K, K))
        L = sp.identity(K * n, format="csr") - sp.kron(sub_b, self.scheme.B) - sp.kron(sub_i, sp.identity(n))
        L = L.tocsr()
        L.eliminate_zeros()
        return L

    def _block_ops(self, k: int):
        # operator coupling block k-1 into block k (k >= 1)
        return self.scheme.B if k < self.steps else None

    def apply_inverse(self, r: np.ndarray) -> np.ndarray:
        K, n = self.blocks, self.scheme.size
        r = r.reshape(K, n)
        y = np.empty_like(r)
        y[0] = r[0]
        for k in range(1, K):
            op = self._block_ops(k)
            y[k] = r[k] + (op @ y[k - 1] if op is not None else y[k - 1])
        return y.reshape(-1)

    def apply_inverse_transpose(self, r: np.ndarray) -> np.ndarray:
        K, n = self.blocks, self.scheme.size
        r = r.reshape(K, n)
        y = np.empty_like(r)
        y[K - 1] = r[K - 1]
        for k in range(K - 2, -1, -1):
            op = self._block_ops(k + 1)
            y[k] = r[k] + (op.T @ y[k + 1] if op is not None else y[k + 1])
        return y.reshape(-1)

    def solve(self) -> np.ndarray:
        """Forward substitution; returns the history as an array of shape (blocks, n)."""
        return self.apply_inverse(self.rhs()).reshape(self.blocks, self.scheme.size)


def build_block_system(scheme: UpwindScheme, w0: np.ndarray, steps: int, dilate: bool | int = False) -> BlockSystem:
    if steps < 1:
        raise ValidationError("block system needs at least one step", "steps")
    w0 = np.asarray(w0)
    if w0.shape != (scheme.size,):
        raise ValidationError(f"w0 of shape {w0.shape} does not match scheme size {scheme.size}", "w0")
    extra = steps + 1 if dilate is True else int(dilate or 0)
    return BlockSystem(scheme, w0, steps, extra)


@dataclass
class ConditionReport:
    skipped: bool
    notice: str = ""
    kappa_est: float = math.nan
    kappa_bound: float = math.nan
    sigma_max: float = math.nan
    sigma_min: float = math.nan
    norm_B: float = math.nan
    norm_B_bound: float = math.nan
    sparsity_B: int = 0
    sparsity_L: int = 0

    @property
    def bounds_hold(self) -> bool:
        return (not self.skipped) and self.kappa_est <= self.kappa_bound and self.norm_B <= self.norm_B_bound * (1 + 1e-12)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["bounds_hold"] = self.bounds_hold
        return out


def power_sigma_max(apply, apply_t, n: int, iters: int = 5000, tol: float = 1e-13, seed: int = 0) -> float:
    """Largest singular value by power iteration on A^T A."""
    v = np.random.default_rng(seed).standard_normal(n) + 1.0
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        u = apply_t(apply(v))
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        new = math.sqrt(nu)
        v = u / nu
        if abs(new - sigma) <= tol * new:
            return new
        sigma = new
    return sigma


def condition_diagnostics(system: BlockSystem, budget: int = DENSE_DIAGNOSTIC_BUDGET) -> ConditionReport:
    scheme = system.scheme
    sB = scheme.row_sparsity()
    if system.size > budget:
        notice = f"block system of size {system.size} exceeds diagnostic budget {budget}; skipped"
        log.warning(notice)
        return ConditionReport(True, notice, sparsity_B=sB, sparsity_L=sB + 1)
    L = system.matrix()
    B = scheme.B
    n = scheme.size
    sig_max = power_sigma_max(lambda v: L @ v, lambda v: L.T @ v, L.shape[0])
    inv_max = power_sigma_max(system.apply_inverse, system.apply_inverse_transpose, L.shape[0])
    norm_b = power_sigma_max(lambda v: B @ v, lambda v: B.T @ v, n)
    D, dt = scheme.div_sup, scheme.dt
    report = ConditionReport(
        False,
        kappa_est=sig_max * inv_max,
        kappa_bound=(2 + dt * D) * math.exp(D + 1) / dt,
        sigma_max=sig_max,
        sigma_min=1.0 / inv_max,
        norm_B=norm_b,
        norm_B_bound=1 + dt * D,
        sparsity_B=sB,
        sparsity_L=int(np.diff(L.indptr).max()),
    )
    if not report.bounds_hold:
        log.warning("condition bounds violated: %s", report.to_dict())
    return report


def write_triplets(path: str | Path, matrix) -> None:
    """Plain-text coordinate export: header 'rows cols nnz', then 'r c value' (or 'r c re im')."""
    m = sp.coo_matrix(matrix)
    is_complex = np.iscomplexobj(m.data)
    lines = [f"{m.shape[0]} {m.shape[1]} {m.nnz}"]
    order = np.lexsort((m.col, m.row))
    for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
        if is_complex:
            lines.append(f"{r} {c} {v.real:.17g} {v.imag:.17g}")
        else:
            lines.append(f"{r} {c} {v:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_triplets(path: str | Path) -> sp.csr_matrix:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    rows, cols, nnz = (int(t) for t in lines[0].split())
    body = [ln.split() for ln in lines[1:1 + nnz]]
    r = np.array([int(t[0]) for t in body], dtype=np.int64)
    c = np.array([int(t[1]) for t in body], dtype=np.int64)
    if body and len(body[0]) == 4:
        v = np.array([float(t[2]) + 1j * float(t[3]) for t in body])
    else:
        v = np.array([float(t[2]) for t in body])
    return sp.csr_matrix((v, (r, c)), shape=(rows, cols))
