"""Fourier machinery and Hermitian spectral generators on periodic grids.

Frequencies follow the shifted ordering mu_l = 2*pi*(l - N - 1), l = 1..M
(N = M/2), i.e. index k carries frequency 2*pi*(k - N).  With the
alternating sign vector S = (1, -1, 1, ...) and the unitary transform
F y_k = M^(-1/2) sum_j exp(+2 pi i j k / M) x_j, the collocation matrix
Phi_jl = exp(i mu_l x_j) factors as sqrt(M) * S * F.  Because of that
identity no explicit reordering of FFT bins is needed: the sign flip does
the shift.

numpy.fft supplies the transforms; F is ``ifft(norm="ortho")``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetError, ValidationError
from .grid import GridSpec

DENSE_BUDGET = 4096


class DftPlan:
    def __init__(self, M: int):
        if M < 2 or M & (M - 1):
            raise ValidationError(f"transform length must be a power of two >= 2, got {M}", "M")
        self.M = M
        self.N = M // 2
        self.mu = 2.0 * np.pi * (np.arange(M) - self.N)
        self.sign = np.where(np.arange(M) % 2 == 0, 1.0, -1.0)

    def forward(self, v, axis: int = -1):
        return np.fft.ifft(v, axis=axis, norm="ortho")

    def inverse(self, v, axis: int = -1):
        return np.fft.fft(v, axis=axis, norm="ortho")

    def phi(self) -> np.ndarray:
        x = np.arange(self.M) / self.M
        return np.exp(1j * np.outer(x, self.mu))

    def dft_matrix(self) -> np.ndarray:
        j = np.arange(self.M)
        return np.exp(2j * np.pi * np.outer(j, j) / self.M) / np.sqrt(self.M)


def _check_length(plan: DftPlan, v) -> None:
    if np.shape(v)[-1] != plan.M:
        raise ValidationError(f"vector of length {np.shape(v)[-1]} for a plan of size {plan.M}", "v")


def dft_forward(plan: DftPlan, v):
    _check_length(plan, v)
    return plan.forward(np.asarray(v, dtype=complex))


def dft_inverse(plan: DftPlan, v):
    _check_length(plan, v)
    return plan.inverse(np.asarray(v, dtype=complex))


def standard_to_shifted(c):
    """Reorder spectra from numpy bin order (0, 1, .., -1) to the shifted order (-N, .., N-1)."""
    return np.fft.fftshift(c, axes=-1)


def shifted_to_standard(c):
    return np.fft.ifftshift(c, axes=-1)


def _sign_tensor(shape: tuple[int, ...], axes: Sequence[int]) -> np.ndarray:
    out = np.ones(shape)
    for a in axes:
        s = np.where(np.arange(shape[a]) % 2 == 0, 1.0, -1.0)
        out = out * s.reshape([-1 if i == a else 1 for i in range(len(shape))])
    return out


def to_frequency(u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Unitary map onto shifted-order Fourier coefficients along ``axes``: F^-1 S u."""
    axes = tuple(axes)
    if not axes:
        return np.asarray(u, dtype=complex)
    return np.fft.fftn(_sign_tensor(u.shape, axes) * u, axes=axes, norm="ortho")


def from_frequency(c: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`to_frequency`: S F c."""
    axes = tuple(axes)
    if not axes:
        return np.asarray(c, dtype=complex)
    return _sign_tensor(c.shape, axes) * np.fft.ifftn(c, axes=axes, norm="ortho")


def frequency_grid(g: GridSpec, axis: int) -> np.ndarray:
    mu = DftPlan(g.M).mu
    return mu.reshape([-1 if i == axis else 1 for i in range(g.dim)])


def coefficients(u: np.ndarray, plan: DftPlan) -> np.ndarray:
    """c = Phi^-1 u along the last axis (so that u_j = sum_l c_l exp(i mu_l x_j))."""
    return to_frequency(np.asarray(u), (np.ndim(u) - 1,)) / np.sqrt(plan.M)


def apply_momentum(u_grid: np.ndarray, axis: int) -> np.ndarray:
    """P u = Phi D_mu Phi^-1 u along one axis of a grid-shaped array (P = -i d/dx)."""
    M = u_grid.shape[axis]
    mu = DftPlan(M).mu.reshape([-1 if i == axis else 1 for i in range(u_grid.ndim)])
    return from_frequency(mu * to_frequency(u_grid, (axis,)), (axis,))


def momentum_matrix(M: int) -> np.ndarray:
    plan = DftPlan(M)
    phi = plan.phi()
    return (phi * plan.mu) @ phi.conj().T / M


def embed_axis(op: np.ndarray, g: GridSpec, axis: int) -> np.ndarray:
    """I x .. x op x .. x I acting on ``axis`` of a row-major flattened grid."""
    eye = np.eye(g.M)
    return reduce(np.kron, [op if a == axis else eye for a in range(g.dim)])


def hermiticity_defect(H: np.ndarray) -> float:
    return float(np.abs(H - H.conj().T).max()) if H.size else 0.0


@dataclass
class HermitianGenerator:
    """Hermitian H with A = -iH; evolution is exp(-iHt)."""

    size: int
    name: str
    matrix: np.ndarray | None = None
    action: Callable[[np.ndarray], np.ndarray] | None = None
    freq_diagonal: np.ndarray | None = None
    freq_axes: tuple[int, ...] = ()
    grid_shape: tuple[int, ...] = ()
    certificate: float = 0.0
    _eig: tuple | None = field(default=None, repr=False)

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ v
        if self.action is not None:
            return self.action(v)
        c = to_frequency(np.asarray(v).reshape(self.grid_shape), self.freq_axes)
        return from_frequency(self.freq_diagonal * c, self.freq_axes).reshape(-1)

    def dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        if self.size > DENSE_BUDGET:
            raise BudgetError(f"dense generator of size {self.size} exceeds budget {DENSE_BUDGET}")
        return np.stack([self.apply(e) for e in np.eye(self.size, dtype=complex)], axis=1)

    def eigensystem(self):
        if self._eig is None:
            if self.matrix is None:
                raise BudgetError(f"generator {self.name!r} has no dense matrix for eigendecomposition")
            self._eig = np.linalg.eigh(self.matrix)
        return self._eig


def _dense_ok(g: GridSpec, dense: bool | None) -> bool:
    if dense is None:
        return g.size <= DENSE_BUDGET
    if dense and g.size > DENSE_BUDGET:
        raise BudgetError(f"dense operator on {g.size} nodes exceeds budget {DENSE_BUDGET}")
    return dense


def _nodal(values, g: GridSpec) -> np.ndarray:
    if callable(values):
        values = values(g.coordinates())
    return np.broadcast_to(np.asarray(values, dtype=float), g.shape).copy()


def _finish(g: GridSpec, name: str, action, dense: bool | None, **kw) -> HermitianGenerator:
    gen = HermitianGenerator(g.size, name, action=action, grid_shape=g.shape, **kw)
    if _dense_ok(g, dense):
        H = gen.dense()
        gen.matrix = H
        gen.certificate = hermiticity_defect(H)
    return gen


def build_kvn_hamiltonian(g: GridSpec, field, axis: int, dense: bool | None = None) -> HermitianGenerator:
    """H_j = (Lambda P_j + P_j Lambda)/2 with Lambda = diag(F_j at the nodes)."""
    F = np.asarray(field.eval(g.coordinates()), dtype=float).reshape((g.dim,) + g.shape)[axis]

    def action(v):
        u = np.asarray(v).reshape(g.shape)
        return (0.5 * (F * apply_momentum(u, axis) + apply_momentum(F * u, axis))).reshape(-1)

    if _dense_ok(g, dense):
        P = embed_axis(momentum_matrix(g.M), g, axis)
        lam = F.reshape(-1)
        H = 0.5 * (lam[:, None] * P + P * lam[None, :])
        return HermitianGenerator(g.size, f"kvn-H{axis}", matrix=H, action=action,
                                  grid_shape=g.shape, certificate=hermiticity_defect(H))
    return HermitianGenerator(g.size, f"kvn-H{axis}", action=action, grid_shape=g.shape)


def build_liouville_phase_generator(g2d: GridSpec, grad_v=None, dense: bool | None = None) -> HermitianGenerator:
    """H~ = sum_l (P_{x_l} p_l - dV/dx_l P_{p_l}) for H = |p|^2/2 + V."""
    xa, pa = g2d.position_axes, g2d.momentum_axes
    coords = g2d.coordinates()
    p = [coords[a] for a in pa]
    if grad_v is None:
        gv = [np.zeros(g2d.shape)] * len(xa)
    else:
        gv = list(np.broadcast_to(np.asarray(grad_v(coords[list(xa)]), dtype=float), (len(xa),) + g2d.shape))

    def action(v):
        u = np.asarray(v).reshape(g2d.shape)
        out = np.zeros(g2d.shape, dtype=complex)
        for l in range(len(xa)):
            out += p[l] * apply_momentum(u, xa[l])
            if np.any(gv[l]):
                out -= gv[l] * apply_momentum(u, pa[l])
        return out.reshape(-1)

    if _dense_ok(g2d, dense):
        Pm = momentum_matrix(g2d.M)
        H = np.zeros((g2d.size, g2d.size), dtype=complex)
        for l in range(len(xa)):
            H += p[l].reshape(-1)[:, None] * embed_axis(Pm, g2d, xa[l])
            H -= gv[l].reshape(-1)[:, None] * embed_axis(Pm, g2d, pa[l])
        return HermitianGenerator(g2d.size, "liouville-phase", matrix=H, action=action,
                                  grid_shape=g2d.shape, certificate=hermiticity_defect(H))
    return HermitianGenerator(g2d.size, "liouville-phase", action=action, grid_shape=g2d.shape)


def kinetic_symbol(g: GridSpec, hbar: float) -> np.ndarray:
    """(hbar/2) sum_j mu_j^2 on the frequency grid."""
    out = np.zeros(g.shape)
    for a in range(g.dim):
        out = out + frequency_grid(g, a) ** 2
    return 0.5 * hbar * out


def build_schrodinger_generator(g: GridSpec, V, hbar: float, dense: bool | None = None) -> HermitianGenerator:
    """H~ = (hbar/2) sum_j P_j^2 + V/hbar."""
    if not hbar > 0:
        raise ValidationError(f"hbar must be positive, got {hbar}", "hbar")
    vals = _nodal(V, g)
    kin = kinetic_symbol(g, hbar)
    axes = tuple(range(g.dim))
    if np.all(vals == vals.flat[0]):
        diag = kin + vals.flat[0] / hbar
        gen = HermitianGenerator(g.size, "schrodinger", freq_diagonal=diag, freq_axes=axes, grid_shape=g.shape)
        if _dense_ok(g, dense):
            gen.matrix = gen.dense()
            gen.certificate = hermiticity_defect(gen.matrix)
        return gen

    def action(v):
        u = np.asarray(v).reshape(g.shape)
        return (from_frequency(kin * to_frequency(u, axes), axes) + vals / hbar * u).reshape(-1)

    return _finish(g, "schrodinger", action, dense)


def expm_apply(gen: HermitianGenerator, t: float, v: np.ndarray) -> np.ndarray:
    """exp(-i H t) v, by phases in frequency space or a cached eigendecomposition."""
    v = np.asarray(v, dtype=complex)
    if t == 0:
        return v.copy()
    if gen.freq_diagonal is not None:
        c = to_frequency(v.reshape(gen.grid_shape), gen.freq_axes)
        return from_frequency(np.exp(-1j * t * gen.freq_diagonal) * c, gen.freq_axes).reshape(-1)
    w, Q = gen.eigensystem()
    return Q @ (np.exp(-1j * t * w) * (Q.conj().T @ v))


def unitary(gen: HermitianGenerator, t: float) -> np.ndarray:
    w, Q = gen.eigensystem()
    return (Q * np.exp(-1j * t * w)) @ Q.conj().T


@dataclass
class AsymGenerator:
    """A_i = P_i Lambda_F with the positive split Lambda_F = Lambda+ - Lambda-.

    Shift rule: s = alpha + max(0, -min F); Lambda+ = Lambda_F + s, Lambda- = s.
    """

    grid: GridSpec
    axis: int
    alpha: float
    shift: float
    lam_f: np.ndarray
    lam_plus: np.ndarray
    lam_minus: np.ndarray

    def momentum(self) -> np.ndarray:
        return embed_axis(momentum_matrix(self.grid.M), self.grid, self.axis)

    def A(self) -> np.ndarray:
        return self.momentum() * self.lam_f[None, :]

    def A_plus(self) -> np.ndarray:
        return self.momentum() * self.lam_plus[None, :]

    def A_minus(self) -> np.ndarray:
        return self.momentum() * self.lam_minus[None, :]

    def symmetrized(self, which: str) -> HermitianGenerator:
        lam = self.lam_plus if which == "+" else self.lam_minus
        r = np.sqrt(lam)
        H = r[:, None] * self.momentum() * r[None, :]
        return HermitianGenerator(self.grid.size, f"asym-{which}{self.axis}", matrix=H,
                                  grid_shape=self.grid.shape, certificate=hermiticity_defect(H))


def build_asym_generator(g: GridSpec, field, axis: int, alpha: float = 1.0) -> AsymGenerator:
    if not alpha > 0:
        raise ValidationError(f"alpha must be positive, got {alpha}", "alpha")
    if g.size > DENSE_BUDGET:
        raise BudgetError(f"asymmetric generator on {g.size} nodes exceeds budget {DENSE_BUDGET}")
    F = np.asarray(field.eval(g.coordinates()), dtype=float).reshape((g.dim, -1))[axis]
    s = alpha + max(0.0, -float(F.min()))
    return AsymGenerator(g, axis, alpha, s, F, F + s, np.full_like(F, s))
