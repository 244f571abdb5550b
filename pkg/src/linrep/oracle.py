"""Reference solutions used to certify the solvers.

Nothing here imports the upwind or splitting code: each oracle integrates
its own equations (RK4 on characteristics, a fixed point for Burgers,
numpy's standard-order FFT for the free Schrodinger flow).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CausticError, DivergenceError, DomainError, ValidationError


@dataclass
class OracleResult:
    values: np.ndarray
    method: str
    step: float
    accuracy: float
    times: np.ndarray | None = None


def _rk4_path(rhs, y0: np.ndarray, T: float, dt: float):
    n = max(1, math.ceil(T / dt - 1e-9))
    h = T / n
    y = np.array(y0, dtype=float)
    out = [y.copy()]
    for _ in range(n):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DivergenceError("RK4 produced a non-finite state")
        out.append(y.copy())
    return np.array(out), h


def _as_rhs(fn):
    def rhs(q):
        return np.asarray(fn(q), dtype=float).reshape(q.shape)
    return rhs


def rk4(field, q0, T: float, dt: float) -> OracleResult:
    """Classical RK4 for dq/dt = F(q); accuracy from a half-step rerun."""
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}", "dt")
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    rhs = _as_rhs(field.eval)
    path, h = _rk4_path(rhs, q0, T, dt)
    fine, _ = _rk4_path(rhs, q0, T, dt / 2)
    acc = float(np.abs(fine[-1] - path[-1]).max())
    return OracleResult(path, "rk4", h, acc, np.linspace(0.0, T, len(path)))


def characteristics_liouville(field, rho0_fn: Callable[[np.ndarray], np.ndarray], t: float,
                              x_nodes: np.ndarray, dt_oracle: float | None = None,
                              wrap_budget: float = 1.0) -> OracleResult:
    """rho(t, x) = rho0(X(0)) exp(-int_0^t div F(X(s)) ds) along backward characteristics.

    ``x_nodes`` has shape (d, n).  The backward flow X' = -F(X) and the
    divergence integral are advanced together with RK4.
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    d = x_nodes.shape[0]
    if dt_oracle is None:
        n = x_nodes.shape[1] ** (1.0 / d)
        dt_oracle = 0.1 / max(n, 1.0)
    div = field.div
    if div is None:
        def div(x, h=1e-6):
            tot = 0.0
            for i in range(d):
                e = np.zeros((d,) + (1,) * (x.ndim - 1))
                e[i] = h
                tot = tot + (field.eval(x + e)[i] - field.eval(x - e)[i]) / (2 * h)
            return tot

    def rhs(y):
        X = y[:d]
        return np.concatenate([-np.asarray(field.eval(X)), np.asarray(div(X))[None]], axis=0)

    def solve(h):
        y0 = np.concatenate([x_nodes, np.zeros((1, x_nodes.shape[1]))], axis=0)
        if t == 0:
            return y0
        path, _ = _rk4_path(rhs, y0, t, h)
        return path[-1]

    y = solve(dt_oracle)
    X0, integral = y[:d], y[d]
    if np.any(X0 < -wrap_budget) or np.any(X0 > 1 + wrap_budget):
        raise DomainError("backward characteristic left the periodic wrap budget", "x")
    vals = np.asarray(rho0_fn(X0), dtype=float) * np.exp(-integral)
    y2 = solve(dt_oracle / 2)
    vals2 = np.asarray(rho0_fn(y2[:d]), dtype=float) * np.exp(-y2[d])
    return OracleResult(vals, "characteristics-rk4", dt_oracle, float(np.abs(vals2 - vals).max()))


def caustic_time(u0_fn: Callable[[np.ndarray], np.ndarray], samples: int = 4096) -> float:
    x = np.arange(samples) / samples
    h = 1.0 / samples
    du = (u0_fn(x + h) - u0_fn(x - h)) / (2 * h)
    m = float(np.abs(du).max())
    return math.inf if m == 0 else 1.0 / m


def burgers_characteristics(u0_fn: Callable[[np.ndarray], np.ndarray], t: float, x,
                            damping: float = 0.7, tol: float = 1e-12, max_iter: int = 10_000) -> OracleResult:
    """Solve u = u0(x - u t) pointwise by damped fixed-point iteration."""
    x = np.asarray(x, dtype=float)
    tc = caustic_time(u0_fn)
    if t >= 0.9 * tc:
        raise CausticError(f"t={t} is past 0.9 x the caustic estimate {tc:.4g}")
    u = np.asarray(u0_fn(x), dtype=float).copy()
    for it in range(max_iter):
        nxt = np.asarray(u0_fn(x - u * t), dtype=float)
        res = np.abs(nxt - u).max()
        if res <= tol:
            u = nxt
            break
        u = (1 - damping) * u + damping * nxt
    else:
        raise CausticError(f"fixed point did not converge in {max_iter} iterations")
    residual = float(np.abs(u - u0_fn(x - u * t)).max())
    return OracleResult(u, "burgers-fixed-point", 0.0, residual)


def burgers_density(u0_fn, t: float, x, u: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Jacobian density 1/(1 + t u0'(x - u t)) of the pressureless flow with unit initial density."""
    x0 = np.asarray(x, dtype=float) - u * t
    du = (u0_fn(x0 + h) - u0_fn(x0 - h)) / (2 * h)
    return 1.0 / (1.0 + t * du)


def free_schrodinger_exact(u0: np.ndarray, hbar: float, t: float, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """exp(-i hbar |k|^2 t / 2) on every Fourier mode, in numpy's standard bin order."""
    u0 = np.asarray(u0, dtype=complex)
    shape = shape or u0.shape
    grid = u0.reshape(shape)
    spec = np.fft.fftn(grid)
    k2 = np.zeros(shape)
    for a, M in enumerate(shape):
        k = 2 * np.pi * np.fft.fftfreq(M, d=1.0 / M)
        k2 = k2 + (k**2).reshape([-1 if i == a else 1 for i in range(len(shape))])
    return np.fft.ifftn(np.exp(-0.5j * hbar * k2 * t) * spec).reshape(u0.shape)
