import math

import numpy as np
import pytest

from linrep.errors import CausticError
from linrep.grid import GridSpec, TimeGrid
from linrep.mollifier import kernel
from linrep.oracle import (
    burgers_characteristics,
    characteristics_liouville,
    free_schrodinger_exact,
    rk4,
)
from linrep.upwind import FlowField, assemble_liouville

u0 = lambda x: 0.25 + 0.1 * np.sin(2 * np.pi * np.asarray(x))


def linear_decay():
    return FlowField(1, lambda x: -(np.asarray(x) - 0.5), (0.5,), 1.0,
                     lambda x: -np.ones(np.shape(x)[1:]), "linear")


def bump(x, c=0.5, w=0.2):
    return kernel("cosine", (np.asarray(x)[0] - c) / w) / w


def test_rk4_zero_field():
    res = rk4(FlowField.zero(2), [0.3, 0.4], 1.0, 0.1)
    assert np.all(res.values == [0.3, 0.4])
    assert res.accuracy == 0


def test_rk4_linear_decay():
    res = rk4(linear_decay(), [0.7], 1.0, 1e-3)
    t = res.times
    assert np.abs(res.values[:, 0] - (0.5 + 0.2 * np.exp(-t))).max() <= 1e-10
    assert res.accuracy <= 1e-12


def test_rk4_logistic():
    f = FlowField(1, lambda q: q * (1 - q), (0.25,), 1.0)
    res = rk4(f, [0.1], 2.0, 1e-3)
    t = res.times
    assert np.abs(res.values[:, 0] - 0.1 * np.exp(t) / (0.9 + 0.1 * np.exp(t))).max() <= 1e-10


def test_characteristics_zero_field():
    x = np.linspace(0, 1, 17)[None]
    assert np.allclose(characteristics_liouville(FlowField.zero(1), bump, 0.4, x).values, bump(x))


def test_characteristics_translation():
    x = np.linspace(0.3, 0.9, 13)[None]
    res = characteristics_liouville(FlowField.constant([0.5]), bump, 0.2, x)
    assert np.allclose(res.values, bump(x - 0.1), atol=1e-13)


def test_characteristics_linear_jacobian():
    t = 0.5
    x = np.linspace(0.3, 0.7, 9)[None]
    res = characteristics_liouville(linear_decay(), bump, t, x)
    back = 0.5 + (x - 0.5) * math.exp(t)
    assert np.allclose(res.values, bump(back) * math.exp(t), rtol=1e-9)


def test_characteristics_vs_fine_upwind():
    M, T = 256, 0.5
    g = GridSpec(1, M)
    tg = TimeGrid.from_horizon(T, g.spacing)
    s = assemble_liouville(g, tg, linear_decay())
    x = g.nodes()
    rho = bump(x[None], 0.6)
    for _ in range(tg.steps):
        rho = s.B @ rho
    ref = characteristics_liouville(linear_decay(), lambda X: bump(X, 0.6), T, x[None]).values
    # first-order upwind on a smooth profile: l1 error O(dx)
    assert np.abs(rho - ref).sum() * g.spacing <= 20 * g.spacing


def test_burgers_constant():
    res = burgers_characteristics(lambda x: np.full_like(np.asarray(x, float), 0.4), 0.5, np.linspace(0, 1, 9))
    assert np.allclose(res.values, 0.4)


def test_burgers_residual():
    x = np.arange(64) / 64
    res = burgers_characteristics(u0, 0.2, x)
    assert np.abs(res.values - u0(x - res.values * 0.2)).max() <= 1e-12
    assert res.accuracy <= 1e-12


def test_burgers_caustic_guard():
    # caustic at 1/(0.2 pi) ~ 1.59
    with pytest.raises(CausticError):
        burgers_characteristics(u0, 1.5, np.linspace(0, 1, 8))


def test_free_schrodinger_identity():
    u = np.random.default_rng(0).standard_normal(16) + 0j
    assert np.allclose(free_schrodinger_exact(u, 0.1, 0.0), u, atol=1e-15)


def test_free_schrodinger_single_mode():
    x = np.arange(16) / 16
    u = np.exp(2j * np.pi * 3 * x)
    out = free_schrodinger_exact(u, 0.1, 0.7)
    assert np.allclose(np.abs(out), 1.0)
    assert np.allclose(out / u, out[0] / u[0])
