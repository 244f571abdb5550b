import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from linrep.grid import GridSpec
from linrep.spectral import (
    DftPlan,
    apply_momentum,
    build_asym_generator,
    build_kvn_hamiltonian,
    build_liouville_phase_generator,
    build_schrodinger_generator,
    dft_forward,
    dft_inverse,
    expm_apply,
    from_frequency,
    momentum_matrix,
    shifted_to_standard,
    standard_to_shifted,
    to_frequency,
)
from linrep.splitting import evolve, schrodinger_plan
from linrep.upwind import FlowField

from conftest import random_field


def direct_dft(v):
    M = len(v)
    return np.array([sum(v[j] * np.exp(2j * np.pi * j * k / M) for j in range(M)) for k in range(M)]) / np.sqrt(M)


def taylor_expm(A, order=4, squarings=None):
    """Scaling and squaring with a truncated Taylor series."""
    norm = np.linalg.norm(A, 1)
    s = squarings if squarings is not None else max(0, int(np.ceil(np.log2(norm / 1e-3))))
    X = A / 2**s
    E = np.eye(len(A), dtype=complex)
    term = np.eye(len(A), dtype=complex)
    for k in range(1, order + 1):
        term = term @ X / k
        E = E + term
    for _ in range(s):
        E = E @ E
    return E


def sine_field():
    return FlowField(1, lambda x: np.sin(2 * np.pi * np.asarray(x)), (1.0,), 2 * np.pi, name="sine")


def test_constant_vector_is_dc():
    M = 16
    c = dft_forward(DftPlan(M), np.ones(M) / np.sqrt(M))
    assert abs(c[0]) == pytest.approx(1.0)
    assert np.allclose(c[1:], 0, atol=1e-15)


def test_delta_is_flat():
    M = 16
    e = np.zeros(M)
    e[0] = 1
    assert np.allclose(np.abs(dft_forward(DftPlan(M), e)), 1 / np.sqrt(M))


@given(st.integers(1, 6), st.integers(0, 2**31))
def test_dft_roundtrip_and_direct(m, seed):
    M = 2**m
    v = np.random.default_rng(seed).standard_normal(M) + 1j * np.random.default_rng(seed + 1).standard_normal(M)
    plan = DftPlan(M)
    c = dft_forward(plan, v)
    assert np.allclose(c, direct_dft(v), atol=1e-12)
    assert np.allclose(dft_inverse(plan, c), v, atol=1e-12)


@pytest.mark.parametrize("M", [4, 8, 16])
def test_phi_factorisation(M):
    plan = DftPlan(M)
    F = plan.dft_matrix()
    assert np.allclose(plan.phi(), np.sqrt(M) * plan.sign[:, None] * F, atol=1e-12)


def test_shift_reordering_roundtrip():
    c = np.arange(8.0)
    assert np.array_equal(shifted_to_standard(standard_to_shifted(c)), c)
    assert standard_to_shifted(c)[0] == 4.0


def test_frequency_maps_are_unitary(rng):
    u = rng.standard_normal((8, 8)) + 0j
    c = to_frequency(u, (0, 1))
    assert np.linalg.norm(c) == pytest.approx(np.linalg.norm(u))
    assert np.allclose(from_frequency(c, (0, 1)), u, atol=1e-14)


def test_momentum_on_plane_wave():
    M = 16
    x = np.arange(M) / M
    for k in (-3, 1, 5):
        u = np.exp(2j * np.pi * k * x)
        assert np.allclose(apply_momentum(u, 0), 2 * np.pi * k * u, atol=1e-11)


def test_momentum_matrix_spectrum():
    M = 8
    w = np.linalg.eigvalsh(momentum_matrix(M))
    assert np.allclose(np.sort(w), np.sort(DftPlan(M).mu), atol=1e-10)


def test_kvn_zero_field():
    H = build_kvn_hamiltonian(GridSpec(1, 8), FlowField.zero(1), 0)
    assert np.abs(H.matrix).max() == 0


def test_kvn_unit_field_is_momentum():
    H = build_kvn_hamiltonian(GridSpec(1, 8), FlowField.constant([1.0]), 0)
    assert np.allclose(H.matrix, momentum_matrix(8), atol=1e-13)
    assert np.allclose(np.sort(np.linalg.eigvalsh(H.matrix)), np.sort(DftPlan(8).mu), atol=1e-10)


def test_kvn_sine_field_dense_oracle():
    M = 8
    g = GridSpec(1, M)
    H = build_kvn_hamiltonian(g, sine_field(), 0)
    assert H.certificate <= 1e-12
    # dense P from the explicit collocation matrix
    x = np.arange(M) / M
    mu = 2 * np.pi * (np.arange(M) - M // 2)
    Phi = np.exp(1j * np.outer(x, mu))
    P = Phi @ np.diag(mu) @ np.linalg.inv(Phi)
    Lam = np.diag(np.sin(2 * np.pi * x))
    assert np.allclose(H.matrix, 0.5 * (Lam @ P + P @ Lam), atol=1e-11)
    v = np.random.default_rng(3).standard_normal(M)
    assert np.allclose(H.action(v), H.matrix @ v, atol=1e-11)


def test_phase_generator_constant_potential():
    g = GridSpec.phase_space(1, 4)
    a = build_liouville_phase_generator(g)
    b = build_liouville_phase_generator(g, lambda x: np.zeros_like(x))
    assert np.array_equal(a.matrix, b.matrix)


def test_phase_generator_kronecker_oracle():
    M = 4
    g = GridSpec.phase_space(1, M)
    gv = lambda x: 0.3 * np.sin(2 * np.pi * x)
    H = build_liouville_phase_generator(g, gv).matrix
    P = momentum_matrix(M)
    I = np.eye(M)
    nodes = np.arange(M) / M
    Dp = np.diag(nodes)
    Dgv = np.diag(0.3 * np.sin(2 * np.pi * nodes))
    ref = np.kron(P, I) @ np.kron(I, Dp) - np.kron(Dgv, I) @ np.kron(I, P)
    assert np.allclose(H, ref, atol=1e-12)


def test_phase_generator_preserves_norm(rng):
    g = GridSpec.phase_space(1, 8)
    gen = build_liouville_phase_generator(g, lambda x: 0.2 * np.cos(2 * np.pi * x))
    v = rng.standard_normal(64)
    assert np.linalg.norm(expm_apply(gen, 0.7, v)) == pytest.approx(np.linalg.norm(v), rel=1e-10)


def test_free_schrodinger_spectrum():
    hbar = 0.1
    gen = build_schrodinger_generator(GridSpec(1, 8), 0.0, hbar)
    mu = DftPlan(8).mu
    assert np.allclose(np.sort(np.linalg.eigvalsh(gen.matrix)), np.sort(hbar * mu**2 / 2), atol=1e-9)


def test_plane_wave_eigenvector():
    hbar, V = 0.05, 2.0
    g = GridSpec(1, 16)
    gen = build_schrodinger_generator(g, V, hbar)
    u = np.exp(2j * np.pi * g.nodes())
    assert np.allclose(gen.apply(u), (hbar * (2 * np.pi) ** 2 / 2 + V / hbar) * u, atol=1e-9)


def test_schrodinger_split_vs_dense_exponential():
    hbar, M, T = 0.0256, 16, 0.02
    g = GridSpec(1, M)
    x = g.nodes()
    V = 10.0 * np.cos(2 * np.pi * x)
    gen = build_schrodinger_generator(g, V, hbar)
    u0 = np.exp(-25 * (x - 0.5) ** 2) + 0j
    exact = expm(-1j * T * gen.matrix) @ u0
    errs = []
    for n in (4, 8, 16):
        errs.append(np.linalg.norm(evolve(schrodinger_plan(g, V, hbar, T / n), u0, n).state - exact))
    slope = np.polyfit(np.log([T / 4, T / 8, T / 16]), np.log(errs), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.2)


def test_asym_shift_rule():
    f = FlowField(1, lambda x: 1.5 + 0.5 * np.sin(2 * np.pi * np.asarray(x)), (2.0,), np.pi)
    A = build_asym_generator(GridSpec(1, 8), f, 0, alpha=0.5)
    assert A.shift == 0.5
    assert np.allclose(A.lam_minus, 0.5)
    assert np.allclose(A.lam_plus, A.lam_f + 0.5)


@given(st.integers(0, 10_000))
def test_asym_split_identity(seed):
    f = random_field(np.random.default_rng(seed), 1)
    A = build_asym_generator(GridSpec(1, 8), f, 0)
    # (F + s) - s reproduces F up to one rounding of the shift
    assert np.allclose(A.lam_plus - A.lam_minus, A.lam_f, rtol=0, atol=np.spacing(A.shift + np.abs(A.lam_f).max()))
    assert np.all(A.lam_minus > 0) and np.all(A.lam_plus > 0)


def test_asym_similarity(rng):
    f = random_field(rng, 1)
    A = build_asym_generator(GridSpec(1, 8), f, 0)
    sym = A.symmetrized("+").matrix
    ev_sym = np.sort(np.linalg.eigvalsh(sym))
    ev_asym = np.sort(np.linalg.eigvals(A.A_plus()).real)
    assert np.allclose(ev_sym, ev_asym, atol=1e-8)


def test_expm_identity_at_zero(rng):
    gen = build_kvn_hamiltonian(GridSpec(1, 8), sine_field(), 0)
    v = rng.standard_normal(8) + 0j
    assert np.array_equal(expm_apply(gen, 0.0, v), v)


def test_expm_diagonal_phase():
    gen = build_schrodinger_generator(GridSpec(1, 8), 0.0, 1.0)
    c = np.zeros(8, complex)
    c[5] = 1
    u = from_frequency(c, (0,))
    a = gen.freq_diagonal[5]
    assert np.allclose(expm_apply(gen, 0.3, u), np.exp(-1j * a * 0.3) * u, atol=1e-12)


def test_expm_against_taylor_oracle(rng):
    gen = build_kvn_hamiltonian(GridSpec(1, 8), sine_field(), 0)
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    ref = taylor_expm(-1j * 0.3 * gen.matrix, order=4, squarings=20) @ v
    assert np.allclose(expm_apply(gen, 0.3, v), ref, atol=1e-9)
