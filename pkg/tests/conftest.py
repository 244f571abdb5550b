import numpy as np
import pytest
from hypothesis import settings

from linrep.upwind import FlowField

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_field(rng, d, modes=3, amp=1.0):
    """Smooth periodic F_i = c_i + sum_k a sin(2 pi k.x + phi) with its analytic divergence."""
    a = rng.uniform(-amp, amp, (d, modes))
    ph = rng.uniform(0, 2 * np.pi, (d, modes))
    c = rng.uniform(-0.3, 0.3, d)
    ks = rng.integers(-2, 3, (d, modes, d))

    def arg(x, i, k):
        return 2 * np.pi * sum(ks[i, k, j] * x[j] for j in range(d)) + ph[i, k]

    def F(x):
        x = np.asarray(x, dtype=float)
        return np.stack([c[i] + sum(a[i, k] * np.sin(arg(x, i, k)) for k in range(modes)) + 0 * x[0]
                         for i in range(d)])

    def div(x):
        x = np.asarray(x, dtype=float)
        return sum(a[i, k] * 2 * np.pi * ks[i, k, i] * np.cos(arg(x, i, k))
                   for i in range(d) for k in range(modes)) + 0 * x[0]

    return FlowField.from_function(F, d, div=div, name="random")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def wkb_amplitude(x):
    return np.exp(-25.0 * (np.asarray(x)[0] - 0.5) ** 2)


def wkb_phase(x):
    y = 5.0 * (np.asarray(x)[0] - 0.5)
    return -np.log(np.exp(y) + np.exp(-y)) / 5.0
