import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# first calls into the jitted kernels pay compilation; never let hypothesis
# time individual examples
settings.register_profile(
    "kpl",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("kpl")


def kahan_dot(u, v):
    """Compensated-summation reference for the dot kernel."""
    acc = 0.0
    comp = 0.0
    for a, b in zip(u, v):
        y = a * b - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return acc


def dense_spd(n, rng, cond=50.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = np.logspace(0, np.log10(cond), n)
    a = (q * lam) @ q.T
    return (a + a.T) / 2.0


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
