import numpy as np
import pytest

from momclust import ordinal, trunc


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests measure runtime, not JIT."""
    rng = np.random.default_rng(0)
    box = ordinal.Box(np.array([-1.0, 0.0]), np.array([1.0, np.inf]))
    trunc.box_probability(np.zeros(2), np.eye(2), box, 8, rng)
    cfg = trunc.GibbsConfig(burn_in=2, thinning=1, n_samples=2)
    trunc.gibbs_truncated_mvn(np.zeros(2), np.eye(2), box, cfg, rng)


def random_spd(rng, n, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T / n + np.eye(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
