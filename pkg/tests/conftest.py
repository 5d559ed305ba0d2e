import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vsur.kernels import DomainGrid, MatKernel, MeanFn, NoiseModel, ScalarKernel  # noqa: E402
from vsur.posterior import GPState, ObservationSet  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]


def lmc2(ell=0.15):
    return MatKernel((
        (np.array([[1.0, 0.5], [0.5, 1.0]]), ScalarKernel("squared-exponential", ell, 1.0)),
        (np.array([[0.5, -0.2], [-0.2, 0.5]]), ScalarKernel("squared-exponential", ell, 1.0)),
    ))


def random_spd(rng, d, scale=1.0, jitter=0.1):
    A = rng.normal(size=(d, d))
    return scale * (A @ A.T / d + jitter * np.eye(d))


def scalar_kriging(xs, zs, x, y, ell, var, tau2, mean=0.0):
    """Textbook single-output Kriging with a Cholesky solve."""
    def k(a, b):
        return var * np.exp(-0.5 * (a - b) ** 2 / ell**2)
    K = k(xs[:, None], xs[None, :]) + tau2 * np.eye(xs.size)
    L = np.linalg.cholesky(K)
    kx, ky = k(xs, x), k(xs, y)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, zs - mean))
    vx = np.linalg.solve(L, kx)
    vy = np.linalg.solve(L, ky)
    return mean + kx @ alpha, k(x, y) - vx @ vy


def random_instance(rng, d, n, M):
    fams = ["squared-exponential", "matern-3/2", "matern-5/2"]
    terms = []
    for q in range(2):
        A = rng.normal(size=(d, d))
        terms.append((A @ A.T / d + 0.05 * np.eye(d) * q,
                      ScalarKernel(fams[rng.integers(3)], rng.uniform(0.08, 0.3), rng.uniform(0.5, 2.0))))
    kernel = MatKernel(tuple(terms))
    grid = DomainGrid.uniform([0.0], [1.0], M)
    kind = rng.integers(3)
    if kind == 0:
        T = random_spd(rng, d, 0.05)
    elif kind == 1:
        T = np.zeros((d, d))
    else:
        v = rng.normal(size=(d, 1))
        T = 0.05 * v @ v.T
    noise = NoiseModel.homoscedastic(T)
    mean = MeanFn.constant(rng.normal(size=d)) if rng.integers(2) else MeanFn.zeros(d)
    idx = rng.integers(M, size=n)
    if kind == 1 and n > 1:
        idx[-1] = idx[0]
    obs = ObservationSet(grid.points[idx], rng.normal(size=(n, d)))
    return GPState(mean, kernel, noise), obs, grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid10():
    return DomainGrid.uniform([0.0], [1.0], 10)


@pytest.fixture
def prior2():
    return GPState(MeanFn.zeros(2), lmc2(0.25), NoiseModel.homoscedastic(0.01 * np.eye(2)))


@pytest.fixture
def prior1():
    k = MatKernel(((np.eye(1), ScalarKernel("squared-exponential", 0.2, 1.0)),))
    return GPState(MeanFn.zeros(1), k, NoiseModel.homoscedastic(0.01 * np.eye(1)))
