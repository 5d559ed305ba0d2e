import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vsur.errors import InvalidInput, UnknownPoint
from vsur.kernels import (
    DomainGrid,
    MatKernel,
    MeanFn,
    NoiseModel,
    ScalarKernel,
    block_gram,
    eval_kernel,
    noise_block,
)


def random_lmc(rng, d, n_terms=2):
    fams = ["squared-exponential", "matern-3/2", "matern-5/2"]
    terms = []
    for q in range(n_terms):
        A = rng.normal(size=(d, d))
        terms.append((A @ A.T / d, ScalarKernel(fams[q % 3], rng.uniform(0.1, 1.0), rng.uniform(0.5, 2.0))))
    return MatKernel(tuple(terms))


def test_diagonal_is_variance():
    k = MatKernel(((np.eye(2), ScalarKernel("squared-exponential", 0.3, 2.5)),))
    np.testing.assert_array_equal(eval_kernel(k, [0.4], [0.4]), 2.5 * np.eye(2))


def test_far_apart_decays():
    k = MatKernel(((np.eye(2), ScalarKernel("squared-exponential", 0.3, 1.0)),))
    assert np.max(np.abs(eval_kernel(k, [0.0], [100.0]))) == 0.0


def test_se_closed_form():
    B = np.array([[1.0, 0.5], [0.5, 1.0]])
    k = MatKernel(((B, ScalarKernel("squared-exponential", 1.0, 1.0)),))
    np.testing.assert_allclose(eval_kernel(k, [0.0, 0.0], [0.6, 0.8]), B * np.exp(-0.5), rtol=1e-15)


@pytest.mark.parametrize("family,expected", [
    ("matern-3/2", (1 + np.sqrt(3) * 0.5) * np.exp(-np.sqrt(3) * 0.5)),
    ("matern-5/2", (1 + np.sqrt(5) * 0.5 + 5 * 0.25 / 3) * np.exp(-np.sqrt(5) * 0.5)),
])
def test_matern_closed_form(family, expected):
    k = ScalarKernel(family, 2.0, 1.0)
    assert k(np.array([[0.0]]), np.array([[1.0]]))[0, 0] == pytest.approx(expected, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_symmetry_exact(d, seed):
    rng = np.random.default_rng(seed)
    k = random_lmc(rng, d)
    x, y = rng.normal(size=2), rng.normal(size=2)
    assert np.array_equal(eval_kernel(k, x, y), eval_kernel(k, y, x).T)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_gram_quadratic_form_nonnegative(n, d, seed):
    rng = np.random.default_rng(seed)
    k = random_lmc(rng, d, 3)
    xs = rng.uniform(0, 2, size=(n, 2))
    a = rng.normal(size=(n, d))
    total = sum(a[j] @ eval_kernel(k, xs[i], xs[j]) @ a[i] for i in range(n) for j in range(n))
    assert total >= -1e-8


def test_block_gram_layout_and_psd(rng):
    k = random_lmc(rng, 2)
    xs = rng.uniform(size=(5, 1))
    G = block_gram(k, xs)
    assert G.shape == (10, 10)
    np.testing.assert_array_equal(G, G.T)
    assert np.linalg.eigvalsh(G)[0] >= -1e-8 * np.trace(G)
    np.testing.assert_allclose(G[2:4, 6:8], eval_kernel(k, xs[1], xs[3]), rtol=1e-15)
    np.testing.assert_allclose(block_gram(k, xs[:1]), eval_kernel(k, xs[0], xs[0]))


def test_block_gram_decorrelates():
    k = MatKernel(((np.eye(1), ScalarKernel("squared-exponential", 0.1, 3.0)),))
    np.testing.assert_allclose(block_gram(k, [[0.0], [50.0]]), 3.0 * np.eye(2), atol=1e-300)


def test_block_gram_empty():
    k = MatKernel(((np.eye(1), ScalarKernel()),))
    with pytest.raises(InvalidInput):
        block_gram(k, np.zeros((0, 1)))


def test_spd_lmc_gives_positive_definite_gram(rng):
    k = MatKernel((
        (np.array([[2.0, 0.3], [0.3, 1.0]]), ScalarKernel("squared-exponential", 0.2, 1.0)),
        (np.array([[1.0, -0.4], [-0.4, 1.0]]), ScalarKernel("squared-exponential", 0.5, 1.0)),
    ))
    xs = np.linspace(0, 1, 6)[:, None]
    assert np.linalg.eigvalsh(block_gram(k, xs))[0] > 0


def test_invalid_kernel_inputs():
    with pytest.raises(InvalidInput):
        ScalarKernel("squared-exponential", -1.0, 1.0)
    with pytest.raises(InvalidInput):
        ScalarKernel("rbf", 1.0, 1.0)
    with pytest.raises(InvalidInput):
        MatKernel(((np.array([[1.0, 2.0], [2.0, 1.0]]), ScalarKernel()),))
    k = MatKernel(((np.eye(1), ScalarKernel()),))
    with pytest.raises(InvalidInput):
        eval_kernel(k, [np.inf], [0.0])


def test_noise_blocks(grid10):
    T = 0.01 * np.eye(2)
    noise = NoiseModel.homoscedastic(T)
    np.testing.assert_array_equal(noise_block(noise, [[0.1], [0.2]]), 0.01 * np.eye(4))
    np.testing.assert_array_equal(noise_block(noise, [[0.1]]), T)
    table = np.array([np.diag([i + 1.0, 0.5 * i]) for i in range(10)])
    het = NoiseModel.heteroscedastic(grid10, table)
    pts = grid10.points[[3, 7, 3]]
    N = noise_block(het, pts)
    for blk, i in enumerate([3, 7, 3]):
        np.testing.assert_array_equal(N[2 * blk:2 * blk + 2, 2 * blk:2 * blk + 2], table[i])
    assert np.all(N[0:2, 2:6] == 0)
    with pytest.raises(UnknownPoint):
        noise_block(het, [[0.123]])


def test_noise_must_be_psd():
    with pytest.raises(InvalidInput):
        NoiseModel.homoscedastic(np.diag([1.0, -1.0]))


def test_grid_invariants():
    g = DomainGrid.uniform([0.0], [2.0], 5)
    assert g.total_mass == pytest.approx(2.0)
    with pytest.raises(InvalidInput):
        DomainGrid(np.array([[0.0], [0.0]]), np.array([1.0, 1.0]))
    with pytest.raises(InvalidInput):
        DomainGrid(np.array([[0.0], [1.0]]), np.array([1.0, -1.0]))
    with pytest.raises(InvalidInput):
        DomainGrid(np.array([[0.0], [1.0]]), np.array([1.0]))


def test_mean_functions(grid10):
    assert MeanFn.zeros(2)([[0.1], [0.2]]).shape == (2, 2)
    np.testing.assert_array_equal(MeanFn.constant([1.0, -2.0])([[0.3]]), [[1.0, -2.0]])
    tab = np.arange(20.0).reshape(10, 2)
    m = MeanFn.table(grid10, tab)
    np.testing.assert_array_equal(m(grid10.points[[4, 1]]), tab[[4, 1]])
    with pytest.raises(InvalidInput):
        MeanFn.constant([np.nan])
