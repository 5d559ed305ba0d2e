import importlib
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import OracleBudget, oracle_functional
from vsur import _backend, _kernels_py
from vsur.orthant import GaussianOrthantQuery, orthant_prob_estimate

cy = pytest.importorskip("vsur._ckernels")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bvn_backends_agree(seed):
    rng = np.random.default_rng(seed)
    n = 200
    h, k = rng.normal(scale=2, size=(2, n))
    r = rng.uniform(-1, 1, size=n)
    r[:5] = [1.0, -1.0, 0.0, 0.999, -0.95]
    a = _kernels_py.bvn_upper(h, k, r)
    b = np.asarray(cy.bvn_upper(h, k, r))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_genz_backends_agree():
    rng = np.random.default_rng(4)
    q = 5
    A = rng.normal(size=(q, q))
    L = np.linalg.cholesky(A @ A.T / q + 0.1 * np.eye(q))
    b = rng.normal(size=q)
    gens = np.sqrt([2.0, 3.0, 5.0, 7.0])
    shifts = rng.uniform(size=(8, q - 1))
    a = _kernels_py.genz_integrate(L, b, q, gens, shifts, 512)
    c = np.asarray(cy.genz_integrate(L, b, q, gens, shifts, 512))
    np.testing.assert_allclose(a, c, rtol=0, atol=1e-13)


def test_backend_selection_env():
    code = "from vsur._backend import BACKEND; print(BACKEND)"
    env = {**os.environ, "VSUR_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"
    assert importlib.reload(_backend).BACKEND in ("cython", "python")


def test_oracle_se_scales_with_budget():
    C = np.array([[1.0, 0.4], [0.4, 1.0]])
    m = np.zeros((1, 2))
    se = [oracle_functional(m, C, [1.0], [0.0, 0.0], n, 1)["ibv"][1] for n in (4_000, 64_000)]
    assert 3.0 <= se[0] / se[1] <= 5.5
    assert OracleBudget().n_obs_sims == 5_000


def test_qmc_se_reported():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(4, 4))
    p, se = orthant_prob_estimate(GaussianOrthantQuery(np.zeros(4), A @ A.T + np.eye(4), np.zeros(4)))
    assert 0 < p < 1 and 0 < se < 1e-3
