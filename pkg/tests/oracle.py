"""Brute-force references for the test suite.

Nothing here calls into the fast conditioning, orthant or functional code:
covariances are assembled entry by entry from the kernel parameters, the
joint Gaussian is conditioned with ``numpy.linalg.pinv``, and functionals are
estimated from sampled paths.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OracleBudget:
    n_paths: int = 100_000
    n_obs_sims: int = 5_000
    seed: int = 0

    def __post_init__(self):
        if self.n_paths < 2 or self.n_obs_sims < 2:
            raise ValueError("oracle budgets must be >= 2")


def _scalar(family, ell, var, x, y):
    r = math.sqrt(sum((a - b) ** 2 for a, b in zip(x, y))) / ell
    if family == "squared-exponential":
        return var * math.exp(-0.5 * r * r)
    if family == "matern-3/2":
        s = math.sqrt(3.0) * r
        return var * (1.0 + s) * math.exp(-s)
    s = math.sqrt(5.0) * r
    return var * (1.0 + s + s * s / 3.0) * math.exp(-s)


def _kernel_entry(kernel, x, y, a, b):
    return sum(
        float(B[a][b]) * _scalar(kap.family, kap.lengthscale, kap.variance, x, y)
        for B, kap in kernel.terms
    )


def _mean_entry(mean, grid_pts, x, a):
    if mean.kind == "zero":
        return 0.0
    if mean.kind == "constant":
        return float(mean.value[a])
    for i, g in enumerate(grid_pts):
        if all(float(u) == float(v) for u, v in zip(g, x)):
            return float(mean.value[i][a])
    raise KeyError(x)


def _noise_entry(noise, x, a, b):
    if noise.kind == "homoscedastic":
        return float(noise.matrix[a][b])
    for i, g in enumerate(noise.grid.points):
        if all(float(u) == float(v) for u, v in zip(g, x)):
            return float(noise.table[i][a][b])
    raise KeyError(x)


def _sites(points):
    arr = np.asarray(points, dtype=float)
    return [tuple(np.atleast_1d(p).tolist()) for p in arr.reshape(len(arr), -1)] if len(arr) else []


def oracle_joint(mean, kernel, noise, points, obs_points):
    """Joint mean and covariance of (values at ``points``, noisy observations)."""
    d = len(kernel.terms[0][0])
    grid_pts = [tuple(g) for g in mean.grid.points] if mean.kind == "table" else []
    sites = points + obs_points
    M = len(points)
    N = len(sites) * d
    joint = np.empty((N, N))
    mu = np.empty(N)
    for i, x in enumerate(sites):
        for a in range(d):
            I = i * d + a
            mu[I] = _mean_entry(mean, grid_pts, x, a)
            for j, y in enumerate(sites):
                for b in range(d):
                    v = _kernel_entry(kernel, x, y, a, b)
                    if i >= M and i == j:
                        v += _noise_entry(noise, x, a, b)
                    joint[I, j * d + b] = v
    return mu, joint


def oracle_condition(mean, kernel, noise, points, obs_points=(), obs_values=(), rcond=1e-10):
    """Conditional mean table (M, d) and covariance (M d, M d) at ``points``.

    Builds the joint covariance of (values at ``points``, noisy observations)
    entry by entry and applies the partitioned-Gaussian formula.
    """
    points = _sites(points)
    obs_points = _sites(obs_points)
    d = len(kernel.terms[0][0])
    M = len(points)
    mu, joint = oracle_joint(mean, kernel, noise, points, obs_points)
    f = slice(0, M * d)
    if not obs_points:
        return mu[f].reshape(M, d), joint[f, f]
    o = slice(M * d, joint.shape[0])
    z = np.array(obs_values, dtype=float).reshape(-1)
    gain = joint[f, o] @ np.linalg.pinv(joint[o, o], rcond=rcond)
    m = mu[f] + gain @ (z - mu[o])
    C = joint[f, f] - gain @ joint[f, o].T
    return m.reshape(M, d), 0.5 * (C + C.T)


def sample_tables(mean_table, cov, n_paths, seed):
    """Paths (n_paths, M, d) from N(mean, cov) via an SVD square root."""
    M, d = mean_table.shape
    U, s, _ = np.linalg.svd(0.5 * (cov + cov.T), hermitian=True)
    root = U * np.sqrt(np.clip(s, 0.0, None))
    rng = np.random.Generator(np.random.PCG64(seed))
    g = rng.normal(size=(n_paths, M * d))
    return mean_table.reshape(1, M, d) + (g @ root.T).reshape(n_paths, M, d)


def oracle_functional(mean_table, cov, weights, threshold, n_paths, seed):
    """Monte Carlo estimates ``{name: (estimate, standard_error)}``.

    ``p`` maps to per-point arrays; ``ibv`` and ``emv`` to scalars.
    """
    t = np.asarray(threshold, dtype=float)
    w = np.asarray(weights, dtype=float)
    paths = sample_tables(mean_table, cov, n_paths, seed)
    ind = np.all(paths >= t, axis=-1).astype(float)
    N = ind.shape[0]
    p = ind.mean(axis=0)
    p_se = np.sqrt(p * (1 - p) / N)
    ibv = float(np.sum(w * p * (1 - p)) * N / (N - 1))
    lin = ind @ (w * (1 - 2 * p))
    ibv_se = float(lin.std(ddof=1) / math.sqrt(N))
    vol = ind @ w
    dev = vol - vol.mean()
    emv = float(np.sum(dev**2) / (N - 1))
    m4 = float(np.mean(dev**4))
    emv_se = float(math.sqrt(max(m4 - emv**2, 0.0) / N))
    return {"p": (p, p_se), "ibv": (ibv, ibv_se), "emv": (emv, emv_se)}


def oracle_criterion(state, x, points, weights, threshold, kind, budget, inner_paths=2_000):
    """Monte Carlo estimate of ``E[H(after observing at x)]`` and its standard error.

    ``state`` supplies only the prior and the observation list; the posterior
    at ``x`` and every fantasized conditioning are done here from the joint
    covariance of grid values and observations.
    """
    obs_p = _sites(state.obs.points)
    obs_v = np.asarray(state.obs.values, dtype=float).reshape(-1)
    x = _sites([x])
    d = state.output_dim
    m_x, c_x = oracle_condition(state.mean, state.kernel, state.noise, x, obs_p, state.obs.values)
    S = c_x + np.array([[_noise_entry(state.noise, x[0], a, b) for b in range(d)] for a in range(d)])
    evals, evecs = np.linalg.eigh(0.5 * (S + S.T))
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T

    pts = _sites(points)
    M = len(pts)
    mu, joint = oracle_joint(state.mean, state.kernel, state.noise, pts, obs_p + x)
    f = slice(0, M * d)
    o = slice(M * d, joint.shape[0])
    gain = joint[f, o] @ np.linalg.pinv(joint[o, o], rcond=1e-10)
    C = joint[f, f] - gain @ joint[f, o].T
    C = 0.5 * (C + C.T)

    rng = np.random.Generator(np.random.PCG64(budget.seed))
    vals = np.empty(budget.n_obs_sims)
    for s in range(budget.n_obs_sims):
        z = m_x[0] + root @ rng.normal(size=d)
        m = mu[f] + gain @ (np.concatenate([obs_v, z]) - mu[o])
        est = oracle_functional(m.reshape(M, d), C, weights, threshold, inner_paths,
                                budget.seed * 7919 + s + 1)
        vals[s] = est[kind][0]
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))
