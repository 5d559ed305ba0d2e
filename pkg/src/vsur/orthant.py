"""Upper-orthant probabilities ``P(Y >= t)`` for Gaussian vectors.

Zero-variance coordinates are peeled off first as deterministic indicators.
The remaining dimension picks the method: Gaussian tail (1), bivariate
Gauss-Legendre integration (2), or randomized-lattice separation-of-variables
QMC (3 and up).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ._backend import bvn_upper, genz_integrate
from .errors import InvalidInput, NotPSD
from .linalg import DEFAULT_TOL, sym

DEFAULT_QMC_SAMPLES = 2**13
N_SHIFTS = 8

_PRIMES = np.array([2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
                    73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151])


@dataclass(frozen=True, eq=False)
class GaussianOrthantQuery:
    """``P(Y >= lower)`` for ``Y ~ N(mean, cov)``."""

    mean: np.ndarray
    cov: np.ndarray
    lower: np.ndarray
    qmc_samples: int = DEFAULT_QMC_SAMPLES
    seed: int = 0

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), mean.shape).copy()
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float)) if mean.size else np.zeros((0, 0))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise InvalidInput(f"mean {mean.shape} and cov {cov.shape} disagree")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov)) and np.all(np.isfinite(lower))):
            raise InvalidInput("orthant query has non-finite entries")
        if self.qmc_samples < 2 * N_SHIFTS:
            raise InvalidInput(f"qmc_samples must be >= {2 * N_SHIFTS}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "cov", sym(cov))

    @property
    def dim(self):
        return self.mean.size


def _check_psd(cov, tol, var_floor=0.0):
    if cov.size == 0:
        return
    evals = np.linalg.eigvalsh(cov)
    scale = max(np.max(np.abs(evals)), 1e-300)
    if evals[0] < -max(max(tol.rel_threshold, 1e-8) * scale, var_floor):
        raise NotPSD(f"covariance min eigenvalue {evals[0]:.3e}")


def reduce_degenerate(q, tol=DEFAULT_TOL, var_floor=0.0):
    """Split off zero-variance coordinates.

    A coordinate is deterministic when its variance is at most
    ``max(tol.rel_threshold * max(diag), var_floor)``; ``var_floor`` lets callers
    supply an absolute scale (e.g. from the prior) below which variance is roundoff.

    Returns
    -------
    factor : int
        Product of ``1{mean_j >= lower_j}`` over the removed coordinates.
    reduced : GaussianOrthantQuery or None
        The query on the remaining coordinates, ``None`` when nothing is left.
    """
    diag = np.diag(q.cov)
    top = np.max(diag, initial=0.0)
    dead = diag <= max(tol.rel_threshold * top, var_floor)
    factor = int(np.all(q.mean[dead] >= q.lower[dead]))
    live = np.flatnonzero(~dead)
    if live.size == 0:
        return factor, None
    reduced = GaussianOrthantQuery(
        q.mean[live], q.cov[np.ix_(live, live)], q.lower[live], q.qmc_samples, q.seed
    )
    return factor, reduced


def _pivoted_factor(cov, b, tol):
    """Pivoted Cholesky with Genz-Bretz ordering and zero-pivot skipping.

    Returns ``(L, b_perm, n_pos)``; rows past ``n_pos`` have zero diagonal.
    """
    q = cov.shape[0]
    C = cov.copy()
    b = b.copy()
    L = np.zeros((q, q))
    y = np.zeros(q)
    eps = tol.rel_threshold * np.max(np.diag(C))
    n_pos = 0
    for i in range(q):
        best, best_p = -1, np.inf
        for j in range(i, q):
            v = C[j, j] - L[j, :i] @ L[j, :i]
            if v > eps:
                p = ndtr((b[j] - L[j, :i] @ y[:i]) / np.sqrt(v))
                if p < best_p:
                    best, best_p = j, p
        if best < 0:
            break
        if best != i:
            C[[i, best]] = C[[best, i]]
            C[:, [i, best]] = C[:, [best, i]]
            L[[i, best]] = L[[best, i]]
            b[[i, best]] = b[[best, i]]
        v = C[i, i] - L[i, :i] @ L[i, :i]
        L[i, i] = np.sqrt(v)
        for j in range(i + 1, q):
            L[j, i] = (C[j, i] - L[j, :i] @ L[i, :i]) / L[i, i]
        z = (b[i] - L[i, :i] @ y[:i]) / L[i, i]
        pz = ndtr(z)
        # mean of a standard normal truncated to (-inf, z]
        y[i] = -np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi) / pz if pz > 1e-300 else z
        n_pos += 1
    return L, b, n_pos


def _qmc_orthant(q, tol):
    """Genz QMC estimate and standard error for a non-degenerate query."""
    b = q.mean - q.lower
    L, bp, n_pos = _pivoted_factor(q.cov, b, tol)
    s = n_pos if n_pos < q.dim else n_pos - 1
    rng = np.random.default_rng(q.seed)
    gens = np.sqrt(_PRIMES[:s].astype(float)) % 1.0
    shifts = rng.random((N_SHIFTS, s))
    n_per = max(1, q.qmc_samples // (2 * N_SHIFTS))
    est = genz_integrate(L, bp, n_pos, gens, shifts, n_per)
    return float(est.mean()), float(est.std(ddof=1) / np.sqrt(N_SHIFTS))


def orthant_prob_estimate(q, tol=DEFAULT_TOL, var_floor=0.0):
    """``(probability, standard error)``; the error is zero for deterministic methods."""
    _check_psd(q.cov, tol, var_floor)
    factor, red = reduce_degenerate(q, tol, var_floor)
    if factor == 0:
        return 0.0, 0.0
    if red is None:
        return 1.0, 0.0
    if red.dim == 1:
        return float(ndtr((red.mean[0] - red.lower[0]) / np.sqrt(red.cov[0, 0]))), 0.0
    if red.dim == 2:
        s = np.sqrt(np.diag(red.cov))
        h = (red.lower - red.mean) / s
        r = red.cov[0, 1] / (s[0] * s[1])
        return float(bvn_upper(h[0], h[1], r)), 0.0
    p, se = _qmc_orthant(red, tol)
    return min(max(p, 0.0), 1.0), se


def orthant_prob(q, tol=DEFAULT_TOL, var_floor=0.0):
    """``P(Y >= q.lower)``, clamped to [0, 1]."""
    return orthant_prob_estimate(q, tol, var_floor)[0]


def orthant_probs(means, covs, lower, tol=DEFAULT_TOL, qmc_samples=DEFAULT_QMC_SAMPLES, seeds=None,
                  var_floor=0.0):
    """Vectorized orthant probabilities.

    Parameters
    ----------
    means : (..., q) array
    covs : (..., q, q) array, broadcastable against ``means``
    lower : (q,) array
    seeds : int array broadcastable to ``means.shape[:-1]``, only used for q >= 3.
    var_floor : float
        Absolute variance at or below which a coordinate is deterministic.

    Returns
    -------
    ndarray of shape ``means.shape[:-1]``
    """
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    lower = np.asarray(lower, dtype=float)
    qd = means.shape[-1]
    batch = np.broadcast_shapes(means.shape[:-1], covs.shape[:-2])
    means = np.broadcast_to(means, batch + (qd,))
    covs = np.broadcast_to(covs, batch + (qd, qd))
    var = np.diagonal(covs, axis1=-2, axis2=-1)
    top = np.max(var, axis=-1, keepdims=True)
    if np.any(var < -np.maximum(1e-8 * np.maximum(top, 1e-300), var_floor)):
        raise NotPSD("negative variance in orthant batch")
    dead = var <= np.maximum(tol.rel_threshold * top, var_floor)
    hit = means >= lower
    if qd == 1:
        sd = np.sqrt(np.where(dead, 1.0, var))[..., 0]
        p = ndtr((means[..., 0] - lower[0]) / sd)
        return np.where(dead[..., 0], hit[..., 0].astype(float), p)
    if qd == 2:
        sd = np.sqrt(np.where(dead, 1.0, var))
        z = (means - lower) / sd
        tails = np.where(dead, hit.astype(float), ndtr(z))
        r = covs[..., 0, 1] / (sd[..., 0] * sd[..., 1])
        both = ~dead[..., 0] & ~dead[..., 1]
        p = tails[..., 0] * tails[..., 1]
        if np.any(both):
            p = p.copy()
            p[both] = bvn_upper(-z[..., 0][both], -z[..., 1][both], np.clip(r[both], -1.0, 1.0))
        return p
    out = np.empty(batch)
    seeds = np.broadcast_to(np.zeros(batch, dtype=np.int64) if seeds is None else seeds, batch)
    for idx in np.ndindex(*batch):
        out[idx] = orthant_prob(
            GaussianOrthantQuery(means[idx], covs[idx], lower, qmc_samples, int(seeds[idx])), tol, var_floor
        )
    return out


def joint_excursion_cov(state, u1, u2, t, tol=DEFAULT_TOL, qmc_samples=DEFAULT_QMC_SAMPLES, seed=0):
    """``Cov(1{xi(u1) >= T}, 1{xi(u2) >= T})`` under the state's law.

    The joint probability is a ``2d``-dimensional orthant query on the stacked
    vector ``(xi(u1), xi(u2))``.
    """
    from .kernels import as_point

    u1 = as_point(u1)
    u2 = as_point(u2)
    t = np.asarray(t, dtype=float)
    X = np.stack([u1, u2])
    m = state.mean_at(X)
    C = state.cov_matrix(X)
    d = state.output_dim
    p1 = orthant_prob(GaussianOrthantQuery(m[0], C[:d, :d], t), tol)
    p2 = orthant_prob(GaussianOrthantQuery(m[1], C[d:, d:], t), tol)
    joint = orthant_prob(
        GaussianOrthantQuery(m.ravel(), C, np.concatenate([t, t]), qmc_samples, seed), tol
    )
    return joint - p1 * p2
