"""Excursion uncertainty functionals on a weighted grid.

IBV is ``sum_i w_i p_i (1 - p_i)`` and EMV is the variance of the excursion
measure, ``sum_ij w_i w_j Cov(1{xi(u_i) >= T}, 1{xi(u_j) >= T})``, where
``p_i`` is the excursion probability at grid point ``u_i``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .kernels import DomainGrid
from .linalg import DEFAULT_TOL, RankTolerance
from .orthant import DEFAULT_QMC_SAMPLES, orthant_probs
from .posterior import Threshold

KINDS = ("ibv", "emv")

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _splitmix(x):
    with np.errstate(over="ignore"):
        x = (x + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
        x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
        x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
        return x ^ (x >> np.uint64(31))


def mix_seed(seed, *keys):
    """Counter-based seed derivation: splitmix64 folded over ``(seed, *keys)``.

    Vectorized over array keys; returns nonnegative int64 values.
    """
    h = _splitmix(np.asarray(seed, dtype=np.uint64))
    for key in keys:
        h = _splitmix(h ^ np.asarray(key, dtype=np.uint64))
    return (h >> np.uint64(1)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class UncertaintySpec:
    """Which functional to evaluate, where, and with which numerical budgets.

    ``emv_subsample`` (optional) evaluates EMV on a seeded random sub-grid of
    that many points, with weights rescaled to keep the total mass.
    """

    kind: str
    grid: DomainGrid
    threshold: Threshold
    tol: RankTolerance = DEFAULT_TOL
    qmc_samples: int = DEFAULT_QMC_SAMPLES
    seed: int = 0
    emv_subsample: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown functional {self.kind!r}, expected one of {KINDS}")
        if not isinstance(self.threshold, Threshold):
            object.__setattr__(self, "threshold", Threshold(self.threshold))
        if self.emv_subsample is not None and not 1 <= self.emv_subsample:
            raise InvalidInput("emv_subsample must be a positive integer")

    def with_kind(self, kind):
        return UncertaintySpec(kind, self.grid, self.threshold, self.tol, self.qmc_samples,
                               self.seed, self.emv_subsample)

    @property
    def t(self):
        return np.asarray(self.threshold.t)


@dataclass(frozen=True, eq=False)
class ExcursionField:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < 0) or np.any(p > 1):
            raise InvalidInput("excursion probabilities must lie in [0, 1]")
        object.__setattr__(self, "probs", p)


def variance_floor(state, spec):
    """Posterior variances at or below this are roundoff: ``rel_threshold`` times the
    largest prior variance on the grid."""
    X = spec.grid.points
    prior_var = state.kernel.blocks(X, X)[np.arange(len(X)), np.arange(len(X))]
    return spec.tol.rel_threshold * float(np.max(np.diagonal(prior_var, axis1=1, axis2=2), initial=0.0))


def excursion_probs(means, var_blocks, spec, step=0, var_floor=0.0):
    """Excursion probabilities from posterior moments on the grid.

    ``means`` has shape (..., M, d) and ``var_blocks`` (..., M, d, d), broadcastable.
    """
    M = var_blocks.shape[-3]
    seeds = None
    if var_blocks.shape[-1] >= 3:
        seeds = mix_seed(spec.seed, step, np.arange(M))
    return orthant_probs(means, var_blocks, spec.t, spec.tol, spec.qmc_samples, seeds, var_floor)


def ibv_from_probs(probs, weights):
    return np.sum(weights * probs * (1.0 - probs), axis=-1)


def _emv_subgrid(spec, step):
    M = len(spec.grid)
    w = spec.grid.weights
    if spec.emv_subsample is None or spec.emv_subsample >= M:
        return np.arange(M), w
    rng = np.random.default_rng(int(mix_seed(spec.seed, step, 0xE37)))
    idx = np.sort(rng.choice(M, size=spec.emv_subsample, replace=False))
    return idx, w[idx] * (w.sum() / w[idx].sum())


def emv_from_moments(means, cov, spec, step=0, probs=None, var_floor=0.0):
    """EMV from the grid mean table and the full grid covariance matrix.

    Parameters
    ----------
    means : (..., M, d) array
    cov : (M d, M d) array, observation-major
    probs : optional (..., M) excursion probabilities already computed.
    """
    idx, w = _emv_subgrid(spec, step)
    d = means.shape[-1]
    M = len(spec.grid)
    means = means[..., idx, :]
    C = cov.reshape(M, d, M, d)[np.ix_(idx, np.arange(d), idx, np.arange(d))]
    K = idx.size
    var_blocks = C[np.arange(K), :, np.arange(K), :]
    if probs is None:
        probs = excursion_probs(means, var_blocks, spec, step, var_floor)
    else:
        probs = probs[..., idx]
    total = np.sum(w * w * probs * (1.0 - probs), axis=-1)
    if K > 1:
        ii, jj = np.triu_indices(K, 1)
        pm = np.concatenate([means[..., ii, :], means[..., jj, :]], axis=-1)
        pc = np.empty((ii.size, 2 * d, 2 * d))
        pc[:, :d, :d] = var_blocks[ii]
        pc[:, d:, d:] = var_blocks[jj]
        pc[:, :d, d:] = C[ii, :, jj, :]
        pc[:, d:, :d] = np.swapaxes(pc[:, :d, d:], -1, -2)
        seeds = None
        if 2 * d >= 3:
            seeds = mix_seed(spec.seed, step, idx[ii] * M + idx[jj])
        joint = orthant_probs(pm, pc, np.concatenate([spec.t, spec.t]), spec.tol,
                              spec.qmc_samples, seeds, var_floor)
        cross = joint - probs[..., ii] * probs[..., jj]
        total = total + 2.0 * np.sum(w[ii] * w[jj] * cross, axis=-1)
    return np.maximum(total, 0.0)


def _grid_moments(state, spec):
    X = spec.grid.points
    return state.mean_at(X), state.var_blocks(X)


def excursion_field(state, spec, step=0):
    """Excursion probabilities ``p_n(u_i)`` on the spec's grid."""
    means, var = _grid_moments(state, spec)
    return ExcursionField(excursion_probs(means, var, spec, step, variance_floor(state, spec)))


def ibv(state, spec, step=0):
    """Integrated Bernoulli variance of the excursion indicator."""
    p = excursion_field(state, spec, step).probs
    return float(ibv_from_probs(p, spec.grid.weights))


def emv(state, spec, step=0):
    """Variance of the excursion measure ``mu(Gamma(xi))``."""
    X = spec.grid.points
    return float(emv_from_moments(state.mean_at(X), state.cov_matrix(X), spec, step,
                                  var_floor=variance_floor(state, spec)))


def evaluate(state, spec, step=0):
    """``H(state)`` for ``spec.kind``."""
    return ibv(state, spec, step) if spec.kind == "ibv" else emv(state, spec, step)


def excursion_indicator(values, threshold):
    """``1{f(u) >= T}`` componentwise-all, for a value table of shape (..., M, d)."""
    return np.all(np.asarray(values) >= np.asarray(threshold.t if isinstance(threshold, Threshold) else threshold), axis=-1)


def misclassification_integral(state, truth, spec, step=0, probs=None):
    """``sum_i w_i (1{truth(u_i) >= T} - p_i)^2``.

    ``truth`` is the value table of the true function on ``spec.grid``,
    shape (M, d).
    """
    truth = np.asarray(truth, dtype=float)
    if truth.ndim == 1:
        truth = truth[:, None]
    if truth.shape != (len(spec.grid), state.output_dim):
        raise InvalidInput(
            f"truth table has shape {truth.shape}, expected {(len(spec.grid), state.output_dim)}"
        )
    if probs is None:
        probs = excursion_field(state, spec, step).probs
    ind = excursion_indicator(truth, spec.threshold).astype(float)
    return float(np.sum(spec.grid.weights * (ind - probs) ** 2))
