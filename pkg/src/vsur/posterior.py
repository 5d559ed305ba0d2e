"""Conditional law of a vector-valued Gaussian process given pointwise data.

Observation ``k`` contributes ``d`` consecutive entries to every stacked
vector and block matrix (observation-major stacking). Conditioning always
goes through the SVD pseudo-inverse of ``Sigma(x_n) = K(x_n) + T(x_n)`` so
singular systems (noiseless repeats, zero kernels) need no special casing.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .kernels import (
    DomainGrid,
    MatKernel,
    MeanFn,
    NoiseModel,
    as_point,
    as_points,
    blocks_to_matrix,
    noise_block,
)
from .linalg import DEFAULT_TOL, pseudo_inverse, psd_clamp, sym


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Ordered pairs ``(x_k, z_k)``; repeated sites are allowed."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, pts.shape[-1] if pts.ndim == 2 else 0)
            vals = vals.reshape(0, vals.shape[-1] if vals.ndim == 2 else 0)
        else:
            pts = as_points(pts)
            if vals.ndim == 1:
                vals = vals[:, None] if pts.shape[0] == vals.size else vals[None, :]
        if vals.ndim != 2 or vals.shape[0] != pts.shape[0]:
            raise InvalidInput(f"{pts.shape[0]} points but values of shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise InvalidInput("observed values must be finite")
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @classmethod
    def empty(cls, p, d):
        return cls(np.zeros((0, p)), np.zeros((0, d)))

    def __len__(self):
        return self.points.shape[0]

    def append(self, x, z):
        x = as_point(x)
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if len(self) and (x.size != self.points.shape[1] or z.size != self.values.shape[1]):
            raise InvalidInput("appended observation has inconsistent dimensions")
        pts = np.vstack([self.points.reshape(-1, x.size), x[None]])
        vals = np.vstack([self.values.reshape(-1, z.size), z[None]])
        return ObservationSet(pts, vals)


@dataclass(frozen=True)
class Threshold:
    """Orthant corner ``T``; the excursion set is ``{u : f(u) >= T}`` componentwise."""

    t: tuple

    def __post_init__(self):
        t = tuple(float(v) for v in np.atleast_1d(self.t))
        if not all(np.isfinite(t)):
            raise InvalidInput("threshold must be finite")
        object.__setattr__(self, "t", t)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.t, dtype=dtype)

    @property
    def dim(self):
        return len(self.t)


class GPState:
    """Prior ``GP_d(m, k)`` with noise model, conditioned on ``obs``.

    Instances are immutable; :func:`condition` and :func:`extend` return new
    states. The pseudo-inverse of ``Sigma(x_n)`` and the weight vector
    ``Sigma(x_n)^+ (vec z_n - vec m(x_n))`` are computed once at construction.
    """

    def __init__(self, mean, kernel, noise, obs=None, tol=DEFAULT_TOL):
        d = kernel.output_dim
        if mean.output_dim != d or noise.output_dim != d:
            raise InvalidInput(
                f"output dims disagree: mean {mean.output_dim}, kernel {d}, noise {noise.output_dim}"
            )
        self.mean = mean
        self.kernel = kernel
        self.noise = noise
        self.tol = tol
        if obs is None:
            obs = ObservationSet(np.zeros((0, 1)), np.zeros((0, d)))
        if len(obs) and obs.values.shape[1] != d:
            raise InvalidInput(f"observations are {obs.values.shape[1]}-dimensional, model is {d}")
        self.obs = obs
        if len(obs):
            X = obs.points
            K = blocks_to_matrix(kernel.blocks(X, X))
            self._sigma = sym(K + noise_block(noise, X))
            self._sigma_pinv = sym(pseudo_inverse(self._sigma, tol))
            resid = (obs.values - mean(X)).ravel()
            self._alpha = self._sigma_pinv @ resid
        else:
            self._sigma = self._sigma_pinv = np.zeros((0, 0))
            self._alpha = np.zeros(0)

    @property
    def output_dim(self):
        return self.kernel.output_dim

    @property
    def n_obs(self):
        return len(self.obs)

    def prior(self):
        return GPState(self.mean, self.kernel, self.noise, None, self.tol)

    def _k_to_obs(self, X):
        """``K(X, x_n)`` stacked, shape (M d, n d)."""
        return blocks_to_matrix(self.kernel.blocks(X, self.obs.points))

    def mean_at(self, X):
        """Posterior means at points, shape (M, d)."""
        X = as_points(X)
        m = self.mean(X)
        if self.n_obs:
            m = m + (self._k_to_obs(X) @ self._alpha).reshape(m.shape)
        return m

    def cov_matrix(self, X, Y=None):
        """Posterior covariance matrix between point sets, shape (M d, N d)."""
        X = as_points(X)
        same = Y is None
        Y = X if same else as_points(Y)
        C = blocks_to_matrix(self.kernel.blocks(X, Y))
        if self.n_obs:
            KX = self._k_to_obs(X)
            KY = KX if same else self._k_to_obs(Y)
            C = C - KX @ self._sigma_pinv @ KY.T
        return sym(C) if same else C

    def cov_blocks(self, X, Y):
        """Posterior covariance blocks, shape (M, N, d, d)."""
        X = as_points(X)
        Y = as_points(Y)
        d = self.output_dim
        C = self.cov_matrix(X, Y)
        return C.reshape(X.shape[0], d, Y.shape[0], d).transpose(0, 2, 1, 3)

    def var_blocks(self, X):
        """Posterior ``k_n(x, x)`` for each point, shape (M, d, d), symmetrized."""
        X = as_points(X)
        d = self.output_dim
        out = self.kernel.blocks(X, X)[np.arange(X.shape[0]), np.arange(X.shape[0])]
        if self.n_obs:
            KX = self._k_to_obs(X).reshape(X.shape[0], d, -1)
            out = out - np.einsum("mia,ab,mjb->mij", KX, self._sigma_pinv, KX)
        return sym(out)


def condition(prior, obs, tol=DEFAULT_TOL):
    """Condition a prior state (no observations) on ``obs``."""
    if prior.n_obs:
        raise InvalidInput("condition expects a prior state without observations")
    if len(obs) == 0:
        raise InvalidInput("condition needs at least one observation")
    return GPState(prior.mean, prior.kernel, prior.noise, obs, tol)


def extend(state, x, z):
    """State conditioned on the previous data plus one more observation ``(x, z)``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.size != state.output_dim:
        raise InvalidInput(f"observation of size {z.size} for a {state.output_dim}-output model")
    obs = state.obs.append(x, z) if state.n_obs else ObservationSet(as_point(x)[None], z[None])
    return GPState(state.mean, state.kernel, state.noise, obs, state.tol)


def posterior_mean(state, x):
    """``m_n(x)`` as a length-``d`` vector."""
    return state.mean_at(as_point(x)[None])[0]


def posterior_cov(state, x, y):
    """``k_n(x, y)`` as a ``d x d`` matrix."""
    x = as_point(x)
    y = as_point(y)
    if np.array_equal(x, y):
        return state.var_blocks(x[None])[0]
    # evaluate in a canonical order so k_n(x, y) == k_n(y, x).T bit for bit
    if tuple(x) > tuple(y):
        return state.cov_blocks(y[None], x[None])[0, 0].T.copy()
    return state.cov_blocks(x[None], y[None])[0, 0]


def sigma_n(state, x):
    """Covariance of the next observation at ``x``: ``k_n(x, x) + T(x)``, PSD-clamped."""
    x = as_point(x)
    return psd_clamp(state.var_blocks(x[None])[0] + state.noise.at(x[None])[0])


def sigma_blocks(state, xs):
    """``k_n(x, x) + T(x)`` for each row of ``xs``, shape (n, d, d), not clamped."""
    xs = as_points(xs)
    return sym(state.var_blocks(xs) + state.noise.at(xs))


def sample_path(state, grid, seed, n_draws=None):
    """Draw from the state's law restricted to ``grid``.

    Returns an array of shape (M, d) (or (n_draws, M, d)); deterministic in
    ``seed``. Uses an eigendecomposition so singular Grams are fine.
    """
    if isinstance(grid, DomainGrid):
        X = grid.points
    else:
        X = as_points(grid)
    M, d = X.shape[0], state.output_dim
    mean = state.mean_at(X)
    C = state.cov_matrix(X)
    evals, evecs = np.linalg.eigh(C)
    L = evecs * np.sqrt(np.clip(evals, 0.0, None))
    rng = np.random.default_rng(seed)
    size = 1 if n_draws is None else n_draws
    if not np.any(evals > 0):
        draws = np.broadcast_to(mean, (size, M, d)).copy()
    else:
        g = rng.standard_normal((size, M * d))
        draws = mean[None] + (g @ L.T).reshape(size, M, d)
    return draws[0] if n_draws is None else draws


__all__ = [
    "GPState",
    "MatKernel",
    "MeanFn",
    "NoiseModel",
    "ObservationSet",
    "Threshold",
    "condition",
    "extend",
    "posterior_cov",
    "posterior_mean",
    "sample_path",
    "sigma_n",
]
