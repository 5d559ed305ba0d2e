"""Matrix-valued covariance functions, mean functions and observation noise.

The cross-output structure is a linear model of coregionalization,
``k(x, y) = sum_q B_q * kappa_q(x, y)`` with PSD ``B_q`` and stationary scalar
correlation ``kappa_q``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, UnknownPoint
from .linalg import sym

FAMILIES = ("squared-exponential", "matern-3/2", "matern-5/2")


def as_points(xs):
    """Coerce a point or list of points to a float array of shape (n, p)."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 0:
        xs = xs.reshape(1, 1)
    elif xs.ndim == 1:
        xs = xs[:, None]
    if xs.ndim != 2:
        raise InvalidInput(f"points must have shape (n, p), got {xs.shape}")
    if not np.all(np.isfinite(xs)):
        raise InvalidInput("non-finite coordinates")
    return xs


def as_point(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise InvalidInput(f"a point must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("non-finite coordinates")
    return x


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Finite discretization of the input space with quadrature weights.

    The weights define the finite measure used by the uncertainty functionals.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] < 1 or pts.shape[0] != w.size:
            raise InvalidInput(f"{pts.shape[0]} points but {w.size} weights")
        if not np.all(np.isfinite(w)) or np.any(w < 0) or not w.sum() > 0:
            raise InvalidInput("weights must be finite, nonnegative and not all zero")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise InvalidInput("grid points must be pairwise distinct")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, lower, upper, size):
        """Regular tensor grid on a box with equal weights summing to its volume."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or np.any(upper <= lower):
            raise InvalidInput("need lower < upper componentwise")
        sizes = np.broadcast_to(np.atleast_1d(size), lower.shape)
        axes = [np.linspace(lo, hi, int(m)) for lo, hi, m in zip(lower, upper, sizes)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        vol = float(np.prod(upper - lower))
        return cls(pts, np.full(pts.shape[0], vol / pts.shape[0]))

    def __len__(self):
        return self.points.shape[0]

    @property
    def input_dim(self):
        return self.points.shape[1]

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def index_of(self, x):
        """Index of grid point ``x`` (exact coordinate match)."""
        x = as_point(x)
        hit = np.flatnonzero(np.all(self.points == x, axis=1))
        if hit.size == 0:
            raise UnknownPoint(f"{x.tolist()} is not a grid point")
        return int(hit[0])


@dataclass(frozen=True)
class ScalarKernel:
    family: str = "squared-exponential"
    lengthscale: float = 1.0
    variance: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInput(f"unknown kernel family {self.family!r}")
        if not (self.lengthscale > 0 and np.isfinite(self.lengthscale)):
            raise InvalidInput(f"lengthscale must be > 0, got {self.lengthscale}")
        if not (self.variance > 0 and np.isfinite(self.variance)):
            raise InvalidInput(f"variance must be > 0, got {self.variance}")

    def __call__(self, X, Y):
        """Scalar covariance matrix between point sets of shape (n, p) and (m, p)."""
        diff = X[:, None, :] - Y[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1)) / self.lengthscale
        if self.family == "squared-exponential":
            c = np.exp(-0.5 * r * r)
        elif self.family == "matern-3/2":
            s = np.sqrt(3.0) * r
            c = (1.0 + s) * np.exp(-s)
        else:
            s = np.sqrt(5.0) * r
            c = (1.0 + s + s * s / 3.0) * np.exp(-s)
        return self.variance * c


@dataclass(frozen=True, eq=False)
class MatKernel:
    """Linear model of coregionalization.

    Parameters
    ----------
    terms : sequence of (B, ScalarKernel)
        Each ``B`` is a symmetric PSD ``d x d`` coregionalization matrix.
    """

    terms: tuple

    def __post_init__(self):
        if len(self.terms) == 0:
            raise InvalidInput("MatKernel needs at least one term")
        clean = []
        d = None
        for B, kappa in self.terms:
            B = np.atleast_2d(np.asarray(B, dtype=float))
            if B.shape[0] != B.shape[1] or (d is not None and B.shape[0] != d):
                raise InvalidInput(f"coregionalization matrix of shape {B.shape}")
            if not np.all(np.isfinite(B)):
                raise InvalidInput("non-finite coregionalization matrix")
            if np.max(np.abs(B - B.T)) > 1e-12 * max(1.0, np.max(np.abs(B))):
                raise InvalidInput("coregionalization matrix is not symmetric")
            B = sym(B)
            norm = np.linalg.norm(B, 2)
            if np.linalg.eigvalsh(B)[0] < -1e-10 * norm:
                raise InvalidInput("coregionalization matrix is not PSD")
            if not isinstance(kappa, ScalarKernel):
                raise InvalidInput("each term needs a ScalarKernel")
            B.setflags(write=False)
            clean.append((B, kappa))
            d = B.shape[0]
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def zero(cls, d):
        """The identically zero kernel (useful for degenerate checks)."""
        return cls(((np.zeros((d, d)), ScalarKernel()),))

    @property
    def output_dim(self):
        return self.terms[0][0].shape[0]

    def blocks(self, X, Y):
        """Covariance blocks, shape (n, m, d, d), with ``[i, j] = k(X_i, Y_j)``."""
        out = None
        for B, kappa in self.terms:
            c = kappa(X, Y)[:, :, None, None] * B
            out = c if out is None else out + c
        return out


def eval_kernel(k, x, y):
    """``k(x, y)`` as a ``d x d`` matrix."""
    x = as_point(x)
    y = as_point(y)
    return k.blocks(x[None], y[None])[0, 0]


def blocks_to_matrix(blocks):
    """(n, m, d, d) block array to an (n d) x (m d) matrix, observation-major."""
    n, m, d, e = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(n * d, m * e)


def cross_matrix(k, X, Y):
    """Full covariance matrix between point sets, observation-major stacking."""
    return blocks_to_matrix(k.blocks(as_points(X), as_points(Y)))


def block_gram(k, xs):
    """Block Gram matrix ``K(x_n)`` of shape (n d, n d)."""
    xs = as_points(xs)
    if xs.shape[0] == 0:
        raise InvalidInput("block_gram needs at least one point")
    return sym(cross_matrix(k, xs, xs))


@dataclass(frozen=True, eq=False)
class MeanFn:
    """Prior mean: zero, a constant vector, or a table over grid points."""

    kind: str = "zero"
    value: np.ndarray = None
    grid: DomainGrid = None
    output_dim: int = None

    def __post_init__(self):
        if self.kind == "zero":
            if self.output_dim is None or self.output_dim < 1:
                raise InvalidInput("zero mean needs output_dim")
        elif self.kind == "constant":
            v = np.atleast_1d(np.asarray(self.value, dtype=float))
            if v.ndim != 1 or not np.all(np.isfinite(v)):
                raise InvalidInput("constant mean must be a finite vector")
            object.__setattr__(self, "value", v)
            object.__setattr__(self, "output_dim", v.size)
        elif self.kind == "table":
            if self.grid is None:
                raise InvalidInput("table mean needs a grid")
            v = np.asarray(self.value, dtype=float)
            if v.ndim == 1:
                v = v[:, None]
            if v.shape[0] != len(self.grid) or not np.all(np.isfinite(v)):
                raise InvalidInput("table mean must be finite with one row per grid point")
            object.__setattr__(self, "value", v)
            object.__setattr__(self, "output_dim", v.shape[1])
        else:
            raise InvalidInput(f"unknown mean kind {self.kind!r}")

    @classmethod
    def zeros(cls, d):
        return cls("zero", output_dim=d)

    @classmethod
    def constant(cls, c):
        return cls("constant", value=c)

    @classmethod
    def table(cls, grid, values):
        return cls("table", value=values, grid=grid)

    def __call__(self, xs):
        """Mean values at points, shape (n, d)."""
        xs = as_points(xs)
        if self.kind == "zero":
            return np.zeros((xs.shape[0], self.output_dim))
        if self.kind == "constant":
            return np.tile(self.value, (xs.shape[0], 1))
        idx = [self.grid.index_of(x) for x in xs]
        return self.value[idx].copy()


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Observation noise covariance ``T(x) = tau(x) tau(x)^T``.

    ``kind="homoscedastic"`` stores one matrix; ``kind="heteroscedastic"``
    stores one matrix per point of ``grid``.
    """

    kind: str
    matrix: np.ndarray = None
    grid: DomainGrid = None
    table: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.kind == "homoscedastic":
            T = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            self._check(T)
            object.__setattr__(self, "matrix", sym(T))
        elif self.kind == "heteroscedastic":
            tab = np.asarray(self.table, dtype=float)
            if self.grid is None or tab.ndim != 3 or tab.shape[0] != len(self.grid):
                raise InvalidInput("heteroscedastic noise needs one d x d block per grid point")
            for T in tab:
                self._check(T)
            object.__setattr__(self, "table", sym(tab))
        else:
            raise InvalidInput(f"unknown noise kind {self.kind!r}")

    @staticmethod
    def _check(T):
        if T.shape[0] != T.shape[1] or not np.all(np.isfinite(T)):
            raise InvalidInput(f"noise block must be finite and square, got {T.shape}")
        if np.max(np.abs(T - T.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(T))):
            raise InvalidInput("noise block is not symmetric")
        if T.size and np.linalg.eigvalsh(sym(T))[0] < -1e-10 * max(np.linalg.norm(T, 2), 1e-300):
            raise InvalidInput("noise block is not PSD")

    @classmethod
    def homoscedastic(cls, T):
        return cls("homoscedastic", matrix=T)

    @classmethod
    def heteroscedastic(cls, grid, table):
        return cls("heteroscedastic", grid=grid, table=table)

    @property
    def output_dim(self):
        return self.matrix.shape[0] if self.kind == "homoscedastic" else self.table.shape[1]

    def at(self, xs):
        """Noise blocks at points, shape (n, d, d)."""
        xs = as_points(xs)
        if self.kind == "homoscedastic":
            return np.broadcast_to(self.matrix, (xs.shape[0],) + self.matrix.shape).copy()
        return self.table[[self.grid.index_of(x) for x in xs]]


def noise_block(noise, xs):
    """Block-diagonal ``T(x_n)`` of shape (n d, n d)."""
    blocks = noise.at(xs)
    n, d, _ = blocks.shape
    out = np.zeros((n * d, n * d))
    for i in range(n):
        out[i * d:(i + 1) * d, i * d:(i + 1) * d] = blocks[i]
    return out
