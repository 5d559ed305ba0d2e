"""Stepwise uncertainty reduction: sampling criterion and design loop.

The criterion at a candidate ``x`` is the expected value of the uncertainty
functional after one more (simulated) observation at ``x``,

    J_n(x) = E[ H(state conditioned on (x, m_n(x) + Sigma_n(x)^{1/2} U)) ],  U ~ N(0, I_d),

evaluated with a tensor Gauss-Hermite rule or seeded Monte Carlo draws. A
fantasized observation changes only the posterior mean (linearly in ``U``),
so the updated covariance is computed once per candidate.
"""

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .functionals import (
    emv_from_moments,
    evaluate,
    excursion_probs,
    ibv_from_probs,
    misclassification_integral,
    mix_seed,
    variance_floor,
)
from .kernels import DomainGrid, as_point
from .linalg import psd_factors, psd_sqrt, sym
from .posterior import extend, sigma_blocks


@dataclass(frozen=True)
class EpsilonSchedule:
    """Slack ``eps_n`` allowed above the criterion minimum at step ``n``.

    Either an explicit list (the last entry repeats) or ``scale * (n + 1) ** -power``.
    """

    values: tuple = (0.0,)
    scale: float = None
    power: float = 1.0

    def __post_init__(self):
        if self.scale is not None and (self.scale < 0 or self.power <= 0):
            raise InvalidInput("epsilon rule needs scale >= 0 and power > 0")
        vals = tuple(float(v) for v in self.values)
        if not vals or any(v < 0 for v in vals):
            raise InvalidInput("epsilon values must be a nonempty list of nonnegative reals")
        object.__setattr__(self, "values", vals)

    def __call__(self, n):
        if self.scale is not None:
            return self.scale * (n + 1) ** (-self.power)
        return self.values[min(n, len(self.values) - 1)]


@dataclass(frozen=True, eq=False)
class CriterionConfig:
    """How ``J_n`` is integrated and where it is minimized.

    Parameters
    ----------
    quadrature : {"gauss-hermite", "monte-carlo", "auto"}
        ``"auto"`` picks Gauss-Hermite for ``d <= 3`` and Monte Carlo otherwise.
    nodes_per_dim : int
        Gauss-Hermite nodes per output dimension.
    n_draws : int
        Monte Carlo draws.
    candidates : DomainGrid, optional
        Candidate set; defaults to the evaluation grid.
    """

    quadrature: str = "auto"
    nodes_per_dim: int = 5
    n_draws: int = 64
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    candidates: DomainGrid = None
    seed: int = 0

    def __post_init__(self):
        if self.quadrature not in ("auto", "gauss-hermite", "monte-carlo"):
            raise InvalidInput(f"unknown quadrature {self.quadrature!r}")
        if self.nodes_per_dim < 1 or self.n_draws < 1:
            raise InvalidInput("nodes_per_dim and n_draws must be >= 1")

    def nodes(self, d, step=0):
        """Quadrature nodes (J, d) and weights (J,) for ``N(0, I_d)``."""
        if self.rule(d) == "gauss-hermite":
            return gauss_hermite_nodes(d, self.nodes_per_dim)
        rng = np.random.default_rng(int(mix_seed(self.seed, step, 0x5EED)))
        return rng.standard_normal((self.n_draws, d)), np.full(self.n_draws, 1.0 / self.n_draws)

    def rule(self, d):
        """The quadrature actually used for output dimension ``d``."""
        if self.quadrature == "auto":
            return "gauss-hermite" if d <= 3 else "monte-carlo"
        return self.quadrature

    def with_nodes(self, nodes_per_dim):
        return CriterionConfig("gauss-hermite", nodes_per_dim, self.n_draws, self.epsilon,
                               self.candidates, self.seed)


def gauss_hermite_nodes(d, n):
    """Tensor Gauss-Hermite rule for the standard normal in ``d`` dimensions."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / w.sum()
    nodes = np.array(list(itertools.product(x, repeat=d)), dtype=float).reshape(-1, d)
    weights = np.prod(np.array(list(itertools.product(w, repeat=d))).reshape(-1, d), axis=1)
    return nodes, weights


@dataclass(frozen=True, eq=False)
class CriterionField:
    """Criterion values over the candidate set.

    ``spread`` holds the per-candidate standard error of a Monte Carlo rule
    (zeros for Gauss-Hermite); ``ranks`` the numerical rank of ``Sigma_n(x)``.
    """

    values: np.ndarray
    argmin_index: int
    spread: np.ndarray = None
    ranks: np.ndarray = None


def _candidate_points(spec, cfg):
    return (cfg.candidates or spec.grid).points


# cap on candidate x node x grid-point rows per vectorized IBV batch
_IBV_BATCH_ROWS = 200_000


def _fantasy_values(state, spec, cfg, cand, step):
    """``(J, se, ranks)`` for each row of ``cand``; each quantity has shape (C,).

    Fantasized posteriors share one covariance update per candidate; only the
    mean moves with the quadrature node.
    """
    U = spec.grid.points
    M, d = U.shape[0], state.output_dim
    C = cand.shape[0]
    nodes, weights = cfg.nodes(d, step)
    mean_u = state.mean_at(U)
    K_uc = state.cov_matrix(U, cand).reshape(M * d, C, d).transpose(1, 0, 2)
    var_u = state.var_blocks(U)
    pinv, root, ranks = psd_factors(sigma_blocks(state, cand), state.tol)
    gain = K_uc @ pinv
    floor = variance_floor(state, spec)
    if spec.kind == "ibv":
        h = np.empty((C, nodes.shape[0]))
        chunk = max(1, _IBV_BATCH_ROWS // (nodes.shape[0] * M))
        for lo in range(0, C, chunk):
            sl = slice(lo, min(lo + chunk, C))
            shifts = (nodes @ np.swapaxes(root[sl], -1, -2)) @ np.swapaxes(gain[sl], -1, -2)
            means = mean_u + shifts.reshape(shifts.shape[0], -1, M, d)
            G = gain[sl].reshape(-1, M, d, d)
            Kb = K_uc[sl].reshape(-1, M, d, d)
            var_next = sym(var_u - np.einsum("cmij,cmkj->cmik", G, Kb))
            probs = excursion_probs(means, var_next[:, None], spec, step + 1, floor)
            h[sl] = ibv_from_probs(probs, spec.grid.weights)
    else:
        full_cov = state.cov_matrix(U)
        h = np.empty((C, nodes.shape[0]))
        for c in range(C):
            means = mean_u + ((nodes @ root[c].T) @ gain[c].T).reshape(-1, M, d)
            cov_next = sym(full_cov - gain[c] @ K_uc[c].T)
            h[c] = emv_from_moments(means, cov_next, spec, step + 1, var_floor=floor)
    values = h @ weights
    spread = np.zeros(C)
    if cfg.rule(d) == "monte-carlo" and h.shape[1] > 1:
        spread = np.std(h, axis=1, ddof=1) / np.sqrt(h.shape[1])
    return values, spread, ranks


def criterion_at(state, x, spec, cfg, step=0):
    """``J_n(x)`` for a single candidate point ``x``."""
    values, _, _ = _fantasy_values(state, spec, cfg, as_point(x)[None], step)
    return float(values[0])


TIE_RTOL = 1e-10


def _argmin(values, eps):
    """Lowest index whose value is within ``eps`` of the minimum.

    Values closer than ``TIE_RTOL * max|J|`` to the minimum count as ties, so
    summation roundoff cannot break symmetric ties.
    """
    values = np.asarray(values, dtype=float)
    slack = eps + TIE_RTOL * np.max(np.abs(values))
    return int(np.flatnonzero(values <= values.min() + slack)[0])


def criterion_field(state, spec, cfg, step=0):
    """``J_n`` over every candidate plus its lowest-index argmin."""
    cand = _candidate_points(spec, cfg)
    if cand.shape[0] == 0:
        raise InvalidInput("empty candidate set")
    values, spread, ranks = _fantasy_values(state, spec, cfg, cand, step)
    return CriterionField(values, _argmin(values, 0.0), spread, ranks)


def expected_gain(state, x, spec, cfg, step=0):
    """``H(state) - J_n(x)``; nonnegative up to quadrature error."""
    return evaluate(state, spec, step) - criterion_at(state, x, spec, cfg, step)


def criterion_error(state, spec, cfg, step=0, field_=None):
    """Per-candidate error estimate for ``J_n``.

    Monte Carlo rules report their standard error; Gauss-Hermite rules report
    the gap to a rule with two more nodes per dimension. Pass ``field_`` to
    reuse an already computed criterion field.
    """
    if field_ is None:
        field_ = criterion_field(state, spec, cfg, step)
    if cfg.rule(state.output_dim) == "monte-carlo":
        return field_.spread
    finer = criterion_field(state, spec, cfg.with_nodes(cfg.nodes_per_dim + 2), step)
    return np.abs(finer.values - field_.values)


@dataclass(frozen=True)
class Selection:
    point: np.ndarray
    index: int
    field: CriterionField
    slack_used: bool


def select_next(state, spec, cfg, step=0):
    """Next design point: lowest-index candidate within ``eps_n`` of the criterion minimum."""
    field_ = criterion_field(state, spec, cfg, step)
    idx = _argmin(field_.values, cfg.epsilon(step))
    cand = _candidate_points(spec, cfg)
    return Selection(cand[idx].copy(), idx, field_, bool(idx != field_.argmin_index))


@dataclass
class StepRecord:
    step: int
    x_index: int
    z: np.ndarray
    h_ibv: float
    h_emv: float
    misclass: float
    min_rank: int


@dataclass
class Trajectory:
    """Per-step records of one design run; ``header`` carries provenance."""

    records: list = field(default_factory=list)
    header: dict = field(default_factory=dict)
    final_state: object = field(default=None, repr=False)

    @property
    def steps(self):
        return [r.step for r in self.records]

    def series(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def chosen(self):
        return [r.x_index for r in self.records[1:]]

    def to_csv(self, d):
        """CSV text with columns step, x_index, z_0..z_{d-1}, h_ibv, h_emv, misclass, min_rank."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "x_index"] + [f"z_{i}" for i in range(d)]
                   + ["h_ibv", "h_emv", "misclass", "min_rank"])
        for r in self.records:
            zs = [""] * d if r.z is None else [repr(float(v)) for v in r.z]
            w.writerow([r.step, "" if r.x_index < 0 else r.x_index] + zs + [
                "" if r.h_ibv is None else repr(float(r.h_ibv)),
                "" if r.h_emv is None else repr(float(r.h_emv)),
                repr(float(r.misclass)),
                r.min_rank,
            ])
        return buf.getvalue()


def _min_rank(state, cand):
    return int(np.min(psd_factors(sigma_blocks(state, cand), state.tol)[2]))


def _record(state, truth, spec, step, idx, z, kinds, cand):
    h = {k: evaluate(state, spec.with_kind(k), step) for k in kinds}
    return StepRecord(
        step=step,
        x_index=idx,
        z=z,
        h_ibv=h.get("ibv"),
        h_emv=h.get("emv"),
        misclass=misclassification_integral(state, truth, spec, step),
        min_rank=_min_rank(state, cand),
    )


def _design_loop(prior, truth, spec, cfg, n_steps, seed, chooser, record_kinds):
    if n_steps < 0:
        raise InvalidInput("n_steps must be >= 0")
    truth = np.asarray(truth, dtype=float)
    if truth.ndim == 1:
        truth = truth[:, None]
    if truth.shape != (len(spec.grid), prior.output_dim):
        raise InvalidInput(f"truth table of shape {truth.shape} does not match the grid")
    cand_grid = cfg.candidates or spec.grid
    cand = cand_grid.points
    truth_rows = np.array([spec.grid.index_of(x) for x in cand])
    kinds = tuple(record_kinds) if record_kinds else (spec.kind,)
    noise_rng = np.random.default_rng(int(mix_seed(seed, 1)))
    state = prior
    traj = Trajectory(header={"seed": int(seed)})
    traj.records.append(_record(state, truth, spec, 0, -1, None, kinds, cand))
    for n in range(n_steps):
        idx = chooser(state, n)
        x = cand[idx]
        tau = psd_sqrt(prior.noise.at(x[None])[0])
        z = truth[truth_rows[idx]] + tau @ noise_rng.standard_normal(prior.output_dim)
        state = extend(state, x, z)
        traj.records.append(_record(state, truth, spec, n + 1, idx, z, kinds, cand))
    traj.final_state = state
    return traj


def run_design(prior, truth, spec, cfg, n_steps, seed, record_kinds=None, observer=None):
    """SUR design loop against a known ground-truth table on the grid.

    Observations are ``truth(x) + tau(x) U`` with seeded standard normal ``U``.
    Row ``n`` of the returned trajectory describes the state after ``n``
    observations; row 0 is the prior. ``observer(n, state, selection)``, if
    given, is called before each observation (diagnostics only).
    """
    def choose(state, n):
        sel = select_next(state, spec, cfg, n)
        if observer is not None:
            observer(n, state, sel)
        return sel.index

    traj = _design_loop(prior, truth, spec, cfg, n_steps, seed, choose, record_kinds)
    traj.header["strategy"] = "sur"
    return traj


def baseline_design(kind, prior, truth, spec, cfg, n_steps, seed, record_kinds=None):
    """Non-adaptive baselines: ``"uniform-random"`` or ``"fixed-grid-sweep"``."""
    M = (cfg.candidates or spec.grid).points.shape[0]
    if kind == "uniform-random":
        rng = np.random.default_rng(int(mix_seed(seed, 2)))

        def choose(state, n):
            return int(rng.integers(M))
    elif kind == "fixed-grid-sweep":
        def choose(state, n):
            return n % M
    else:
        raise InvalidInput(f"unknown baseline {kind!r}")
    traj = _design_loop(prior, truth, spec, cfg, n_steps, seed, choose, record_kinds)
    traj.header["strategy"] = kind
    return traj
