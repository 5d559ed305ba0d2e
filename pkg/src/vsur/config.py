"""Experiment configuration: strict YAML schema and model construction.

Physical quantities (lengthscales, variances, noise, threshold) have no
defaults; numerical budgets do.
"""

import hashlib
import json
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .functionals import UncertaintySpec
from .kernels import DomainGrid, MatKernel, MeanFn, NoiseModel, ScalarKernel
from .linalg import RankTolerance
from .posterior import GPState, Threshold
from .sur import CriterionConfig, EpsilonSchedule


class ConfigError(ValueError):
    """Unreadable or invalid configuration file."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DomainCfg(_Strict):
    lower: List[float]
    upper: List[float]
    size: int = Field(ge=2, description="grid points per axis")

    @model_validator(mode="after")
    def _box(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("lower and upper must have the same nonzero length")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("need lower < upper on every axis")
        return self


class TermCfg(_Strict):
    B: List[List[float]]
    family: Literal["squared-exponential", "matern-3/2", "matern-5/2"]
    lengthscale: float = Field(gt=0)
    variance: float = Field(gt=0)


class KernelCfg(_Strict):
    terms: List[TermCfg] = Field(min_length=1)


class MeanCfg(_Strict):
    kind: Literal["zero", "constant"] = "zero"
    value: Optional[List[float]] = None

    @model_validator(mode="after")
    def _value(self):
        if self.kind == "constant" and self.value is None:
            raise ValueError("constant mean needs a value")
        return self


class NoiseCfg(_Strict):
    kind: Literal["homoscedastic", "heteroscedastic"]
    matrix: Optional[List[List[float]]] = None
    table: Optional[List[List[List[float]]]] = None

    @model_validator(mode="after")
    def _payload(self):
        if self.kind == "homoscedastic" and self.matrix is None:
            raise ValueError("homoscedastic noise needs a matrix")
        if self.kind == "heteroscedastic" and self.table is None:
            raise ValueError("heteroscedastic noise needs a table")
        return self


class EpsilonRuleCfg(_Strict):
    scale: float = Field(ge=0)
    power: float = Field(gt=0)


class CriterionCfg(_Strict):
    quadrature: Literal["auto", "gauss-hermite", "monte-carlo"] = "auto"
    nodes_per_dim: int = Field(5, ge=1)
    n_draws: int = Field(64, ge=1)
    epsilon: List[float] = [0.0]
    epsilon_rule: Optional[EpsilonRuleCfg] = None

    @field_validator("epsilon")
    @classmethod
    def _eps(cls, v):
        if not v or any(e < 0 for e in v):
            raise ValueError("epsilon must be a nonempty list of nonnegative values")
        return v


class OrthantCfg(_Strict):
    rank_tol: float = Field(1e-10, ge=0)
    qmc_samples: int = Field(8192, ge=16)
    emv_subsample: Optional[int] = Field(None, ge=1)


class OutputCfg(_Strict):
    dir: str = "out"


class ExperimentConfig(_Strict):
    domain: DomainCfg
    kernel: KernelCfg
    mean: MeanCfg = MeanCfg()
    noise: NoiseCfg
    threshold: List[float]
    functional: Literal["ibv", "emv", "both"] = "ibv"
    strategy: Literal["sur", "random", "sweep"] = "sur"
    criterion: CriterionCfg = CriterionCfg()
    orthant: OrthantCfg = OrthantCfg()
    n_steps: int = Field(ge=0)
    n_replicates: int = Field(1, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    output: OutputCfg = OutputCfg()

    @model_validator(mode="after")
    def _dims(self):
        d = len(self.threshold)
        for i, term in enumerate(self.kernel.terms):
            if len(term.B) != d or any(len(row) != d for row in term.B):
                raise ValueError(f"kernel.terms.{i}.B must be {d}x{d} to match the threshold")
        if self.noise.matrix is not None and (
            len(self.noise.matrix) != d or any(len(r) != d for r in self.noise.matrix)
        ):
            raise ValueError(f"noise.matrix must be {d}x{d}")
        if self.mean.value is not None and len(self.mean.value) != d:
            raise ValueError(f"mean.value must have length {d}")
        return self

    @property
    def output_dim(self):
        return len(self.threshold)

    def config_hash(self):
        """SHA-256 of the canonical JSON form of the validated config.

        ``output`` is left out: where results are written does not change them.
        """
        data = self.model_dump(mode="json", exclude={"output"})
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def override(self, **changes):
        """Copy with top-level fields replaced (``None`` values are ignored), revalidated."""
        data = self.model_dump()
        for key, val in changes.items():
            if val is None:
                continue
            if key == "out":
                data["output"]["dir"] = val
            else:
                data[key] = val
        return validate_config(data)


def _format_errors(err):
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def validate_config(data):
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def load_config(path):
    """Parse and validate a YAML experiment config; unknown keys are rejected."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from None
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse {path}: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return validate_config(data)


def build_grid(cfg):
    return DomainGrid.uniform(cfg.domain.lower, cfg.domain.upper, cfg.domain.size)


def build_prior(cfg, grid=None):
    """Prior :class:`GPState` described by the config."""
    grid = grid if grid is not None else build_grid(cfg)
    d = cfg.output_dim
    tol = RankTolerance(cfg.orthant.rank_tol)
    try:
        kernel = MatKernel(tuple(
            (np.array(t.B), ScalarKernel(t.family, t.lengthscale, t.variance)) for t in cfg.kernel.terms
        ))
        mean = MeanFn.zeros(d) if cfg.mean.kind == "zero" else MeanFn.constant(cfg.mean.value)
        if cfg.noise.kind == "homoscedastic":
            noise = NoiseModel.homoscedastic(np.array(cfg.noise.matrix))
        else:
            noise = NoiseModel.heteroscedastic(grid, np.array(cfg.noise.table))
    except ValueError as err:
        raise ConfigError(str(err)) from None
    return GPState(mean, kernel, noise, tol=tol)


def build_spec(cfg, kind, grid, seed=0):
    return UncertaintySpec(
        kind=kind,
        grid=grid,
        threshold=Threshold(cfg.threshold),
        tol=RankTolerance(cfg.orthant.rank_tol),
        qmc_samples=cfg.orthant.qmc_samples,
        seed=seed,
        emv_subsample=cfg.orthant.emv_subsample,
    )


def build_criterion(cfg, seed=0):
    c = cfg.criterion
    if c.epsilon_rule is not None:
        eps = EpsilonSchedule(scale=c.epsilon_rule.scale, power=c.epsilon_rule.power)
    else:
        eps = EpsilonSchedule(tuple(c.epsilon))
    return CriterionConfig(c.quadrature, c.nodes_per_dim, c.n_draws, eps, None, seed)
