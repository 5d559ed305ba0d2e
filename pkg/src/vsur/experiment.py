"""Replicated design campaigns driven by an :class:`ExperimentConfig`.

Seed derivation (counter-based, so adding replicates never changes earlier
ones): replicate ``r`` uses ``s_r = mix_seed(master, r)``; its ground truth is
drawn with ``mix_seed(s_r, 7)``, QMC orthant seeds with ``mix_seed(s_r, 3)``,
Monte Carlo quadrature with ``mix_seed(s_r, 4)`` and the design loop's noise
and random picks with ``s_r`` itself.
"""

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ._backend import BACKEND
from .config import build_criterion, build_grid, build_prior, build_spec
from .functionals import mix_seed
from .posterior import sample_path
from .sur import baseline_design, run_design

log = logging.getLogger(__name__)

QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)
STRATEGIES = {"sur": None, "random": "uniform-random", "sweep": "fixed-grid-sweep"}


def replicate_seed(master, r):
    return int(mix_seed(master, r))


def run_replicate(cfg, r, observer=None):
    """One replicate: sample a ground truth from the prior, run the configured strategy.

    ``observer`` is forwarded to :func:`run_design` (SUR strategy only).
    """
    s = replicate_seed(cfg.seed, r)
    grid = build_grid(cfg)
    prior = build_prior(cfg, grid)
    kinds = ("ibv", "emv") if cfg.functional == "both" else (cfg.functional,)
    spec = build_spec(cfg, kinds[0], grid, seed=int(mix_seed(s, 3)))
    crit = build_criterion(cfg, seed=int(mix_seed(s, 4)))
    truth = sample_path(prior, grid, seed=int(mix_seed(s, 7)))
    baseline = STRATEGIES[cfg.strategy]
    if baseline is None:
        traj = run_design(prior, truth, spec, crit, cfg.n_steps, s, record_kinds=kinds, observer=observer)
    else:
        traj = baseline_design(baseline, prior, truth, spec, crit, cfg.n_steps, s, record_kinds=kinds)
    traj.header.update(replicate=r, config_hash=cfg.config_hash())
    traj.final_state = None
    return traj


def _safe_replicate(args):
    cfg, r = args
    try:
        return r, run_replicate(cfg, r), None
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as err:
        return r, None, f"{type(err).__name__}: {err}"


def _stats(matrix):
    matrix = np.asarray(matrix, dtype=float)
    return {f"q{int(q * 100):02d}": np.quantile(matrix, q, axis=0).tolist() for q in QUANTILES}


def summarize(cfg, trajectories, failures):
    """Per-step quantiles across replicates plus final-step statistics."""
    out = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "strategy": cfg.strategy,
        "functional": cfg.functional,
        "n_steps": cfg.n_steps,
        "n_replicates": cfg.n_replicates,
        "n_succeeded": len(trajectories),
        "failures": failures,
        "per_step": {},
        "final": {},
    }
    if not trajectories:
        return out
    columns = ["h_ibv", "h_emv", "misclass"]
    for col in columns:
        rows = [t.series(col) for t in trajectories]
        if any(np.isnan(r).any() for r in rows):
            continue
        out["per_step"][col] = _stats(rows)
        final = np.array([r[-1] for r in rows])
        out["final"][col] = {"median": float(np.median(final)), "mean": float(final.mean())}
        if col.startswith("h_"):
            ratio = np.array([r[-1] / r[0] if r[0] > 0 else 0.0 for r in rows])
            out["final"][col]["median_ratio_to_prior"] = float(np.median(ratio))
    return out


def run_experiment(cfg, jobs=1):
    """Run all replicates, write one CSV per trajectory plus ``summary.json``.

    Returns ``(summary, exit_code)``; the exit code is 2 when any replicate failed.
    Wall-clock timestamps go only to ``metadata.json``.
    """
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    tasks = [(cfg, r) for r in range(cfg.n_replicates)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_safe_replicate, tasks))
    else:
        results = [_safe_replicate(t) for t in tasks]
    trajectories, failures = [], {}
    for r, traj, err in sorted(results, key=lambda x: x[0]):
        if err is not None:
            log.warning("replicate %d failed: %s", r, err)
            failures[str(r)] = err
            continue
        (out / f"trajectory_{r:04d}.csv").write_text(traj.to_csv(cfg.output_dim))
        trajectories.append(traj)
        log.info("replicate %d done", r)
    summary = summarize(cfg, trajectories, failures)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    meta = {
        "started": started,
        "finished": time.time(),
        "backend": BACKEND,
        "pid": os.getpid(),
        "config_hash": cfg.config_hash(),
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    return summary, (2 if failures else 0)
