"""Experiment drivers producing per-seed records and CSV files.

Each driver runs one trial per seed, optionally in parallel worker
processes, and returns a list of :class:`TrialRecord`. Every random draw
comes from a stream derived from ``(seed, stream id, grid index)``, so runs
are bit-reproducible regardless of worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import readout as ro
from ..filtering import Gaussian, StudentT, build_prior, run_filter as run_enkf, sample_noise
from ..online import run_rls
from ..replication import (
    LorenzConfig,
    attractor_similarity,
    build_replica,
    lorenz_orbit,
    project,
    rollout,
    table1_diagnostics,
)
from ..reservoir import EmpiricalNegative, FixedAlpha, Relu, Tanh, drive, synthesize_params
from .config import (
    FilterConfig,
    HeavytailConfig,
    ReconstructConfig,
    ReplicateConfig,
    SweepRankConfig,
    SweepReluConfig,
)

# Stream ids for independent random sub-streams of a trial.
PARAMS, TRAIN_NOISE, TEST_NOISE, FILTER, SURROGATE = range(5)

CSV_COLUMNS = {
    "reconstruct": ("seed", "t", "d", "output", "update_norm"),
    "replicate": ("seed", "metric", "value"),
    "filter": ("seed", "sigma2", "stage", "rrmse"),
    "sweep_relu": ("seed", "variance", "rule", "alpha", "rrmse"),
    "sweep_rank": ("seed", "noise_std", "rank", "method", "rrmse"),
    "filter_heavytail": ("seed", "nu", "stage", "rrmse"),
}
CSV_NAMES = {
    "reconstruct": "reconstruct.csv",
    "replicate": "table1.csv",
    "filter": "filter.csv",
    "sweep_relu": "sweep_relu.csv",
    "sweep_rank": "sweep_rank.csv",
    "filter_heavytail": "heavytail.csv",
}
ORBIT_COLUMNS = ("seed", "source", "t", "x", "y", "z")
SUMMARY_COLUMNS = ("metric", "mean", "std", "min", "max", "count")


@dataclass
class TrialRecord:
    """Result of one seed.

    Attributes:
        seed: trial seed.
        experiment: experiment name.
        rows: CSV rows for the experiment's main file.
        metrics: scalar summaries keyed by name.
        extra: additional row sets keyed by file name.
    """

    seed: int
    experiment: str
    rows: list
    metrics: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def rng_for(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, index]))


def worker_count(n_tasks: int) -> int:
    """Workers to use, capped by the RESIN_THREADS environment variable."""
    env = os.environ.get("RESIN_THREADS")
    limit = os.cpu_count() or 1
    if env:
        try:
            limit = max(1, int(env))
        except ValueError:
            pass
    return max(1, min(limit, n_tasks))


def _map_seeds(fn, cfg):
    seeds = list(cfg.seeds)
    workers = worker_count(len(seeds))
    if workers == 1:
        return [fn(seed, cfg) for seed in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds, [cfg] * len(seeds)))


# ---------------------------------------------------------------------------
# Input signals
# ---------------------------------------------------------------------------

def piecewise_signal(steps: int = 1200) -> np.ndarray:
    """Three-regime test signal evaluated at t = 1..steps."""
    t = np.arange(1, steps + 1, dtype=float)
    return np.where(
        t < 400,
        np.cos(np.pi * t / 50),
        np.where(t < 800, np.cos(np.pi * t / 100) + np.sin(np.pi * t / 25), np.cos(np.pi * t / 50) ** 9),
    )


def cosine_signal(steps: int, period: float) -> np.ndarray:
    t = np.arange(1, steps + 1, dtype=float)
    return np.cos(2 * np.pi * t / period)


# ---------------------------------------------------------------------------
# reconstruct
# ---------------------------------------------------------------------------

def reconstruct_trial(seed: int, cfg: ReconstructConfig) -> TrialRecord:
    params = synthesize_params(1, cfg.n_r, cfg.input_variance, cfg.spectral_radius, Tanh(), rng_for(seed, PARAMS))
    d = piecewise_signal(cfg.steps)
    states = drive(params, d[None, :])
    run = run_rls(params, states)
    out = run.outputs[0]
    rows = [(seed, t + 1, d[t], out[t], run.update_norms[t]) for t in range(cfg.steps)]
    w = cfg.final_window
    metrics = {
        "final_rrmse": ro.rrmse(out[-w:], d[-w:]),
        "update_early": float(run.update_norms[: cfg.switch_step].mean()),
        "update_late": float(run.update_norms[cfg.switch_step:].mean()),
    }
    return TrialRecord(seed, "reconstruct", rows, metrics)


def run_reconstruct(cfg: ReconstructConfig) -> list:
    return _map_seeds(reconstruct_trial, cfg)


# ---------------------------------------------------------------------------
# replicate
# ---------------------------------------------------------------------------

def replicate_trial(seed: int, cfg: ReplicateConfig) -> TrialRecord:
    X = cfg.input_scale * lorenz_orbit(LorenzConfig(dt=cfg.dt), cfg.train + cfg.test)
    D, truth = X[:, : cfg.train], X[:, cfg.train:]
    params = synthesize_params(3, cfg.n_r, cfg.input_variance, cfg.spectral_radius, Tanh(), rng_for(seed, PARAMS))
    states = drive(params, D)
    diag = table1_diagnostics(params, D, states)
    metrics = dict(diag.as_dict())
    orbits = {}
    readouts = {
        "supervised": ro.solve_supervised(D, states[:, :-1]),
        "unsupervised": ro.solve_unsupervised_fullrank(params, states),
    }
    for name, readout in readouts.items():
        replica = build_replica(params, readout)
        Y = project(readout, rollout(replica, states[:, -1], cfg.test))
        check = attractor_similarity(Y, truth, cfg.box_factor, cfg.moment_tol)
        metrics[f"{name}_in_box"] = float(check.in_box)
        metrics[f"{name}_mean_ok"] = float(check.mean_ok)
        metrics[f"{name}_std_ok"] = float(check.std_ok)
        metrics[f"{name}_rollout_rrmse"] = ro.rrmse(Y, truth)
        orbits[name] = Y
    metrics["terminal_gap"] = float(np.linalg.norm(orbits["supervised"][:, -1] - orbits["unsupervised"][:, -1]))
    rows = [(seed, k, v) for k, v in metrics.items()]
    extra = {}
    if cfg.write_orbits:
        orbit_rows = [("truth", truth)] + list(orbits.items())
        extra["replicate_orbits.csv"] = [
            (seed, name, cfg.train + t + 1, *Y[:, t]) for name, Y in orbit_rows for t in range(Y.shape[1])
        ]
    return TrialRecord(seed, "replicate", rows, metrics, extra)


def run_replicate(cfg: ReplicateConfig) -> list:
    return _map_seeds(replicate_trial, cfg)


# ---------------------------------------------------------------------------
# filter and filter_heavytail
# ---------------------------------------------------------------------------

def _filter_setup(seed, cfg):
    params = synthesize_params(1, cfg.n_r, cfg.input_variance, cfg.spectral_radius, Tanh(), rng_for(seed, PARAMS))
    d = cosine_signal(cfg.train, cfg.period)
    d1 = d + sample_noise(Gaussian(cfg.train_noise), 1, cfg.train, rng_for(seed, TRAIN_NOISE))[0]
    prior = build_prior(params, drive(params, d1[None, :]), rtol=cfg.prior_rtol)
    return params, prior, cosine_signal(cfg.test, cfg.period)


def _noisy_observations(params, truth, noise, rng):
    d2 = truth + sample_noise(noise, 1, truth.size, rng)[0]
    # Observations r_1..r_T; the estimate of d_t is W r_t.
    return d2, drive(params, d2[None, :])[:, :-1]


def filter_trial(seed: int, cfg: FilterConfig) -> TrialRecord:
    params, prior, truth = _filter_setup(seed, cfg)
    W = prior.readout.W
    rows, metrics = [], {}
    for i, s2 in enumerate(cfg.sigma2_grid):
        d2, obs = _noisy_observations(params, truth, Gaussian(s2), rng_for(seed, TEST_NOISE, i))
        stages = {
            "input": ro.rrmse(d2, truth),
            "before": ro.rrmse(W @ obs, truth),
        }
        means = run_enkf(prior, obs, cfg.M, cfg.alpha, rng_for(seed, FILTER, 2 * i), cfg.init_std)
        stages["after_adaptive"] = ro.rrmse(W @ means, truth)
        if cfg.include_fixed:
            means = run_enkf(prior, obs, cfg.M, 0.0, rng_for(seed, FILTER, 2 * i + 1), cfg.init_std)
            stages["after_fixed"] = ro.rrmse(W @ means, truth)
        for stage, value in stages.items():
            rows.append((seed, s2, stage, value))
            metrics[(s2, stage)] = value
    return TrialRecord(seed, "filter", rows, metrics)


def run_filter(cfg: FilterConfig) -> list:
    return _map_seeds(filter_trial, cfg)


def heavytail_trial(seed: int, cfg: HeavytailConfig) -> TrialRecord:
    params, prior, truth = _filter_setup(seed, cfg)
    W = prior.readout.W
    rows, metrics = [], {}
    for i, nu in enumerate(cfg.nus):
        noise = StudentT(nu, cfg.noise_scale)
        d2, obs = _noisy_observations(params, truth, noise, rng_for(seed, TEST_NOISE, i))
        means = run_enkf(prior, obs, cfg.M, cfg.alpha, rng_for(seed, FILTER, i), cfg.init_std)
        stages = {
            "input": ro.rrmse(d2, truth),
            "before": ro.rrmse(W @ obs, truth),
            "after": ro.rrmse(W @ means, truth),
        }
        for stage, value in stages.items():
            rows.append((seed, nu, stage, value))
            metrics[(nu, stage)] = value
    return TrialRecord(seed, "filter_heavytail", rows, metrics)


def run_filter_heavytail(cfg: HeavytailConfig) -> list:
    return _map_seeds(heavytail_trial, cfg)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def sweep_relu_trial(seed: int, cfg: SweepReluConfig) -> TrialRecord:
    d = np.cos(np.pi * np.arange(1, cfg.steps + 1) / cfg.period)
    solve = ro.solve_unsupervised_fullrank if cfg.form == "fullrank" else ro.solve_unsupervised_general
    rows, metrics = [], {}
    for i, var in enumerate(cfg.variances):
        params = synthesize_params(
            1, cfg.n_r, var, cfg.spectral_radius, Relu(EmpiricalNegative()), rng_for(seed, PARAMS, i)
        )
        states = drive(params, d[None, :])
        R1 = states[:, :-1]
        results = [("supervised", None, ro.solve_supervised(d[None, :], R1))]
        results.append(("empirical", None, solve(params, states, rng_for(seed, SURROGATE, i))))
        for a in cfg.alphas:
            fixed = dataclasses.replace(params, activation=Relu(FixedAlpha(a)))
            results.append(("fixed", a, solve(fixed, states)))
        for rule, a, readout in results:
            value = ro.rrmse(readout.W @ R1, d[None, :])
            rows.append((seed, var, rule, "" if a is None else a, value))
            metrics[(var, rule, a)] = value
    return TrialRecord(seed, "sweep_relu", rows, metrics)


def run_sweep_relu(cfg: SweepReluConfig) -> list:
    return _map_seeds(sweep_relu_trial, cfg)


def sweep_rank_trial(seed: int, cfg: SweepRankConfig) -> TrialRecord:
    params = synthesize_params(1, cfg.n_r, cfg.input_variance, cfg.spectral_radius, Tanh(), rng_for(seed, PARAMS))
    total = cfg.warmup + cfg.train
    t = np.arange(1, total + 1)
    clean = np.sin(np.pi * t / cfg.period)
    rows, metrics = [], {}
    for i, sd in enumerate(cfg.noise_grid):
        d = clean + sd * rng_for(seed, TRAIN_NOISE, i).standard_normal(total)
        # Discard the warm-up transient; keep r_{w+1}..r_{w+T+1}.
        states = drive(params, d[None, :])[:, cfg.warmup:]
        D = d[None, cfg.warmup:]
        R1 = states[:, :-1]
        rank = ro.matrix_rank(R1)
        readouts = {
            "supervised": ro.solve_supervised(D, R1),
            "general": ro.solve_unsupervised_general(params, states),
            "fullrank": ro.solve_unsupervised_fullrank(params, states),
        }
        for method, readout in readouts.items():
            value = ro.rrmse(readout.W @ R1, D)
            rows.append((seed, sd, rank, method, value))
            metrics[(sd, method)] = value
        metrics[(sd, "rank")] = rank
    return TrialRecord(seed, "sweep_rank", rows, metrics)


def run_sweep_rank(cfg: SweepRankConfig) -> list:
    return _map_seeds(sweep_rank_trial, cfg)


RUNNERS = {
    "reconstruct": run_reconstruct,
    "replicate": run_replicate,
    "filter": run_filter,
    "sweep_relu": run_sweep_relu,
    "sweep_rank": run_sweep_rank,
    "filter_heavytail": run_filter_heavytail,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(value)


def _sort_key(row):
    return tuple((0, v, "") if isinstance(v, (int, float, np.number)) else (1, 0, str(v)) for v in row)


def write_rows(path, columns, rows) -> Path:
    """Write rows sorted for order independence, floats with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in sorted(rows, key=_sort_key):
            writer.writerow([format_value(v) for v in row])
    return path


def write_records(experiment: str, records: list, out_dir) -> list:
    """Write the experiment's CSV (and any extra files); returns the paths."""
    out_dir = Path(out_dir)
    rows = [row for rec in records for row in rec.rows]
    paths = [write_rows(out_dir / CSV_NAMES[experiment], CSV_COLUMNS[experiment], rows)]
    extra_names = sorted({name for rec in records for name in rec.extra})
    for name in extra_names:
        extra = [row for rec in records for row in rec.extra.get(name, [])]
        paths.append(write_rows(out_dir / name, ORBIT_COLUMNS, extra))
    paths.append(write_summary(experiment, records, out_dir))
    return paths


def _metric_values(records: list) -> dict:
    values = {}
    for rec in records:
        for k, v in rec.metrics.items():
            values.setdefault(k, []).append(float(v))
    return values


def summarize(experiment: str, records: list) -> dict:
    """Mean of every metric across seeds."""
    return {k: float(np.mean(v)) for k, v in _metric_values(records).items()}


def describe(records: list) -> dict:
    """Mean, sample std, min, max and count of every metric across seeds."""
    out = {}
    for k, v in _metric_values(records).items():
        a = np.asarray(v)
        std = float(a.std(ddof=1)) if a.size > 1 else 0.0
        out[k] = (float(a.mean()), std, float(a.min()), float(a.max()), int(a.size))
    return out


def metric_name(key) -> str:
    if isinstance(key, tuple):
        return " ".join(format_value(k) for k in key if k is not None)
    return str(key)


def write_summary(experiment: str, records: list, out_dir) -> Path:
    """Per-metric summary across seeds, next to the experiment's CSV."""
    stem = Path(CSV_NAMES[experiment]).stem
    rows = [(metric_name(k), *stats) for k, stats in describe(records).items()]
    return write_rows(Path(out_dir) / f"{stem}_summary.csv", SUMMARY_COLUMNS, rows)
