"""Autonomous replicas of the input-generating system and Lorenz-63 truth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericError, ShapeError
from .readout import (
    Provenance,
    Readout,
    pinv,
    solve_supervised,
    solve_unsupervised_fullrank,
    solve_unsupervised_general,
)
from .reservoir import ActivationKind, EsnParams, Tanh, as_trajectory


# ---------------------------------------------------------------------------
# Lorenz-63
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LorenzConfig:
    sigma_l: float = 10.0
    rho_l: float = 28.0
    beta_l: float = 8.0 / 3.0
    dt: float = 0.02
    x1: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if len(self.x1) != 3:
            raise ShapeError("x1 must have three coordinates")


def lorenz_rhs(x, cfg: LorenzConfig = LorenzConfig()) -> np.ndarray:
    """Lorenz-63 vector field at ``x``."""
    xi, eta, zeta = x
    return np.array([
        cfg.sigma_l * (eta - xi),
        xi * (cfg.rho_l - zeta) - eta,
        xi * eta - cfg.beta_l * zeta,
    ])


def rk4_step(x, cfg: LorenzConfig = LorenzConfig()) -> np.ndarray:
    """One classical Runge-Kutta step of size ``cfg.dt``."""
    h = cfg.dt
    k1 = lorenz_rhs(x, cfg)
    k2 = lorenz_rhs(x + 0.5 * h * k1, cfg)
    k3 = lorenz_rhs(x + 0.5 * h * k2, cfg)
    k4 = lorenz_rhs(x + h * k3, cfg)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def lorenz_orbit(cfg: LorenzConfig = LorenzConfig(), steps: int = 7000) -> np.ndarray:
    """Orbit x_1..x_steps as a (3, steps) array, first column ``cfg.x1``."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    X = np.empty((3, steps))
    X[:, 0] = cfg.x1
    for i in range(steps - 1):
        X[:, i + 1] = rk4_step(X[:, i], cfg)
    if not np.all(np.isfinite(X)):
        raise NumericError("Lorenz orbit diverged")
    return X


# ---------------------------------------------------------------------------
# Replicas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplicatedMap:
    """Autonomous map ``r -> sigma(B_hat r)`` with ``B_hat = A W + B``."""

    B_hat: np.ndarray
    activation: ActivationKind
    source: Provenance

    def __post_init__(self):
        B_hat = np.atleast_2d(np.asarray(self.B_hat, dtype=float))
        if B_hat.shape[0] != B_hat.shape[1]:
            raise ShapeError(f"B_hat must be square, got {B_hat.shape}")
        if not np.all(np.isfinite(B_hat)):
            raise NumericError("replica matrix is not finite")
        B_hat.flags.writeable = False
        object.__setattr__(self, "B_hat", B_hat)

    @property
    def n_r(self) -> int:
        return self.B_hat.shape[0]

    def __call__(self, r) -> np.ndarray:
        """Apply the map to one state or to each column of a state matrix."""
        return self.activation.apply(self.B_hat @ np.asarray(r, dtype=float))


def build_replica(params: EsnParams, readout: Readout) -> ReplicatedMap:
    """Close the reconstruction loop: feed ``W r`` back as the input."""
    if readout.W.shape != (params.n_in, params.n_r):
        raise ShapeError(f"readout has shape {readout.W.shape}, expected {(params.n_in, params.n_r)}")
    return ReplicatedMap(params.A @ readout.W + params.B, params.activation, readout.provenance)


def rollout(replica: ReplicatedMap, r1, steps: int) -> np.ndarray:
    """Iterate the replica; returns (n_r, steps) with first column ``r1``."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    r = np.asarray(r1, dtype=float)
    if r.shape != (replica.n_r,):
        raise ShapeError(f"initial state has shape {r.shape}, expected ({replica.n_r},)")
    out = np.empty((replica.n_r, steps))
    out[:, 0] = r
    for i in range(1, steps):
        with np.errstate(over="ignore", invalid="ignore"):
            r = replica(r)
        if not np.all(np.isfinite(r)):
            raise NumericError(f"rollout became non-finite at step {i + 1}")
        out[:, i] = r
    return out


def project(readout: Readout, states) -> np.ndarray:
    """Column-wise ``W r``."""
    R = as_trajectory(states, readout.n_r, "states")
    return readout.W @ R


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Table1Diagnostics:
    """Frobenius-norm errors comparing supervised and unsupervised readouts.

    Attributes:
        readout_gap: ``||W_R - W_D||`` with the full-rank form of ``W_R``.
        readout_gap_general: the same gap with the general form of ``W_R``.
        tanh_roundtrip: ``||tanh(arctanh(R)) - R||``.
        state_pinv: ``||R R^+ - I||``.
        input_pinv: ``||A^+ A - I||``.
    """

    readout_gap: float
    readout_gap_general: float
    tanh_roundtrip: float
    state_pinv: float
    input_pinv: float

    def as_dict(self) -> dict:
        return {
            "readout_gap": self.readout_gap,
            "readout_gap_general": self.readout_gap_general,
            "tanh_roundtrip": self.tanh_roundtrip,
            "state_pinv": self.state_pinv,
            "input_pinv": self.input_pinv,
        }


def table1_diagnostics(params: EsnParams, inputs, states) -> Table1Diagnostics:
    """Numerical error record for a tanh network.

    Args:
        params: tanh network.
        inputs: d_1..d_T, shape (n_in, T).
        states: r_1..r_{T+1}, shape (n_r, T+1).
    """
    if not isinstance(params.activation, Tanh):
        raise TypeError("diagnostics are defined for tanh networks")
    D = as_trajectory(inputs, params.n_in, "inputs")
    R = as_trajectory(states, params.n_r, "states")
    if R.shape[1] != D.shape[1] + 1:
        raise ShapeError("states must have exactly one more column than inputs")
    R1 = R[:, :-1]
    W_D = solve_supervised(D, R1).W
    W_5 = solve_unsupervised_fullrank(params, R).W
    W_4 = solve_unsupervised_general(params, R).W
    R1_pinv = pinv(R1)
    return Table1Diagnostics(
        readout_gap=float(np.linalg.norm(W_5 - W_D)),
        readout_gap_general=float(np.linalg.norm(W_4 - W_D)),
        tanh_roundtrip=float(np.linalg.norm(np.tanh(params.activation.invert(R)) - R)),
        state_pinv=float(np.linalg.norm(R1 @ R1_pinv - np.eye(params.n_r))),
        input_pinv=float(np.linalg.norm(pinv(params.A) @ params.A - np.eye(params.n_in))),
    )


@dataclass(frozen=True)
class AttractorCheck:
    """Outcome of comparing a projected rollout with a true orbit."""

    in_box: bool
    mean_ok: bool
    std_ok: bool

    @property
    def passed(self) -> bool:
        return self.in_box and self.mean_ok and self.std_ok


def attractor_similarity(
    projected,
    truth,
    box_factor: float = 1.5,
    moment_tol: float = 0.25,
) -> AttractorCheck:
    """Property-level comparison of two orbits in input space.

    The projected orbit must stay inside the truth's bounding box enlarged by
    ``box_factor`` about its centre, its per-coordinate mean must lie within
    ``moment_tol`` truth standard deviations of the true mean, and its
    per-coordinate standard deviation must be within ``moment_tol`` relative
    of the truth's.
    """
    Y = as_trajectory(projected, name="projected")
    X = as_trajectory(truth, Y.shape[0], "truth")
    lo, hi = X.min(axis=1), X.max(axis=1)
    centre, half = (lo + hi) / 2, (hi - lo) / 2
    in_box = bool(np.all(np.abs(Y - centre[:, None]) <= box_factor * half[:, None]))
    sd = X.std(axis=1)
    mean_ok = bool(np.all(np.abs(Y.mean(axis=1) - X.mean(axis=1)) <= moment_tol * sd))
    std_ok = bool(np.all(np.abs(Y.std(axis=1) / sd - 1.0) <= moment_tol))
    return AttractorCheck(in_box, mean_ok, std_ok)
