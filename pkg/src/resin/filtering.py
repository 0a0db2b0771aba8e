"""Unsupervised filter prior and adaptive ensemble Kalman filtering.

The state-space model treats reservoir states driven by a clean input as the
latent process, propagated by the replica plus Gaussian model noise with
covariance ``Q_hat``, and reservoir states driven by a noisy input as the
observations. Nothing here ever receives an input series.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import NumericError, ShapeError
from .readout import Readout, solve_unsupervised_fullrank
from .replication import ReplicatedMap, build_replica
from .reservoir import EsnParams, as_trajectory

#: Relative diagonal jitter added to the innovation covariance before Cholesky.
GAIN_JITTER = 1e-9


# ---------------------------------------------------------------------------
# Noise models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    variance: float = 1.0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be non-negative")


@dataclass(frozen=True)
class StudentT:
    """Scaled Student-t noise; ``nu = inf`` gives a Gaussian with std ``scale``."""

    nu: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.scale < 0:
            raise ValueError("scale must be non-negative")


NoiseModel = Union[Gaussian, StudentT]


def sample_noise(model: NoiseModel, dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. noise vectors as a (dim, count) array."""
    z = rng.standard_normal((dim, count))
    if isinstance(model, Gaussian):
        return np.sqrt(model.variance) * z
    if np.isinf(model.nu):
        return model.scale * z
    chi2 = rng.chisquare(model.nu, size=(dim, count))
    return model.scale * z / np.sqrt(chi2 / model.nu)


# ---------------------------------------------------------------------------
# Prior
# ---------------------------------------------------------------------------

def psd_sqrt(S) -> np.ndarray:
    """Symmetric square root of a PSD matrix, negative eigenvalues clipped."""
    S = np.asarray(S, dtype=float)
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


@dataclass(frozen=True)
class FilterPrior:
    """Readout, replica and model-noise covariance used by the filter."""

    readout: Readout
    replica: ReplicatedMap
    Q_hat: np.ndarray
    Q_sqrt: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q_hat, dtype=float))
        n = self.replica.n_r
        if Q.shape != (n, n):
            raise ShapeError(f"Q_hat has shape {Q.shape}, expected {(n, n)}")
        Q = 0.5 * (Q + Q.T)
        object.__setattr__(self, "Q_hat", Q)
        object.__setattr__(self, "Q_sqrt", psd_sqrt(Q))

    @property
    def n_r(self) -> int:
        return self.replica.n_r


def build_prior(
    params: EsnParams,
    states,
    rng: Optional[np.random.Generator] = None,
    rtol: Optional[float] = None,
) -> FilterPrior:
    """Fit the prior from clean-input reservoir states r_1..r_{T+1}.

    The readout uses the full-rank closed form, ``rtol`` controls the
    pseudoinverse truncation of the state matrix. ``Q_hat`` is the uncentered
    second moment of the one-step replica residuals.
    """
    R = as_trajectory(states, params.n_r, "states")
    readout = solve_unsupervised_fullrank(params, R, rng, rtol)
    replica = build_replica(params, readout)
    w = R[:, 1:] - replica(R[:, :-1])
    Q = w @ w.T / w.shape[1]
    return FilterPrior(readout, replica, Q)


# ---------------------------------------------------------------------------
# Ensemble Kalman filter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterState:
    """Ensemble and adaptive observation-noise estimate.

    Attributes:
        ensemble: (n_r, M) particles.
        R: current observation-noise covariance estimate.
        alpha: adaptation rate for ``R``.
        t: number of observations assimilated so far.
    """

    ensemble: np.ndarray
    R: np.ndarray
    alpha: float
    t: int = 0

    def __post_init__(self):
        if self.ensemble.ndim != 2 or self.ensemble.shape[1] < 2:
            raise ShapeError("ensemble must be (n_r, M) with M >= 2")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def enkf_init(
    prior: FilterPrior,
    M: int,
    alpha: float,
    rng: np.random.Generator,
    init_std: float = 1.0,
    R0=None,
) -> FilterState:
    """Standard-normal ensemble (scaled by ``init_std``) and ``R0 = I`` by default."""
    if M < 2:
        raise ValueError("ensemble size must be at least 2")
    n = prior.n_r
    R0 = np.eye(n) if R0 is None else np.atleast_2d(np.asarray(R0, dtype=float))
    if R0.shape != (n, n):
        raise ShapeError(f"R0 has shape {R0.shape}, expected {(n, n)}")
    return FilterState(init_std * rng.standard_normal((n, M)), R0, alpha, 0)


def _cov(X, Y) -> np.ndarray:
    Xc = X - X.mean(axis=1, keepdims=True)
    Yc = Y - Y.mean(axis=1, keepdims=True)
    return Xc @ Yc.T / (X.shape[1] - 1)


def _chol_factor(S) -> np.ndarray:
    """Lower Cholesky factor, falling back to the symmetric root when singular."""
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return psd_sqrt(S)


def kalman_gain(U, V) -> np.ndarray:
    """``U V^-1`` through a jittered Cholesky factorization of ``V``."""
    n = V.shape[0]
    if not (np.all(np.isfinite(V)) and np.all(np.isfinite(U))):
        raise NumericError("non-finite covariance in the Kalman gain")
    jitter = GAIN_JITTER * np.trace(V) / n
    try:
        factor = cho_factor(V + jitter * np.eye(n), lower=True)
    except LinAlgError as exc:
        raise NumericError(f"innovation covariance is not positive definite: {exc}") from exc
    return cho_solve(factor, U.T).T


def enkf_step(state: FilterState, prior: FilterPrior, observation, rng: np.random.Generator):
    """Assimilate one observation.

    Returns:
        ``(new_state, filtered_mean)``.
    """
    y = np.asarray(observation, dtype=float)
    n, M = state.ensemble.shape
    if y.shape != (n,):
        raise ShapeError(f"observation has shape {y.shape}, expected ({n},)")
    Z = rng.standard_normal((2 * n, M))
    F = prior.replica(state.ensemble) + prior.Q_sqrt @ Z[:n]
    Fv = F + _chol_factor(state.R) @ Z[n:]
    Fc = F - F.mean(axis=1, keepdims=True)
    Fvc = Fv - Fv.mean(axis=1, keepdims=True)
    K = kalman_gain(Fc @ Fvc.T / (M - 1), Fvc @ Fvc.T / (M - 1))
    E = F + K @ (y[:, None] - Fv)
    if not np.all(np.isfinite(E)):
        raise NumericError(f"ensemble became non-finite at step {state.t + 1}")
    mean = E.mean(axis=1)
    P = _cov(E, E)
    innov = y - mean
    R = (1.0 - state.alpha) * state.R + state.alpha * (np.outer(innov, innov) + P)
    R = 0.5 * (R + R.T)
    return FilterState(E, R, state.alpha, state.t + 1), mean


def run_filter(
    prior: FilterPrior,
    observations,
    M: int,
    alpha: float,
    rng: np.random.Generator,
    init_std: float = 1.0,
    R0=None,
) -> np.ndarray:
    """Filter a (n_r, T) observation sequence; returns the (n_r, T) means."""
    Y = as_trajectory(observations, prior.n_r, "observations")
    state = enkf_init(prior, M, alpha, rng, init_std, R0)
    means = np.empty_like(Y)
    for t in range(Y.shape[1]):
        state, means[:, t] = enkf_step(state, prior, Y[:, t], rng)
    return means
