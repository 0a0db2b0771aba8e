"""Closed-form readouts, the unsupervised loss and reconstruction metrics.

All solvers take trajectories as (dim, T) arrays. The unsupervised solvers
take the network parameters and the reservoir states only; they have no way
to receive the input series.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericError, ShapeError
from .reservoir import EsnParams, Relu, as_trajectory


class Provenance(enum.Enum):
    SUPERVISED = "supervised"
    UNSUPERVISED_GENERAL = "unsupervised_general"
    UNSUPERVISED_FULLRANK = "unsupervised_fullrank"
    ONLINE = "online"


@dataclass(frozen=True)
class Readout:
    """Linear map from reservoir state to reconstructed input.

    Attributes:
        W: matrix of shape (n_in, n_r).
        provenance: how ``W`` was obtained.
    """

    W: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        if not np.all(np.isfinite(W)):
            raise NumericError(f"{self.provenance.value} readout is not finite")
        W.flags.writeable = False
        object.__setattr__(self, "W", W)

    @property
    def n_in(self) -> int:
        return self.W.shape[0]

    @property
    def n_r(self) -> int:
        return self.W.shape[1]

    def __call__(self, states) -> np.ndarray:
        return self.W @ np.asarray(states, dtype=float)


@dataclass(frozen=True)
class RegularityReport:
    """Numeric ranks and the three sufficient conditions for unsupervised IR.

    Condition (i) is invertibility of the activation, (ii) full column rank of
    ``A`` and (iii) full row rank of the state matrix.
    """

    rank_A: int
    rank_R: int
    activation_invertible: bool
    conditions_met: tuple


#: Default relative cutoff for :func:`pinv`, the same as ``numpy.linalg.pinv``.
PINV_RTOL = 1e-15


def _rank_rtol(shape) -> float:
    # Same default as numpy.linalg.matrix_rank.
    return max(shape) * np.finfo(float).eps


def pinv(M, rtol: Optional[float] = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse by SVD.

    Args:
        M: real matrix.
        rtol: singular values at or below ``rtol * s_max`` are discarded.
            Defaults to ``PINV_RTOL``.

    Raises:
        NumericError: if ``M`` is not finite or the SVD does not converge.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise NumericError("pseudoinverse of a non-finite matrix")
    if M.size == 0:
        return np.zeros(M.shape[::-1])
    rtol = PINV_RTOL if rtol is None else rtol
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed: {exc}") from exc
    keep = s > rtol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (Vt.T * inv_s) @ U.T


def matrix_rank(M, rtol: Optional[float] = None) -> int:
    """Number of singular values above ``rtol * s_max``.

    The default ``rtol`` is ``max(M.shape) * eps``, the usual numerical-rank
    threshold. It is looser than the :func:`pinv` default, so a matrix can
    be rank deficient here while its pseudoinverse still inverts tiny
    singular values.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    rtol = _rank_rtol(M.shape) if rtol is None else rtol
    return int(np.sum(s > rtol * s[0]))


def _split_states(params: EsnParams, states):
    R = as_trajectory(states, params.n_r, "states")
    if R.shape[1] < 2:
        raise ShapeError("need at least two consecutive states")
    return R[:, :-1], R[:, 1:]


def solve_supervised(inputs, states, rtol: Optional[float] = None) -> Readout:
    """Least-squares readout ``W = D R^+`` from paired inputs and states."""
    D = as_trajectory(inputs, name="inputs")
    R = as_trajectory(states, name="states")
    if D.shape[1] != R.shape[1]:
        raise ShapeError(f"inputs have {D.shape[1]} steps but states have {R.shape[1]}")
    return Readout(D @ pinv(R, rtol), Provenance.SUPERVISED)


def solve_unsupervised_general(
    params: EsnParams,
    states,
    rng: Optional[np.random.Generator] = None,
    rtol: Optional[float] = None,
) -> Readout:
    """Unsupervised readout valid without a full-row-rank state matrix.

    ``W = A^+ [sigma^-1(R2) - B R1] R1^+`` where ``states`` holds r_1..r_{T+1}.
    """
    R1, R2 = _split_states(params, states)
    Z = params.activation.invert(R2, rng)
    W = pinv(params.A) @ (Z - params.B @ R1) @ pinv(R1, rtol)
    return Readout(W, Provenance.UNSUPERVISED_GENERAL)


def solve_unsupervised_fullrank(
    params: EsnParams,
    states,
    rng: Optional[np.random.Generator] = None,
    rtol: Optional[float] = None,
) -> Readout:
    """Unsupervised readout ``W = A^+ [sigma^-1(R2) R1^+ - B]``.

    Equal to :func:`solve_unsupervised_general` when ``R1`` has full row rank.
    """
    R1, R2 = _split_states(params, states)
    Z = params.activation.invert(R2, rng)
    W = pinv(params.A) @ (Z @ pinv(R1, rtol) - params.B)
    return Readout(W, Provenance.UNSUPERVISED_FULLRANK)


def fit_transition(params: EsnParams, states, rng=None, rtol=None) -> np.ndarray:
    """Least-squares minimizer ``sigma^-1(R2) R1^+`` of :func:`ul_loss`."""
    R1, R2 = _split_states(params, states)
    return params.activation.invert(R2, rng) @ pinv(R1, rtol)


def reconstruct_inputs(params: EsnParams, states, rng=None) -> np.ndarray:
    """Recover each input from two consecutive states.

    Returns ``A^+ [sigma^-1(r_{t+1}) - B r_t]`` for t = 1..T as an (n_in, T)
    array. Exact whenever the activation is invertible and ``A`` has full
    column rank.
    """
    R1, R2 = _split_states(params, states)
    return pinv(params.A) @ (params.activation.invert(R2, rng) - params.B @ R1)


def ul_loss(activation, states, B_hat, rng=None) -> float:
    """Sum over t of ``||sigma^-1(r_{t+1}) - B_hat r_t||^2``."""
    R = as_trajectory(states, name="states")
    B_hat = np.atleast_2d(np.asarray(B_hat, dtype=float))
    if B_hat.shape != (R.shape[0], R.shape[0]):
        raise ShapeError(f"B_hat has shape {B_hat.shape}, expected {(R.shape[0],) * 2}")
    if R.shape[1] < 2:
        raise ShapeError("need at least two consecutive states")
    resid = activation.invert(R[:, 1:], rng) - B_hat @ R[:, :-1]
    return float(np.sum(resid**2))


def right_inverse_family(readout: Readout, Xi) -> np.ndarray:
    """Return ``W^+ + (I - W^+ W) Xi``.

    For a readout with full row rank every member is a right inverse of
    ``W``. ``Xi`` may have any number of columns; the usual choice is
    (n_r, n_in).
    """
    W = readout.W
    Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
    if Xi.shape[0] != W.shape[1]:
        raise ShapeError(f"Xi has {Xi.shape[0]} rows, expected {W.shape[1]}")
    Wp = pinv(W)
    return Wp + (np.eye(W.shape[1]) - Wp @ W) @ Xi


def rrmse(estimate, truth) -> float:
    """Relative root mean squared error.

    Errors are normalized by the centered energy of ``truth`` so that always
    predicting the time-mean of ``truth`` gives exactly 1.

    Raises:
        ZeroDivisionError: if ``truth`` is constant over time.
    """
    E = np.atleast_2d(np.asarray(estimate, dtype=float))
    D = np.atleast_2d(np.asarray(truth, dtype=float))
    if E.shape != D.shape:
        raise ShapeError(f"estimate shape {E.shape} differs from truth shape {D.shape}")
    denom = np.sum((D - D.mean(axis=1, keepdims=True)) ** 2)
    if denom == 0:
        raise ZeroDivisionError("truth is constant, RRMSE is undefined")
    return float(np.sqrt(np.sum((E - D) ** 2) / denom))


def regularity_report(params: EsnParams, states, rtol: Optional[float] = None) -> RegularityReport:
    """Check the sufficient conditions for the unsupervised solutions."""
    R = as_trajectory(states, params.n_r, "states")
    rank_A = matrix_rank(params.A, rtol)
    rank_R = matrix_rank(R, rtol)
    invertible = not isinstance(params.activation, Relu)
    conditions = (invertible, rank_A == params.n_in, rank_R == params.n_r)
    return RegularityReport(rank_A, rank_R, invertible, conditions)
