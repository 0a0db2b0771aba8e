"""Recursive least squares for the unsupervised readout.

The estimator tracks ``B_hat``, the least-squares map from r_t to
``sigma^-1(r_{t+1})``. The readout at any time is ``A^+ (B_hat - B)``. Each
step costs O(n_r^2) and never reads an input value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ShapeError
from .readout import Provenance, Readout, pinv
from .reservoir import EsnParams, as_trajectory


@dataclass(frozen=True)
class RlsState:
    """Estimator state after ``t - 1`` updates.

    Attributes:
        B_hat: current transition estimate, (n_r, n_r).
        P: running inverse of the regularized state Gram matrix, symmetric.
        t: 1-based time index of the next state pair to be consumed.
    """

    B_hat: np.ndarray
    P: np.ndarray
    t: int = 1


def rls_init(params: EsnParams, zero_start: bool = False) -> RlsState:
    """Start from ``B_hat = B`` and ``P = I``.

    Args:
        params: network whose recurrence seeds the estimate.
        zero_start: start from ``B_hat = 0`` instead, for when ``B`` is not
            known to the learner. The readout formula still needs ``B``.
    """
    B_hat = np.zeros_like(params.B) if zero_start else params.B.copy()
    return RlsState(B_hat=B_hat, P=np.eye(params.n_r), t=1)


def rls_step(
    state: RlsState,
    params: EsnParams,
    r_t,
    r_next,
    rng: Optional[np.random.Generator] = None,
    forgetting: float = 1.0,
) -> RlsState:
    """Consume the state pair (r_t, r_{t+1}) and return the updated estimator."""
    r = np.asarray(r_t, dtype=float)
    r_next = np.asarray(r_next, dtype=float)
    if r.shape != (params.n_r,) or r_next.shape != (params.n_r,):
        raise ShapeError(f"state vectors must have shape ({params.n_r},)")
    if not 0 < forgetting <= 1:
        raise ValueError("forgetting factor must lie in (0, 1]")
    P = state.P
    v = params.activation.invert(r_next, rng) - state.B_hat @ r
    Pr = P @ r
    g = Pr / (forgetting + r @ Pr)
    # P symmetric, so (I - g r^T) P = P - g (P r)^T.
    P_new = (P - np.outer(g, Pr)) / forgetting
    P_new = 0.5 * (P_new + P_new.T)
    B_new = state.B_hat + np.outer(v, g)
    return RlsState(B_hat=B_new, P=P_new, t=state.t + 1)


def readout_at(state: RlsState, params: EsnParams, a_pinv: Optional[np.ndarray] = None) -> Readout:
    """Readout ``A^+ (B_hat - B)``; pass ``a_pinv`` to reuse a cached ``A^+``."""
    a_pinv = pinv(params.A) if a_pinv is None else a_pinv
    return Readout(a_pinv @ (state.B_hat - params.B), Provenance.ONLINE)


def ridge_transition(params: EsnParams, states, rng=None) -> np.ndarray:
    """Batch solution matching RLS started at ``B_hat = B``, ``P = I``.

    Minimizes ``sum_t ||sigma^-1(r_{t+1}) - X r_t||^2 + ||X - B||_F^2``, whose
    closed form is ``(Z R1^T + B)(R1 R1^T + I)^-1``.
    """
    R = as_trajectory(states, params.n_r, "states")
    R1, R2 = R[:, :-1], R[:, 1:]
    Z = params.activation.invert(R2, rng)
    G = R1 @ R1.T + np.eye(params.n_r)
    return np.linalg.solve(G, (Z @ R1.T + params.B).T).T


@dataclass(frozen=True)
class RlsRun:
    """Outputs of :func:`run_rls`.

    Attributes:
        outputs: (n_in, T) array, column t is ``(W_R)_t r_t``, the readout in
            force before the pair (r_t, r_{t+1}) is consumed.
        update_norms: length T, ``||(W_R)_{t+1} - (W_R)_t||_F``.
        state: final estimator state.
    """

    outputs: np.ndarray
    update_norms: np.ndarray
    state: RlsState


def run_rls(params: EsnParams, states, rng=None, zero_start: bool = False, forgetting: float = 1.0) -> RlsRun:
    """Run the estimator over r_1..r_{T+1}, recording outputs and update sizes."""
    R = as_trajectory(states, params.n_r, "states")
    T = R.shape[1] - 1
    a_pinv = pinv(params.A)
    state = rls_init(params, zero_start)
    outputs = np.empty((params.n_in, T))
    norms = np.empty(T)
    W = readout_at(state, params, a_pinv).W
    for t in range(T):
        outputs[:, t] = W @ R[:, t]
        state = rls_step(state, params, R[:, t], R[:, t + 1], rng, forgetting)
        W_next = readout_at(state, params, a_pinv).W
        norms[t] = np.linalg.norm(W_next - W)
        W = W_next
    return RlsRun(outputs, norms, state)
