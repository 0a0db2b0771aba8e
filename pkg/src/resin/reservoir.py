"""Echo state network dynamics, activations and parameter synthesis.

The network follows ``r_{t+1} = sigma(A d_t + B r_t)`` with no bias, leak or
output feedback. Trajectories are plain 2-D arrays with one column per time
step, so ``states[:, t]`` is the reservoir state at (0-based) time ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DomainError, NumericError, ShapeError

#: Largest distance inside (-1, 1) kept when inverting tanh.
TANH_CLAMP = 1e-15
#: Entries further than this outside [-1, 1] cannot come from a tanh network.
TANH_DOMAIN_SLACK = 1e-12


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedAlpha:
    """ReLU surrogate inverse sending every non-positive entry to ``alpha``."""

    alpha: float = -0.1

    def __post_init__(self):
        if not self.alpha < 0:
            raise ValueError(f"alpha must be strictly negative, got {self.alpha}")


@dataclass(frozen=True)
class EmpiricalNegative:
    """ReLU surrogate inverse resampling non-positive entries.

    Each non-positive entry of a state vector is replaced by a draw from the
    empirical distribution of the negated positive entries of the same vector.
    """


ReluInverseRule = Union[FixedAlpha, EmpiricalNegative]


@dataclass(frozen=True)
class Identity:
    invertible = True

    def apply(self, x):
        return np.asarray(x, dtype=float)

    def invert(self, r, rng=None):
        return np.asarray(r, dtype=float)


@dataclass(frozen=True)
class Tanh:
    invertible = True

    def apply(self, x):
        return np.tanh(x)

    def invert(self, r, rng=None):
        """Element-wise arctanh after clamping into the open interval.

        Raises:
            DomainError: if an entry lies outside [-1, 1] by more than
                ``TANH_DOMAIN_SLACK``.
        """
        r = np.asarray(r, dtype=float)
        if not np.all(np.isfinite(r)):
            raise DomainError("arctanh of a non-finite reservoir state")
        excess = np.abs(r) - 1.0
        if r.size and excess.max() > TANH_DOMAIN_SLACK:
            idx = np.unravel_index(np.argmax(excess), r.shape)
            raise DomainError(
                f"entry {r[idx]!r} at index {tuple(int(i) for i in idx)} "
                "is outside the range of tanh"
            )
        return np.arctanh(np.clip(r, -1.0 + TANH_CLAMP, 1.0 - TANH_CLAMP))


@dataclass(frozen=True)
class Relu:
    """ReLU activation carrying the surrogate rule used for inversion."""

    surrogate: ReluInverseRule = field(default_factory=EmpiricalNegative)
    invertible = False

    def apply(self, x):
        return np.maximum(x, 0.0)

    def invert(self, r, rng=None):
        r = np.asarray(r, dtype=float)
        positive = r > 0
        if isinstance(self.surrogate, FixedAlpha):
            return np.where(positive, r, self.surrogate.alpha)
        if rng is None:
            raise ValueError("EmpiricalNegative inversion needs a random generator")
        return _empirical_negative(r, positive, rng)


ActivationKind = Union[Identity, Tanh, Relu]


def _empirical_negative(r, positive, rng):
    # Columns are handled independently; a 1-D input is a single column.
    vec = r.ndim == 1
    R = r[:, None] if vec else r
    pos = positive[:, None] if vec else positive
    counts = pos.sum(axis=0)
    # Sorting descending puts each column's positive entries first.
    ordered = -np.sort(-R, axis=0)
    draws = np.floor(rng.random(R.shape) * np.maximum(counts, 1)).astype(int)
    sampled = -np.take_along_axis(ordered, draws, axis=0)
    sampled[:, counts == 0] = 0.0
    out = np.where(pos, R, sampled)
    return out[:, 0] if vec else out


def activation_apply(kind: ActivationKind, x) -> np.ndarray:
    """Apply ``kind`` element-wise."""
    return kind.apply(x)


def activation_invert(kind: ActivationKind, r, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Invert ``kind`` element-wise, using its surrogate rule for ReLU.

    For 2-D input each column is treated as one state vector; the
    EmpiricalNegative rule only ever samples within a column.
    """
    return kind.invert(r, rng)


def activation_from_name(name: str, alpha: Optional[float] = None) -> ActivationKind:
    """Build an activation from a config string.

    Accepted names: ``identity``, ``tanh``, ``relu`` (empirical surrogate) and
    ``relu_alpha`` (fixed surrogate, needs ``alpha``).
    """
    name = name.lower()
    if name == "identity":
        return Identity()
    if name == "tanh":
        return Tanh()
    if name in ("relu", "relu_random", "relu_empirical"):
        return Relu(EmpiricalNegative())
    if name == "relu_alpha":
        if alpha is None:
            raise ValueError("relu_alpha needs an alpha value")
        return Relu(FixedAlpha(alpha))
    raise ValueError(f"unknown activation {name!r}")


# ---------------------------------------------------------------------------
# Network parameters and dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EsnParams:
    """Fixed network description.

    Attributes:
        A: input map, shape (n_r, n_in).
        B: recurrence map, shape (n_r, n_r).
        activation: element-wise activation.
    """

    A: np.ndarray
    B: np.ndarray
    activation: ActivationKind = field(default_factory=Tanh)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if B.shape[0] != B.shape[1]:
            raise ShapeError(f"B must be square, got {B.shape}")
        if A.shape[0] != B.shape[0]:
            raise ShapeError(f"A has {A.shape[0]} rows but B is {B.shape}")
        A.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_in(self) -> int:
        return self.A.shape[1]

    @property
    def n_r(self) -> int:
        return self.A.shape[0]


def as_trajectory(x, dim: Optional[int] = None, name: str = "trajectory") -> np.ndarray:
    """Coerce ``x`` to a finite (dim, T) float array; 1-D input becomes one row."""
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 1-D or 2-D, got shape {X.shape}")
    if X.shape[1] < 1:
        raise ShapeError(f"{name} must contain at least one time step")
    if dim is not None and X.shape[0] != dim:
        raise ShapeError(f"{name} has dimension {X.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(X)):
        raise NumericError(f"{name} contains non-finite values")
    return X


def step(params: EsnParams, d, r) -> np.ndarray:
    """One network update ``sigma(A d + B r)``."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if d.shape != (params.n_in,):
        raise ShapeError(f"input has shape {d.shape}, expected ({params.n_in},)")
    if r.shape != (params.n_r,):
        raise ShapeError(f"state has shape {r.shape}, expected ({params.n_r},)")
    return params.activation.apply(params.A @ d + params.B @ r)


def drive(params: EsnParams, inputs, r1=None) -> np.ndarray:
    """Drive the network with ``inputs`` (n_in, T) from initial state ``r1``.

    Returns the states r_1..r_{T+1} as an (n_r, T+1) array whose first column
    is ``r1`` (zero vector by default).
    """
    D = as_trajectory(inputs, params.n_in, "inputs")
    T = D.shape[1]
    r = np.zeros(params.n_r) if r1 is None else np.asarray(r1, dtype=float).copy()
    if r.shape != (params.n_r,):
        raise ShapeError(f"initial state has shape {r.shape}, expected ({params.n_r},)")
    drive_terms = params.A @ D
    B = params.B
    sigma = params.activation.apply
    states = np.empty((params.n_r, T + 1))
    states[:, 0] = r
    # Blow-up is reported below with its time index, so silence the float warnings.
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            r = sigma(drive_terms[:, t] + B @ r)
            states[:, t + 1] = r
    if not np.all(np.isfinite(states)):
        bad = int(np.argmax(~np.all(np.isfinite(states), axis=0)))
        raise NumericError(f"reservoir state became non-finite at time index {bad}")
    return states


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus, from a full eigendecomposition."""
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def synthesize_params(
    n_in: int,
    n_r: int,
    input_variance: float,
    target_spectral_radius: float,
    activation: Optional[ActivationKind] = None,
    rng: Optional[np.random.Generator] = None,
    max_retries: int = 3,
) -> EsnParams:
    """Draw a random network.

    ``A`` has i.i.d. N(0, input_variance) entries. ``B`` is a standard normal
    matrix rescaled so its spectral radius equals ``target_spectral_radius``.
    """
    if input_variance <= 0:
        raise ValueError("input_variance must be positive")
    if target_spectral_radius <= 0:
        raise ValueError("target_spectral_radius must be positive")
    rng = np.random.default_rng() if rng is None else rng
    activation = Tanh() if activation is None else activation
    A = rng.normal(0.0, np.sqrt(input_variance), size=(n_r, n_in))
    for _ in range(max_retries + 1):
        B0 = rng.standard_normal((n_r, n_r))
        rho = spectral_radius(B0)
        if rho > 0:
            return EsnParams(A, (target_spectral_radius / rho) * B0, activation)
    raise NumericError("recurrent draw had zero spectral radius on every attempt")
