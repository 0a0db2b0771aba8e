"""Unsupervised input reconstruction for echo state networks."""

from .errors import ConfigError, DomainError, NumericError, ResinError, ShapeError
from .filtering import (
    FilterPrior,
    FilterState,
    Gaussian,
    StudentT,
    build_prior,
    enkf_init,
    enkf_step,
    run_filter,
    sample_noise,
)
from .online import RlsState, readout_at, ridge_transition, rls_init, rls_step, run_rls
from .readout import (
    Provenance,
    Readout,
    RegularityReport,
    matrix_rank,
    pinv,
    reconstruct_inputs,
    regularity_report,
    right_inverse_family,
    rrmse,
    solve_supervised,
    solve_unsupervised_fullrank,
    solve_unsupervised_general,
    ul_loss,
)
from .replication import (
    LorenzConfig,
    ReplicatedMap,
    attractor_similarity,
    build_replica,
    lorenz_orbit,
    project,
    rollout,
    table1_diagnostics,
)
from .reservoir import (
    EmpiricalNegative,
    EsnParams,
    FixedAlpha,
    Identity,
    Relu,
    Tanh,
    activation_apply,
    activation_invert,
    drive,
    spectral_radius,
    step,
    synthesize_params,
)

__version__ = "0.1.0"
