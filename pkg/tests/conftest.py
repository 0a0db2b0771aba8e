import numpy as np
import pytest

from resin import Tanh, drive, synthesize_params


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def tanh_network(seed=0, n_in=1, n_r=50, variance=0.02, rho=0.9):
    return synthesize_params(n_in, n_r, variance, rho, Tanh(), np.random.default_rng(seed))


def noisy_cosine(T, noise, rng, period=50.0):
    t = np.arange(1, T + 1)
    return (np.cos(np.pi * t / period) + noise * rng.standard_normal(T))[None, :]


@pytest.fixture
def driven_tanh(rng):
    """Tanh network driven by a noisy cosine, full-rank states."""
    params = tanh_network(seed=3)
    D = noisy_cosine(2000, 0.5, rng)
    return params, D, drive(params, D)


@pytest.fixture(scope="session")
def full_scale_replicate():
    """Full-scale replication over 10 seeds, shared across modules.

    Returns the trial records and the wall time of the run.
    """
    import os
    import time

    from resin.harness import RUNNERS, make_config

    old = os.environ.get("RESIN_THREADS")
    os.environ["RESIN_THREADS"] = "1"
    try:
        t0 = time.perf_counter()
        cfg = make_config("replicate", {"write_orbits": False}, seed_count=10)
        records = RUNNERS["replicate"](cfg)
        return records, time.perf_counter() - t0
    finally:
        if old is None:
            del os.environ["RESIN_THREADS"]
        else:
            os.environ["RESIN_THREADS"] = old
