import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import noisy_cosine, tanh_network
from resin import (
    EsnParams,
    Identity,
    Provenance,
    Readout,
    Relu,
    Tanh,
    drive,
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
from resin.errors import NumericError, ShapeError
from resin.harness.experiments import piecewise_signal
from resin.readout import fit_transition


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestPinv:
    def test_identity(self):
        np.testing.assert_array_equal(pinv(np.eye(4)), np.eye(4))

    def test_rank_deficient_diagonal(self):
        np.testing.assert_allclose(pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]), atol=0)

    def test_tall_gaussian_left_inverse(self, rng):
        A = rng.standard_normal((50, 1))
        assert np.linalg.norm(pinv(A) @ A - np.eye(1)) <= 1e-12

    def test_matches_numpy_default(self, rng):
        M = rng.standard_normal((7, 4)) @ rng.standard_normal((4, 9))
        np.testing.assert_allclose(pinv(M), np.linalg.pinv(M), atol=1e-10)

    def test_truncation(self):
        M = np.diag([1.0, 1e-3, 1e-9])
        np.testing.assert_allclose(pinv(M, rtol=1e-6), np.diag([1.0, 1e3, 0.0]))

    def test_zero_and_nonfinite(self):
        np.testing.assert_array_equal(pinv(np.zeros((2, 3))), np.zeros((3, 2)))
        with pytest.raises(NumericError):
            pinv([[np.inf]])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 8), st.integers(0, 2**32 - 1))
    def test_penrose_identities(self, m, n, k, seed):
        rng = np.random.default_rng(seed)
        k = min(k, m, n)
        M = rng.standard_normal((m, k)) @ rng.standard_normal((k, n)) if k else np.zeros((m, n))
        X = pinv(M)
        scale = max(1.0, np.linalg.norm(M) * np.linalg.norm(X))
        assert np.linalg.norm(M @ X @ M - M) <= 1e-8 * scale * max(1.0, np.linalg.norm(M))
        assert np.linalg.norm(X @ M @ X - X) <= 1e-8 * scale * max(1.0, np.linalg.norm(X))
        assert np.linalg.norm(M @ X - (M @ X).T) <= 1e-8 * scale
        assert np.linalg.norm(X @ M - (X @ M).T) <= 1e-8 * scale

    def test_rank(self, rng):
        M = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 5))
        assert matrix_rank(M) == 2 == np.linalg.matrix_rank(M)
        assert matrix_rank(np.zeros((3, 3))) == 0


class TestSupervised:
    def test_passthrough(self, rng):
        D = rng.standard_normal((2, 30))
        ro = solve_supervised(D, D)
        assert ro.provenance is Provenance.SUPERVISED
        np.testing.assert_allclose(ro.W @ D, D, atol=1e-12)

    def test_short_periodic_input(self):
        params = tanh_network(n_r=50)
        t = np.arange(1, 21)
        D = np.cos(np.pi * t / 5)[None]
        R = drive(params, D)[:, :-1]
        ro = solve_supervised(D, R)
        assert ro.W.shape == (1, 50)
        assert np.all(np.isfinite(ro.W))

    def test_small_residual_on_piecewise_signal(self):
        params = tanh_network(n_r=50)
        D = piecewise_signal(1200)[None]
        R = drive(params, D)[:, :-1]
        ro = solve_supervised(D, R)
        assert rrmse(ro.W @ R, D) < 0.1

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            solve_supervised(np.zeros((1, 5)), np.zeros((3, 6)))

    def test_minimizer(self, rng):
        R = rng.standard_normal((5, 40))
        D = rng.standard_normal((2, 40))
        W = solve_supervised(D, R).W
        best = np.sum((W @ R - D) ** 2)
        for _ in range(100):
            Wp = W + 1e-3 * rng.standard_normal(W.shape)
            assert np.sum((Wp @ R - D) ** 2) >= best


class TestUnsupervised:
    def test_identity_linear_case(self, rng):
        # Inputs follow d_t = C d_{t-1}, so with r_t = A d_{t-1} the input is
        # exactly C A^-1 r_t and the readout must recover that map.
        A = rng.standard_normal((3, 3))
        C = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        params = EsnParams(A, np.zeros((3, 3)), Identity())
        d0 = rng.standard_normal(3)
        D = np.empty((3, 40))
        D[:, 0] = C @ d0
        for t in range(39):
            D[:, t + 1] = C @ D[:, t]
        R = drive(params, D, r1=A @ d0)
        Wg = solve_unsupervised_general(params, R).W
        Wf = solve_unsupervised_fullrank(params, R).W
        oracle = np.linalg.inv(A) @ R[:, 1:] @ np.linalg.pinv(R[:, :-1])
        np.testing.assert_allclose(Wg, oracle, atol=1e-9)
        np.testing.assert_allclose(Wf, oracle, atol=1e-9)
        np.testing.assert_allclose(Wg, C @ np.linalg.inv(A), atol=1e-9)
        np.testing.assert_allclose(Wg @ R[:, :-1], D, atol=1e-9)

    def test_provenance(self, driven_tanh):
        params, _, R = driven_tanh
        assert solve_unsupervised_general(params, R).provenance is Provenance.UNSUPERVISED_GENERAL
        assert solve_unsupervised_fullrank(params, R).provenance is Provenance.UNSUPERVISED_FULLRANK

    def test_forms_agree_on_full_rank(self, driven_tanh):
        params, D, R = driven_tanh
        Wg = solve_unsupervised_general(params, R).W
        Wf = solve_unsupervised_fullrank(params, R).W
        Wd = solve_supervised(D, R[:, :-1]).W
        assert rel(Wf, Wg) <= 1e-6
        assert rel(Wg, Wd) <= 1e-6

    def test_forms_diverge_on_rank_deficient(self):
        params = tanh_network(n_r=50)
        t = np.arange(1, 3001)
        R = drive(params, np.sin(np.pi * t / 50)[None])[:, 1000:]
        assert matrix_rank(R[:, :-1]) < 50
        Wg = solve_unsupervised_general(params, R).W
        Wf = solve_unsupervised_fullrank(params, R).W
        assert rel(Wf, Wg) > 1e-6

    def test_consecutive_state_reconstruction(self, driven_tanh):
        params, D, R = driven_tanh
        assert np.abs(reconstruct_inputs(params, R) - D).max() <= 1e-8

    def test_needs_two_states(self):
        params = tanh_network(n_r=4)
        with pytest.raises(ShapeError):
            solve_unsupervised_general(params, np.zeros((4, 1)))

    def test_relu_surrogate_rng_use(self):
        params = synthesize_relu()
        t = np.arange(1, 301)
        R = drive(params, np.cos(np.pi * t / 50)[None])
        a = solve_unsupervised_fullrank(params, R, np.random.default_rng(1)).W
        b = solve_unsupervised_fullrank(params, R, np.random.default_rng(1)).W
        np.testing.assert_array_equal(a, b)


def synthesize_relu():
    from resin import synthesize_params

    return synthesize_params(1, 20, 0.5, 0.9, Relu(), np.random.default_rng(4))


class TestLoss:
    def test_zero_for_true_linear_map(self, rng):
        B = 0.5 * rng.standard_normal((4, 4))
        R = np.empty((4, 20))
        R[:, 0] = rng.standard_normal(4)
        for t in range(19):
            R[:, t + 1] = B @ R[:, t]
        assert ul_loss(Identity(), R, B) == pytest.approx(0.0, abs=1e-20)

    def test_least_squares_optimal(self, driven_tanh, rng):
        params, _, R = driven_tanh
        B_ls = fit_transition(params, R)
        best = ul_loss(Tanh(), R, B_ls)
        for _ in range(20):
            assert ul_loss(Tanh(), R, B_ls + 1e-4 * rng.standard_normal(B_ls.shape)) >= best

    def test_true_recurrence_gives_input_energy(self, driven_tanh):
        params, D, R = driven_tanh
        expected = np.sum((params.A @ D) ** 2)
        assert ul_loss(Tanh(), R, params.B) == pytest.approx(expected, rel=1e-8)

    def test_shape_check(self):
        with pytest.raises(ShapeError):
            ul_loss(Identity(), np.zeros((3, 4)), np.eye(2))


class TestRightInverse:
    def test_zero_xi_gives_pinv(self, rng):
        ro = Readout(rng.standard_normal((2, 6)), Provenance.SUPERVISED)
        np.testing.assert_allclose(right_inverse_family(ro, np.zeros((6, 2))), pinv(ro.W))

    def test_right_inverse(self, rng):
        ro = Readout(rng.standard_normal((2, 6)), Provenance.SUPERVISED)
        V = right_inverse_family(ro, rng.standard_normal((6, 2)))
        assert np.linalg.norm(ro.W @ V - np.eye(2)) <= 1e-8

    def test_zero_readout(self, rng):
        ro = Readout(np.zeros((2, 5)), Provenance.SUPERVISED)
        Xi = rng.standard_normal((5, 2))
        V = right_inverse_family(ro, Xi)
        np.testing.assert_allclose(V, Xi)
        np.testing.assert_array_equal(ro.W @ V, 0.0)


class TestRrmse:
    def test_exact(self):
        d = np.array([[1.0, 2.0, 4.0]])
        assert rrmse(d, d) == 0.0

    def test_chance(self, rng):
        d = rng.standard_normal((2, 50))
        assert rrmse(np.broadcast_to(d.mean(axis=1, keepdims=True), d.shape), d) == pytest.approx(1.0)

    def test_std_offset(self):
        # Centered energy 5 over 4 samples; an offset equal to the population
        # std gives squared error 4 * 1.25 = 5, hence exactly 1.
        d = np.array([1.0, 2.0, 3.0, 4.0])
        assert rrmse(d + np.sqrt(1.25), d) == pytest.approx(1.0, abs=1e-15)
        # Offset 1 gives sqrt(4 / 5).
        assert rrmse(d + 1.0, d) == pytest.approx(0.894427190999916, abs=1e-15)

    def test_constant_truth(self):
        with pytest.raises(ZeroDivisionError):
            rrmse([1.0, 2.0], [3.0, 3.0])

    @given(st.floats(0.0, 100.0), st.integers(0, 2**32 - 1))
    def test_scale_covariance(self, k, seed):
        rng = np.random.default_rng(seed)
        d = rng.standard_normal((1, 30))
        e = d + rng.standard_normal((1, 30))
        scaled = d + k * (e - d)
        assert rrmse(scaled, d) == pytest.approx(k * rrmse(e, d), rel=1e-9, abs=1e-12)


class TestRegularity:
    def test_noise_driven_full_rank(self, rng):
        params = tanh_network(n_r=100)
        R = drive(params, noisy_cosine(5000, 1.0, rng))
        rep = regularity_report(params, R[:, :-1])
        assert rep.rank_R == 100
        assert rep.conditions_met == (True, True, True)

    def test_periodic_rank_deficient(self):
        params = tanh_network(n_r=100)
        t = np.arange(1, 6001)
        R = drive(params, np.sin(np.pi * t / 50)[None])[:, 1000:]
        rep = regularity_report(params, R)
        assert rep.rank_R < 100
        assert rep.conditions_met[2] is False

    def test_zero_input_map(self):
        params = EsnParams(np.zeros((3, 1)), np.eye(3) * 0.5, Tanh())
        rep = regularity_report(params, np.ones((3, 4)))
        assert rep.rank_A == 0
        assert rep.conditions_met[1] is False

    def test_relu_not_invertible(self):
        params = EsnParams(np.ones((2, 1)), np.eye(2), Relu())
        assert regularity_report(params, np.eye(2)).activation_invertible is False
