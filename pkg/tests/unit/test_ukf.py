"""Unit tests for the unscented Kalman filter core."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg

from tmdid.core.models import FilterDivergenceError, ValidationError
from tmdid.estimation.linalg import jitter_cholesky, solve_spd, symmetrize
from tmdid.estimation.ukf import (
    AugmentedState,
    FilterConfig,
    correct,
    predict,
    sigma_points,
    ukf_step,
)

F = np.array([[1.0, 0.02], [-0.2, 0.99]])
H = np.array([[1.0, 0.5]])


def linear_transition(points, u):
    return points @ F.T + u


def linear_observation(points, u):
    return points @ H.T


def kinematic_state(mean, cov):
    return AugmentedState(mean=mean, covariance=cov, step=0, n_dof=1, n_params=0)


class TestLinalg:
    """Tests for the linear-algebra helpers."""

    def test_symmetrize(self):
        """Test (P + P^T) / 2."""
        matrix = np.array([[1.0, 2.0], [0.0, 1.0]])
        assert_allclose(symmetrize(matrix), [[1.0, 1.0], [1.0, 1.0]])

    def test_cholesky_plain(self):
        """Test a definite matrix factorizes without jitter."""
        matrix = np.array([[4.0, 2.0], [2.0, 3.0]])
        factor = jitter_cholesky(matrix)
        assert_allclose(factor @ factor.T, matrix)

    def test_cholesky_jitter(self, caplog):
        """Test a singular PSD matrix factorizes with jitter."""
        matrix = np.array([[1.0, 1.0], [1.0, 1.0]])
        factor = jitter_cholesky(matrix)
        assert_allclose(factor @ factor.T, matrix, atol=1e-5)
        assert "jitter" in caplog.text

    def test_cholesky_zero(self):
        """Test the zero matrix has the zero factor."""
        assert_allclose(jitter_cholesky(np.zeros((3, 3))), 0.0)

    def test_cholesky_indefinite(self):
        """Test an indefinite matrix is not forced through."""
        with pytest.raises(linalg.LinAlgError):
            jitter_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_solve_spd(self):
        """Test the SPD solve against a direct solve."""
        matrix = np.array([[4.0, 1.0], [1.0, 3.0]])
        rhs = np.array([1.0, 2.0])
        assert_allclose(solve_spd(matrix, rhs), np.linalg.solve(matrix, rhs))


class TestFilterConfig:
    """Tests for FilterConfig."""

    def test_weights_sum(self):
        """Test the mean weights sum to one for a tiny alpha."""
        cfg = FilterConfig.from_scalars(3, 2, 2, 1e-6, 1e-9, 1e-4)
        Wm, Wc = cfg.weights()
        assert len(Wm) == 2 * 8 + 1
        assert Wm.sum() == pytest.approx(1.0, abs=1e-8)
        assert Wc[0] == pytest.approx(Wm[0] + 1.0 - 1e-6 + 2.0)

    def test_lambda(self):
        """Test lambda = alpha^2 (n + kappa) - n."""
        cfg = FilterConfig.from_scalars(3, 2, 2, 1e-6, 1e-9, 1e-4)
        assert cfg.state_dim == 8
        assert cfg.lambda_ == pytest.approx(1e-6 * 8 - 8)

    def test_from_scalars_scaling(self):
        """Test parameter-block values are scaled by stiffness_unit^2."""
        cfg = FilterConfig.from_scalars(
            2, 2, 2, 1e-6, 1e-9, 1e-4, p0_param=1.0, stiffness_unit=1000.0
        )
        assert_allclose(np.diag(cfg.P0), [1e-6] * 4 + [1e6] * 2)
        assert_allclose(np.diag(cfg.Q), [1e-9] * 4 + [1e-3] * 2)
        assert_allclose(cfg.R, 1e-4 * np.eye(2))

    def test_invalid_alpha(self):
        """Test alpha outside (0, 1] is rejected."""
        with pytest.raises(ValidationError, match="alpha"):
            FilterConfig(P0=np.eye(2), Q=np.eye(2), R=np.eye(1), alpha=0.0)

    def test_singular_r(self):
        """Test R must be positive definite."""
        with pytest.raises(ValidationError, match="R must be positive definite"):
            FilterConfig(P0=np.eye(2), Q=np.eye(2), R=np.zeros((1, 1)))

    def test_shape_mismatch(self):
        """Test Q must match P0."""
        with pytest.raises(ValidationError, match="Q has shape"):
            FilterConfig(P0=np.eye(2), Q=np.eye(3), R=np.eye(1))

    def test_negative_p0(self):
        """Test an indefinite P0 is rejected."""
        with pytest.raises(ValidationError, match="P0"):
            FilterConfig(P0=-np.eye(2), Q=np.eye(2), R=np.eye(1))


class TestAugmentedState:
    """Tests for AugmentedState."""

    def test_initial(self):
        """Test the prior starts at rest with the given stiffness."""
        state = AugmentedState.initial(2, [12000.0, 10000.0], np.eye(6))
        assert state.step == 0
        assert_allclose(state.displacements, 0.0)
        assert_allclose(state.velocities, 0.0)
        assert_allclose(state.parameters, [12000.0, 10000.0])
        assert state.parameter_slot(1) == 5

    def test_parameter_slot_range(self):
        """Test an out-of-range parameter index is rejected."""
        state = AugmentedState.initial(2, [12000.0, 10000.0], np.eye(6))
        with pytest.raises(ValidationError):
            state.parameter_slot(2)

    def test_dimension_mismatch(self):
        """Test mean and covariance must fit the dimensions."""
        with pytest.raises(ValidationError):
            AugmentedState(np.zeros(5), np.eye(6), 0, 2, 2)


class TestSigmaPoints:
    """Tests for sigma_points()."""

    @pytest.mark.parametrize("alpha", [1.0, 1e-3])
    def test_moments(self, alpha, rng):
        """Test the points reproduce the mean and covariance."""
        root = rng.normal(size=(4, 4))
        cov = root @ root.T + 0.1 * np.eye(4)
        mean = rng.normal(size=4)
        state = AugmentedState(mean, cov, 0, 1, 2)
        cfg = FilterConfig(P0=cov, Q=np.zeros((4, 4)), R=np.eye(1), alpha=alpha)

        sigmas = sigma_points(state, cfg)
        assert sigmas.count == 9
        assert_allclose(sigmas.points[0], mean)
        assert_allclose(sigmas.mean(), mean, atol=1e-9)
        dev = sigmas.points - mean
        assert_allclose((dev.T * sigmas.Wc) @ dev, cov, rtol=1e-7, atol=1e-9)

    def test_moments_random(self, rng):
        """Test mean and covariance over random sizes, spreads and alphas."""
        for _ in range(100):
            n_dof = int(rng.integers(1, 4))
            n_params = int(rng.integers(0, 3))
            dim = 2 * n_dof + n_params
            root = rng.normal(size=(dim, dim)) * 10.0 ** rng.uniform(-3, 1)
            cov = root @ root.T + 1e-6 * np.eye(dim)
            mean = rng.normal(size=dim)
            alpha = 10.0 ** rng.uniform(-3, 0)
            state = AugmentedState(mean, cov, 0, n_dof, n_params)
            cfg = FilterConfig(
                P0=cov, Q=np.zeros((dim, dim)), R=np.eye(1), alpha=alpha
            )

            sigmas = sigma_points(state, cfg)
            assert sigmas.count == 2 * dim + 1
            assert_allclose(sigmas.mean(), mean, rtol=1e-9, atol=1e-9)
            dev = sigmas.points - mean
            scale = np.max(np.abs(cov))
            assert_allclose(
                (dev.T * sigmas.Wc) @ dev, cov, rtol=1e-6, atol=1e-9 * scale
            )

    def test_not_factorizable(self):
        """Test a negative covariance is reported as divergence."""
        state = kinematic_state(np.zeros(2), -np.eye(2))
        cfg = FilterConfig(P0=np.eye(2), Q=np.eye(2), R=np.eye(1))
        with pytest.raises(FilterDivergenceError) as exc_info:
            sigma_points(state, cfg)
        assert exc_info.value.step == 0


class TestFilterSteps:
    """Tests for predict(), correct() and ukf_step()."""

    @pytest.fixture
    def cfg(self):
        return FilterConfig(
            P0=np.diag([0.5, 0.2]),
            Q=np.diag([1e-3, 2e-3]),
            R=np.array([[0.05]]),
            alpha=1.0,
        )

    def test_linear_prediction(self, cfg):
        """Test prediction of a linear model gives F x and F P F^T + Q."""
        state = kinematic_state(np.array([1.0, -0.5]), cfg.P0)
        predicted, moved = predict(state, np.zeros(2), cfg, linear_transition)
        assert predicted.step == 1
        assert_allclose(predicted.mean, F @ state.mean)
        assert_allclose(predicted.covariance, F @ cfg.P0 @ F.T + cfg.Q)
        assert moved.count == 5

    @pytest.mark.parametrize("alpha", [1.0, 1e-3])
    def test_matches_linear_kalman_filter(self, cfg, rng, alpha):
        """Test the UKF equals the Kalman filter on a noise-free linear model."""
        cfg = FilterConfig(P0=cfg.P0, Q=np.zeros((2, 2)), R=cfg.R, alpha=alpha)
        x_ukf = kinematic_state(np.array([0.3, 0.0]), cfg.P0)
        x_kf = np.array([0.3, 0.0])
        P_kf = np.array(cfg.P0)
        u = np.zeros(2)
        for _ in range(1000):
            y = rng.normal(size=1)
            x_ukf, innov = ukf_step(
                x_ukf, u, y, u, cfg, linear_transition, linear_observation
            )

            x_pred = F @ x_kf
            P_pred = F @ P_kf @ F.T
            S = H @ P_pred @ H.T + cfg.R
            gain = P_pred @ H.T @ np.linalg.inv(S)
            x_kf = x_pred + gain @ (y - H @ x_pred)
            P_kf = P_pred - gain @ S @ gain.T

        assert_allclose(x_ukf.mean, x_kf, rtol=1e-7, atol=1e-9)
        assert_allclose(x_ukf.covariance, P_kf, rtol=1e-7, atol=1e-12)
        assert_allclose(innov.Pyy, S, rtol=1e-7)

    def test_correction_contracts_covariance(self, cfg):
        """Test the corrected covariance trace does not exceed the prediction."""
        state = kinematic_state(np.array([1.0, 0.0]), cfg.P0)
        predicted, moved = predict(state, np.zeros(2), cfg, linear_transition)
        corrected, innov = correct(
            predicted, moved, np.array([0.7]), np.zeros(2), cfg, linear_observation
        )
        assert np.trace(corrected.covariance) <= np.trace(predicted.covariance)
        assert_allclose(innov.e, 0.7 - innov.y_hat)

    def test_measurement_shape(self, cfg):
        """Test a measurement of the wrong size is rejected."""
        state = kinematic_state(np.zeros(2), cfg.P0)
        predicted, moved = predict(state, np.zeros(2), cfg, linear_transition)
        with pytest.raises(ValidationError, match="measurement has shape"):
            correct(predicted, moved, np.zeros(2), np.zeros(2), cfg, linear_observation)

    def test_non_finite_prediction(self, cfg):
        """Test NaN in the propagated points raises divergence at k+1."""

        def broken(points, u):
            return np.full_like(points, np.nan)

        state = kinematic_state(np.zeros(2), cfg.P0).evolve(step=7)
        with pytest.raises(FilterDivergenceError) as exc_info:
            predict(state, np.zeros(2), cfg, broken)
        assert exc_info.value.step == 8
