"""
Unscented Kalman filter over the augmented state.

Sigma points are stored as rows, shape (2n+1, n). The state-equation and
observation closures map a whole set of points at once:

    transition(points, u) -> propagated points   (2n+1, n)
    observe(points, u)    -> predicted outputs   (2n+1, m)
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy import linalg

from tmdid.core.models import FilterDivergenceError, ValidationError
from tmdid.dynamics.discretization import check_order
from tmdid.estimation.linalg import jitter_cholesky, solve_spd, symmetrize

logger = logging.getLogger(__name__)

Transition = Callable[[np.ndarray, np.ndarray], np.ndarray]
Observation = Callable[[np.ndarray, np.ndarray], np.ndarray]

PSD_TOL = 1e-12


def _check_psd(name: str, matrix: np.ndarray, definite: bool = False) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValidationError(f"{name} contains non-finite values")
    scale = max(float(np.max(np.abs(matrix))), np.finfo(float).tiny)
    if np.max(np.abs(matrix - matrix.T)) > PSD_TOL * scale:
        raise ValidationError(f"{name} is not symmetric")
    smallest = float(np.min(linalg.eigvalsh(matrix)))
    if definite and not smallest > 0:
        raise ValidationError(f"{name} must be positive definite")
    if smallest < -PSD_TOL * scale * matrix.shape[0]:
        raise ValidationError(f"{name} must be positive semi-definite")


@dataclass(frozen=True)
class FilterConfig:
    """UKF scaling and noise setup.

    Attributes:
        alpha: Sigma-point spread, 0 < alpha <= 1
        beta: Prior-distribution factor (2 is optimal for Gaussians)
        kappa: Secondary scaling
        P0: Initial state covariance (n x n)
        Q: Process-noise covariance (n x n)
        R: Measurement-noise covariance (m x m)
        taylor_order: Discretization order of the state equation (1..4
            or "exact")
    """

    P0: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    alpha: float = 0.001
    beta: float = 2.0
    kappa: float = 0.0
    taylor_order: Union[int, str] = 2

    def __post_init__(self):
        for name in ("P0", "Q", "R"):
            matrix = np.array(np.atleast_2d(getattr(self, name)), dtype=float)
            matrix.flags.writeable = False
            object.__setattr__(self, name, matrix)
        if not 0 < self.alpha <= 1:
            raise ValidationError(f"alpha must be in (0, 1], got {self.alpha}")
        _check_psd("P0", self.P0)
        _check_psd("Q", self.Q)
        _check_psd("R", self.R, definite=True)
        if self.Q.shape != self.P0.shape:
            raise ValidationError(
                f"Q has shape {self.Q.shape} but P0 has shape {self.P0.shape}"
            )
        if not self.state_dim + self.lambda_ > 0:
            raise ValidationError(
                f"n + lambda must be > 0 (n={self.state_dim}, lambda={self.lambda_})"
            )
        object.__setattr__(self, "taylor_order", check_order(self.taylor_order))

    @classmethod
    def from_scalars(
        cls,
        n_dof: int,
        n_params: int,
        n_outputs: int,
        p0: float,
        q: float,
        r: float,
        *,
        p0_param: Optional[float] = None,
        q_param: Optional[float] = None,
        stiffness_unit: float = 1000.0,
        **kwargs,
    ) -> "FilterConfig":
        """
        Diagonal P0, Q and R from scalar values.

        Parameter-block values (p0_param, q_param, default p0 and q) are
        given in stiffness_unit^2 and converted to (N/m)^2.
        """
        if not stiffness_unit > 0:
            raise ValidationError(f"stiffness_unit must be > 0, got {stiffness_unit}")
        n_kin = 2 * n_dof
        scale = stiffness_unit**2
        p0_param = p0 if p0_param is None else p0_param
        q_param = q if q_param is None else q_param
        P0 = np.diag([p0] * n_kin + [p0_param * scale] * n_params)
        Q = np.diag([q] * n_kin + [q_param * scale] * n_params)
        return cls(P0=P0, Q=Q, R=r * np.eye(n_outputs), **kwargs)

    @property
    def state_dim(self) -> int:
        return self.P0.shape[0]

    @property
    def output_dim(self) -> int:
        return self.R.shape[0]

    @property
    def lambda_(self) -> float:
        n = self.state_dim
        return self.alpha**2 * (n + self.kappa) - n

    def weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance weights (Wm, Wc) of the 2n+1 points."""
        n = self.state_dim
        lam = self.lambda_
        Wm = np.full(2 * n + 1, 1.0 / (2.0 * (n + lam)))
        Wc = Wm.copy()
        Wm[0] = lam / (n + lam)
        Wc[0] = Wm[0] + 1.0 - self.alpha**2 + self.beta
        return Wm, Wc


@dataclass(frozen=True)
class AugmentedState:
    """Filter estimate [displacements; velocities; stiffnesses] at step k."""

    mean: np.ndarray
    covariance: np.ndarray
    step: int
    n_dof: int
    n_params: int

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.covariance, dtype=float)
        n = 2 * self.n_dof + self.n_params
        if mean.shape != (n,) or cov.shape != (n, n):
            raise ValidationError(
                f"state of dimension {n} got mean {mean.shape}, covariance {cov.shape}"
            )
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def initial(
        cls,
        n_dof: int,
        stiffness: np.ndarray,
        covariance: np.ndarray,
        kinematic: Optional[np.ndarray] = None,
    ) -> "AugmentedState":
        """Prior at step 0; kinematic states default to rest."""
        stiffness = np.asarray(stiffness, dtype=float).reshape(-1)
        kin = np.zeros(2 * n_dof) if kinematic is None else np.asarray(kinematic)
        return cls(
            mean=np.concatenate([kin, stiffness]),
            covariance=covariance,
            step=0,
            n_dof=n_dof,
            n_params=len(stiffness),
        )

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def kinematic_dim(self) -> int:
        return 2 * self.n_dof

    @property
    def displacements(self) -> np.ndarray:
        return self.mean[: self.n_dof]

    @property
    def velocities(self) -> np.ndarray:
        return self.mean[self.n_dof : 2 * self.n_dof]

    @property
    def parameters(self) -> np.ndarray:
        return self.mean[2 * self.n_dof :]

    @property
    def parameter_variances(self) -> np.ndarray:
        return np.diag(self.covariance)[2 * self.n_dof :]

    def parameter_slot(self, index: int) -> int:
        """State index of parameter `index`."""
        if not 0 <= index < self.n_params:
            raise ValidationError(
                f"parameter index {index} outside 0..{self.n_params - 1}"
            )
        return 2 * self.n_dof + index

    def evolve(self, **changes) -> "AugmentedState":
        return replace(self, **changes)


@dataclass(frozen=True)
class SigmaPointSet:
    """Sigma points (rows) and their weights."""

    points: np.ndarray
    Wm: np.ndarray
    Wc: np.ndarray

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def mean(self) -> np.ndarray:
        # Offsets from the centre point keep the large central weight
        # from cancelling against the others
        center = self.points[0]
        return center + self.Wm[1:] @ (self.points[1:] - center)


@dataclass(frozen=True)
class Innovation:
    """Measurement-update quantities of one correction."""

    e: np.ndarray
    Pyy: np.ndarray
    Pxy: np.ndarray
    K_gain: np.ndarray
    y_hat: np.ndarray


def _cross(Wc: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.T * Wc) @ b


def sigma_points(state: AugmentedState, cfg: FilterConfig) -> SigmaPointSet:
    """
    Sigma points mean, mean + columns and mean - columns of sqrt((n+lambda) P).

    Raises:
        FilterDivergenceError: If (n+lambda) P cannot be factorized
    """
    n = state.dim
    if n != cfg.state_dim:
        raise ValidationError(
            f"state has dimension {n}, filter expects {cfg.state_dim}"
        )
    try:
        root = jitter_cholesky((n + cfg.lambda_) * state.covariance)
    except linalg.LinAlgError as e:
        raise FilterDivergenceError(
            f"covariance not factorizable: {e}", state.step
        ) from e

    offsets = root.T
    points = np.vstack([state.mean, state.mean + offsets, state.mean - offsets])
    Wm, Wc = cfg.weights()
    return SigmaPointSet(points=points, Wm=Wm, Wc=Wc)


def _check_finite(name: str, values: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(values)):
        raise FilterDivergenceError(f"non-finite {name}", step)


def predict(
    state: AugmentedState, u: np.ndarray, cfg: FilterConfig, model: Transition
) -> tuple[AugmentedState, SigmaPointSet]:
    """
    Propagate sigma points through the state equation.

    Returns:
        (predicted state at step k+1, propagated sigma points)

    Raises:
        FilterDivergenceError: On non-finite propagated points
    """
    sigmas = sigma_points(state, cfg)
    propagated = np.asarray(model(sigmas.points, u), dtype=float)
    _check_finite("propagated sigma points", propagated, state.step + 1)
    if propagated.shape != sigmas.points.shape:
        raise ValidationError(
            f"state equation returned shape {propagated.shape}, "
            f"expected {sigmas.points.shape}"
        )
    moved = replace(sigmas, points=propagated)
    mean = moved.mean()
    dev = propagated - mean
    cov = symmetrize(_cross(sigmas.Wc, dev, dev) + cfg.Q)
    return state.evolve(mean=mean, covariance=cov, step=state.step + 1), moved


def correct(
    predicted: AugmentedState,
    propagated: SigmaPointSet,
    y: np.ndarray,
    u: np.ndarray,
    cfg: FilterConfig,
    obs: Observation,
) -> tuple[AugmentedState, Innovation]:
    """
    Measurement update of the predicted state.

    Returns:
        (corrected state, Innovation)

    Raises:
        FilterDivergenceError: If the innovation covariance is not
            positive definite or values become non-finite
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (cfg.output_dim,):
        raise ValidationError(
            f"measurement has shape {y.shape}, expected ({cfg.output_dim},)"
        )
    step = predicted.step
    outputs = np.asarray(obs(propagated.points, u), dtype=float)
    _check_finite("predicted measurements", outputs, step)

    y_hat = replace(propagated, points=outputs).mean()
    dy = outputs - y_hat
    dx = propagated.points - predicted.mean
    Pyy = symmetrize(_cross(propagated.Wc, dy, dy) + cfg.R)
    Pxy = _cross(propagated.Wc, dx, dy)
    try:
        gain = solve_spd(Pyy, Pxy.T).T
    except linalg.LinAlgError as e:
        raise FilterDivergenceError(
            f"innovation covariance not positive definite: {e}", step
        ) from e

    e = y - y_hat
    mean = predicted.mean + gain @ e
    cov = symmetrize(predicted.covariance - gain @ Pyy @ gain.T)
    _check_finite("corrected state", mean, step)
    _check_finite("corrected covariance", cov, step)
    innovation = Innovation(e=e, Pyy=Pyy, Pxy=Pxy, K_gain=gain, y_hat=y_hat)
    return predicted.evolve(mean=mean, covariance=cov), innovation


def ukf_step(
    state: AugmentedState,
    u_k: np.ndarray,
    y_k1: np.ndarray,
    u_k1: np.ndarray,
    cfg: FilterConfig,
    model: Transition,
    obs: Observation,
) -> tuple[AugmentedState, Innovation]:
    """One filter cycle k -> k+1: predict with u_k, correct with (y_k1, u_k1)."""
    predicted, propagated = predict(state, u_k, cfg, model)
    return correct(predicted, propagated, y_k1, u_k1, cfg, obs)
