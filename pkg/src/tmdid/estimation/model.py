"""
State-equation and observation closures of the shear frame.

Every sigma point carries its own stiffness values, so the stiffness
block of the dynamics is rebuilt and discretized per point. All points of
one step are handled as a stack of matrices.
"""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from tmdid.core.models import SensorLayout, SensorType, ValidationError
from tmdid.dynamics.discretization import (
    EXACT,
    Order,
    check_order,
    exact_series,
    taylor_series,
)
from tmdid.structure.matrices import (
    StructureSpec,
    assemble_matrices,
    stiffness_patterns,
)
from tmdid.structure.state_space import ContinuousStateSpace, build_state_space

logger = logging.getLogger(__name__)


class StructuralFilterModel:
    """
    Augmented shear-frame model [x; v; theta] for the UKF.

    theta holds the stiffnesses of the identified stories [N/m]. The
    stiffness matrix is K(theta) = K_rest + sum_j theta_j * pattern_j.

    Args:
        structure: Nominal structure (masses, damping, TMD, influence)
        sensors: Sensor layout defining the outputs
        ts: Sampling time [s]
        order: Taylor order 1..4 or "exact"
        identified: Stories whose stiffness is estimated (default all)
    """

    def __init__(
        self,
        structure: StructureSpec,
        sensors: SensorLayout,
        ts: float,
        order: Order = 2,
        identified: Optional[Sequence[int]] = None,
    ):
        if not ts > 0:
            raise ValidationError(f"sampling time must be > 0, got {ts}")
        if identified is None:
            identified = range(structure.n_stories)
        identified = tuple(identified)
        if not identified:
            raise ValidationError("at least one story must be identified")
        if len(set(identified)) != len(identified):
            raise ValidationError(f"duplicate identified stories: {identified}")
        if any(not 0 <= s < structure.n_stories for s in identified):
            raise ValidationError(
                f"identified stories {identified} outside 0..{structure.n_stories - 1}"
            )
        for sensor in sensors.sensors:
            if sensor.dof >= structure.n_dof:
                raise ValidationError(
                    f"sensor on DoF {sensor.dof} but model has {structure.n_dof}"
                )

        self.structure = structure
        self.sensors = sensors
        self.ts = float(ts)
        self.order = check_order(order)
        self.identified = identified

        mats = assemble_matrices(structure)
        n = structure.n_dof
        nominal = np.array([structure.story_stiffness[s] for s in identified])
        patterns = stiffness_patterns(structure, identified)
        k_rest = mats.K - np.einsum("p,pij->ij", nominal, patterns)

        self._minv_k_rest = linalg.solve(mats.M, k_rest)
        self._minv_c = linalg.solve(mats.M, mats.C)
        self._minv_patterns = np.stack([linalg.solve(mats.M, p) for p in patterns])
        self._influence = np.array(structure.influence)
        self._B = np.vstack([np.zeros((n, n)), np.eye(n)])
        self._selectors = [(s.kind, s.dof) for s in sensors.sensors]

    @property
    def n_dof(self) -> int:
        return self.structure.n_dof

    @property
    def n_params(self) -> int:
        return len(self.identified)

    @property
    def state_dim(self) -> int:
        return 2 * self.n_dof + self.n_params

    @property
    def output_dim(self) -> int:
        return self.sensors.count

    @property
    def nominal_stiffness(self) -> np.ndarray:
        return np.array([self.structure.story_stiffness[s] for s in self.identified])

    def with_order(self, order: Order) -> "StructuralFilterModel":
        return StructuralFilterModel(
            self.structure, self.sensors, self.ts, order, self.identified
        )

    def input_vector(self, ground_accel: float) -> np.ndarray:
        """Model input u = influence * ground acceleration."""
        return self._influence * float(ground_accel)

    def stiffness_block(self, theta: np.ndarray) -> np.ndarray:
        """M^-1 K(theta) for a stack of parameter vectors (N, p) -> (N, n, n)."""
        theta = np.atleast_2d(theta)
        return self._minv_k_rest + np.einsum("np,pij->nij", theta, self._minv_patterns)

    def _split(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        points = np.atleast_2d(points)
        if points.shape[1] != self.state_dim:
            raise ValidationError(
                f"points have dimension {points.shape[1]}, model has {self.state_dim}"
            )
        n = self.n_dof
        return points[:, :n], points[:, n : 2 * n], points[:, 2 * n :]

    def discretize(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Discrete kinematic blocks for a stack of parameter vectors.

        Returns:
            (A_d, B_d) of shapes (N, 2n, 2n) and (N, 2n, n)
        """
        minv_k = self.stiffness_block(theta)
        count, n = minv_k.shape[0], self.n_dof
        A = np.zeros((count, 2 * n, 2 * n))
        A[:, :n, n:] = np.eye(n)
        A[:, n:, :n] = -minv_k
        A[:, n:, n:] = -self._minv_c
        if self.order == EXACT:
            return exact_series(A, self._B, self.ts)
        A_d, B_d, _ = taylor_series(A, self._B, self.ts, self.order)
        return A_d, B_d

    def transition(self, points: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Advance every point one sample; stiffnesses are held constant."""
        x, v, theta = self._split(points)
        A_d, B_d = self.discretize(theta)
        kin = np.concatenate([x, v], axis=1)
        kin_next = np.einsum("nij,nj->ni", A_d, kin) + B_d @ np.asarray(u, dtype=float)
        return np.concatenate([kin_next, theta], axis=1)

    def observe(self, points: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Sensor outputs of every point: C_out(theta) x + D u."""
        x, v, theta = self._split(points)
        u = np.asarray(u, dtype=float)
        accel = (
            -np.einsum("nij,nj->ni", self.stiffness_block(theta), x)
            - v @ self._minv_c.T
            + u
        )
        columns = []
        for kind, dof in self._selectors:
            if kind is SensorType.DISPLACEMENT:
                columns.append(x[:, dof])
            elif kind is SensorType.VELOCITY:
                columns.append(v[:, dof])
            else:
                columns.append(accel[:, dof])
        return np.stack(columns, axis=1)

    def state_space(self, theta: Optional[np.ndarray] = None) -> ContinuousStateSpace:
        """Continuous augmented model at the given (default nominal) stiffness."""
        structure = self.structure
        if theta is not None:
            stiffness = list(structure.story_stiffness)
            for story, k in zip(self.identified, np.asarray(theta, dtype=float)):
                stiffness[story] = float(k)
            structure = structure.with_stiffness(stiffness)
        return build_state_space(
            assemble_matrices(structure),
            self.sensors,
            self.n_params,
            structure=structure,
            identified=self.identified,
        )
