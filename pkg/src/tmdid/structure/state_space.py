"""
Continuous state-space models of the shear frame.

The state is [displacements; velocities; identified stiffnesses]. The
stiffness rows and columns of A are zero: parameters have no dynamics of
their own.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from tmdid.core.models import SensorLayout, SensorType, ValidationError
from tmdid.structure.matrices import MatrixTriple, StructureSpec, assemble_matrices


@dataclass(frozen=True)
class ContinuousStateSpace:
    """x' = A x + B u, y = C_out x + D u.

    Attributes:
        A: System matrix (state_dim x state_dim)
        B: Input matrix (state_dim x n_dof); u carries the ground
            acceleration scaled by the influence vector
        C_out: Output matrix (output_dim x state_dim)
        D: Feedthrough matrix (output_dim x n_dof)
        n_dof: Kinematic DoFs (TMD included)
        n_params: Identified stiffness parameters appended to the state
        sensors: Sensor layout defining the output rows
        structure: Structure the matrices were assembled from
        identified: Story index of each stiffness parameter
    """

    A: np.ndarray
    B: np.ndarray
    C_out: np.ndarray
    D: np.ndarray
    n_dof: int
    n_params: int
    sensors: SensorLayout
    structure: Optional[StructureSpec]
    identified: tuple[int, ...]

    def __post_init__(self):
        n = self.state_dim
        if self.A.shape != (n, n):
            raise ValidationError(f"A has shape {self.A.shape}, expected {(n, n)}")
        if self.B.shape != (n, self.n_dof):
            raise ValidationError(f"B has shape {self.B.shape}")
        if self.C_out.shape != (self.output_dim, n):
            raise ValidationError(f"C_out has shape {self.C_out.shape}")
        if self.D.shape != (self.output_dim, self.n_dof):
            raise ValidationError(f"D has shape {self.D.shape}")
        for name in ("A", "B", "C_out", "D"):
            matrix = np.array(getattr(self, name), dtype=float)
            matrix.flags.writeable = False
            object.__setattr__(self, name, matrix)

    @property
    def state_dim(self) -> int:
        return 2 * self.n_dof + self.n_params

    @property
    def input_dim(self) -> int:
        return self.n_dof

    @property
    def output_dim(self) -> int:
        return self.sensors.count

    @property
    def kinematic_dim(self) -> int:
        return 2 * self.n_dof


def dynamic_blocks(mats: MatrixTriple) -> tuple[np.ndarray, np.ndarray]:
    """Return (-M^-1 K, -M^-1 C)."""
    return -linalg.solve(mats.M, mats.K), -linalg.solve(mats.M, mats.C)


def _output_matrices(
    stiff: np.ndarray, damp: np.ndarray, sensors: SensorLayout, n_params: int
) -> tuple[np.ndarray, np.ndarray]:
    n = stiff.shape[0]
    rows_c, rows_d = [], []
    for sensor in sensors.sensors:
        if sensor.dof >= n:
            raise ValidationError(f"sensor on DoF {sensor.dof} but model has {n}")
        c_row = np.zeros(2 * n + n_params)
        d_row = np.zeros(n)
        if sensor.kind is SensorType.DISPLACEMENT:
            c_row[sensor.dof] = 1.0
        elif sensor.kind is SensorType.VELOCITY:
            c_row[n + sensor.dof] = 1.0
        elif sensor.kind is SensorType.ACCELERATION:
            c_row[:n] = stiff[sensor.dof]
            c_row[n : 2 * n] = damp[sensor.dof]
            d_row[sensor.dof] = 1.0
        else:
            raise ValidationError(f"unsupported sensor type: {sensor.kind}")
        rows_c.append(c_row)
        rows_d.append(d_row)
    return np.array(rows_c), np.array(rows_d)


def _bare_structure(mats: MatrixTriple) -> StructureSpec:
    """Recover a TMD-free chain structure from its matrices."""
    n = mats.n_dof

    def story_values(matrix: np.ndarray) -> list[float]:
        upper = [-matrix[i - 1, i] for i in range(1, n)]
        first = matrix[0, 0] - (upper[0] if upper else 0.0)
        return [first] + upper

    return StructureSpec(
        story_masses=tuple(np.diag(mats.M)),
        story_damping=tuple(story_values(mats.C)),
        story_stiffness=tuple(story_values(mats.K)),
    )


def build_state_space(
    mats: MatrixTriple,
    sensors: SensorLayout,
    n_params: int = 0,
    *,
    structure: Optional[StructureSpec] = None,
    identified: Optional[Sequence[int]] = None,
) -> ContinuousStateSpace:
    """
    Assemble the continuous state-space model.

    Args:
        mats: Structural matrices
        sensors: Sensor layout (output rows, in order)
        n_params: Number of stiffness parameters appended to the state
        structure: Structure behind `mats`; needed to refresh stiffness
            when a TMD is present (inferred for bare chains)
        identified: Story index of each parameter (default 0..n_params-1)

    Returns:
        ContinuousStateSpace

    Raises:
        ValidationError: On unsupported sensors or inconsistent sizes
    """
    n = mats.n_dof
    identified = tuple(range(n_params)) if identified is None else tuple(identified)
    if len(identified) != n_params:
        raise ValidationError(
            f"{n_params} parameter(s) but {len(identified)} identified stor(ies)"
        )
    stiff, damp = dynamic_blocks(mats)
    p = n_params

    A = np.zeros((2 * n + p, 2 * n + p))
    A[:n, n : 2 * n] = np.eye(n)
    A[n : 2 * n, :n] = stiff
    A[n : 2 * n, n : 2 * n] = damp

    B = np.zeros((2 * n + p, n))
    B[n : 2 * n, :] = np.eye(n)

    C_out, D = _output_matrices(stiff, damp, sensors, p)

    if structure is None:
        try:
            structure = _bare_structure(mats)
        except ValidationError:
            structure = None
    if structure is not None and structure.n_dof != n:
        raise ValidationError(
            f"structure has {structure.n_dof} DoFs but matrices have {n}"
        )
    if structure is not None and any(
        not 0 <= s < structure.n_stories for s in identified
    ):
        raise ValidationError(f"identified stories {identified} out of range")

    return ContinuousStateSpace(
        A=A,
        B=B,
        C_out=C_out,
        D=D,
        n_dof=n,
        n_params=p,
        sensors=sensors,
        structure=structure,
        identified=identified,
    )


def update_stiffness(
    space: ContinuousStateSpace, mats: MatrixTriple, k_new: Sequence[float]
) -> ContinuousStateSpace:
    """
    Refresh the stiffness-dependent blocks for new parameter values.

    Only the -M^-1 K blocks of A and C_out change; every other block is
    carried over.

    Args:
        space: Model to update
        mats: Matrices the model was built from (M and C are reused)
        k_new: New stiffness of each identified story [N/m]

    Returns:
        Updated ContinuousStateSpace

    Raises:
        ValidationError: On non-positive stiffness or length mismatch
    """
    k_new = [float(k) for k in k_new]
    if len(k_new) != space.n_params:
        raise ValidationError(
            f"expected {space.n_params} stiffness value(s), got {len(k_new)}"
        )
    if any(not k > 0 for k in k_new):
        raise ValidationError(f"stiffness must be > 0, got {k_new}")
    if space.structure is None:
        raise ValidationError("model carries no structure to reassemble")

    stiffness = list(space.structure.story_stiffness)
    for story, k in zip(space.identified, k_new):
        stiffness[story] = k
    structure = space.structure.with_stiffness(stiffness)
    new_mats = MatrixTriple(K=assemble_matrices(structure).K, C=mats.C, M=mats.M)

    n, p = space.n_dof, space.n_params
    stiff, damp = dynamic_blocks(new_mats)
    A = np.array(space.A)
    A[n : 2 * n, :n] = stiff
    C_out, _ = _output_matrices(stiff, damp, space.sensors, p)
    return replace(space, A=A, C_out=C_out, structure=structure)
