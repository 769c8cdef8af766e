"""
Modal properties and Warburton tuning of a TMD.

Frequencies and mode shapes come from the undamped generalized
eigenproblem K phi = w^2 M phi. Damping ratios come from the complex
eigenvalues of the first-order state matrix, which stays valid once the
TMD makes the damping non-classical.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from tmdid.core.models import ValidationError
from tmdid.structure.matrices import MatrixTriple, TmdSpec

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class ModalProperties:
    """Modal properties sorted by ascending natural frequency.

    Attributes:
        natural_frequencies: Undamped natural frequencies [Hz]
        damping_ratios: Modal damping ratios [fraction]
        mode_shapes: Mass-normalized mode shapes (columns)
        generalized_masses: phi^T M phi with each shape scaled to unity
            at the reference DoF [kg]
        reference_dof: DoF used for the unity scaling
    """

    natural_frequencies: np.ndarray
    damping_ratios: np.ndarray
    mode_shapes: np.ndarray
    generalized_masses: np.ndarray
    reference_dof: int

    @property
    def n_modes(self) -> int:
        return len(self.natural_frequencies)

    @property
    def angular_frequencies(self) -> np.ndarray:
        return 2.0 * np.pi * self.natural_frequencies


@dataclass(frozen=True)
class WarburtonTuning:
    """Optimal TMD parameters for a lightly damped primary structure."""

    mass_ratio: float
    generalized_mass: float
    target_frequency: float
    optimal_frequency: float
    optimal_damping_ratio: float
    tmd: TmdSpec

    def format_summary(self) -> str:
        return "\n".join(
            [
                f"mass ratio mu:         {self.mass_ratio:.4f}",
                f"generalized mass m1:   {self.generalized_mass:.1f} kg",
                f"target frequency f1:   {self.target_frequency:.4f} Hz",
                f"optimal frequency:     {self.optimal_frequency:.4f} Hz",
                f"optimal damping ratio: {self.optimal_damping_ratio * 100:.2f} %",
                f"TMD mass:              {self.tmd.mass:.1f} kg",
                f"TMD stiffness:         {self.tmd.stiffness:.1f} N/m",
                f"TMD damping:           {self.tmd.damping:.2f} N*s/m",
            ]
        )


def _check_symmetric(name: str, matrix: np.ndarray) -> None:
    scale = max(np.max(np.abs(matrix)), 1.0)
    if np.max(np.abs(matrix - matrix.T)) > SYMMETRY_RTOL * scale:
        raise ValidationError(f"{name} is not symmetric")


def state_matrix(mats: MatrixTriple) -> np.ndarray:
    """First-order system matrix [[0, I], [-M^-1 K, -M^-1 C]]."""
    n = mats.n_dof
    minv_k = linalg.solve(mats.M, mats.K)
    minv_c = linalg.solve(mats.M, mats.C)
    return np.block([[np.zeros((n, n)), np.eye(n)], [-minv_k, -minv_c]])


def _damped_modes(mats: MatrixTriple) -> tuple[np.ndarray, np.ndarray]:
    """Natural frequencies [rad/s] and damping ratios from the state matrix."""
    eigvals = linalg.eigvals(state_matrix(mats))
    tol = 1e-12 * max(np.max(np.abs(eigvals)), 1.0)

    omegas, zetas = [], []
    for lam in eigvals[eigvals.imag > tol]:
        omega = abs(lam)
        omegas.append(omega)
        zetas.append(-lam.real / omega)

    # Overdamped modes appear as pairs of real eigenvalues
    real = np.sort(eigvals[np.abs(eigvals.imag) <= tol].real)
    for a, b in zip(real[0::2], real[1::2]):
        omega = math.sqrt(a * b)
        omegas.append(omega)
        zetas.append(-(a + b) / (2.0 * omega))

    order = np.argsort(omegas, kind="stable")
    return np.asarray(omegas)[order], np.asarray(zetas)[order]


def modal_analysis(
    mats: MatrixTriple, reference_dof: Optional[int] = None
) -> ModalProperties:
    """
    Compute natural frequencies, damping ratios and mode shapes.

    Args:
        mats: Structural matrices
        reference_dof: DoF at which shapes are scaled to unity for the
            generalized masses (default: last DoF, the top story of a
            bare frame)

    Returns:
        ModalProperties sorted by ascending frequency

    Raises:
        ValidationError: On non-symmetric, singular or indefinite input
    """
    _check_symmetric("K", mats.K)
    _check_symmetric("C", mats.C)
    _check_symmetric("M", mats.M)
    n = mats.n_dof
    ref = n - 1 if reference_dof is None else reference_dof
    if not 0 <= ref < n:
        raise ValidationError(f"reference DoF {ref} outside 0..{n - 1}")

    try:
        eigvals, shapes = linalg.eigh(mats.K, mats.M)
    except linalg.LinAlgError as e:
        raise ValidationError(f"mass matrix is singular or indefinite: {e}") from e

    if np.any(eigvals <= 1e-12 * max(np.max(np.abs(eigvals)), 1.0)):
        raise ValidationError("stiffness matrix is singular (rigid-body mode)")

    order = np.argsort(eigvals, kind="stable")
    eigvals = eigvals[order]
    shapes = shapes[:, order]
    frequencies = np.sqrt(eigvals) / (2.0 * np.pi)

    omegas, zetas = _damped_modes(mats)
    if len(zetas) != n:
        raise ValidationError(
            f"state matrix yields {len(zetas)} modes for {n} DoFs"
        )

    generalized = np.empty(n)
    for j in range(n):
        phi = shapes[:, j]
        pivot = phi[ref]
        if abs(pivot) < 1e-12 * np.max(np.abs(phi)):
            pivot = phi[np.argmax(np.abs(phi))]
        phi = phi / pivot
        generalized[j] = phi @ mats.M @ phi

    logger.debug(
        "modal analysis: f=%s Hz, D=%s",
        np.array2string(frequencies, precision=4),
        np.array2string(zetas, precision=4),
    )
    return ModalProperties(
        natural_frequencies=frequencies,
        damping_ratios=zetas,
        mode_shapes=shapes,
        generalized_masses=generalized,
        reference_dof=ref,
    )


def warburton_parameters(modal: ModalProperties, m_d: float) -> WarburtonTuning:
    """
    Warburton-optimal TMD tuned to the first mode.

    Args:
        modal: Modal properties of the bare structure, with generalized
            masses scaled at the TMD attachment DoF
        m_d: TMD mass [kg]

    Returns:
        WarburtonTuning including the resulting TmdSpec

    Raises:
        ValidationError: If m_d is not positive
    """
    if not m_d > 0:
        raise ValidationError(f"TMD mass must be > 0, got {m_d}")
    m1 = float(modal.generalized_masses[0])
    f1 = float(modal.natural_frequencies[0])
    mu = m_d / m1
    f_opt = f1 * math.sqrt(1.0 - mu / 2.0) / (1.0 + mu)
    d_opt = math.sqrt(mu * (1.0 - mu / 4.0) / (4.0 * (1.0 + mu) * (1.0 - mu / 2.0)))
    omega = 2.0 * math.pi * f_opt
    tmd = TmdSpec(
        mass=m_d,
        stiffness=m_d * omega**2,
        damping=2.0 * d_opt * m_d * omega,
    )
    return WarburtonTuning(
        mass_ratio=mu,
        generalized_mass=m1,
        target_frequency=f1,
        optimal_frequency=f_opt,
        optimal_damping_ratio=d_opt,
        tmd=tmd,
    )


def warburton_tune(mats: MatrixTriple, modal: ModalProperties, m_d: float) -> TmdSpec:
    """Warburton TMD for the structure described by `mats` and `modal`."""
    if mats.n_dof < 1 or modal.n_modes != mats.n_dof:
        raise ValidationError("modal properties do not match the matrices")
    return warburton_parameters(modal, m_d).tmd
