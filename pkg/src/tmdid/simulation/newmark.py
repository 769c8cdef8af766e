"""Newmark-beta integration of M x'' + C x' + K x = M Gamma ag(t)."""

from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from tmdid.core.models import ValidationError


def newmark_response(
    M: np.ndarray,
    C: np.ndarray,
    K: np.ndarray,
    ground_accel: Sequence[float],
    dt: float,
    gamma: float = 0.5,
    beta: float = 0.25,
    influence: Optional[Sequence[float]] = None,
    x0: Optional[Sequence[float]] = None,
    v0: Optional[Sequence[float]] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Integrate the equation of motion with the Newmark-beta method.

    The defaults (gamma=1/2, beta=1/4) give the unconditionally stable
    average-acceleration scheme.

    Args:
        M, C, K: Structural matrices (n x n)
        ground_accel: Ground acceleration at every step [m/s^2]
        dt: Integration step [s]
        gamma, beta: Newmark parameters
        influence: Influence vector (default all ones)
        x0, v0: Initial displacements and velocities (default rest)

    Returns:
        (x, v, a), each of shape (n_steps, n)
    """
    M, C, K = (np.asarray(m, dtype=float) for m in (M, C, K))
    n = M.shape[0]
    ag = np.asarray(ground_accel, dtype=float).reshape(-1)
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    if gamma < 0.5 or not beta > 0:
        raise ValidationError(f"invalid Newmark parameters gamma={gamma}, beta={beta}")
    if M.shape != (n, n) or C.shape != (n, n) or K.shape != (n, n):
        raise ValidationError("M, C and K must be square and of equal size")
    gam = np.ones(n) if influence is None else np.asarray(influence, dtype=float)

    steps = len(ag)
    x = np.zeros((steps, n))
    v = np.zeros((steps, n))
    a = np.zeros((steps, n))
    if x0 is not None:
        x[0] = x0
    if v0 is not None:
        v[0] = v0

    force = (M @ gam)[np.newaxis, :] * ag[:, np.newaxis]
    a[0] = linalg.solve(M, force[0] - C @ v[0] - K @ x[0])

    a1 = M / (beta * dt**2) + C * gamma / (beta * dt)
    a2 = M / (beta * dt) + C * (gamma / beta - 1.0)
    a3 = M * (1.0 / (2.0 * beta) - 1.0) + C * dt * (gamma / (2.0 * beta) - 1.0)
    factor = linalg.lu_factor(K + a1)

    for i in range(steps - 1):
        rhs = force[i + 1] + a1 @ x[i] + a2 @ v[i] + a3 @ a[i]
        x[i + 1] = linalg.lu_solve(factor, rhs)
        v[i + 1] = (
            gamma / (beta * dt) * (x[i + 1] - x[i])
            + (1.0 - gamma / beta) * v[i]
            + dt * (1.0 - gamma / (2.0 * beta)) * a[i]
        )
        a[i + 1] = (
            (x[i + 1] - x[i]) / (beta * dt**2)
            - v[i] / (beta * dt)
            - (1.0 / (2.0 * beta) - 1.0) * a[i]
        )
    return x, v, a
