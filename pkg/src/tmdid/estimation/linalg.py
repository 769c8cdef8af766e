"""Linear algebra helpers for the filter."""

import logging

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

JITTER_START = 1e-12
JITTER_MAX = 1e-6


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """Return (P + P^T) / 2."""
    return 0.5 * (matrix + matrix.T)


def jitter_cholesky(matrix: np.ndarray) -> np.ndarray:
    """
    Lower Cholesky factor with a bit of diagonal jitter if needs be.

    Jitter starts at 1e-12 * trace/n and grows by 10x up to 1e-6 * trace/n.
    An all-zero matrix has the zero factor.

    Args:
        matrix: Symmetric positive semi-definite matrix (n x n)

    Returns:
        Lower triangular L with L L^T = matrix (+ jitter)

    Raises:
        scipy.linalg.LinAlgError: If the matrix is still not factorizable
            with the largest jitter
    """
    try:
        return linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError:
        pass

    if not np.any(matrix):
        return np.zeros_like(matrix)

    n = matrix.shape[0]
    scale = np.trace(matrix) / n
    if not scale > 0:
        raise linalg.LinAlgError("matrix has non-positive trace")

    jitter = JITTER_START
    diag = np.diag_indices(n)
    while jitter <= JITTER_MAX * (1 + 1e-9):
        jittered = matrix.copy()
        jittered[diag] += jitter * scale
        try:
            factor = linalg.cholesky(jittered, lower=True)
        except linalg.LinAlgError:
            jitter *= 10.0
            continue
        logger.warning("Cholesky needed jitter %.0e * trace/n", jitter)
        return factor

    raise linalg.LinAlgError("added maximum jitter and matrix is still not PSD")


def solve_spd(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """
    Solve matrix @ X = rhs for a symmetric positive definite matrix.

    Raises:
        scipy.linalg.LinAlgError: If the matrix is not positive definite
    """
    factor = linalg.cho_factor(matrix, lower=True)
    return linalg.cho_solve(factor, rhs)
