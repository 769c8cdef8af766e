"""
Discrete-time models from continuous state-space models.

Taylor expansion of the matrix exponential at orders 1 to 4, and an
exact (scaling-and-squaring) discretizer used as the reference. The
series helpers accept stacks of matrices (..., n, n) so that one call
discretizes the model of every sigma point.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import linalg

from tmdid.core.models import ValidationError
from tmdid.structure.state_space import ContinuousStateSpace

logger = logging.getLogger(__name__)

EXACT = "exact"
TAYLOR_ORDERS = (1, 2, 3, 4)
SPECTRAL_RADIUS_WARNING = 1.1

Order = Union[int, str]


@dataclass(frozen=True)
class DiscreteStateSpace:
    """x[k+1] = A_d x[k] + B_d u[k], y[k] = C_out x[k] + D u[k].

    Attributes:
        A_d: Discrete system matrix
        B_d: Discrete input matrix
        C_out: Output matrix (copied from the continuous model)
        D: Feedthrough matrix (copied from the continuous model)
        ts: Sampling time [s]
        order: Taylor order 1..4 or "exact"
        taylor_terms: A^i ts^i / i! for i = 0..order (Taylor models only)
    """

    A_d: np.ndarray
    B_d: np.ndarray
    C_out: np.ndarray
    D: np.ndarray
    ts: float
    order: Order
    taylor_terms: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @property
    def state_dim(self) -> int:
        return self.A_d.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B_d.shape[1]

    @property
    def output_dim(self) -> int:
        return self.C_out.shape[0]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(linalg.eigvals(self.A_d))))


def check_order(order: Order) -> Order:
    """Validate a discretization order; returns it normalized."""
    if isinstance(order, str):
        if order.lower() == EXACT:
            return EXACT
        try:
            order = int(order)
        except ValueError:
            raise ValidationError(f"unknown discretization order '{order}'") from None
    if order not in TAYLOR_ORDERS:
        raise ValidationError(
            f"Taylor order must be one of {TAYLOR_ORDERS}, got {order}"
        )
    return int(order)


def taylor_series(
    A: np.ndarray, B: np.ndarray, ts: float, p: int
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """
    Truncated Taylor series of exp(A ts) and its input integral.

    A_d = sum_{i=0}^{p} A^i ts^i / i!
    B_d = sum_{i=0}^{p-1} A^i B ts^(i+1) / (i+1)!

    Args:
        A: System matrix or stack of system matrices (..., n, n)
        B: Input matrix (n, m) or stack (..., n, m)
        ts: Sampling time [s]
        p: Order 1..4

    Returns:
        (A_d, B_d, terms) where terms[i] = A^i ts^i / i!
    """
    n = A.shape[-1]
    term = np.broadcast_to(np.eye(n), A.shape).copy()
    terms = [term]
    A_d = term.copy()
    B_d = np.zeros(np.broadcast_shapes(A.shape[:-2], B.shape[:-2]) + B.shape[-2:])
    for i in range(p):
        B_d = B_d + (term @ B) * (ts / (i + 1))
        term = (term @ A) * (ts / (i + 1))
        terms.append(term)
        A_d = A_d + term
    return A_d, B_d, terms


def exact_series(
    A: np.ndarray, B: np.ndarray, ts: float
) -> tuple[np.ndarray, np.ndarray]:
    """
    Zero-order-hold discretization via the augmented matrix exponential.

    exp([[A, B], [0, 0]] ts) = [[A_d, B_d], [0, I]]

    Works on stacks (..., n, n) like `taylor_series`.
    """
    n = A.shape[-1]
    m = B.shape[-1]
    batch = np.broadcast_shapes(A.shape[:-2], B.shape[:-2])
    block = np.zeros(batch + (n + m, n + m))
    block[..., :n, :n] = A
    block[..., :n, n:] = B
    phi = linalg.expm(block * ts)
    return phi[..., :n, :n], phi[..., :n, n:]


def _check_ts(ts: float) -> float:
    if not ts > 0:
        raise ValidationError(f"sampling time must be > 0, got {ts}")
    return float(ts)


def _warn_unstable(dss: DiscreteStateSpace) -> DiscreteStateSpace:
    radius = dss.spectral_radius()
    if radius > SPECTRAL_RADIUS_WARNING:
        logger.warning(
            "discrete model (order %s, ts=%g) has spectral radius %.3f",
            dss.order,
            dss.ts,
            radius,
        )
    return dss


def taylor_discretize(
    space: ContinuousStateSpace, ts: float, p: int
) -> DiscreteStateSpace:
    """
    Discretize with a Taylor expansion of order p.

    Args:
        space: Continuous model
        ts: Sampling time [s]
        p: Taylor order 1..4

    Returns:
        DiscreteStateSpace tagged with the order

    Raises:
        ValidationError: If p is outside 1..4 or ts <= 0
    """
    ts = _check_ts(ts)
    if isinstance(p, str) or p not in TAYLOR_ORDERS:
        raise ValidationError(f"Taylor order must be one of {TAYLOR_ORDERS}, got {p}")
    p = int(p)
    A_d, B_d, terms = taylor_series(space.A, space.B, ts, p)
    return _warn_unstable(
        DiscreteStateSpace(
            A_d=A_d,
            B_d=B_d,
            C_out=space.C_out,
            D=space.D,
            ts=ts,
            order=p,
            taylor_terms=tuple(terms),
        )
    )


def exact_discretize(space: ContinuousStateSpace, ts: float) -> DiscreteStateSpace:
    """Reference discretization with the matrix exponential."""
    ts = _check_ts(ts)
    A_d, B_d = exact_series(space.A, space.B, ts)
    return DiscreteStateSpace(
        A_d=A_d, B_d=B_d, C_out=space.C_out, D=space.D, ts=ts, order=EXACT
    )


def discretize(
    space: ContinuousStateSpace, ts: float, order: Optional[Order] = EXACT
) -> DiscreteStateSpace:
    """Dispatch to the Taylor or the exact discretizer."""
    order = check_order(EXACT if order is None else order)
    if order == EXACT:
        return exact_discretize(space, ts)
    return taylor_discretize(space, ts, order)


def step(
    dss: DiscreteStateSpace, x: np.ndarray, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Advance one sample without noise.

    Returns:
        (x_next, y) with x_next = A_d x + B_d u and y = C_out x + D u

    Raises:
        ValidationError: On dimension mismatch
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (dss.state_dim,):
        raise ValidationError(f"state has shape {x.shape}, expected ({dss.state_dim},)")
    if u.shape != (dss.input_dim,):
        raise ValidationError(f"input has shape {u.shape}, expected ({dss.input_dim},)")
    return dss.A_d @ x + dss.B_d @ u, dss.C_out @ x + dss.D @ u
