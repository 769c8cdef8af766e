"""Unit tests for Taylor and exact discretization."""

import logging
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg

from tmdid.core.models import ValidationError
from tmdid.dynamics.discretization import (
    EXACT,
    check_order,
    discretize,
    exact_discretize,
    step,
    taylor_discretize,
)
from tmdid.structure.matrices import StructureSpec, assemble_matrices
from tmdid.structure.state_space import build_state_space

TS = 0.02


@pytest.fixture
def space(two_story, accelerometers):
    """Continuous model of the bare frame without parameters."""
    return build_state_space(assemble_matrices(two_story), accelerometers)


class TestCheckOrder:
    """Tests for check_order()."""

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_taylor_orders(self, order):
        """Test orders 1 to 4 are accepted."""
        assert check_order(order) == order

    def test_string_forms(self):
        """Test string orders are normalized."""
        assert check_order("3") == 3
        assert check_order("EXACT") == EXACT

    @pytest.mark.parametrize("order", [0, 5, "foo"])
    def test_invalid(self, order):
        """Test unsupported orders are rejected."""
        with pytest.raises(ValidationError):
            check_order(order)


class TestTaylorDiscretize:
    """Tests for taylor_discretize()."""

    def test_first_order(self, space):
        """Test p=1 gives A_d = I + A ts and B_d = B ts."""
        dss = taylor_discretize(space, TS, 1)
        assert_allclose(dss.A_d, np.eye(4) + space.A * TS)
        assert_allclose(dss.B_d, space.B * TS)
        assert dss.order == 1

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_series_increment(self, space, p):
        """Test each order adds the term A^p ts^p / p!."""
        lower = taylor_discretize(space, TS, p - 1)
        higher = taylor_discretize(space, TS, p)
        term = np.linalg.matrix_power(space.A, p) * TS**p / math.factorial(p)
        assert_allclose(higher.A_d - lower.A_d, term, atol=1e-14)
        assert_allclose(higher.taylor_terms[p], term, atol=1e-14)

    @pytest.mark.parametrize("p", [1, 2, 3, 4])
    def test_convergence_order(self, space, p):
        """Test the A_d error falls like ts^(p+1)."""
        errors = []
        for ts in (0.02, 0.01):
            taylor = taylor_discretize(space, ts, p).A_d
            exact = exact_discretize(space, ts).A_d
            errors.append(np.linalg.norm(taylor - exact))
        assert errors[0] / errors[1] > 2 ** (p + 0.5)

    def test_higher_order_closer(self, space):
        """Test the error decreases with the order."""
        exact = exact_discretize(space, TS).A_d
        errors = [
            np.linalg.norm(taylor_discretize(space, TS, p).A_d - exact)
            for p in (1, 2, 3, 4)
        ]
        assert errors == sorted(errors, reverse=True)

    def test_strict_order(self, space):
        """Test the Taylor discretizer does not accept 'exact'."""
        with pytest.raises(ValidationError, match="Taylor order"):
            taylor_discretize(space, TS, EXACT)

    def test_invalid_ts(self, space):
        """Test a non-positive sampling time is rejected."""
        with pytest.raises(ValidationError, match="sampling time"):
            taylor_discretize(space, 0.0, 2)

    def test_unstable_warning(self, space, caplog):
        """Test a coarse first-order model warns about its spectral radius."""
        with caplog.at_level(logging.WARNING):
            dss = taylor_discretize(space, 0.5, 1)
        assert dss.spectral_radius() > 1.1
        assert "spectral radius" in caplog.text


class TestExactDiscretize:
    """Tests for exact_discretize()."""

    def test_matrix_exponential(self, space):
        """Test A_d = expm(A ts)."""
        dss = exact_discretize(space, TS)
        assert_allclose(dss.A_d, linalg.expm(space.A * TS), atol=1e-14)
        assert dss.order == EXACT

    def test_input_integral(self, space):
        """Test B_d = A^-1 (A_d - I) B for an invertible A."""
        dss = exact_discretize(space, TS)
        expected = np.linalg.solve(space.A, (dss.A_d - np.eye(4)) @ space.B)
        assert_allclose(dss.B_d, expected, atol=1e-12)

    def test_dispatch(self, space):
        """Test discretize() routes to both discretizers."""
        assert discretize(space, TS).order == EXACT
        assert discretize(space, TS, "2").order == 2
        assert discretize(space, TS, None).order == EXACT


class TestStep:
    """Tests for step()."""

    def test_step(self, space):
        """Test one step from rest under ground acceleration."""
        dss = exact_discretize(space, TS)
        u = np.array([1.0, 1.0])
        x_next, y = step(dss, np.zeros(4), u)
        assert_allclose(x_next, dss.B_d @ u)
        assert_allclose(y, u)

    def test_shape_mismatch(self, space):
        """Test wrong state or input sizes are rejected."""
        dss = exact_discretize(space, TS)
        with pytest.raises(ValidationError, match="state has shape"):
            step(dss, np.zeros(3), np.zeros(2))
        with pytest.raises(ValidationError, match="input has shape"):
            step(dss, np.zeros(4), np.zeros(3))

    def test_linear(self, space, rng):
        """Test a step of a combination is the combination of steps."""
        dss = discretize(space, TS, 2)
        x1, x2 = rng.normal(size=4), rng.normal(size=4)
        u1, u2 = rng.normal(size=2), rng.normal(size=2)
        x_mix, y_mix = step(dss, 2.0 * x1 - 0.5 * x2, 2.0 * u1 - 0.5 * u2)
        (xa, ya), (xb, yb) = step(dss, x1, u1), step(dss, x2, u2)
        assert_allclose(x_mix, 2.0 * xa - 0.5 * xb, atol=1e-12)
        assert_allclose(y_mix, 2.0 * ya - 0.5 * yb, atol=1e-9)


class TestExactProperties:
    """Tests for the exact discretizer against continuous-time properties."""

    def test_eigenvalues(self, space):
        """Test the eigenvalues of A_d are exp(lambda * ts)."""
        dss = exact_discretize(space, TS)
        expected = np.exp(np.linalg.eigvals(space.A) * TS)
        actual = np.linalg.eigvals(dss.A_d)
        for value in expected:
            assert np.min(np.abs(actual - value)) < 1e-10

    def test_undamped_energy(self, accelerometers):
        """Test free vibration without damping keeps its energy."""
        structure = StructureSpec(
            story_masses=(1000.0, 1000.0),
            story_damping=(0.0, 0.0),
            story_stiffness=(12000.0, 10000.0),
        )
        mats = assemble_matrices(structure)
        dss = exact_discretize(build_state_space(mats, accelerometers), TS)

        def energy(state):
            x, v = state[:2], state[2:]
            return 0.5 * x @ mats.K @ x + 0.5 * v @ mats.M @ v

        state = np.array([0.05, 0.08, 0.0, -0.1])
        initial = energy(state)
        for _ in range(5000):
            state, _ = step(dss, state, np.zeros(2))
        assert energy(state) == pytest.approx(initial, rel=1e-8)
