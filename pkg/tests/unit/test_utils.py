"""This module includes unit tests for functions from src/utils.py"""

import logging
import math

import numpy as np
import pytest

from src.errors import InvalidParameterError
from src.utils import (
    check_at_least,
    check_finite,
    check_non_negative,
    check_odd,
    check_phase_regime,
    check_positive,
    check_writable,
    get_rng,
    parity,
    rk4_step,
)


@pytest.mark.parametrize("value", [0.0, -1.0, math.inf, math.nan])
def test_check_positive_rejects(value: float):
    """Tests if non-positive or non-finite values are rejected.

    Parameters
    ----------
    value : float
        Invalid value.
    """
    with pytest.raises(InvalidParameterError) as excinfo:
        check_positive(value, "omega")

    assert "omega" in excinfo.value.detail, "Detail should name the quantity"
    assert excinfo.value.exit_code == 2, "Invalid parameters are usage errors"


def test_check_non_negative():
    """Tests if zero passes and negative values are rejected."""
    check_non_negative(0.0, "eps_stab")

    with pytest.raises(InvalidParameterError):
        check_non_negative(-1e-12, "eps_stab")


def test_check_finite():
    """Tests if arrays with a NaN are rejected."""
    check_finite([1.0, 2.0], "alpha")

    with pytest.raises(InvalidParameterError):
        check_finite(np.array([1.0, np.nan]), "alpha")


def test_check_at_least_and_odd():
    """Tests the integer checks used for resolution settings."""
    check_at_least(256, 256, "steps")
    check_odd(129, "quadrature_nodes")

    with pytest.raises(InvalidParameterError):
        check_at_least(255, 256, "steps")
    with pytest.raises(InvalidParameterError):
        check_odd(128, "quadrature_nodes")


def test_check_phase_regime_warns(caplog):
    """Tests if a large phase offset is logged as a warning.

    Parameters
    ----------
    caplog : pytest.LogCaptureFixture
        Captured log records.
    """
    with caplog.at_level(logging.WARNING):
        check_phase_regime(1e-3)
        assert not caplog.records, "Small offsets should not warn"
        check_phase_regime(0.5)

    assert any(r.levelno == logging.WARNING for r in caplog.records), "Expected a warning"


def test_check_writable(tmp_path):
    """Tests output path validation.

    Parameters
    ----------
    tmp_path : pathlib.Path
        Temporary directory.
    """
    check_writable(tmp_path / "scan.csv")

    with pytest.raises(InvalidParameterError):
        check_writable(tmp_path / "missing" / "scan.csv")
    with pytest.raises(InvalidParameterError):
        check_writable(tmp_path)


def test_parity():
    """Tests (-1)**n for positive and negative integers."""
    assert [parity(n) for n in (-1, 0, 1, 2, 3)] == [-1, 1, -1, 1, -1], "Parity is wrong"


def test_get_rng_reproducible():
    """Tests if the same seed gives the same stream."""
    np.testing.assert_array_equal(get_rng(7).uniform(size=5), get_rng(7).uniform(size=5))


def test_rk4_step_exponential():
    """Tests if one RK4 step of y' = y equals the fourth-order Taylor polynomial."""
    h = 0.1
    y = rk4_step(lambda tau, y: y, 0.0, np.array([1.0]), h)

    expected = 1 + h + h**2 / 2 + h**3 / 6 + h**4 / 24
    assert math.isclose(y[0], expected, rel_tol=1e-15), "RK4 step is not fourth order"


def test_rk4_step_time_dependent():
    """Tests if RK4 integrates y' = cos(tau) with Simpson accuracy."""
    h = 2 * math.pi / 64
    y = np.array([0.0])
    for i in range(64):
        y = rk4_step(lambda tau, y: np.array([math.cos(tau)]), i * h, y, h)

    assert abs(y[0]) < 1e-12, "Integral of cos over a period should vanish"
