"""This module gathers helper functions."""

import logging
import math
import os

from pathlib import Path

import numpy as np

from .errors import InvalidParameterError

logger = logging.getLogger(__name__)

PHASE_VALIDITY_LIMIT = 0.3  # rad


def check_positive(value: float, name: str):
    """Checks if the provided value is finite and strictly positive.

    Parameters
    ----------
    value : float
        Value to be checked.
    name : str
        Name of the quantity used in the error message.

    Raises
    ------
    InvalidParameterError
        If the value is not finite or not strictly positive.
    """
    if not math.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} should be finite and positive, got {value}.")


def check_non_negative(value: float, name: str):
    """Checks if the provided value is finite and not negative.

    Parameters
    ----------
    value : float
        Value to be checked.
    name : str
        Name of the quantity used in the error message.

    Raises
    ------
    InvalidParameterError
        If the value is negative or not finite.
    """
    if not math.isfinite(value) or value < 0:
        raise InvalidParameterError(f"{name} should be finite and non-negative, got {value}.")


def check_finite(values, name: str):
    """Checks if every provided value is finite.

    Parameters
    ----------
    values : float or array_like
        Values to be checked.
    name : str
        Name of the quantity used in the error message.

    Raises
    ------
    InvalidParameterError
        If any of the values is infinite or NaN.
    """
    if not np.all(np.isfinite(values)):
        raise InvalidParameterError(f"{name} is not finite (degenerate inputs?).")


def check_at_least(value: int, minimum: int, name: str):
    """Checks if the provided integer is not below a minimum.

    Parameters
    ----------
    value : int
        Value to be checked.
    minimum : int
        Smallest accepted value.
    name : str
        Name of the setting used in the error message.

    Raises
    ------
    InvalidParameterError
        If the value is below the minimum.
    """
    if value < minimum:
        raise InvalidParameterError(f"{name} should be at least {minimum}, got {value}.")


def check_odd(value: int, name: str):
    """Checks if the provided integer is odd.

    Raises
    ------
    InvalidParameterError
        If the value is even.
    """
    if value % 2 == 0:
        raise InvalidParameterError(f"{name} should be odd, got {value}.")


def check_phase_regime(phase_phi: float):
    """Warns when the phase offset leaves the small-offset validity regime."""
    if abs(phase_phi) > PHASE_VALIDITY_LIMIT:
        logger.warning(
            "Phase offset %.3g rad is above %.1f rad; the linear field model assumes |phi| << pi.",
            phase_phi,
            PHASE_VALIDITY_LIMIT,
        )


def check_writable(path: Path):
    """Checks if a file can be created at the provided path.

    Parameters
    ----------
    path : pathlib.Path
        Output file path.

    Raises
    ------
    InvalidParameterError
        If the parent directory is missing or not writable, or the path is a directory.
    """
    parent = path.parent if str(path.parent) else Path(".")
    if path.is_dir():
        raise InvalidParameterError(f"{path} is a directory.")
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise InvalidParameterError(f"Cannot write to {path}: directory is missing or read-only.")
    if path.exists() and not os.access(path, os.W_OK):
        raise InvalidParameterError(f"Cannot write to {path}: file is read-only.")


def parity(n: int) -> int:
    """Returns (-1)**n for an integer n."""
    return -1 if n % 2 else 1


def get_rng(seed: int | None) -> np.random.Generator:
    """Gets new random generator; the same seed always gives the same stream."""
    return np.random.default_rng(seed)


def rk4_step(rhs, tau: float, y: np.ndarray, h: float) -> np.ndarray:
    """Advances ``y`` by one classical fourth-order Runge-Kutta step.

    Parameters
    ----------
    rhs : callable
        Right-hand side ``rhs(tau, y)``.
    tau : float
        Current time.
    y : numpy.ndarray
        Current state.
    h : float
        Step size.

    Returns
    -------
    numpy.ndarray
        State at ``tau + h``.
    """
    half = 0.5 * h
    k1 = rhs(tau, y)
    k2 = rhs(tau + half, y + half * k1)
    k3 = rhs(tau + half, y + half * k2)
    k4 = rhs(tau + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
