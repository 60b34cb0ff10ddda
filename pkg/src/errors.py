"""This module is responsible for the exceptions raised by the toolkit.

Every exception carries a human-readable ``detail`` and the process exit code
the command line front end uses when it reaches the top level.
"""

import numpy as np


class WaveguideError(Exception):
    """Base class of all toolkit errors."""

    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidParameterError(WaveguideError, ValueError):
    """Raised when an input violates a documented invariant."""

    exit_code = 2


class SingularCoordinateError(WaveguideError):
    """Raised when the spin polar angle sits on the cot(nu) pole."""

    exit_code = 2


class NumericalFailureError(WaveguideError):
    """Raised when a monodromy matrix cannot be analyzed.

    Parameters
    ----------
    detail : str
        Description of the failure.
    matrix : numpy.ndarray, optional
        The matrix being analyzed when the failure occurred.
    """

    exit_code = 20

    def __init__(self, detail: str, matrix: np.ndarray | None = None):
        super().__init__(detail)
        self.matrix = matrix
