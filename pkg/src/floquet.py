"""This module is responsible for the linearized dynamics and the Floquet stability test.

The linearization around the steady orbit of branch (k, m) is the 2 pi-periodic,
trace-free system d(delta)/dtau = A(tau) delta with the state ordering
(dXc, dXs, dZc, dZs, dtheta, dnu). The monodromy matrix M = Phi(2 pi), Phi(0) = I,
is computed either by fixed-step RK4 propagation or by a (segmented) Peano-Baker
series, and the point is orbitally stable when every multiplier lies within the
tolerance band max|lambda| <= 1 + eps_stab.
"""

import logging
import math

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from scipy.integrate import cumulative_simpson, simpson
from sqlmodel import SQLModel

from .errors import NumericalFailureError
from .models import AlphaParams, Backend, BranchIndex, MonodromySettings
from .utils import check_at_least, check_non_negative, check_odd

logger = logging.getLogger(__name__)

PERIOD = 2.0 * math.pi
DIM = 6
MIN_STEPS_PER_PERIOD = 256
MIN_QUADRATURE_NODES = 129
EIGEN_RESIDUAL_TOL = 1e-8
SERIES_VALIDITY_BOUND = 1e-3

MatrixFunction = Callable[[np.ndarray], np.ndarray]


def _f_values(coupling, alpha3, branch: BranchIndex, tau):
    cos_tau = np.cos(tau)
    return branch.sign_k * (branch.sign_km * coupling * cos_tau * cos_tau + alpha3 * np.sin(tau))


def f_coeff(a: AlphaParams, branch: BranchIndex, tau: float) -> float:
    """Coupling f = (-1)**k [(-1)**(k+m) alpha1 alpha2 cos(tau)**2 + alpha3 sin(tau)]."""
    return float(_f_values(a.coupling, a.alpha3, branch, tau))


def coefficient_matrices(alpha1, alpha2, alpha3, branch: BranchIndex, tau) -> np.ndarray:
    """Builds A(tau) for broadcastable arrays of parameters and phases.

    Parameters
    ----------
    alpha1, alpha2, alpha3 : float or numpy.ndarray
        Dimensionless parameters.
    branch : BranchIndex
        Steady-orbit branch (k, m).
    tau : float or numpy.ndarray
        Phases at which to evaluate the matrix.

    Returns
    -------
    numpy.ndarray
        Array of shape ``broadcast_shape + (6, 6)``.
    """
    alpha1, alpha2, alpha3, tau = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (alpha1, alpha2, alpha3, tau))
    )
    cos_tau = np.cos(tau)
    sin_tau = np.sin(tau)
    f = _f_values(alpha1 * alpha2, alpha3, branch, tau)

    A = np.zeros(tau.shape + (DIM, DIM))
    A[..., 0, 1] = -0.5
    A[..., 1, 0] = 0.5
    A[..., 1, 5] = branch.sign_m * alpha1 / 2
    A[..., 2, 3] = -0.5
    A[..., 3, 2] = 0.5
    A[..., 4, 0] = alpha2 * cos_tau * cos_tau
    A[..., 4, 1] = alpha2 * sin_tau * cos_tau
    A[..., 4, 5] = f
    A[..., 5, 4] = -f
    return A


def build_A(a: AlphaParams, branch: BranchIndex, tau: float) -> np.ndarray:
    """The 6x6 matrix A(tau) of the linearized envelope dynamics."""
    return coefficient_matrices(a.alpha1, a.alpha2, a.alpha3, branch, tau)


class LinearizedSystem(SQLModel):
    """Linearization around the steady orbit of ``branch`` at ``alphas``."""

    alphas: AlphaParams
    branch: BranchIndex

    def matrix(self, tau: float) -> np.ndarray:
        return build_A(self.alphas, self.branch, tau)

    def matrices(self, taus: np.ndarray) -> np.ndarray:
        """Stack of A(tau) with shape (len(taus), 6, 6)."""
        return coefficient_matrices(
            self.alphas.alpha1, self.alphas.alpha2, self.alphas.alpha3, self.branch, taus
        )


def _identity_like(A: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.eye(A.shape[-1]), A.shape).copy()


def rk4_flow(
    matrix_fn: MatrixFunction, tau_end: float, steps: int, tau0: float = 0.0
) -> np.ndarray:
    """Solves Phi' = A(tau) Phi, Phi(tau0) = I, with fixed-step RK4.

    ``matrix_fn(tau)`` may return a single matrix or a stack ``(..., n, n)``;
    the flow is then computed for every matrix of the stack at once.
    """
    check_at_least(steps, 1, "steps")
    A_start = matrix_fn(tau0)
    phi = _identity_like(A_start)
    if tau_end == tau0:
        return phi
    h = (tau_end - tau0) / steps
    half = 0.5 * h
    for i in range(steps):
        t = tau0 + i * h
        A_mid = matrix_fn(t + half)
        A_end = matrix_fn(tau0 + (i + 1) * h)
        k1 = A_start @ phi
        k2 = A_mid @ (phi + half * k1)
        k3 = A_mid @ (phi + half * k2)
        k4 = A_end @ (phi + h * k3)
        phi = phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        A_start = A_end
    return phi


def peano_baker_series(
    matrix_fn: MatrixFunction,
    tau_end: float,
    order: int,
    quadrature_nodes: int,
    segments: int = 1,
) -> np.ndarray:
    """Partial sum of the Peano-Baker series of Phi(tau_end), Phi(0) = I.

    The order-N partial sum equals N Picard iterations
    Phi_{j+1}(tau) = I + int_0^tau A(s) Phi_j(s) ds, evaluated with cumulative
    Simpson quadrature on a uniform grid. With ``segments > 1`` the series is
    applied on consecutive sub-intervals and the transition matrices are
    multiplied.

    Parameters
    ----------
    matrix_fn : callable
        ``matrix_fn(taus)`` returns A at the grid ``taus`` stacked along the first
        axis, shape ``(len(taus), ..., n, n)``.
    tau_end : float
        End of the integration interval.
    order : int
        Number of Picard iterations (0 gives the identity).
    quadrature_nodes : int
        Odd number of grid nodes per segment.
    segments : int, optional
        Number of sub-intervals. The default is 1 (the literal series).

    Returns
    -------
    numpy.ndarray
        Approximation of Phi(tau_end), shape ``(..., n, n)``.

    Raises
    ------
    InvalidParameterError
        If ``quadrature_nodes`` is even or a count is out of range.
    """
    check_at_least(order, 0, "order")
    check_odd(quadrature_nodes, "quadrature_nodes")
    check_at_least(quadrature_nodes, 3, "quadrature_nodes")
    check_at_least(segments, 1, "segments")

    edges = np.linspace(0.0, tau_end, segments + 1)
    result = None
    for start, stop in zip(edges[:-1], edges[1:]):
        grid = np.linspace(start, stop, quadrature_nodes)
        A = matrix_fn(grid)
        eye = _identity_like(A)
        phi = eye
        if stop != start:
            for _ in range(order):
                phi = eye + cumulative_simpson(A @ phi, x=grid, axis=0, initial=0.0)
        transition = phi[-1]
        result = transition if result is None else transition @ result
    return result


def series_truncation_estimate(
    sys: LinearizedSystem,
    order: int,
    segments: int,
    quadrature_nodes: int = MIN_QUADRATURE_NODES,
    tau_end: float = PERIOD,
) -> float:
    """Upper-bound style estimate of the series truncation error.

    Sum over segments of L**(N+1) / (N+1)! * exp(L), with L the integral of
    the max-row-sum norm of A over the segment.
    """
    edges = np.linspace(0.0, tau_end, segments + 1)
    total = 0.0
    for start, stop in zip(edges[:-1], edges[1:]):
        grid = np.linspace(start, stop, quadrature_nodes)
        norms = np.abs(sys.matrices(grid)).sum(axis=-1).max(axis=-1)
        L = float(simpson(norms, x=grid))
        total += L ** (order + 1) / math.factorial(order + 1) * math.exp(L)
    return total


def _check_result(phi: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(phi)):
        raise NumericalFailureError(f"{what} produced non-finite entries.", matrix=phi)
    return phi


def fundamental_matrix_propagate(sys: LinearizedSystem, tau_end: float, steps: int) -> np.ndarray:
    """Phi(tau_end) by fixed-step RK4; at least 256 steps per 2 pi are required."""
    needed = math.ceil(MIN_STEPS_PER_PERIOD * abs(tau_end) / PERIOD)
    check_at_least(steps, max(needed, 1), "steps")
    return _check_result(rk4_flow(sys.matrix, tau_end, steps), "RK4 propagation")


def fundamental_matrix_series(
    sys: LinearizedSystem,
    tau_end: float,
    order: int,
    quadrature_nodes: int,
    segments: int = 1,
) -> np.ndarray:
    """Phi(tau_end) by the order-``order`` Peano-Baker series."""
    check_at_least(order, 1, "order")
    check_odd(quadrature_nodes, "quadrature_nodes")
    check_at_least(quadrature_nodes, MIN_QUADRATURE_NODES, "quadrature_nodes")
    phi = peano_baker_series(sys.matrices, tau_end, order, quadrature_nodes, segments)
    return _check_result(phi, "Peano-Baker series")


def classify(max_modulus: float, eps_stab: float = 1e-3) -> bool:
    """Stability verdict: stable iff max|lambda| <= 1 + eps_stab.

    Trace-free A forces det M = 1, so stable multipliers sit on the unit circle
    and a strict "modulus below 1" test could never pass.
    """
    check_non_negative(eps_stab, "eps_stab")
    return bool(max_modulus <= 1.0 + eps_stab)


def conjugate_pairing_error(multipliers: np.ndarray) -> float:
    """Largest distance from a multiplier to the conjugate of its nearest partner."""
    conj = np.conj(multipliers)
    distances = np.abs(multipliers[:, None] - conj[None, :])
    return float(distances.min(axis=1).max())


@dataclass(frozen=True)
class MonodromyResult:
    """Monodromy matrix, Floquet multipliers and stability verdict."""

    monodromy: np.ndarray
    multipliers: np.ndarray
    max_modulus: float
    stable: bool
    backend: Backend
    order_or_steps: int
    det_residual: float
    eps_stab: float

    def to_report(self, alphas: AlphaParams, branch: BranchIndex) -> dict:
        """Single-point report as written by the ``point`` command."""
        return {
            "alphas": alphas.model_dump(),
            "branch": branch.model_dump(),
            "backend": self.backend.value,
            "order_or_steps": self.order_or_steps,
            "multipliers": [[float(z.real), float(z.imag)] for z in self.multipliers],
            "max_modulus": self.max_modulus,
            "det_residual": self.det_residual,
            "eps_stab": self.eps_stab,
            "stable": self.stable,
        }


def analyze_monodromy(
    M: np.ndarray, backend: Backend, order_or_steps: int, eps_stab: float = 1e-3
) -> MonodromyResult:
    """Finds and validates the Floquet multipliers of a monodromy matrix.

    Eigenvalues come from LAPACK's nonsymmetric driver (balancing, Hessenberg
    reduction, shifted QR). Every eigenpair must satisfy
    ||(M - lambda I) v|| <= 1e-8 ||M||.

    Parameters
    ----------
    M : numpy.ndarray
        Real monodromy matrix.
    backend : Backend
        Backend that produced ``M``.
    order_or_steps : int
        Series order or RK4 step count used for ``M``.
    eps_stab : float, optional
        Stability tolerance band. The default is 1e-3.

    Returns
    -------
    MonodromyResult
        Multipliers sorted by decreasing modulus.

    Raises
    ------
    NumericalFailureError
        If ``M`` is not finite, the QR iteration does not converge or an
        eigenpair fails the residual test.
    """
    check_non_negative(eps_stab, "eps_stab")
    if not np.all(np.isfinite(M)):
        raise NumericalFailureError("Monodromy matrix has non-finite entries.", matrix=M)
    try:
        eigenvalues, eigenvectors = scipy.linalg.eig(M)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailureError(f"Eigenvalue iteration failed: {e}", matrix=M) from e
    if not np.all(np.isfinite(eigenvalues)):
        raise NumericalFailureError("Eigenvalue iteration did not converge.", matrix=M)

    scale = max(float(np.linalg.norm(M)), np.finfo(float).tiny)
    residuals = np.linalg.norm(M @ eigenvectors - eigenvectors * eigenvalues, axis=0)
    if np.any(residuals > EIGEN_RESIDUAL_TOL * scale):
        raise NumericalFailureError(
            f"Eigenpair residual {residuals.max():.3g} exceeds tolerance.", matrix=M
        )

    order = np.lexsort((eigenvalues.imag, -eigenvalues.real, -np.abs(eigenvalues)))
    multipliers = eigenvalues[order]
    max_modulus = float(np.abs(multipliers).max())
    return MonodromyResult(
        monodromy=M,
        multipliers=multipliers,
        max_modulus=max_modulus,
        stable=classify(max_modulus, eps_stab),
        backend=backend,
        order_or_steps=order_or_steps,
        det_residual=float(abs(np.linalg.det(M) - 1.0)),
        eps_stab=eps_stab,
    )


def monodromy(sys: LinearizedSystem, settings: MonodromySettings | None = None) -> MonodromyResult:
    """Computes the monodromy matrix of ``sys`` and classifies its stability.

    Parameters
    ----------
    sys : LinearizedSystem
        Parameter point and branch.
    settings : MonodromySettings, optional
        Backend, resolution and stability tolerance. Defaults to RK4 propagation
        with 1024 steps and eps_stab = 1e-3.

    Returns
    -------
    MonodromyResult
        Monodromy matrix, sorted multipliers and verdict.
    """
    settings = settings or MonodromySettings()
    if settings.backend == Backend.PROPAGATE:
        M = fundamental_matrix_propagate(sys, PERIOD, settings.steps)
    else:
        estimate = series_truncation_estimate(
            sys, settings.order, settings.segments, settings.quadrature_nodes
        )
        if estimate > SERIES_VALIDITY_BOUND:
            logger.info(
                "Series truncation estimate %.3g is above %.0e; propagation is authoritative here.",
                estimate,
                SERIES_VALIDITY_BOUND,
            )
        M = fundamental_matrix_series(
            sys, PERIOD, settings.order, settings.quadrature_nodes, settings.segments
        )
    return analyze_monodromy(M, settings.backend, settings.order_or_steps, settings.eps_stab)


def monodromy_batch(
    alpha1: np.ndarray,
    alpha2: np.ndarray,
    alpha3: np.ndarray,
    branch: BranchIndex,
    settings: MonodromySettings,
) -> tuple[np.ndarray, np.ndarray]:
    """Max multiplier modulus and verdict for a batch of parameter points.

    The fundamental matrices of the whole batch are integrated together.
    Points whose analysis fails get ``nan`` modulus and are flagged.

    Returns
    -------
    max_modulus : numpy.ndarray
        Largest multiplier modulus per point (``nan`` for failed points).
    failed : numpy.ndarray of bool
        True where the point could not be analyzed.
    """
    alpha1, alpha2, alpha3 = (np.asarray(v, dtype=float) for v in (alpha1, alpha2, alpha3))
    with np.errstate(all="ignore"):
        if settings.backend == Backend.PROPAGATE:
            stack = rk4_flow(
                lambda t: coefficient_matrices(alpha1, alpha2, alpha3, branch, t),
                PERIOD,
                settings.steps,
            )
        else:
            stack = peano_baker_series(
                lambda ts: coefficient_matrices(
                    alpha1[None, :], alpha2[None, :], alpha3[None, :], branch, ts[:, None]
                ),
                PERIOD,
                settings.order,
                settings.quadrature_nodes,
                settings.segments,
            )

    max_modulus = np.full(alpha1.shape, np.nan)
    failed = np.zeros(alpha1.shape, dtype=bool)
    for i, M in enumerate(stack):
        try:
            result = analyze_monodromy(
                M, settings.backend, settings.order_or_steps, settings.eps_stab
            )
        except NumericalFailureError as e:
            logger.debug("Node %d failed: %s", i, e.detail)
            failed[i] = True
            continue
        max_modulus[i] = result.max_modulus
    return max_modulus, failed
