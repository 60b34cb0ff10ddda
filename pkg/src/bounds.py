"""This module is responsible for the Lyapunov-transformation bound on the stable domain.

The transformation exp(i beta(tau)) with beta' + f = 1 is bounded only if beta is
periodic, beta(pi) = beta(2 pi). This condition is an equation of state for the
parameters,

    pi = (-1)**k [ (-1)**(k+m) pi alpha1 alpha2 / 2 - 2 alpha3 ],

which in frequency coordinates (k = 1, m = 0) reads
omega**2 (omega - 2 omega_L / pi) = omega_perp**2 Omega / 2. The resulting curve is
an estimated upper bound of the stable domain and is never used as a classifier.
"""

import logging
import math

from dataclasses import dataclass, field

import numpy as np

from sqlmodel import SQLModel

from .models import AlphaParams, BranchIndex, CharacteristicFrequencies
from .utils import check_at_least, check_positive

logger = logging.getLogger(__name__)

BOUND_LABEL = "estimated upper bound"
FEASIBILITY_TOL = 1e-12


def _beta_values(coupling, alpha3, branch: BranchIndex, tau):
    tau = np.asarray(tau, dtype=float)
    integral = branch.sign_km * coupling * (tau / 2 + np.sin(2 * tau) / 4)
    integral = integral + alpha3 * (1 - np.cos(tau))
    return tau - branch.sign_k * integral


def beta(a: AlphaParams, branch: BranchIndex, tau: float) -> float:
    """Closed form of beta(tau) = tau - int_0^tau f(s) ds.

    Parameters
    ----------
    a : AlphaParams
        Dimensionless parameters.
    branch : BranchIndex
        Steady-orbit branch (k, m).
    tau : float
        Phase.

    Returns
    -------
    float
        beta(tau); beta(0) = 0.
    """
    return float(_beta_values(a.coupling, a.alpha3, branch, tau))


class BetaFunction(SQLModel):
    """beta(tau) of a parameter point, with its periodicity residuals."""

    alphas: AlphaParams
    branch: BranchIndex

    def __call__(self, tau):
        values = _beta_values(self.alphas.coupling, self.alphas.alpha3, self.branch, tau)
        return float(values) if values.ndim == 0 else values

    def periodicity_residual(self) -> float:
        """beta(2 pi) - beta(pi); zero on the bound."""
        return self(2 * math.pi) - self(math.pi)

    def half_period_residual(self) -> float:
        """beta(pi) - beta(0), which the bound condition leaves unconstrained."""
        return self(math.pi) - self(0.0)


def equation_of_state_residual(a: AlphaParams, branch: BranchIndex) -> float:
    """(-1)**k [(-1)**(k+m) pi alpha1 alpha2 / 2 - 2 alpha3] - pi; zero iff on the bound."""
    return branch.sign_k * (branch.sign_km * math.pi * a.coupling / 2 - 2 * a.alpha3) - math.pi


def bound_alpha3(coupling, branch: BranchIndex):
    """alpha3 on the bound for coupling alpha1 alpha2 (scalar or array)."""
    coupling = np.asarray(coupling, dtype=float)
    values = (math.pi / 2) * (branch.sign_km * coupling / 2 - branch.sign_k)
    return float(values) if values.ndim == 0 else values


def bound_offset(a: AlphaParams, branch: BranchIndex) -> float:
    """Signed alpha3 distance of a point from the bound; positive means beyond it.

    The side counted as "beyond" is larger alpha3 for odd k and smaller alpha3
    for even k, following the mirror symmetry of the branches.
    """
    return -branch.sign_k * (a.alpha3 - bound_alpha3(a.coupling, branch))


@dataclass(frozen=True)
class BoundCurve:
    """Samples of the bound, in frequency and in alpha coordinates.

    ``omega`` and ``omega_L`` are ``None`` for curves built in abstract
    coordinates, where no modulation frequency is defined.
    """

    branch: BranchIndex
    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray
    omega: np.ndarray | None = None
    omega_L: np.ndarray | None = None
    threshold_omega: float | None = None
    label: str = BOUND_LABEL
    notes: list[str] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return self.alpha3.size == 0


def threshold_omega(freqs: CharacteristicFrequencies) -> float:
    """Modulation frequency at which the bound meets omega_L = 0, cbrt(omega_perp**2 Omega / 2)."""
    return float(np.cbrt(freqs.transverse_omega_perp**2 * freqs.rabi_Omega / 2))


def threshold_ratio(freqs: CharacteristicFrequencies) -> float:
    """alpha2 / alpha1 at the threshold frequency, cbrt(Omega**4 / (2 omega_perp**4))."""
    return float(np.cbrt(freqs.rabi_Omega**4 / (2 * freqs.transverse_omega_perp**4)))


def cubic_bound_residual(omega, omega_L, freqs: CharacteristicFrequencies, branch: BranchIndex):
    """Relative residual of the bound written as a cubic in omega.

    For k = 1, m = 0 the cubic is omega**2 (omega - 2 omega_L / pi) - omega_perp**2 Omega / 2.
    """
    omega = np.asarray(omega, dtype=float)
    omega_L = np.asarray(omega_L, dtype=float)
    c = freqs.transverse_omega_perp**2 * freqs.rabi_Omega
    terms = np.broadcast_arrays(
        -branch.sign_k * omega**3, -(2 / math.pi) * omega_L * omega**2, branch.sign_km * c / 2
    )
    scale = np.max(np.abs(terms), axis=0)
    return np.abs(np.sum(terms, axis=0)) / scale


def _feasible(alpha3: np.ndarray, branch: BranchIndex) -> np.ndarray:
    # omega_L must carry the sign of (-1)**(k+1); otherwise the curve reflects
    # into the mirrored branch. The tolerance keeps the sample at omega_th.
    return -branch.sign_k * alpha3 >= -FEASIBILITY_TOL


def bound_curve(
    freqs: CharacteristicFrequencies,
    branch: BranchIndex,
    omega_range: tuple[float, float],
    n_samples: int = 200,
) -> BoundCurve:
    """Samples the bound omega_L(omega) over a range of modulation frequencies.

    Parameters
    ----------
    freqs : CharacteristicFrequencies
        Characteristic frequencies of the guide.
    branch : BranchIndex
        Steady-orbit branch.
    omega_range : tuple of float
        (omega_min, omega_max) in rad/s, both positive. For even m the lower end
        is raised to the threshold frequency, below which the curve leaves the
        feasible half-plane.
    n_samples : int, optional
        Number of log-spaced samples. The default is 200.

    Returns
    -------
    BoundCurve
        The curve, possibly empty, with the threshold frequency.
    """
    omega_min, omega_max = omega_range
    check_positive(omega_min, "omega_min")
    check_positive(omega_max, "omega_max")
    check_at_least(n_samples, 2, "n_samples")
    th = threshold_omega(freqs)
    if branch.m % 2 == 0:
        omega_min = max(omega_min, th)

    notes = []
    if omega_min >= omega_max:
        notes.append("omega range lies entirely below the threshold frequency")
        logger.info("Bound curve is empty: omega_max %.6g <= threshold %.6g.", omega_max, th)
        omega = np.empty(0)
    else:
        omega = np.geomspace(omega_min, omega_max, n_samples)

    alpha1 = (freqs.transverse_omega_perp / omega) ** 2
    alpha2 = freqs.rabi_Omega / omega
    alpha3 = bound_alpha3(alpha1 * alpha2, branch)
    keep = _feasible(alpha3, branch)
    omega_L = alpha3 * omega
    return BoundCurve(
        branch=branch,
        alpha1=alpha1[keep],
        alpha2=alpha2[keep],
        alpha3=alpha3[keep],
        omega=omega[keep],
        omega_L=omega_L[keep],
        threshold_omega=th,
        notes=notes,
    )


def bound_curve_abstract(
    alpha1: float,
    branch: BranchIndex,
    ratio_range: tuple[float, float],
    n_samples: int = 200,
) -> BoundCurve:
    """Samples the bound at fixed alpha1 over a range of alpha2 / alpha1."""
    check_positive(alpha1, "alpha1")
    check_positive(ratio_range[0], "ratio_min")
    check_positive(ratio_range[1], "ratio_max")
    check_at_least(n_samples, 2, "n_samples")
    ratio = np.geomspace(ratio_range[0], ratio_range[1], n_samples)
    alpha2 = ratio * alpha1
    alpha3 = bound_alpha3(alpha1 * alpha2, branch)
    keep = _feasible(alpha3, branch)
    return BoundCurve(
        branch=branch,
        alpha1=np.full(int(keep.sum()), float(alpha1)),
        alpha2=alpha2[keep],
        alpha3=alpha3[keep],
    )
