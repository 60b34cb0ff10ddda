"""This module is responsible for converting hardware parameters into the dimensionless alphas.

alpha1 = omega_perp**2 / omega**2, alpha2 = Omega / omega, alpha3 = omega_L / omega, with

    omega_L    = g_F mu_B phi B_b / hbar
    omega_perp = sqrt(g_F mu_B b / (M l))
    Omega      = g_F mu_B b l / hbar
"""

import math

import numpy as np

from .errors import InvalidParameterError
from .models import AlphaParams, CharacteristicFrequencies, PhysicalParams
from .utils import check_finite, check_phase_regime, check_positive


def larmor_per_radian(p: PhysicalParams) -> float:
    """Larmor frequency per radian of phase offset, g_F mu_B B_b / hbar (rad/s)."""
    return p.species.moment * p.bias_Bb / p.species.hbar


def characteristic_frequencies(p: PhysicalParams) -> CharacteristicFrequencies:
    """Computes the Larmor, transverse and Rabi frequencies of the guide.

    Parameters
    ----------
    p : PhysicalParams
        Species and hardware values.

    Returns
    -------
    CharacteristicFrequencies
        omega_L, omega_perp and Omega in rad/s.

    Raises
    ------
    InvalidParameterError
        If a frequency overflows or is otherwise not finite.
    """
    check_phase_regime(p.phase_phi)
    moment = p.species.moment
    larmor = larmor_per_radian(p) * p.phase_phi
    perp = math.sqrt(moment * p.gradient_b / (p.species.mass_kg * p.wire_pitch_l))
    rabi = moment * p.gradient_b * p.wire_pitch_l / p.species.hbar
    check_finite([larmor, perp, rabi], "characteristic frequency")
    check_positive(perp, "omega_perp")
    check_positive(rabi, "Omega")
    return CharacteristicFrequencies(
        larmor_omega_L=larmor, transverse_omega_perp=perp, rabi_Omega=rabi
    )


def alphas_from_physical(p: PhysicalParams) -> AlphaParams:
    """Converts physical parameters into the dimensionless alphas.

    Parameters
    ----------
    p : PhysicalParams
        Species and hardware values, including the modulation frequency.

    Returns
    -------
    AlphaParams
        (alpha1, alpha2, alpha3) at the modulation frequency of ``p``.

    Raises
    ------
    InvalidParameterError
        If the modulation frequency is not positive or a result is not finite.
    """
    check_positive(p.mod_omega, "omega")
    freqs = characteristic_frequencies(p)
    return alphas_at_omega(freqs, p.mod_omega)


def alphas_at_omega(freqs: CharacteristicFrequencies, omega: float) -> AlphaParams:
    """Alphas of the characteristic frequencies at modulation frequency ``omega``."""
    check_positive(omega, "omega")
    alpha1 = (freqs.transverse_omega_perp / omega) ** 2
    alpha2 = freqs.rabi_Omega / omega
    alpha3 = freqs.larmor_omega_L / omega
    check_finite([alpha1, alpha2, alpha3], "alpha")
    return AlphaParams(alpha1=alpha1, alpha2=alpha2, alpha3=alpha3)


def frequencies_from_alphas(alphas: AlphaParams, omega: float) -> CharacteristicFrequencies:
    """Inverse of ``alphas_at_omega``: recovers the characteristic frequencies."""
    check_positive(omega, "omega")
    return CharacteristicFrequencies(
        larmor_omega_L=alphas.alpha3 * omega,
        transverse_omega_perp=math.sqrt(alphas.alpha1) * omega,
        rabi_Omega=alphas.alpha2 * omega,
    )


def omega_from_alpha_ratio(ratio_a2_a1, freqs: CharacteristicFrequencies):
    """Modulation frequency at which alpha2 / alpha1 equals ``ratio_a2_a1``.

    Inverts alpha2 / alpha1 = Omega omega / omega_perp**2 so that scan axes can be
    labeled in physical units. Accepts scalars or arrays.

    Parameters
    ----------
    ratio_a2_a1 : float or numpy.ndarray
        Ratio alpha2 / alpha1, strictly positive.
    freqs : CharacteristicFrequencies
        Characteristic frequencies of the guide.

    Returns
    -------
    float or numpy.ndarray
        omega in rad/s.

    Raises
    ------
    InvalidParameterError
        If the ratio is not positive or Omega vanishes.
    """
    ratio = np.asarray(ratio_a2_a1, dtype=float)
    if not np.all(np.isfinite(ratio)) or np.any(ratio <= 0):
        raise InvalidParameterError(
            f"ratio alpha2/alpha1 should be finite and positive, got {ratio_a2_a1}."
        )
    check_positive(freqs.rabi_Omega, "Omega")
    omega = ratio * freqs.transverse_omega_perp**2 / freqs.rabi_Omega
    return float(omega) if omega.ndim == 0 else omega


def alpha_ratio_from_omega(omega, freqs: CharacteristicFrequencies):
    """alpha2 / alpha1 = Omega omega / omega_perp**2 for scalar or array omega."""
    return np.asarray(omega, dtype=float) * freqs.rabi_Omega / freqs.transverse_omega_perp**2


def phi_from_alpha3(alpha3, omega, p: PhysicalParams):
    """Phase offset (rad) that produces ``alpha3`` at modulation frequency ``omega``."""
    return np.asarray(alpha3, dtype=float) * np.asarray(omega, dtype=float) / larmor_per_radian(p)
