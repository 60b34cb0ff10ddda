"""This module includes unit tests for functions from src/param_space.py"""

import math

import numpy as np
import pytest

from src.errors import InvalidParameterError
from src.models import AlphaParams, PhysicalParams
from src.param_space import (
    alpha_ratio_from_omega,
    alphas_at_omega,
    alphas_from_physical,
    characteristic_frequencies,
    frequencies_from_alphas,
    omega_from_alpha_ratio,
    phi_from_alpha3,
)


def test_characteristic_frequencies_reference(reference_freqs):
    """Tests the characteristic frequencies of the reference guide.

    Parameters
    ----------
    reference_freqs : CharacteristicFrequencies
        Frequencies of the reference guide.
    """
    assert math.isclose(
        reference_freqs.transverse_omega_perp, 2492.38, rel_tol=1e-4
    ), "omega_perp is different"
    assert math.isclose(reference_freqs.rabi_Omega, 1.912716e6, rel_tol=1e-5), "Omega is different"
    assert math.isclose(
        reference_freqs.larmor_omega_L, 6595.58, rel_tol=1e-4
    ), "omega_L is different"


def test_alphas_from_physical_reference(reference_params):
    """Tests the alphas of the reference guide at 2 pi x 10 kHz.

    Parameters
    ----------
    reference_params : PhysicalParams
        Reference guide.
    """
    alphas = alphas_from_physical(reference_params)

    assert math.isclose(alphas.alpha1, 1.57352e-3, rel_tol=1e-4), "alpha1 is different"
    assert math.isclose(alphas.alpha2, 30.4418, rel_tol=1e-4), "alpha2 is different"
    assert math.isclose(alphas.alpha3, 0.104972, rel_tol=1e-4), "alpha3 is different"


def test_zero_phase_gives_zero_alpha3(reference_params):
    """Tests if phi = 0 gives omega_L = 0 and alpha3 = 0.

    Parameters
    ----------
    reference_params : PhysicalParams
        Reference guide.
    """
    alphas = alphas_from_physical(reference_params.model_copy(update={"phase_phi": 0.0}))

    assert alphas.alpha3 == 0.0, "alpha3 should vanish without phase offset"


def test_round_trip_through_frequencies(reference_freqs):
    """Tests if the alphas determine the characteristic frequencies back.

    Parameters
    ----------
    reference_freqs : CharacteristicFrequencies
        Frequencies of the reference guide.
    """
    omega = 2 * math.pi * 7e3
    restored = frequencies_from_alphas(alphas_at_omega(reference_freqs, omega), omega)

    for name in ("larmor_omega_L", "transverse_omega_perp", "rabi_Omega"):
        assert math.isclose(
            getattr(restored, name), getattr(reference_freqs, name), rel_tol=1e-12
        ), f"{name} is not restored"


def test_omega_from_alpha_ratio(reference_freqs):
    """Tests the inversion of alpha2 / alpha1 for scalars and arrays.

    Parameters
    ----------
    reference_freqs : CharacteristicFrequencies
        Frequencies of the reference guide.
    """
    omega = omega_from_alpha_ratio(6e3, reference_freqs)
    ratios = np.array([1e3, 6e3, 1e5])
    omegas = omega_from_alpha_ratio(ratios, reference_freqs)

    assert math.isclose(omega, 19486, rel_tol=1e-3), "omega at ratio 6e3 is different"
    np.testing.assert_allclose(alpha_ratio_from_omega(omegas, reference_freqs), ratios, rtol=1e-12)
    alphas = alphas_at_omega(reference_freqs, omega)
    assert math.isclose(alphas.alpha2 / alphas.alpha1, 6e3, rel_tol=1e-12), "Ratio not restored"


@pytest.mark.parametrize("ratio", [0.0, -1.0, math.nan])
def test_omega_from_alpha_ratio_rejects(reference_freqs, ratio: float):
    """Tests if non-positive ratios are rejected.

    Parameters
    ----------
    reference_freqs : CharacteristicFrequencies
        Frequencies of the reference guide.
    ratio : float
        Invalid ratio.
    """
    with pytest.raises(InvalidParameterError):
        omega_from_alpha_ratio(ratio, reference_freqs)


def test_alphas_at_omega_rejects_zero(reference_freqs):
    """Tests if a vanishing modulation frequency is rejected.

    Parameters
    ----------
    reference_freqs : CharacteristicFrequencies
        Frequencies of the reference guide.
    """
    with pytest.raises(InvalidParameterError):
        alphas_at_omega(reference_freqs, 0.0)


def test_phi_from_alpha3(reference_params):
    """Tests if the phase offset producing alpha3 is recovered.

    Parameters
    ----------
    reference_params : PhysicalParams
        Reference guide.
    """
    alphas = alphas_from_physical(reference_params)
    phi = phi_from_alpha3(alphas.alpha3, reference_params.mod_omega, reference_params)

    assert math.isclose(float(phi), reference_params.phase_phi, rel_tol=1e-12), "phi is different"


def test_overflowing_frequencies_rejected():
    """Tests if an absurd gradient that overflows a frequency is rejected."""
    p = PhysicalParams.reference(gradient_b=1e308, wire_pitch_l=1e10)

    with pytest.raises(InvalidParameterError):
        characteristic_frequencies(p)


def test_alpha_params_from_frequencies_scaling(reference_freqs):
    """Tests the omega scaling of the alphas: alpha1 ~ omega**-2, alpha2 and alpha3 ~ omega**-1.

    Parameters
    ----------
    reference_freqs : CharacteristicFrequencies
        Frequencies of the reference guide.
    """
    a = alphas_at_omega(reference_freqs, 1e4)
    b = alphas_at_omega(reference_freqs, 2e4)

    assert isinstance(a, AlphaParams), "Expected AlphaParams"
    assert math.isclose(a.alpha1 / b.alpha1, 4.0, rel_tol=1e-12), "alpha1 scaling is wrong"
    assert math.isclose(a.alpha2 / b.alpha2, 2.0, rel_tol=1e-12), "alpha2 scaling is wrong"
    assert math.isclose(a.alpha3 / b.alpha3, 2.0, rel_tol=1e-12), "alpha3 scaling is wrong"
