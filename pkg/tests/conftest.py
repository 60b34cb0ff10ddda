"""This module includes fixtures which are used by more than one test module."""

import pytest

from typer.testing import CliRunner

from src.models import (
    AlphaParams,
    AxisQuantity,
    AxisScale,
    BranchIndex,
    MonodromySettings,
    PhysicalParams,
    ScanAxis,
    ScanSpec,
)
from src.param_space import characteristic_frequencies

from unit.utils import write_parameter_file


@pytest.fixture(name="reference_params")
def fixture_reference_params():
    """Reference Rb87 guide: b = 2.90 T/m, B_b = 1.5e-4 T, phi = 1 mrad, l = 15 um,
    omega = 2 pi x 10 kHz.

    Returns
    -------
    PhysicalParams
        Physical parameters of the reference guide.
    """
    return PhysicalParams.reference()


@pytest.fixture(name="reference_freqs")
def fixture_reference_freqs(reference_params):
    """Characteristic frequencies of the reference guide.

    Returns
    -------
    CharacteristicFrequencies
        omega_L, omega_perp and Omega in rad/s.
    """
    return characteristic_frequencies(reference_params)


@pytest.fixture(name="parameter_file")
def fixture_parameter_file(tmp_path):
    """Parameter file of the reference guide.

    Returns
    -------
    pathlib.Path
        Path of the file.
    """
    return write_parameter_file(tmp_path / "rb87.txt")


@pytest.fixture(name="small_alphas")
def fixture_small_alphas():
    """Point inside the region where both monodromy backends are accurate."""
    return AlphaParams(alpha1=1e-3, alpha2=0.5, alpha3=0.2)


@pytest.fixture(name="branch")
def fixture_branch():
    """Default branch k = 1, m = 0."""
    return BranchIndex(k=1, m=0)


@pytest.fixture(name="fast_settings")
def fixture_fast_settings():
    """Propagation settings at the smallest accepted resolution.

    Returns
    -------
    MonodromySettings
        RK4 propagation with 256 steps per period.
    """
    return MonodromySettings(steps=256)


@pytest.fixture(name="small_scan_spec")
def fixture_small_scan_spec(fast_settings):
    """Abstract 4 x 3 scan over the default axes at alpha1 = 1e-2.

    Returns
    -------
    ScanSpec
        Scan definition.
    """
    return ScanSpec(
        x=ScanAxis(quantity=AxisQuantity.RATIO_A2_A1, scale=AxisScale.LOG, min=1e2, max=1e4, n=4),
        y=ScanAxis(quantity=AxisQuantity.ALPHA3, min=0.0, max=1.0, n=3),
        alphas=AlphaParams(alpha1=1e-2, alpha2=0.0),
        settings=fast_settings,
    )


@pytest.fixture(name="runner")
def fixture_runner():
    """Test runner of the command line interface."""
    return CliRunner()
