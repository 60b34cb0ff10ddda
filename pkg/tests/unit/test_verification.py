"""This module includes unit tests for functions from src/verification.py"""

import math

import numpy as np
import pytest

from src.errors import InvalidParameterError
from src.floquet import LinearizedSystem, monodromy
from src.models import (
    AlphaParams,
    AxisQuantity,
    BranchIndex,
    MonodromySettings,
    PhysicalParams,
)
from src.utils import get_rng
from src.verification import (
    STABLE_POINT,
    UNSTABLE_POINT,
    CheckResult,
    PerturbationGrowth,
    check_backend_agreement,
    check_conjugate_pairing,
    check_liouville,
    check_overlay,
    check_perturbation_growth,
    check_steady_orbits,
    check_subthreshold,
    check_thresholds,
    check_zero_alpha,
    mirrored_specs,
    perturbation_growth,
    random_alphas,
)


def test_check_result_to_dict():
    """Tests the serialized form of a check."""
    result = CheckResult("liouville", True, "ok", gating=False)

    assert result.to_dict() == {
        "name": "liouville",
        "passed": True,
        "gating": False,
        "detail": "ok",
    }, "Serialized check is different"


def test_random_alphas_ranges_and_seed():
    """Tests the ranges of the draws and that a seed fixes them."""
    a1, a2, a3 = random_alphas(get_rng(5), 200)
    b1, _, _ = random_alphas(get_rng(5), 200)

    assert np.all((a1 >= 1e-4) & (a1 <= 1e-1)), "alpha1 out of range"
    assert np.all((a2 >= 1e-1) & (a2 <= 1e1)), "alpha2 out of range"
    assert np.all((a3 >= -1.0) & (a3 <= 1.0)), "alpha3 out of range"
    np.testing.assert_array_equal(a1, b1)


def test_check_liouville():
    """Tests the determinant check on unimodular and scaled matrices."""
    rotation = np.array([[0.0, -1.0], [1.0, 0.0]])

    assert check_liouville(np.stack([np.eye(2), rotation])).passed, "det = 1 should pass"
    assert not check_liouville(np.stack([np.eye(2), 2 * np.eye(2)])).passed, "det = 4 fails"


def test_check_conjugate_pairing():
    """Tests if real matrices pass the pairing check."""
    rng = get_rng(6)

    assert check_conjugate_pairing(rng.normal(size=(10, 6, 6))).passed, "Real M should pass"


def test_check_zero_alpha():
    """Tests the alpha = 0 oracle at the coarsest allowed resolution."""
    assert check_zero_alpha(MonodromySettings(steps=256)).passed, "Oracle should hold"


def test_check_steady_orbits():
    """Tests the steady-orbit check for a short integration."""
    result = check_steady_orbits(AlphaParams(alpha1=1e-3, alpha2=30.0, alpha3=0.3), periods=2)

    assert result.passed, result.detail


def test_check_backend_agreement():
    """Tests if the backends agree inside the series-validity region."""
    result = check_backend_agreement(get_rng(7), 5, MonodromySettings())

    assert result.passed, result.detail
    assert result.gating, "Backend agreement gates the exit status"


def test_check_thresholds():
    """Tests the threshold check of the reference guide."""
    assert check_thresholds(PhysicalParams.reference()).passed, "Reference guide should pass"


def test_mirrored_specs():
    """Tests if the mirrored scans differ only in branch parity and alpha3 sign."""
    spec_a, spec_b = mirrored_specs(MonodromySettings(), n=4)

    assert spec_a.x == spec_b.x, "x axes should be identical"
    assert spec_a.y.quantity == spec_b.y.quantity == AxisQuantity.ALPHA3, "y should be alpha3"
    assert (spec_a.y.min, spec_a.y.max) == (-spec_b.y.max, -spec_b.y.min), "y is not mirrored"
    assert (spec_a.branch.k, spec_b.branch.k) == (0, 1), "k parities should differ"
    assert spec_a.branch.m == spec_b.branch.m == 0, "m should be shared"


def test_perturbation_growth_log():
    """Tests the log growth of a perturbation."""
    growth = PerturbationGrowth(initial=1e-6, final=1e-3, periods=10, diverged=False)

    assert math.isclose(growth.log_growth, math.log(1e3)), "Log growth is different"
    assert PerturbationGrowth(1e-6, 1.0, 10, True).log_growth == math.inf, "Diverged is inf"


def test_perturbation_growth_stable_point():
    """Tests if a perturbation of a stable steady orbit stays bounded."""
    growth = perturbation_growth(STABLE_POINT, BranchIndex())

    assert not growth.diverged, "Stable point should not diverge"
    assert 0 < growth.initial <= 1e-5, "Initial perturbation should be of order 1e-6"
    assert growth.log_growth <= math.log(1e3), "Growth should stay below 1e3"


def test_perturbation_growth_follows_largest_multiplier():
    """Tests if the nonlinear growth at an unstable point follows periods * ln max|lambda|."""
    branch = BranchIndex()
    lam = monodromy(LinearizedSystem(alphas=UNSTABLE_POINT, branch=branch)).max_modulus
    growth = perturbation_growth(UNSTABLE_POINT, branch)
    expected = growth.periods * math.log(lam)

    assert lam >= 1.1, "Point should be clearly unstable"
    assert 0.5 <= growth.log_growth / expected <= 2.0, "Growth is not within 2x of the linear one"


def test_check_perturbation_growth():
    """Tests if the check passes for the default points and fails for a stable 'unstable' one."""
    settings = MonodromySettings()
    result = check_perturbation_growth(settings)
    swapped = check_perturbation_growth(settings, unstable=STABLE_POINT)

    assert result.passed, result.detail
    assert result.gating, "Linear/nonlinear consistency gates the exit status"
    assert not swapped.passed, "A stable point cannot stand in for the unstable one"


def test_check_subthreshold_samples_zero_alpha3():
    """Tests the subthreshold column; alpha3 = 0 is sampled and holds a stable cell."""
    result = check_subthreshold(PhysicalParams.reference(), MonodromySettings())

    assert not result.gating, "Subthreshold audit is informational"
    assert not result.passed, result.detail
    assert int(result.detail.split()[0]) >= 1, "alpha3 = 0 should give a stable cell"


def test_check_subthreshold_rejects_even_count():
    """Tests if an alpha3 axis that skips 0 is rejected."""
    with pytest.raises(InvalidParameterError):
        check_subthreshold(PhysicalParams.reference(), MonodromySettings(), n=20)


def test_check_overlay_measured_fraction():
    """Tests the fraction of stable cells beyond the estimated upper bound."""
    result = check_overlay(MonodromySettings())
    fraction = float(result.detail.rsplit("(", 1)[1].rstrip(")"))

    assert not result.gating, "Overlay audit is informational"
    assert not result.passed, result.detail
    assert 0.4 <= fraction <= 0.6, f"Fraction beyond the bound is {fraction}"
