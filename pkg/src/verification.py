"""This module is responsible for the invariant suites run by the ``verify`` command.

Gating checks follow from the mathematics of the model and decide the exit
status. Informational checks compare numerically located stability domains
with the analytic estimates and are reported without gating.
"""

import logging
import math

from dataclasses import dataclass

import numpy as np

from .bounds import bound_curve_abstract, threshold_omega, threshold_ratio
from .floquet import (
    PERIOD,
    LinearizedSystem,
    coefficient_matrices,
    conjugate_pairing_error,
    monodromy,
    peano_baker_series,
    rk4_flow,
)
from .guide_model import integrate_nonlinear, steady_orbit
from .models import (
    AlphaParams,
    AxisQuantity,
    AxisScale,
    Backend,
    BranchIndex,
    MonodromySettings,
    NonlinearState,
    PhysicalParams,
    ScanAxis,
    ScanMode,
    ScanSpec,
)
from .param_space import characteristic_frequencies
from .scan import overlay_bound, run_scan, subthreshold_stable_cells, symmetry_check
from .utils import check_odd, get_rng

logger = logging.getLogger(__name__)

DET_TOL = 1e-6
PAIRING_TOL = 1e-10
ZERO_ALPHA_TOL = 1e-8
STEADY_TOL = 1e-6
AGREEMENT_TOL = 1e-3
ZERO_ALPHA_MONODROMY = np.diag([-1.0, -1.0, -1.0, -1.0, 1.0, 1.0])
UNSTABLE_POINT = AlphaParams(alpha1=3e-3, alpha2=100.0, alpha3=1.0)
STABLE_POINT = AlphaParams(alpha1=1e-3, alpha2=1.0, alpha3=0.0)
MIN_UNSTABLE_MODULUS = 1.1
MAX_STABLE_GROWTH = 1e3


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one verification check."""

    name: str
    passed: bool
    detail: str
    gating: bool = True

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "gating": self.gating,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class PerturbationGrowth:
    """Growth of a small perturbation of the steady orbit under the nonlinear dynamics."""

    initial: float
    final: float
    periods: float
    diverged: bool

    @property
    def log_growth(self) -> float:
        if self.diverged or self.final == 0:
            return math.inf
        return math.log(self.final / self.initial)


def random_alphas(
    rng: np.random.Generator,
    draws: int,
    alpha1=(1e-4, 1e-1),
    alpha2=(1e-1, 1e1),
    alpha3=(-1.0, 1.0),
):
    """Draws alpha1 and alpha2 log-uniformly and alpha3 uniformly."""
    a1 = np.exp(rng.uniform(math.log(alpha1[0]), math.log(alpha1[1]), draws))
    a2 = np.exp(rng.uniform(math.log(alpha2[0]), math.log(alpha2[1]), draws))
    a3 = rng.uniform(alpha3[0], alpha3[1], draws)
    return a1, a2, a3


def _propagated_stack(a1, a2, a3, branch: BranchIndex, steps: int) -> np.ndarray:
    return rk4_flow(lambda t: coefficient_matrices(a1, a2, a3, branch, t), PERIOD, steps)


def check_liouville(stack: np.ndarray) -> CheckResult:
    """det M = 1 for every monodromy matrix of the stack (trace-free A)."""
    residual = float(np.max(np.abs(np.linalg.det(stack) - 1.0)))
    return CheckResult(
        "liouville",
        residual <= DET_TOL,
        f"max |det M - 1| = {residual:.3g} over {len(stack)} draws (tolerance {DET_TOL:g})",
    )


def check_conjugate_pairing(stack: np.ndarray) -> CheckResult:
    """Multipliers of a real monodromy matrix come in conjugate pairs."""
    worst = 0.0
    for M in stack:
        multipliers = np.linalg.eigvals(M)
        scale = max(1.0, float(np.abs(multipliers).max()))
        worst = max(worst, conjugate_pairing_error(multipliers) / scale)
    return CheckResult(
        "conjugate_pairing",
        worst <= PAIRING_TOL,
        f"max relative pairing error = {worst:.3g} (tolerance {PAIRING_TOL:g})",
    )


def check_zero_alpha(settings: MonodromySettings) -> CheckResult:
    """At alpha = 0 the monodromy matrix is block-diag(-I2, -I2, I2)."""
    sys = LinearizedSystem(alphas=AlphaParams(alpha1=0.0, alpha2=0.0), branch=BranchIndex())
    result = monodromy(sys, settings.model_copy(update={"backend": Backend.PROPAGATE}))
    error = float(np.max(np.abs(result.monodromy - ZERO_ALPHA_MONODROMY)))
    return CheckResult(
        "zero_alpha_oracle",
        error <= ZERO_ALPHA_TOL,
        f"max |M - diag(-1,-1,-1,-1,1,1)| = {error:.3g} (tolerance {ZERO_ALPHA_TOL:g})",
    )


def check_steady_orbits(
    alphas: AlphaParams, periods: int = 10, steps_per_period: int = 1024
) -> CheckResult:
    """Nonlinear integration from each steady initializer stays on the analytic orbit."""
    deviations = []
    for k in (0, 1):
        for m in (0, 1):
            orbit = steady_orbit(BranchIndex(k=k, m=m), alphas)
            trajectory = integrate_nonlinear(
                orbit.initial_state(),
                alphas,
                periods,
                steps_per_period,
                sample_every=steps_per_period,
            )
            analytic = np.array([orbit.state_at(t) for t in trajectory.tau])
            deviations.append(float(np.max(np.abs(trajectory.states - analytic))))
    worst = max(deviations)
    return CheckResult(
        "steady_orbit",
        worst <= STEADY_TOL,
        f"max deviation over (k, m) in {{0,1}}^2 = {worst:.3g} (tolerance {STEADY_TOL:g})",
    )


def check_backend_agreement(
    rng: np.random.Generator, points: int, settings: MonodromySettings
) -> CheckResult:
    """Series and propagation monodromy matrices agree inside the series-validity region."""
    a1, a2, a3 = random_alphas(
        rng, points, alpha1=(1e-4, 1e-3), alpha2=(1e-1, 1.0), alpha3=(-0.5, 0.5)
    )
    branch = BranchIndex()
    propagated = _propagated_stack(a1, a2, a3, branch, settings.steps)
    series = peano_baker_series(
        lambda ts: coefficient_matrices(
            a1[None, :], a2[None, :], a3[None, :], branch, ts[:, None]
        ),
        PERIOD,
        settings.order,
        settings.quadrature_nodes,
        settings.segments,
    )
    scale = np.abs(propagated).max(axis=(1, 2))
    relative = float(np.max(np.abs(series - propagated).max(axis=(1, 2)) / scale))
    return CheckResult(
        "backend_agreement",
        relative <= AGREEMENT_TOL,
        f"max relative difference = {relative:.3g} over {points} points "
        f"(order {settings.order}, {settings.segments} segments; tolerance {AGREEMENT_TOL:g})",
    )


def mirrored_specs(
    settings: MonodromySettings, n: int = 20, alpha1: float = 1e-2
) -> tuple[ScanSpec, ScanSpec]:
    """Scans of (k=0, alpha3 < 0) and (k=1, alpha3 > 0) over mirrored alpha3 ranges, m = 0."""
    x = ScanAxis(quantity=AxisQuantity.RATIO_A2_A1, scale=AxisScale.LOG, min=1e3, max=1e5, n=n)
    common = {
        "x": x,
        "mode": ScanMode.ABSTRACT,
        "alphas": AlphaParams(alpha1=alpha1, alpha2=0.0),
        "settings": settings,
    }
    spec_a = ScanSpec(
        y=ScanAxis(quantity=AxisQuantity.ALPHA3, min=-1.0, max=-0.05, n=n),
        branch=BranchIndex(k=0, m=0),
        **common,
    )
    spec_b = ScanSpec(
        y=ScanAxis(quantity=AxisQuantity.ALPHA3, min=0.05, max=1.0, n=n),
        branch=BranchIndex(k=1, m=0),
        **common,
    )
    return spec_a, spec_b


def check_symmetry(settings: MonodromySettings, workers: int = 1) -> CheckResult:
    """Mirrored scans of the two branch parities classify identically."""
    report = symmetry_check(*mirrored_specs(settings), workers=workers)
    return CheckResult(
        "branch_symmetry",
        report.passed,
        f"{report.matching_cells}/{report.total_cells} cells agree ({report.correspondence})",
    )


def check_thresholds(p: PhysicalParams) -> CheckResult:
    """Threshold near 2 pi x 3 kHz and threshold ratio near 6e3 for the reference guide."""
    freqs = characteristic_frequencies(p)
    th_khz = threshold_omega(freqs) / (2 * math.pi) / 1e3
    ratio = threshold_ratio(freqs)
    passed = 2.7 <= th_khz <= 3.2 and abs(ratio / 6e3 - 1) <= 0.1
    return CheckResult(
        "thresholds",
        passed,
        f"omega_th / 2 pi = {th_khz:.4g} kHz, alpha2/alpha1 at threshold = {ratio:.4g}",
    )


def perturbation_growth(
    alphas: AlphaParams,
    branch: BranchIndex,
    periods: int = 20,
    epsilon: float = 1e-6,
    steps_per_period: int = 1024,
) -> PerturbationGrowth:
    """Integrates a perturbed steady orbit and measures the deviation growth.

    The perturbation shifts X, Z and the spin direction by ``epsilon``; the spin
    is renormalized to unit length before integration.
    """
    orbit = steady_orbit(branch, alphas)
    y0 = orbit.initial_state().as_array()
    y0[[0, 2, 5]] += epsilon
    y0[4:7] /= np.linalg.norm(y0[4:7])
    initial = float(np.linalg.norm(y0 - orbit.state_at(0.0)))

    trajectory = integrate_nonlinear(
        NonlinearState.from_array(y0),
        alphas,
        periods,
        steps_per_period,
        sample_every=steps_per_period,
    )
    final = float(np.linalg.norm(trajectory.final - orbit.state_at(trajectory.tau[-1])))
    return PerturbationGrowth(
        initial=initial, final=final, periods=periods, diverged=trajectory.diverged
    )


def check_perturbation_growth(
    settings: MonodromySettings,
    unstable: AlphaParams = UNSTABLE_POINT,
    stable: AlphaParams = STABLE_POINT,
) -> CheckResult:
    """Compares nonlinear perturbation growth with the largest multiplier.

    At the unstable point max|lambda| must reach 1.1 and the log growth must lie
    within a factor 2 of periods * ln max|lambda|. At the stable point the
    perturbation must stay below 1e3 times its initial size.
    """
    branch = BranchIndex()
    lam = monodromy(LinearizedSystem(alphas=unstable, branch=branch), settings).max_modulus
    growth = perturbation_growth(unstable, branch)
    expected = growth.periods * math.log(lam)
    ratio = growth.log_growth / expected if expected > 0 else math.inf
    bounded = perturbation_growth(stable, branch)

    unstable_ok = lam >= MIN_UNSTABLE_MODULUS and 0.5 <= ratio <= 2.0
    stable_ok = bounded.log_growth <= math.log(MAX_STABLE_GROWTH)
    return CheckResult(
        "perturbation_growth",
        unstable_ok and stable_ok,
        f"unstable ({unstable.alpha1:g}, {unstable.alpha2:g}, {unstable.alpha3:g}): "
        f"max|lambda| = {lam:.4g}, log growth {growth.log_growth:.3g} vs {expected:.3g} linear; "
        f"stable ({stable.alpha1:g}, {stable.alpha2:g}, {stable.alpha3:g}): "
        f"log growth {bounded.log_growth:.3g} (limit {math.log(MAX_STABLE_GROWTH):.3g})",
    )


def check_subthreshold(
    p: PhysicalParams, settings: MonodromySettings, workers: int = 1, n: int = 21
) -> CheckResult:
    """Stable cells in a column at half the threshold ratio (none are expected).

    The alpha3 axis spans [-1, 1] with an odd node count so that alpha3 = 0 is sampled.
    """
    check_odd(n, "n")
    freqs = characteristic_frequencies(p)
    ratio = threshold_ratio(freqs)
    spec = ScanSpec(
        x=ScanAxis(quantity=AxisQuantity.RATIO_A2_A1, min=0.45 * ratio, max=0.5 * ratio, n=2),
        y=ScanAxis(quantity=AxisQuantity.ALPHA3, min=-1.0, max=1.0, n=n),
        mode=ScanMode.PHYSICAL,
        physical=p,
        settings=settings,
    )
    result = run_scan(spec, workers)
    stable = subthreshold_stable_cells(result, freqs)
    return CheckResult(
        "subthreshold_instability",
        stable == 0,
        f"{stable} stable cells of {result.stable.size} below 0.9 x threshold ratio {ratio:.4g}",
        gating=False,
    )


def check_overlay(
    settings: MonodromySettings, workers: int = 1, n: int = 30, alpha1: float = 1e-2
) -> CheckResult:
    """Fraction of stable cells beyond the estimated upper bound in a default-axes scan."""
    x = ScanAxis(quantity=AxisQuantity.RATIO_A2_A1, scale=AxisScale.LOG, min=1e3, max=1e5, n=n)
    spec = ScanSpec(
        x=x,
        y=ScanAxis(quantity=AxisQuantity.ALPHA3, min=0.0, max=1.0, n=n),
        alphas=AlphaParams(alpha1=alpha1, alpha2=0.0),
        settings=settings,
    )
    curve = bound_curve_abstract(alpha1, spec.branch, (x.min, x.max), n)
    overlay = overlay_bound(run_scan(spec, workers), curve).overlay
    return CheckResult(
        "bound_overlay",
        overlay.fraction_beyond <= 0.05,
        f"{overlay.stable_beyond} of {overlay.stable_cells} stable cells beyond the bound "
        f"({overlay.fraction_beyond:.3f})",
        gating=False,
    )


def run_verification(
    seed: int = 0,
    draws: int = 1000,
    settings: MonodromySettings | None = None,
    workers: int = 1,
) -> list[CheckResult]:
    """Runs every verification check.

    Parameters
    ----------
    seed : int, optional
        Seed of the random parameter draws. The default is 0.
    draws : int, optional
        Number of random draws of the Liouville and pairing checks; a tenth of
        it (at least 10) is used for the backend agreement. The default is 1000.
    settings : MonodromySettings, optional
        Monodromy settings. Defaults to the model defaults.
    workers : int, optional
        Worker processes for the scan checks. The default is 1.

    Returns
    -------
    list of CheckResult
        Results in a fixed order. The same seed gives the same results.
    """
    settings = settings or MonodromySettings()
    rng = get_rng(seed)
    reference = PhysicalParams.reference()

    a1, a2, a3 = random_alphas(rng, draws)
    stack = _propagated_stack(a1, a2, a3, BranchIndex(), settings.steps)
    results = [
        check_liouville(stack),
        check_conjugate_pairing(stack),
        check_zero_alpha(settings),
        check_steady_orbits(AlphaParams(alpha1=1e-3, alpha2=30.0, alpha3=0.3)),
        check_backend_agreement(rng, max(draws // 10, 10), settings),
        check_symmetry(settings, workers),
        check_thresholds(reference),
        check_perturbation_growth(settings),
        check_subthreshold(reference, settings, workers),
        check_overlay(settings, workers),
    ]
    for result in results:
        log = logger.info if result.passed else logger.warning
        log("%s: %s (%s)", result.name, "pass" if result.passed else "FAIL", result.detail)
    return results
