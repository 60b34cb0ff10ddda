"""This module is responsible for stability scans over two-dimensional parameter grids.

Rows of the grid (fixed y) are the unit of work. Each row is evaluated as one
batch by ``floquet.monodromy_batch``, so a node's result does not depend on the
worker that computed it and the output is identical for any worker count.
"""

import logging
import time

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import BoundCurve, bound_alpha3, threshold_ratio
from .errors import InvalidParameterError
from .floquet import monodromy_batch
from .models import (
    AxisQuantity,
    BranchIndex,
    CharacteristicFrequencies,
    MonodromySettings,
    ScanAxis,
    ScanMode,
    ScanSpec,
)
from .param_space import (
    characteristic_frequencies,
    larmor_per_radian,
    omega_from_alpha_ratio,
    phi_from_alpha3,
)
from .utils import check_phase_regime

logger = logging.getLogger(__name__)

FAILURE_WARNING_FRACTION = 0.01


@dataclass(frozen=True)
class Overlay:
    """Bound curve drawn in scan coordinates, with the stable-beyond-bound statistic."""

    x: np.ndarray
    y: np.ndarray
    label: str
    stable_cells: int
    stable_beyond: int
    note: str | None = None

    @property
    def fraction_beyond(self) -> float:
        """Fraction of stable cells strictly beyond the bound (0 without stable cells)."""
        return self.stable_beyond / self.stable_cells if self.stable_cells else 0.0


@dataclass(frozen=True)
class ScanResult:
    """Stability classification on the grid of a ``ScanSpec``.

    Node arrays have shape ``(y.n, x.n)``; row ``i`` holds ``y_values[i]``.
    Failed nodes have ``max_modulus = nan`` and ``stable = False``.
    """

    spec: ScanSpec
    x_values: np.ndarray
    y_values: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray
    max_modulus: np.ndarray
    stable: np.ndarray
    failed: np.ndarray
    wall_time_s: float = 0.0
    overlay: Overlay | None = None

    @property
    def failed_count(self) -> int:
        return int(self.failed.sum())

    @property
    def failure_fraction(self) -> float:
        return self.failed_count / self.failed.size

    @property
    def status(self) -> str:
        return "warning" if self.failure_fraction > FAILURE_WARNING_FRACTION else "ok"

    @property
    def stable_fraction(self) -> float:
        evaluated = self.failed.size - self.failed_count
        return int(self.stable.sum()) / evaluated if evaluated else 0.0


@dataclass(frozen=True)
class SymmetryReport:
    """Cell-by-cell comparison of two scans."""

    correspondence: str
    total_cells: int
    matching_cells: int
    mismatched: list[tuple[int, int]] = field(default_factory=list)

    @property
    def agreement(self) -> float:
        return self.matching_cells / self.total_cells

    @property
    def passed(self) -> bool:
        return self.matching_cells == self.total_cells


def _axis_grids(spec: ScanSpec) -> tuple[np.ndarray, np.ndarray, dict]:
    xs = spec.x.values()
    ys = spec.y.values()
    X, Y = np.meshgrid(xs, ys)
    return xs, ys, {spec.x.quantity: X, spec.y.quantity: Y}


def _resolve_abstract(spec: ScanSpec, shape, swept: dict):
    fixed = spec.alphas
    alpha1 = swept.get(AxisQuantity.ALPHA1, np.full(shape, fixed.alpha1))
    alpha2 = swept.get(AxisQuantity.ALPHA2, np.full(shape, fixed.alpha2))
    alpha3 = swept.get(AxisQuantity.ALPHA3, np.full(shape, fixed.alpha3))
    if AxisQuantity.RATIO_A2_A1 in swept:
        alpha2 = swept[AxisQuantity.RATIO_A2_A1] * alpha1
    return alpha1, alpha2, alpha3


def _resolve_physical(spec: ScanSpec, shape, swept: dict):
    p = spec.physical
    freqs = characteristic_frequencies(p)
    if AxisQuantity.OMEGA in swept:
        omega = swept[AxisQuantity.OMEGA]
    elif AxisQuantity.ALPHA1 in swept:
        omega = freqs.transverse_omega_perp / np.sqrt(swept[AxisQuantity.ALPHA1])
    elif AxisQuantity.ALPHA2 in swept:
        omega = freqs.rabi_Omega / swept[AxisQuantity.ALPHA2]
    elif AxisQuantity.RATIO_A2_A1 in swept:
        omega = omega_from_alpha_ratio(swept[AxisQuantity.RATIO_A2_A1], freqs)
    else:
        omega = np.full(shape, p.mod_omega)

    if AxisQuantity.ALPHA3 in swept:
        alpha3 = swept[AxisQuantity.ALPHA3]
    elif AxisQuantity.PHI in swept:
        phi = swept[AxisQuantity.PHI]
        check_phase_regime(float(np.max(np.abs(phi))))
        alpha3 = larmor_per_radian(p) * phi / omega
    else:
        alpha3 = freqs.larmor_omega_L / omega

    alpha1 = (freqs.transverse_omega_perp / omega) ** 2
    alpha2 = freqs.rabi_Omega / omega
    return alpha1, alpha2, alpha3


def resolve_grid(spec: ScanSpec):
    """Resolves (alpha1, alpha2, alpha3) at every node of the scan grid.

    Parameters
    ----------
    spec : ScanSpec
        Scan definition.

    Returns
    -------
    tuple of numpy.ndarray
        ``x_values``, ``y_values`` and the alpha arrays of shape ``(y.n, x.n)``.

    Raises
    ------
    InvalidParameterError
        If a node resolves to a negative or non-finite alpha1 or alpha2, or to a
        non-finite alpha3.
    """
    xs, ys, swept = _axis_grids(spec)
    shape = (ys.size, xs.size)
    if spec.mode == ScanMode.ABSTRACT:
        alpha1, alpha2, alpha3 = _resolve_abstract(spec, shape, swept)
    else:
        alpha1, alpha2, alpha3 = _resolve_physical(spec, shape, swept)

    alpha1, alpha2, alpha3 = (
        np.array(np.broadcast_to(v, shape), dtype=float) for v in (alpha1, alpha2, alpha3)
    )
    if not np.all(np.isfinite([alpha1, alpha2, alpha3])):
        raise InvalidParameterError("Scan grid resolves to non-finite alphas.")
    if np.any(alpha1 < 0) or np.any(alpha2 < 0):
        raise InvalidParameterError("Scan grid resolves to negative alpha1 or alpha2.")
    return xs, ys, alpha1, alpha2, alpha3


def _evaluate_row(payload: tuple) -> tuple[np.ndarray, np.ndarray]:
    alpha1, alpha2, alpha3, branch, settings = payload
    return monodromy_batch(
        alpha1,
        alpha2,
        alpha3,
        BranchIndex.model_validate(branch),
        MonodromySettings.model_validate(settings),
    )


def run_scan(spec: ScanSpec, workers: int = 1) -> ScanResult:
    """Classifies every node of the scan grid.

    Parameters
    ----------
    spec : ScanSpec
        Scan definition.
    workers : int, optional
        Number of worker processes. The default is 1 (in-process).

    Returns
    -------
    ScanResult
        Complete grid; numerical failures are flagged per node.
    """
    xs, ys, alpha1, alpha2, alpha3 = resolve_grid(spec)
    branch = spec.branch.model_dump()
    settings = spec.settings.model_dump()
    payloads = [(alpha1[i], alpha2[i], alpha3[i], branch, settings) for i in range(ys.size)]

    logger.info("Scanning %d x %d grid with %d worker(s).", xs.size, ys.size, workers)
    start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(_evaluate_row, payloads))
    else:
        rows = [_evaluate_row(payload) for payload in payloads]
    wall_time = time.perf_counter() - start

    max_modulus = np.vstack([row[0] for row in rows])
    failed = np.vstack([row[1] for row in rows])
    stable = ~failed & (np.nan_to_num(max_modulus, nan=np.inf) <= 1.0 + spec.settings.eps_stab)

    result = ScanResult(
        spec=spec,
        x_values=xs,
        y_values=ys,
        alpha1=alpha1,
        alpha2=alpha2,
        alpha3=alpha3,
        max_modulus=max_modulus,
        stable=stable,
        failed=failed,
        wall_time_s=wall_time,
    )
    logger.info("Scan finished in %.2f s, stable fraction %.3f.", wall_time, result.stable_fraction)
    if result.status == "warning":
        logger.warning(
            "%d of %d nodes failed numerically (%.1f%%).",
            result.failed_count,
            failed.size,
            100 * result.failure_fraction,
        )
    return result


def compare_classifications(
    a: ScanResult, b: ScanResult, correspondence: str = "identical"
) -> SymmetryReport:
    """Compares stable and failed flags of two results of equal shape, cell by cell."""
    if a.stable.shape != b.stable.shape:
        raise InvalidParameterError("Scan results have different grid shapes.")
    same = (a.stable == b.stable) & (a.failed == b.failed)
    mismatched = [(int(i), int(j)) for i, j in zip(*np.nonzero(~same))]
    return SymmetryReport(
        correspondence=correspondence,
        total_cells=same.size,
        matching_cells=int(same.sum()),
        mismatched=mismatched,
    )


def _close(u: np.ndarray, v: np.ndarray) -> bool:
    return u.shape == v.shape and np.allclose(u, v, rtol=1e-12, atol=1e-15)


def _correspondence(grid_a, grid_b):
    a1, a2, a3 = grid_a
    for flip in ((), (0,), (1,), (0, 1)):
        b1, b2, b3 = (np.flip(v, axis=flip) if flip else v for v in grid_b)
        if not (_close(a1, b1) and _close(a2, b2)):
            continue
        if _close(a3, b3):
            return flip, "identical"
        if _close(a3, -b3):
            return flip, "mirrored"
    return None, None


def symmetry_check(spec_a: ScanSpec, spec_b: ScanSpec, workers: int = 1) -> SymmetryReport:
    """Checks that two scans related by the branch symmetry classify alike.

    The grids must cover the same (alpha1, alpha2) nodes with alpha3 either
    identical or negated, possibly with an axis reversed. For even m, the
    branches (k even, -alpha3) and (k odd, +alpha3) share the same linearized
    dynamics, so mirrored scans must agree on every cell.

    Parameters
    ----------
    spec_a, spec_b : ScanSpec
        Scans to compare.
    workers : int, optional
        Worker processes per scan. The default is 1.

    Returns
    -------
    SymmetryReport
        Cell-by-cell agreement; ``passed`` iff 100% of the cells agree.

    Raises
    ------
    InvalidParameterError
        If the grids do not correspond node by node or the settings differ.
    """
    if spec_a.branch.m != spec_b.branch.m or spec_a.settings != spec_b.settings:
        raise InvalidParameterError("Symmetry check requires equal m and equal monodromy settings.")
    grid_a = resolve_grid(spec_a)[2:]
    grid_b = resolve_grid(spec_b)[2:]
    flip, correspondence = _correspondence(grid_a, grid_b)
    if correspondence is None:
        raise InvalidParameterError("Scan grids are incompatible: no node-by-node correspondence.")

    result_a = run_scan(spec_a, workers)
    result_b = run_scan(spec_b, workers)
    if flip:
        result_b = replace(
            result_b,
            stable=np.flip(result_b.stable, axis=flip),
            failed=np.flip(result_b.failed, axis=flip),
        )
    report = compare_classifications(result_a, result_b, correspondence)
    logger.info("Symmetry check (%s): %.4f agreement.", correspondence, report.agreement)
    return report


def refinement_agreement(coarse: ScanResult, fine: ScanResult) -> float:
    """Agreement of a scan with its refinement on coincident nodes.

    The fine grid must have ``2 n - 1`` nodes per axis, so that every other
    node coincides with the coarse grid. Failed nodes are left out.
    """
    ny, nx = coarse.stable.shape
    if fine.stable.shape != (2 * ny - 1, 2 * nx - 1):
        raise InvalidParameterError("Fine grid must have 2 n - 1 nodes per axis.")
    fine_stable = fine.stable[::2, ::2]
    usable = ~coarse.failed & ~fine.failed[::2, ::2]
    if not usable.any():
        return 1.0
    return float((coarse.stable == fine_stable)[usable].mean())


def _curve_coordinate(quantity: AxisQuantity, curve: BoundCurve, spec: ScanSpec) -> np.ndarray:
    if quantity == AxisQuantity.ALPHA1:
        return curve.alpha1
    if quantity == AxisQuantity.ALPHA2:
        return curve.alpha2
    if quantity == AxisQuantity.ALPHA3:
        return curve.alpha3
    if quantity == AxisQuantity.RATIO_A2_A1:
        return curve.alpha2 / curve.alpha1
    if curve.omega is None or spec.physical is None:
        raise InvalidParameterError(f"Bound curve cannot be drawn on a {quantity.value} axis.")
    if quantity == AxisQuantity.OMEGA:
        return curve.omega
    return phi_from_alpha3(curve.alpha3, curve.omega, spec.physical)


def _within(values: np.ndarray, axis: ScanAxis) -> np.ndarray:
    return (values >= axis.min) & (values <= axis.max)


def overlay_bound(result: ScanResult, curve: BoundCurve) -> ScanResult:
    """Attaches the bound curve to a scan result in scan coordinates.

    The statistic counts stable cells lying strictly beyond the bound of the
    curve's branch, using the closed-form bound at each cell's own alphas.

    Parameters
    ----------
    result : ScanResult
        Scan to annotate.
    curve : BoundCurve
        Bound samples.

    Returns
    -------
    ScanResult
        Copy of ``result`` with ``overlay`` set.

    Raises
    ------
    InvalidParameterError
        If the curve cannot be expressed on the scan axes.
    """
    spec = result.spec
    x = _curve_coordinate(spec.x.quantity, curve, spec)
    y = _curve_coordinate(spec.y.quantity, curve, spec)
    inside = _within(x, spec.x) & _within(y, spec.y)
    note = None
    if not inside.any():
        note = "bound curve lies outside the scan window"
        logger.info("Overlay is empty: %s.", note)

    on_bound = bound_alpha3(result.alpha1 * result.alpha2, curve.branch)
    offsets = -curve.branch.sign_k * (result.alpha3 - on_bound)
    stable = result.stable & ~result.failed
    overlay = Overlay(
        x=x[inside],
        y=y[inside],
        label=curve.label,
        stable_cells=int(stable.sum()),
        stable_beyond=int((stable & (offsets > 0)).sum()),
        note=note,
    )
    return replace(result, overlay=overlay)


def subthreshold_stable_cells(
    result: ScanResult, freqs: CharacteristicFrequencies, factor: float = 0.9
) -> int:
    """Number of stable cells with alpha2 / alpha1 below ``factor`` times the threshold ratio."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = result.alpha2 / result.alpha1
    below = ratio < factor * threshold_ratio(freqs)
    return int((result.stable & ~result.failed & below).sum())
