"""This module includes helper functions used by more than one module."""

from pathlib import Path

import numpy as np

from src.models import AlphaParams, AxisQuantity, AxisScale, ScanAxis, ScanSpec
from src.scan import ScanResult, resolve_grid

REFERENCE_LINES = {
    "species": "Rb87",
    "gradient_T_per_m": "2.90",
    "bias_T": "1.5e-4",
    "phi_rad": "1e-3",
    "pitch_m": "15e-6",
    "omega_rad_s": "62831.853071795864",
}


def write_parameter_file(path: Path, drop: tuple[str, ...] = (), **overrides) -> Path:
    """Writes a parameter file of the reference guide.

    Parameters
    ----------
    path : pathlib.Path
        Where the file is written.
    drop : tuple[str, ...], optional
        Keys left out of the file.
    **overrides
        Values replacing the reference ones (or extra keys).

    Returns
    -------
    pathlib.Path
        The path of the written file.
    """
    values = {**REFERENCE_LINES, **overrides}
    lines = ["# reference guide", ""]
    lines += [f"{key} = {value}" for key, value in values.items() if key not in drop]
    path.write_text("\n".join(lines) + "\n")
    return path


def abstract_spec(
    alpha1: float = 1e-2,
    ratio: tuple[float, float] = (1e3, 1e4),
    alpha3: tuple[float, float] = (0.0, 1.0),
    n: tuple[int, int] = (5, 4),
) -> ScanSpec:
    """Abstract scan spec over (alpha2 / alpha1, alpha3) at fixed alpha1."""
    return ScanSpec(
        x=ScanAxis(
            quantity=AxisQuantity.RATIO_A2_A1,
            scale=AxisScale.LOG,
            min=ratio[0],
            max=ratio[1],
            n=n[0],
        ),
        y=ScanAxis(quantity=AxisQuantity.ALPHA3, min=alpha3[0], max=alpha3[1], n=n[1]),
        alphas=AlphaParams(alpha1=alpha1, alpha2=0.0),
    )


def synthetic_result(
    spec: ScanSpec, stable: np.ndarray, failed: np.ndarray | None = None
) -> ScanResult:
    """Builds a scan result with prescribed classification, without computing monodromies.

    Parameters
    ----------
    spec : ScanSpec
        Scan definition used to resolve the alpha grids.
    stable : numpy.ndarray
        Boolean array of shape ``(y.n, x.n)``.
    failed : numpy.ndarray, optional
        Boolean array of failed nodes. Defaults to no failures.

    Returns
    -------
    ScanResult
        Result with ``max_modulus`` 1 on stable, 2 on unstable and NaN on failed nodes.
    """
    xs, ys, alpha1, alpha2, alpha3 = resolve_grid(spec)
    stable = np.asarray(stable, dtype=bool)
    failed = np.zeros_like(stable) if failed is None else np.asarray(failed, dtype=bool)
    stable = stable & ~failed
    max_modulus = np.where(failed, np.nan, np.where(stable, 1.0, 2.0))
    return ScanResult(
        spec=spec,
        x_values=xs,
        y_values=ys,
        alpha1=alpha1,
        alpha2=alpha2,
        alpha3=alpha3,
        max_modulus=max_modulus,
        stable=stable,
        failed=failed,
    )


def read_pgm(path: Path) -> tuple[str, tuple[int, int], int, np.ndarray]:
    """Reads a plain (P2) PGM file written by the toolkit.

    Returns
    -------
    tuple
        Magic number, (width, height), max value and the pixel rows.
    """
    tokens = path.read_text().split()
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    pixels = np.array(tokens[4:], dtype=int).reshape(height, width)
    return magic, (width, height), maxval, pixels
