"""This module is responsible for reading parameter files and writing result files.

All files use SI units. CSV files are written by pandas with a fixed float format,
so equal results give byte-identical files.
"""

import json
import logging
import math

from pathlib import Path

import numpy as np
import pandas as pd

from .bounds import BoundCurve
from .constants import CONSTANTS_VERSION, SPECIES
from .errors import InvalidParameterError
from .guide_model import Trajectory
from .models import PhysicalParams, SpeciesConstants
from .scan import ScanResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
PARAMETER_KEYS = (
    "species",
    "mass_kg",
    "g_F",
    "gradient_T_per_m",
    "bias_T",
    "phi_rad",
    "pitch_m",
    "omega_rad_s",
)
PGM_STABLE = 255
PGM_UNSTABLE = 0
PGM_FAILED = 128


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise InvalidParameterError(f"{key} should be a number, got '{value}'.") from None


def read_parameter_file(file_path: str | Path) -> PhysicalParams:
    """Reads physical parameters from a flat ``key = value`` file.

    Parameters
    ----------
    file_path : str or pathlib.Path
        The path of the parameter file. Lines starting with ``#`` and trailing
        ``#`` comments are ignored.

    Returns
    -------
    PhysicalParams
        Parameters of the file. ``species = Rb87`` provides ``mass_kg`` and
        ``g_F`` unless they are given explicitly; ``phi_rad`` defaults to 0.

    Raises
    ------
    InvalidParameterError
        When the file is missing or malformed, a key is unknown, repeated or
        missing, or a value is not a number.
    pydantic.ValidationError
        When a value violates a model constraint (e.g. negative pitch).
    """
    try:
        df = pd.read_csv(
            file_path,
            sep=r"\s*=\s*",
            engine="python",
            comment="#",
            header=None,
            names=["key", "value"],
            dtype=str,
        )
    except FileNotFoundError:
        raise InvalidParameterError(f"Parameter file {file_path} not found.") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidParameterError(f"Parameter file {file_path} is malformed: {e}") from None

    df = df.assign(key=df["key"].str.strip(), value=df["value"].str.strip())
    if df["value"].isna().any():
        raise InvalidParameterError(f"Line without '=' in {file_path}.")
    unknown = sorted(set(df["key"]) - set(PARAMETER_KEYS))
    if unknown:
        raise InvalidParameterError(f"Unknown parameter keys: {', '.join(unknown)}.")
    duplicated = sorted(set(df.loc[df["key"].duplicated(), "key"]))
    if duplicated:
        raise InvalidParameterError(f"Repeated parameter keys: {', '.join(duplicated)}.")
    values = dict(zip(df["key"], df["value"]))

    species_name = values.pop("species", None)
    if species_name is not None:
        if species_name not in SPECIES:
            raise InvalidParameterError(
                f"Unknown species '{species_name}'; known species: {', '.join(SPECIES)}."
            )
        default_mass, default_g = SPECIES[species_name]
        values.setdefault("mass_kg", str(default_mass))
        values.setdefault("g_F", str(default_g))

    missing = [
        key for key in PARAMETER_KEYS if key not in ("species", "phi_rad") and key not in values
    ]
    if missing:
        raise InvalidParameterError(f"Missing parameter keys: {', '.join(missing)}.")
    numbers = {key: _to_float(key, value) for key, value in values.items()}

    return PhysicalParams(
        species=SpeciesConstants(mass_kg=numbers["mass_kg"], lande_g_factor=numbers["g_F"]),
        gradient_b=numbers["gradient_T_per_m"],
        bias_Bb=numbers["bias_T"],
        phase_phi=numbers.get("phi_rad", 0.0),
        wire_pitch_l=numbers["pitch_m"],
        mod_omega=numbers["omega_rad_s"],
    )


def sidecar_path(path: Path) -> Path:
    """JSON sidecar that accompanies a CSV output file."""
    return path.with_suffix(".json")


def _clean(value):
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.floating, float)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(payload: dict, path: Path):
    """Writes a JSON document; non-finite numbers become null."""
    path.write_text(json.dumps(_clean(payload), indent=2) + "\n")


def trajectory_to_frame(trajectory: Trajectory) -> pd.DataFrame:
    """Gets trajectory samples as a data frame with a leading ``tau`` column."""
    return pd.DataFrame(trajectory.states, columns=list(trajectory.components)).assign(
        tau=trajectory.tau
    )[["tau", *trajectory.components]]


def write_trajectory(trajectory: Trajectory, path: Path, metadata: dict | None = None):
    """Writes the trajectory CSV and its JSON sidecar.

    The sidecar records whether the run diverged, in which case the CSV ends at
    the last finite sample.
    """
    trajectory_to_frame(trajectory).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    write_json(
        {
            **(metadata or {}),
            "steps_per_period": trajectory.steps_per_period,
            "renormalized": trajectory.renormalized,
            "samples": len(trajectory.tau),
            "diverged": trajectory.diverged,
            "divergence_tau": trajectory.divergence_tau,
            "truncated": trajectory.diverged,
            "spin_norm_drift": trajectory.spin_norm_drift(),
        },
        sidecar_path(path),
    )


def scan_to_frame(result: ScanResult) -> pd.DataFrame:
    """Gets scan nodes as records, y outer and x inner, both ascending.

    Failed nodes have ``max_modulus`` NaN and an empty ``stable`` field.
    """
    X, Y = np.meshgrid(result.x_values, result.y_values)
    stable = np.where(result.failed, "", np.where(result.stable, "1", "0"))
    return pd.DataFrame(
        {
            "x": X.ravel(),
            "y": Y.ravel(),
            "alpha1": result.alpha1.ravel(),
            "alpha2": result.alpha2.ravel(),
            "alpha3": result.alpha3.ravel(),
            "max_modulus": result.max_modulus.ravel(),
            "stable": stable.ravel(),
        }
    )


def scan_metadata(result: ScanResult) -> dict:
    """Sidecar contents of a scan: the ScanSpec echo, timing and failure statistics."""
    metadata = {
        "spec": result.spec.model_dump(mode="json"),
        "backend": result.spec.settings.backend.value,
        "order_or_steps": result.spec.settings.order_or_steps,
        "eps_stab": result.spec.settings.eps_stab,
        "constants": CONSTANTS_VERSION,
        "wall_time_s": result.wall_time_s,
        "nodes": int(result.failed.size),
        "failure_count": result.failed_count,
        "status": result.status,
        "stable_fraction": result.stable_fraction,
        "csv_null_convention": "failed nodes: max_modulus = nan, stable empty",
    }
    if result.overlay is not None:
        metadata["overlay"] = {
            "label": result.overlay.label,
            "samples_in_window": int(result.overlay.x.size),
            "stable_cells": result.overlay.stable_cells,
            "stable_beyond_bound": result.overlay.stable_beyond,
            "fraction_beyond_bound": result.overlay.fraction_beyond,
            "note": result.overlay.note,
        }
    return metadata


def write_scan(result: ScanResult, path: Path):
    """Writes the scan CSV and its JSON sidecar."""
    scan_to_frame(result).to_csv(path, index=False, na_rep="nan", float_format=FLOAT_FORMAT)
    write_json(scan_metadata(result), sidecar_path(path))


def write_pgm(result: ScanResult, path: Path):
    """Writes a plain (P2) grayscale quick-look of the classification.

    Rows run north-up: the first row is the largest y value.
    """
    pixels = np.where(
        result.failed, PGM_FAILED, np.where(result.stable, PGM_STABLE, PGM_UNSTABLE)
    )[::-1]
    ny, nx = pixels.shape
    with open(path, "w") as f:
        f.write(f"P2\n{nx} {ny}\n255\n")
        np.savetxt(f, pixels, fmt="%d")


def boundary_to_frame(curve: BoundCurve) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "omega_rad_s": curve.omega,
            "omega_L_rad_s": curve.omega_L,
            "alpha1": curve.alpha1,
            "alpha2": curve.alpha2,
            "alpha3": curve.alpha3,
        }
    )


def write_boundary(curve: BoundCurve, path: Path, metadata: dict | None = None):
    """Writes the bound-curve CSV and its JSON sidecar with the threshold."""
    if curve.omega is None:
        raise InvalidParameterError("Only curves in frequency coordinates can be written.")
    boundary_to_frame(curve).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    write_json(
        {
            **(metadata or {}),
            "label": curve.label,
            "branch": curve.branch.model_dump(),
            "threshold_omega_rad_s": curve.threshold_omega,
            "threshold_hz": curve.threshold_omega / (2 * math.pi),
            "samples": int(curve.alpha3.size),
            "notes": curve.notes,
        },
        sidecar_path(path),
    )
