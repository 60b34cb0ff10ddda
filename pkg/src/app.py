"""This module is responsible for connecting all parts of the toolkit in the command line interface.

Exit codes: 0 success (stable for ``point``), 1 failed verification, 2 usage
error, 10 unstable point, 11 diverged trajectory, 20 numerical failure.
"""

import json
import logging
import math

from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Optional, Tuple

import typer

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .bounds import bound_curve, bound_curve_abstract, threshold_omega, threshold_ratio
from .data_processing import (
    read_parameter_file,
    sidecar_path,
    write_boundary,
    write_json,
    write_pgm,
    write_scan,
    write_trajectory,
)
from .errors import InvalidParameterError, WaveguideError
from .floquet import LinearizedSystem, monodromy
from .guide_model import integrate_nonlinear, steady_orbit
from .models import (
    AlphaParams,
    AxisQuantity,
    AxisScale,
    Backend,
    BranchIndex,
    MonodromySettings,
    NonlinearState,
    RunConfig,
    ScanAxis,
    ScanMode,
    ScanSpec,
)
from .param_space import alphas_from_physical, characteristic_frequencies
from .scan import overlay_bound, run_scan
from .utils import check_writable
from .verification import run_verification

logger = logging.getLogger(__name__)

EXIT_UNSTABLE = 10
EXIT_DIVERGED = 11
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
DEFAULT_SCAN_ALPHA1 = 1e-2

app = typer.Typer(
    help="Floquet stability toolkit for the time-modulated magnetic waveguide.",
    no_args_is_help=True,
    add_completion=False,
)
console = Console()

ConfigOption = Annotated[
    Optional[Path], typer.Option("--config", help="Parameter file (key = value, SI units).")
]
Alpha1Option = Annotated[
    Optional[float], typer.Option("--alpha1", help="alpha1 = omega_perp^2 / omega^2.")
]
Alpha2Option = Annotated[Optional[float], typer.Option("--alpha2", help="alpha2 = Omega / omega.")]
Alpha3Option = Annotated[
    Optional[float], typer.Option("--alpha3", help="alpha3 = omega_L / omega.")
]
KOption = Annotated[int, typer.Option("--k", help="Branch index k (theta* = k pi).")]
MOption = Annotated[int, typer.Option("--m", help="Branch index m (nu* = (2m + 1) pi / 2).")]
BackendOption = Annotated[Backend, typer.Option("--backend", help="Fundamental matrix backend.")]
StepsOption = Annotated[int, typer.Option("--steps", help="RK4 steps per period (>= 256).")]
OrderOption = Annotated[int, typer.Option("--order", help="Peano-Baker series order.")]
NodesOption = Annotated[
    int, typer.Option("--nodes", help="Odd Simpson nodes per segment (>= 129).")
]
SegmentsOption = Annotated[int, typer.Option("--segments", help="Series segments per period.")]
EpsStabOption = Annotated[
    float, typer.Option("--eps-stab", help="Stability band: max|lambda| <= 1 + eps.")
]
WorkersOption = Annotated[int, typer.Option("--workers", help="Worker processes for scans.")]


def _configure_logging(verbose: bool):
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@app.callback()
def main(
    verbose: Annotated[
        bool, typer.Option("--verbose", "-v", help="Log progress to stderr.")
    ] = False,
):
    """Floquet stability toolkit for the time-modulated magnetic waveguide."""
    _configure_logging(verbose)


@contextmanager
def handle_errors():
    """Turns toolkit and validation errors into a logged message and an exit code."""
    try:
        yield
    except WaveguideError as e:
        logger.error(e.detail)
        raise typer.Exit(code=e.exit_code)
    except ValidationError as e:
        logger.error("Invalid input: %s", e)
        raise typer.Exit(code=EXIT_USAGE)


def _inline_alphas(alpha1, alpha2, alpha3) -> AlphaParams | None:
    if alpha1 is None and alpha2 is None and alpha3 is None:
        return None
    return AlphaParams(alpha1=alpha1, alpha2=alpha2, alpha3=alpha3 or 0.0)


def _settings(backend, steps, order, nodes, segments, eps_stab) -> MonodromySettings:
    return MonodromySettings(
        backend=backend,
        steps=steps,
        order=order,
        quadrature_nodes=nodes,
        segments=segments,
        eps_stab=eps_stab,
    )


def _resolve_alphas(cfg: RunConfig) -> AlphaParams:
    if cfg.config_path is not None:
        return alphas_from_physical(read_parameter_file(cfg.config_path))
    return cfg.alphas


def _check_outputs(*paths: Path | None):
    for path in paths:
        if path is not None:
            check_writable(path)


@app.command("params")
def cmd_params(
    config: ConfigOption = None,
    omega: Annotated[
        Optional[float], typer.Option("--omega", help="Override the modulation frequency (rad/s).")
    ] = None,
):
    """Prints the characteristic frequencies and the alphas of a parameter file."""
    with handle_errors():
        if config is None:
            raise InvalidParameterError("params requires --config.")
        p = read_parameter_file(config)
        if omega is not None:
            p = p.model_copy(update={"mod_omega": omega})
        freqs = characteristic_frequencies(p)
        alphas = alphas_from_physical(p)
        rows = [
            ("omega_L", freqs.larmor_omega_L),
            ("omega_perp", freqs.transverse_omega_perp),
            ("Omega", freqs.rabi_Omega),
            ("omega", p.mod_omega),
            ("omega_th", threshold_omega(freqs)),
        ]
        for name, value in rows:
            typer.echo(f"{name} = {value:.6g} rad/s ({value / (2 * math.pi):.6g} Hz)")
        typer.echo(f"alpha1 = {alphas.alpha1:.6g}")
        typer.echo(f"alpha2 = {alphas.alpha2:.6g}")
        typer.echo(f"alpha3 = {alphas.alpha3:.6g}")
        typer.echo(f"alpha2/alpha1 at threshold = {threshold_ratio(freqs):.6g}")


@app.command("point")
def cmd_point(
    config: ConfigOption = None,
    alpha1: Alpha1Option = None,
    alpha2: Alpha2Option = None,
    alpha3: Alpha3Option = None,
    k: KOption = 1,
    m: MOption = 0,
    backend: BackendOption = Backend.PROPAGATE,
    steps: StepsOption = 1024,
    order: OrderOption = 4,
    nodes: NodesOption = 129,
    segments: SegmentsOption = 64,
    eps_stab: EpsStabOption = 1e-3,
    out: Annotated[
        Optional[Path], typer.Option("--out", help="Write the JSON report here.")
    ] = None,
):
    """Computes the Floquet multipliers of one parameter point.

    Exits with 0 if the point is stable and 10 if it is unstable.
    """
    with handle_errors():
        cfg = RunConfig(
            mode=ScanMode.PHYSICAL if config else ScanMode.ABSTRACT,
            config_path=config,
            alphas=_inline_alphas(alpha1, alpha2, alpha3),
            branch=BranchIndex(k=k, m=m),
            settings=_settings(backend, steps, order, nodes, segments, eps_stab),
            out=out,
        )
        _check_outputs(cfg.out)
        alphas = _resolve_alphas(cfg)
        result = monodromy(LinearizedSystem(alphas=alphas, branch=cfg.branch), cfg.settings)
        report = result.to_report(alphas, cfg.branch)
        typer.echo(json.dumps(report, indent=2))
        if cfg.out is not None:
            write_json(report, cfg.out)
    if not result.stable:
        raise typer.Exit(code=EXIT_UNSTABLE)


def _overlay_curve(result, spec: ScanSpec):
    if spec.mode == ScanMode.PHYSICAL:
        freqs = characteristic_frequencies(spec.physical)
        omega = freqs.rabi_Omega / result.alpha2
        return bound_curve(freqs, spec.branch, (float(omega.min()), float(omega.max())))
    if AxisQuantity.ALPHA1 in (spec.x.quantity, spec.y.quantity):
        raise InvalidParameterError("Bound overlay in abstract mode needs a fixed alpha1.")
    ratio = result.alpha2 / result.alpha1
    return bound_curve_abstract(
        spec.alphas.alpha1, spec.branch, (float(ratio.min()), float(ratio.max()))
    )


@app.command("scan")
def cmd_scan(
    config: ConfigOption = None,
    alpha1: Alpha1Option = None,
    alpha2: Alpha2Option = None,
    alpha3: Alpha3Option = None,
    k: KOption = 1,
    m: MOption = 0,
    x_quantity: Annotated[
        AxisQuantity, typer.Option("--x-quantity")
    ] = AxisQuantity.RATIO_A2_A1,
    x_scale: Annotated[AxisScale, typer.Option("--x-scale")] = AxisScale.LOG,
    x_min: Annotated[float, typer.Option("--x-min")] = 1e3,
    x_max: Annotated[float, typer.Option("--x-max")] = 1e5,
    x_n: Annotated[int, typer.Option("--x-n")] = 50,
    y_quantity: Annotated[AxisQuantity, typer.Option("--y-quantity")] = AxisQuantity.ALPHA3,
    y_scale: Annotated[AxisScale, typer.Option("--y-scale")] = AxisScale.LINEAR,
    y_min: Annotated[float, typer.Option("--y-min")] = 0.0,
    y_max: Annotated[float, typer.Option("--y-max")] = 1.0,
    y_n: Annotated[int, typer.Option("--y-n")] = 50,
    backend: BackendOption = Backend.PROPAGATE,
    steps: StepsOption = 1024,
    order: OrderOption = 4,
    nodes: NodesOption = 129,
    segments: SegmentsOption = 64,
    eps_stab: EpsStabOption = 1e-3,
    workers: WorkersOption = 1,
    out: Annotated[
        Path, typer.Option("--out", help="Scan CSV; the JSON sidecar goes next to it.")
    ] = Path("scan.csv"),
    pgm: Annotated[bool, typer.Option("--pgm", help="Also write a P2 PGM quick-look.")] = False,
    overlay: Annotated[
        bool, typer.Option("--overlay", help="Attach the estimated upper bound.")
    ] = False,
):
    """Classifies a two-dimensional parameter grid and writes CSV, JSON and optional PGM files."""
    with handle_errors():
        alphas = _inline_alphas(alpha1, alpha2, alpha3)
        if config is None and alphas is None:
            alphas = AlphaParams(alpha1=DEFAULT_SCAN_ALPHA1, alpha2=0.0)
        cfg = RunConfig(
            mode=ScanMode.PHYSICAL if config else ScanMode.ABSTRACT,
            config_path=config,
            alphas=alphas,
            branch=BranchIndex(k=k, m=m),
            settings=_settings(backend, steps, order, nodes, segments, eps_stab),
            workers=workers,
            out=out,
        )
        pgm_path = cfg.out.with_suffix(".pgm") if pgm else None
        _check_outputs(cfg.out, sidecar_path(cfg.out), pgm_path)
        spec = ScanSpec(
            x=ScanAxis(quantity=x_quantity, scale=x_scale, min=x_min, max=x_max, n=x_n),
            y=ScanAxis(quantity=y_quantity, scale=y_scale, min=y_min, max=y_max, n=y_n),
            mode=cfg.mode,
            alphas=cfg.alphas,
            physical=read_parameter_file(config) if config else None,
            branch=cfg.branch,
            settings=cfg.settings,
        )

        result = run_scan(spec, cfg.workers)
        if overlay:
            result = overlay_bound(result, _overlay_curve(result, spec))
        write_scan(result, cfg.out)
        if pgm_path is not None:
            write_pgm(result, pgm_path)

        typer.echo(f"nodes: {result.failed.size}")
        typer.echo(f"stable fraction: {result.stable_fraction:.4f}")
        typer.echo(f"failed nodes: {result.failed_count} ({result.status})")
        typer.echo(f"wall time: {result.wall_time_s:.2f} s")
        if result.overlay is not None:
            typer.echo(f"stable cells beyond the bound: {result.overlay.fraction_beyond:.4f}")


@app.command("boundary")
def cmd_boundary(
    config: ConfigOption = None,
    k: KOption = 1,
    m: MOption = 0,
    omega_min: Annotated[
        Optional[float], typer.Option("--omega-min", help="rad/s; default omega_th / 2.")
    ] = None,
    omega_max: Annotated[
        Optional[float], typer.Option("--omega-max", help="rad/s; default 10 omega_th.")
    ] = None,
    samples: Annotated[int, typer.Option("--samples")] = 200,
    out: Annotated[
        Path, typer.Option("--out", help="Boundary CSV; the JSON sidecar goes next to it.")
    ] = Path("boundary.csv"),
):
    """Writes the estimated upper bound omega_L(omega) and the threshold frequency."""
    with handle_errors():
        if config is None:
            raise InvalidParameterError("boundary requires --config.")
        _check_outputs(out, sidecar_path(out))
        freqs = characteristic_frequencies(read_parameter_file(config))
        th = threshold_omega(freqs)
        omega_range = (
            th / 2 if omega_min is None else omega_min,
            10 * th if omega_max is None else omega_max,
        )
        curve = bound_curve(freqs, BranchIndex(k=k, m=m), omega_range, samples)
        write_boundary(curve, out, {"threshold_ratio_a2_a1": threshold_ratio(freqs)})
        typer.echo(f"omega_th = {th:.6g} rad/s ({th / (2 * math.pi):.6g} Hz)")
        typer.echo(f"alpha2/alpha1 at threshold = {threshold_ratio(freqs):.6g}")
        typer.echo(f"samples: {curve.alpha3.size} ({curve.label})")


@app.command("simulate")
def cmd_simulate(
    config: ConfigOption = None,
    alpha1: Alpha1Option = None,
    alpha2: Alpha2Option = None,
    alpha3: Alpha3Option = None,
    steady: Annotated[
        Tuple[int, int],
        typer.Option("--steady", help="Start on the steady orbit of branch K M."),
    ] = (None, None),
    x: Annotated[float, typer.Option("--x")] = 0.0,
    vx: Annotated[float, typer.Option("--vx")] = 0.0,
    z: Annotated[float, typer.Option("--z")] = 0.0,
    vz: Annotated[float, typer.Option("--vz")] = 0.0,
    nx: Annotated[float, typer.Option("--nx")] = 1.0,
    ny: Annotated[float, typer.Option("--ny")] = 0.0,
    nz: Annotated[float, typer.Option("--nz")] = 0.0,
    periods: Annotated[float, typer.Option("--periods")] = 10.0,
    steps: Annotated[
        int, typer.Option("--steps", help="RK4 steps per period (>= 64).")
    ] = 1024,
    sample_every: Annotated[int, typer.Option("--sample-every")] = 1,
    renormalize: Annotated[
        bool, typer.Option("--renormalize", help="Keep |n| = 1 after every step.")
    ] = False,
    out: Annotated[
        Path, typer.Option("--out", help="Trajectory CSV; the JSON sidecar goes next to it.")
    ] = Path("trajectory.csv"),
):
    """Integrates the nonlinear dynamics and writes the trajectory.

    Exits with 11 if the trajectory diverges; the CSV then ends at the last
    finite sample.
    """
    with handle_errors():
        cfg = RunConfig(
            mode=ScanMode.PHYSICAL if config else ScanMode.ABSTRACT,
            config_path=config,
            alphas=_inline_alphas(alpha1, alpha2, alpha3),
            out=out,
        )
        _check_outputs(cfg.out, sidecar_path(cfg.out))
        alphas = _resolve_alphas(cfg)
        if steady[0] is not None:
            branch = BranchIndex(k=steady[0], m=steady[1])
            s0 = steady_orbit(branch, alphas).initial_state()
        else:
            s0 = NonlinearState(X=x, Vx=vx, Z=z, Vz=vz, nx=nx, ny=ny, nz=nz)
        trajectory = integrate_nonlinear(s0, alphas, periods, steps, renormalize, sample_every)
        write_trajectory(
            trajectory,
            cfg.out,
            {"alphas": alphas.model_dump(), "initial_state": s0.model_dump(), "periods": periods},
        )
        typer.echo(f"samples: {len(trajectory.tau)}")
        if trajectory.diverged:
            typer.echo(f"diverged at tau = {trajectory.divergence_tau:.6g}")
    if trajectory.diverged:
        raise typer.Exit(code=EXIT_DIVERGED)


@app.command("verify")
def cmd_verify(
    seed: Annotated[int, typer.Option("--seed", help="Seed of the random draws.")] = 0,
    draws: Annotated[int, typer.Option("--draws", help="Random parameter draws.")] = 1000,
    steps: StepsOption = 1024,
    order: OrderOption = 4,
    nodes: NodesOption = 129,
    segments: SegmentsOption = 64,
    eps_stab: EpsStabOption = 1e-3,
    workers: WorkersOption = 1,
    out: Annotated[
        Optional[Path], typer.Option("--out", help="Write the JSON report here.")
    ] = None,
):
    """Runs the invariant suites; exits with 0 iff every gating check passes."""
    with handle_errors():
        settings = _settings(Backend.PROPAGATE, steps, order, nodes, segments, eps_stab)
        _check_outputs(out)
        results = run_verification(seed, draws, settings, workers)

        table = Table("check", "result", "detail")
        for result in results:
            verdict = "pass" if result.passed else "FAIL"
            label = verdict if result.gating else f"{verdict} (info)"
            table.add_row(result.name, label, result.detail)
        console.print(table)

        passed = all(result.passed for result in results if result.gating)
        if out is not None:
            report = {"seed": seed, "passed": passed, "checks": [r.to_dict() for r in results]}
            write_json(report, out)
    if not passed:
        raise typer.Exit(code=EXIT_VERIFY_FAILED)


if __name__ == "__main__":
    app()
