"""This module is responsible for the guide field and the nonlinear and envelope dynamics.

Time is the dimensionless phase tau = omega t; positions are in units of the
wire pitch l and velocities in units of l omega.
"""

import logging
import math

from dataclasses import dataclass

import numpy as np

from .errors import SingularCoordinateError
from .models import (
    ENVELOPE_COMPONENTS,
    NONLINEAR_COMPONENTS,
    AlphaParams,
    BranchIndex,
    EnvelopeState,
    NonlinearState,
    SteadyOrbit,
)
from .utils import check_at_least, check_non_negative, rk4_step

logger = logging.getLogger(__name__)

MIN_STEPS_PER_PERIOD = 64
DIVERGENCE_LIMIT = 1e12
SINGULAR_SIN_NU = 1e-12


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of the nonlinear or envelope dynamics.

    ``states`` has one row per sample with columns ordered as ``components``.
    A diverged trajectory is truncated after the last finite sample.
    """

    tau: np.ndarray
    states: np.ndarray
    components: tuple[str, ...]
    steps_per_period: int
    renormalized: bool = False
    diverged: bool = False
    divergence_tau: float | None = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def component(self, name: str) -> np.ndarray:
        return self.states[:, self.components.index(name)]

    def spin_norm_drift(self) -> float:
        """max | |n|**2 - 1 | over the samples of a nonlinear trajectory."""
        n = self.states[:, 4:7]
        return float(np.max(np.abs(np.sum(n * n, axis=1) - 1.0)))


def field_at(b: float, Bb: float, phi: float, x, z, t, omega: float) -> np.ndarray:
    """Evaluates the modulated guide field to first order in the position.

    Parameters
    ----------
    b : float
        Field gradient (T/m).
    Bb : float
        Field of the inner and outer wires (T).
    phi : float
        Phase offset between the modulated currents (rad).
    x, z : float or numpy.ndarray
        Position (m).
    t : float or numpy.ndarray
        Time (s).
    omega : float
        Modulation frequency (rad/s).

    Returns
    -------
    numpy.ndarray
        ``[Bx, Bz]`` in tesla, stacked along the first axis.
    """
    phase = np.asarray(omega * np.asarray(t, dtype=float))
    cos_wt = np.cos(phase)
    bx = b * np.asarray(z, dtype=float) * cos_wt + phi * Bb * np.sin(phase)
    bz = b * np.asarray(x, dtype=float) * cos_wt
    return np.stack(np.broadcast_arrays(bx, bz))


def _nonlinear_field(a: AlphaParams):
    a1, a2, a3 = a.alpha1, a.alpha2, a.alpha3

    def rhs(tau: float, y: np.ndarray) -> np.ndarray:
        X, Vx, Z, Vz, nx, ny, nz = y
        c = math.cos(tau)
        s = math.sin(tau)
        return np.array(
            [
                Vx,
                -a1 * nz * c,
                Vz,
                -a1 * nx * c,
                -a2 * ny * X * c,
                -a2 * (nz * Z - nx * X) * c - a3 * nz * s,
                a2 * ny * Z * c + a3 * ny * s,
            ]
        )

    return rhs


def nonlinear_rhs(s: NonlinearState, a: AlphaParams) -> np.ndarray:
    """Time derivative of a nonlinear state.

    Parameters
    ----------
    s : NonlinearState
        Position, velocity and spin direction at phase ``s.tau``.
    a : AlphaParams
        Dimensionless parameters.

    Returns
    -------
    numpy.ndarray
        Derivatives of (X, Vx, Z, Vz, nx, ny, nz).
    """
    return _nonlinear_field(a)(s.tau, s.as_array())


def _is_divergent(y: np.ndarray) -> bool:
    return not np.all(np.isfinite(y)) or float(np.max(np.abs(y))) > DIVERGENCE_LIMIT


def _integrate(rhs, y0, tau0, periods, steps_per_period, sample_every, renormalize, components):
    check_at_least(steps_per_period, MIN_STEPS_PER_PERIOD, "steps_per_period")
    check_at_least(sample_every, 1, "sample_every")
    check_non_negative(periods, "periods")
    n_steps = int(round(periods * steps_per_period))
    h = 2.0 * math.pi / steps_per_period

    taus = [tau0]
    samples = [y0.copy()]
    y = y0.copy()
    divergence_tau = None
    with np.errstate(all="ignore"):
        for i in range(1, n_steps + 1):
            y = rk4_step(rhs, tau0 + (i - 1) * h, y, h)
            if renormalize:
                y[4:7] /= np.linalg.norm(y[4:7])
            tau = tau0 + i * h
            if _is_divergent(y):
                divergence_tau = tau
                break
            if i % sample_every == 0 or i == n_steps:
                taus.append(tau)
                samples.append(y.copy())

    if divergence_tau is not None:
        logger.warning("Trajectory diverged at tau = %.6g.", divergence_tau)
    return Trajectory(
        tau=np.array(taus),
        states=np.array(samples),
        components=components,
        steps_per_period=steps_per_period,
        renormalized=renormalize,
        diverged=divergence_tau is not None,
        divergence_tau=divergence_tau,
    )


def integrate_nonlinear(
    s0: NonlinearState,
    a: AlphaParams,
    periods: float,
    steps_per_period: int = 1024,
    renormalize_spin: bool = False,
    sample_every: int = 1,
) -> Trajectory:
    """Integrates the full nonlinear dynamics with fixed-step RK4.

    Parameters
    ----------
    s0 : NonlinearState
        Initial state; integration starts at ``s0.tau``.
    a : AlphaParams
        Dimensionless parameters.
    periods : float
        Duration in modulation periods (2 pi each).
    steps_per_period : int, optional
        RK4 steps per period, at least 64. The default is 1024.
    renormalize_spin : bool, optional
        Rescale n to unit norm after every step. The default is False, so that
        norm drift stays observable.
    sample_every : int, optional
        Keep every ``sample_every``-th step; the final step is always kept.

    Returns
    -------
    Trajectory
        Samples including the initial and final states. Blow-up (non-finite
        values or magnitude above 1e12) is reported through ``diverged`` and
        ``divergence_tau``; it is a physical outcome in unstable regions.
    """
    return _integrate(
        _nonlinear_field(a),
        s0.as_array(),
        s0.tau,
        periods,
        steps_per_period,
        sample_every,
        renormalize_spin,
        NONLINEAR_COMPONENTS,
    )


def _envelope_field(a: AlphaParams):
    a1, a2, a3 = a.alpha1, a.alpha2, a.alpha3

    def rhs(tau: float, y: np.ndarray) -> np.ndarray:
        xc, xs, zc, zs, theta, nu = y
        sin_nu = math.sin(nu)
        if abs(sin_nu) < SINGULAR_SIN_NU:
            raise SingularCoordinateError(
                f"sin(nu) = {sin_nu:.3g} at tau = {tau:.6g}: cot(nu) is singular."
            )
        c = math.cos(tau)
        s = math.sin(tau)
        z_drive = a2 * (zc * c * c + zs * s * c) + a3 * s
        x_drive = a2 * (xc * c * c + xs * s * c)
        return np.array(
            [
                -0.5 * xs,
                0.5 * xc - 0.5 * a1 * math.cos(nu),
                -0.5 * zs,
                0.5 * zc - 0.5 * a1 * math.cos(theta) * sin_nu,
                -math.cos(theta) * (math.cos(nu) / sin_nu) * z_drive + x_drive,
                -math.sin(theta) * z_drive,
            ]
        )

    return rhs


def envelope_rhs(e: EnvelopeState, a: AlphaParams) -> np.ndarray:
    """Time derivative of the slow-envelope state.

    Returns
    -------
    numpy.ndarray
        Derivatives of (Xc, Xs, Zc, Zs, theta, nu).

    Raises
    ------
    SingularCoordinateError
        If |sin(nu)| < 1e-12.
    """
    return _envelope_field(a)(e.tau, e.as_array())


def integrate_envelope(
    e0: EnvelopeState, a: AlphaParams, periods: float, steps_per_period: int = 1024
) -> Trajectory:
    """Integrates the slow-envelope system with fixed-step RK4 (validation only)."""
    return _integrate(
        _envelope_field(a),
        e0.as_array(),
        e0.tau,
        periods,
        steps_per_period,
        1,
        False,
        ENVELOPE_COMPONENTS,
    )


def envelope_to_nonlinear(e: EnvelopeState) -> NonlinearState:
    """Reconstructs the nonlinear state described by an envelope state.

    Envelope derivatives are neglected in the velocities, as in the ansatz.
    """
    c, s = math.cos(e.tau), math.sin(e.tau)
    return NonlinearState(
        X=e.Xc * c + e.Xs * s,
        Vx=-e.Xc * s + e.Xs * c,
        Z=e.Zc * c + e.Zs * s,
        Vz=-e.Zc * s + e.Zs * c,
        nx=math.cos(e.theta) * math.sin(e.nu),
        ny=math.sin(e.theta) * math.sin(e.nu),
        nz=math.cos(e.nu),
        tau=e.tau,
    )


def steady_orbit(branch: BranchIndex, a: AlphaParams) -> SteadyOrbit:
    """Steady periodic solution of the envelope system on branch (k, m).

    theta* = k pi, nu* = (2m + 1) pi / 2, Xc = Xs = Zs = 0 and
    Zc* = (-1)**(k + m) alpha1.
    """
    return SteadyOrbit(
        branch=branch,
        Zc_star=branch.sign_km * a.alpha1,
        theta_star=branch.k * math.pi,
        nu_star=(2 * branch.m + 1) * math.pi / 2,
    )
