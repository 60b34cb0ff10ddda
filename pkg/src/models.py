"""This module is responsible for creating the validated parameter and state models."""

import math

from enum import Enum
from pathlib import Path

import numpy as np

from pydantic import field_validator, model_validator
from sqlmodel import Field, SQLModel

from .constants import BOHR_MAGNETON, DEFAULT_SPECIES, HBAR, REFERENCE_GUIDE, SPECIES
from .utils import parity

STATE_ORDER = ("dXc", "dXs", "dZc", "dZs", "dtheta", "dnu")
NONLINEAR_COMPONENTS = ("X", "Vx", "Z", "Vz", "nx", "ny", "nz")
ENVELOPE_COMPONENTS = ("Xc", "Xs", "Zc", "Zs", "theta", "nu")


class Backend(str, Enum):
    """Fundamental matrix backend."""

    PROPAGATE = "propagate"
    SERIES = "series"


class ScanMode(str, Enum):
    """Source of the fixed parameters of a scan."""

    ABSTRACT = "abstract"
    PHYSICAL = "physical"


class AxisQuantity(str, Enum):
    """Quantity swept along a scan axis."""

    ALPHA1 = "alpha1"
    ALPHA2 = "alpha2"
    ALPHA3 = "alpha3"
    RATIO_A2_A1 = "ratio_a2_a1"
    OMEGA = "omega"
    PHI = "phi"


class AxisScale(str, Enum):
    """Spacing of the samples along a scan axis."""

    LINEAR = "linear"
    LOG = "log"


class SpeciesConstants(SQLModel):
    """Object model for the atomic species and fundamental constants."""

    mass_kg: float = Field(gt=0)
    lande_g_factor: float = Field(gt=0)
    bohr_magneton: float = Field(default=BOHR_MAGNETON, gt=0)
    hbar: float = Field(default=HBAR, gt=0)

    @classmethod
    def from_name(cls, name: str):
        """Creates object of SpeciesConstants from the constants table.

        Parameters
        ----------
        name : str
            Species name, e.g. ``"Rb87"``.

        Returns
        -------
        SpeciesConstants
            New object of the SpeciesConstants class.

        Raises
        ------
        KeyError
            When the species is not in the constants table.
        """
        mass_kg, g_factor = SPECIES[name]
        return cls(mass_kg=mass_kg, lande_g_factor=g_factor)

    @property
    def moment(self) -> float:
        """g_F * mu_B in J/T."""
        return self.lande_g_factor * self.bohr_magneton


class PhysicalParams(SQLModel):
    """Object model for the species and the guide hardware values (SI units)."""

    species: SpeciesConstants
    gradient_b: float = Field(gt=0)
    bias_Bb: float = Field(gt=0)
    phase_phi: float = 0.0
    wire_pitch_l: float = Field(gt=0)
    mod_omega: float = Field(gt=0)

    @model_validator(mode="after")
    def check_finite_values(self):
        values = (self.gradient_b, self.bias_Bb, self.phase_phi, self.wire_pitch_l, self.mod_omega)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("physical parameters must be finite")
        return self

    @classmethod
    def reference(cls, **overrides):
        """Creates the Rb87 reference guide, with fields optionally overridden.

        Parameters
        ----------
        **overrides
            Field values replacing the reference ones, e.g. ``phase_phi=0.0``.

        Returns
        -------
        PhysicalParams
            New object of the PhysicalParams class.
        """
        values = {
            "species": SpeciesConstants.from_name(DEFAULT_SPECIES),
            "gradient_b": REFERENCE_GUIDE["gradient_T_per_m"],
            "bias_Bb": REFERENCE_GUIDE["bias_T"],
            "phase_phi": REFERENCE_GUIDE["phi_rad"],
            "wire_pitch_l": REFERENCE_GUIDE["pitch_m"],
            "mod_omega": REFERENCE_GUIDE["omega_rad_s"],
        }
        return cls(**{**values, **overrides})


class CharacteristicFrequencies(SQLModel):
    """Object model for the three characteristic frequencies (rad/s)."""

    larmor_omega_L: float
    transverse_omega_perp: float = Field(gt=0)
    rabi_Omega: float = Field(gt=0)


# alpha1 = alpha2 = 0 is accepted: it is the free-rotation reference point of
# the linearized dynamics.
class AlphaParams(SQLModel):
    """Object model for the dimensionless point (alpha1, alpha2, alpha3)."""

    alpha1: float = Field(ge=0)
    alpha2: float = Field(ge=0)
    alpha3: float = 0.0

    @model_validator(mode="after")
    def check_finite_values(self):
        if not all(math.isfinite(v) for v in (self.alpha1, self.alpha2, self.alpha3)):
            raise ValueError("alpha parameters must be finite")
        return self

    @property
    def coupling(self) -> float:
        """alpha1 * alpha2, the only combination of alpha1 and alpha2 in f."""
        return self.alpha1 * self.alpha2


class BranchIndex(SQLModel):
    """Object model for the steady-solution indices (k, m)."""

    k: int = 1
    m: int = 0

    @property
    def sign_k(self) -> int:
        return parity(self.k)

    @property
    def sign_m(self) -> int:
        return parity(self.m)

    @property
    def sign_km(self) -> int:
        return parity(self.k + self.m)


class NonlinearState(SQLModel):
    """Object model for the dimensionless position, velocity and spin direction."""

    X: float = 0.0
    Vx: float = 0.0
    Z: float = 0.0
    Vz: float = 0.0
    nx: float = 1.0
    ny: float = 0.0
    nz: float = 0.0
    tau: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, c) for c in NONLINEAR_COMPONENTS], dtype=float)

    @classmethod
    def from_array(cls, values, tau: float = 0.0):
        return cls(**dict(zip(NONLINEAR_COMPONENTS, map(float, values))), tau=tau)


class EnvelopeState(SQLModel):
    """Object model for the slow envelopes and spin angles."""

    Xc: float = 0.0
    Xs: float = 0.0
    Zc: float = 0.0
    Zs: float = 0.0
    theta: float = 0.0
    nu: float = math.pi / 2
    tau: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, c) for c in ENVELOPE_COMPONENTS], dtype=float)

    @classmethod
    def from_array(cls, values, tau: float = 0.0):
        return cls(**dict(zip(ENVELOPE_COMPONENTS, map(float, values))), tau=tau)


class SteadyOrbit(SQLModel):
    """Object model for a steady periodic solution of the envelope system."""

    branch: BranchIndex
    Zc_star: float
    theta_star: float
    nu_star: float

    def initial_state(self) -> NonlinearState:
        """Nonlinear state on the orbit at tau = 0 (spin exactly along x)."""
        return NonlinearState(X=0.0, Vx=0.0, Z=self.Zc_star, Vz=0.0, nx=float(self.branch.sign_km))

    def envelope_state(self) -> EnvelopeState:
        return EnvelopeState(Zc=self.Zc_star, theta=self.theta_star, nu=self.nu_star)

    def state_at(self, tau: float) -> np.ndarray:
        """Analytic orbit X = 0, Z = Zc* cos(tau) in component order X..nz."""
        return np.array(
            [
                0.0,
                0.0,
                self.Zc_star * math.cos(tau),
                -self.Zc_star * math.sin(tau),
                float(self.branch.sign_km),
                0.0,
                0.0,
            ]
        )


class MonodromySettings(SQLModel):
    """Object model for the monodromy backend settings and stability tolerance."""

    backend: Backend = Backend.PROPAGATE
    steps: int = Field(default=1024, ge=256)
    order: int = Field(default=4, ge=1)
    quadrature_nodes: int = Field(default=129, ge=129)
    segments: int = Field(default=64, ge=1)
    eps_stab: float = Field(default=1e-3, ge=0)

    @field_validator("quadrature_nodes")
    @classmethod
    def check_odd_nodes(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("quadrature_nodes must be odd for composite Simpson quadrature")
        return value

    @property
    def order_or_steps(self) -> int:
        return self.steps if self.backend == Backend.PROPAGATE else self.order


class ScanAxis(SQLModel):
    """Object model for one axis of a stability scan."""

    quantity: AxisQuantity
    scale: AxisScale = AxisScale.LINEAR
    min: float
    max: float
    n: int = Field(ge=2)

    @model_validator(mode="after")
    def check_range(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError("axis limits must be finite")
        if self.min >= self.max:
            raise ValueError("axis min must be smaller than max")
        if self.scale == AxisScale.LOG and self.min <= 0:
            raise ValueError("log-scaled axis requires min > 0")
        return self

    def values(self) -> np.ndarray:
        if self.scale == AxisScale.LOG:
            return np.geomspace(self.min, self.max, self.n)
        return np.linspace(self.min, self.max, self.n)


OMEGA_SETTERS = {
    AxisQuantity.ALPHA1,
    AxisQuantity.ALPHA2,
    AxisQuantity.RATIO_A2_A1,
    AxisQuantity.OMEGA,
}
LARMOR_SETTERS = {AxisQuantity.ALPHA3, AxisQuantity.PHI}


class ScanSpec(SQLModel):
    """Object model for a two-dimensional stability scan."""

    x: ScanAxis
    y: ScanAxis
    mode: ScanMode = ScanMode.ABSTRACT
    alphas: AlphaParams | None = None
    physical: PhysicalParams | None = None
    branch: BranchIndex = Field(default_factory=BranchIndex)
    settings: MonodromySettings = Field(default_factory=MonodromySettings)

    @model_validator(mode="after")
    def check_resolvable(self):
        quantities = {self.x.quantity, self.y.quantity}
        if self.x.quantity == self.y.quantity:
            raise ValueError("x and y axes must sweep different quantities")
        if self.mode == ScanMode.ABSTRACT:
            if self.alphas is None:
                raise ValueError("abstract mode requires fixed alphas")
            if quantities & {AxisQuantity.OMEGA, AxisQuantity.PHI}:
                raise ValueError("omega and phi axes require physical mode")
            if {AxisQuantity.ALPHA2, AxisQuantity.RATIO_A2_A1} <= quantities:
                raise ValueError("alpha2 and ratio_a2_a1 both fix alpha2")
        else:
            if self.physical is None:
                raise ValueError("physical mode requires physical parameters")
            if len(quantities & OMEGA_SETTERS) > 1:
                raise ValueError("in physical mode only one axis may fix the modulation frequency")
            if len(quantities & LARMOR_SETTERS) > 1:
                raise ValueError("alpha3 and phi axes both fix alpha3")
        return self


class RunConfig(SQLModel):
    """Object model for the options shared by the command line commands."""

    mode: ScanMode
    config_path: Path | None = None
    alphas: AlphaParams | None = None
    branch: BranchIndex = Field(default_factory=BranchIndex)
    settings: MonodromySettings = Field(default_factory=MonodromySettings)
    workers: int = Field(default=1, ge=1)
    out: Path | None = None
    seed: int | None = None

    @model_validator(mode="after")
    def check_single_source(self):
        if (self.config_path is None) == (self.alphas is None):
            raise ValueError("give exactly one parameter source: --config or inline alphas")
        return self
