"""This module is responsible for the physical constants table.

Values are CODATA-2018. They are pinned here instead of being read from
``scipy.constants`` because the constants set shipped with scipy changes
between releases.
"""

import math

CONSTANTS_VERSION = "CODATA-2018"

HBAR = 1.054571817e-34  # J s
BOHR_MAGNETON = 9.2740100783e-24  # J / T

# name -> (mass in kg, Lande g-factor of the trapped manifold)
# Rb87 uses g_F = 1/2, the F=2 ground-state manifold.
SPECIES = {
    "Rb87": (1.44316060e-25, 0.5),
}

DEFAULT_SPECIES = "Rb87"

# Reference guide: b = 2.90 T/m (290 G/cm), l = 15 um, B_b = 1.5 G,
# phi = 1 mrad, omega = 2 pi x 10 kHz.
REFERENCE_GUIDE = {
    "gradient_T_per_m": 2.90,
    "bias_T": 1.5e-4,
    "phi_rad": 1e-3,
    "pitch_m": 15e-6,
    "omega_rad_s": 2 * math.pi * 1e4,
}
