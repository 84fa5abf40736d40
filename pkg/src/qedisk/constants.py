"""Physical constants in the eV / nm / fs unit system used throughout.

Energies and frequencies are given as hbar*omega in eV. Convert to angular
frequency (rad/fs) with ``omega / HBAR``.
"""

import math

HBAR = 0.6582119569  # eV fs
C_LIGHT = 299.792458  # nm / fs
ALPHA_FS = 1.0 / 137.035999084
TWO_PI = 2.0 * math.pi


def wavenumber(omega):
    """Vacuum wavenumber k = omega / (hbar c) in 1/nm for omega in eV."""
    return omega / (HBAR * C_LIGHT)
