"""Unit conventions and physical constants.

Repo-wide conventions:

- Distance: Angstrom
- Magnetic field: Gauss
- Linear frequency: MHz
- Time: microsecond
- Hamiltonians: angular frequency, rad/us (= 2*pi * MHz)
- Gyromagnetic ratios: rad G^-1 ms^-1 (so gamma * B is in rad/ms)
"""

import numpy as np

TWO_PI = 2.0 * np.pi

#: Electron gyromagnetic ratio, rad G^-1 ms^-1 (free electron, 2.8024 MHz/G).
GAMMA_E = TWO_PI * 2.8024e3

#: hbar in J*s, used only inside the dipolar prefactor below.
HBAR_SI = 1.054571817e-34


def gamma_to_mhz_per_gauss(gamma):
    """Convert a gyromagnetic ratio in rad G^-1 ms^-1 to MHz/G."""
    return gamma / (TWO_PI * 1.0e3)


def zeeman_rad_per_us(gamma, field):
    """Angular Zeeman frequency gamma*B in rad/us.

    gamma is in rad G^-1 ms^-1 and field in Gauss; rad/ms -> rad/us is 1e-3.
    """
    return gamma * field * 1.0e-3


def larmor_mhz(gamma, field):
    """Linear Larmor frequency |gamma|*B/(2*pi) in MHz."""
    return abs(zeeman_rad_per_us(gamma, field)) / TWO_PI


def mhz_to_rad_per_us(f):
    """Linear MHz to angular rad/us."""
    return TWO_PI * np.asarray(f, dtype=float)


def rad_per_us_to_mhz(w):
    """Angular rad/us to linear MHz."""
    return np.asarray(w, dtype=float) / TWO_PI


def dipolar_prefactor_mhz_ang3(gamma_1, gamma_2):
    """Prefactor (mu0/4pi) * gamma_1 * gamma_2 * hbar / (2*pi) in MHz * Angstrom^3.

    Gammas are in rad G^-1 ms^-1.  The tensor (3 r_a r_b - delta_ab r^2)/r^5
    multiplied by this prefactor gives a coupling in MHz for r in Angstrom.
    """
    # gamma[rad/(G ms)] -> rad/(s T) is a factor 1e7; (mu0/4pi)=1e-7 in SI;
    # Hz m^3 -> MHz Ang^3 is a factor 1e24.  Net: g1*g2*hbar*1e31/(2*pi).
    return gamma_1 * gamma_2 * HBAR_SI * 1.0e31 / TWO_PI
