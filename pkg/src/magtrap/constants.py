"""Physical constants (SI). Fixed values, never configurable."""

import math

G_EARTH = 9.80665          # m/s^2, standard gravity
MU_0 = 4.0e-7 * math.pi    # T*m/A, vacuum permeability
K_B = 1.380649e-23         # J/K, Boltzmann constant
HBAR = 1.054572e-34        # J*s, reduced Planck constant
E_CHARGE = 1.602177e-19    # C, elementary charge

# N2 molecule, used as the default residual-gas species
M_N2 = 4.6517e-26          # kg
