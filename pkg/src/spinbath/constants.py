"""Physical constants and unit conventions shared by every module.

Units
-----
    magnetic field      gauss (G)
    gyromagnetic ratio  Hz/G (electron values also quoted in MHz/G where
                        the parameter records mirror the common notation)
    energy / coupling   ordinary frequency, Hz (every Hamiltonian is E/h;
                        the factor 2*pi is supplied by the propagator)
    distance            nm
    time                seconds internally, microseconds at I/O boundaries

Sign conventions
----------------
Gyromagnetic ratios are stored with their physical sign (negative for the
electron).  Zeeman terms are assembled as ``-gamma * B . S`` so that for a
negative-gamma species the m = +s projection lies above m = -s in energy.
The electron value carries the g ~ 2.0024 correction rather than the
rounded 2.8 MHz/G shorthand; transition frequencies computed at the
gauss-level field calibrations used elsewhere in the package depend on
that last 0.1%.
"""

from __future__ import annotations

import math

from scipy import constants as _si

# gyromagnetic ratios
GAMMA_E_MHZ_PER_G = -2.8025  # electron, g ~ 2.0024
GAMMA_E_HZ_PER_G = GAMMA_E_MHZ_PER_G * 1e6
GAMMA_N14_HZ_PER_G = 307.7  # substitutional-nitrogen 14N nucleus
GAMMA_C13_HZ_PER_G = 1071.5  # 13C nucleus

# substitutional nitrogen (S = 1/2 electron, I = 1 nitrogen) hyperfine and
# quadrupole parameters, principal axis along the distorted N-C bond
A_PAR_MHZ = 114.0
A_PERP_MHZ = 81.34
Q_N14_MHZ = -4.2

# nitrogen-vacancy ground-state zero-field splitting
D_NV_MHZ = 2870.0

# diamond crystal
DIAMOND_LATTICE_NM = 0.3567
DIAMOND_BOND_NM = DIAMOND_LATTICE_NM * math.sqrt(3.0) / 4.0  # 0.15444 nm
DIAMOND_ATOM_DENSITY_CM3 = 1.76e23
DIAMOND_ATOM_DENSITY_NM3 = DIAMOND_ATOM_DENSITY_CM3 * 1e-21  # 176 nm^-3
C13_ABUNDANCE = 0.011

# instantaneous-diffusion calibration: concentration [ppm] = KAPPA / T_D [us]
KAPPA_ID_PPM_US = 14.0

# SI values feeding the point-dipole prefactor
MU0_SI = _si.mu_0
PLANCK_SI = _si.h


def dipole_prefactor_hz(gamma1_hz_per_g: float, gamma2_hz_per_g: float,
                        r_nm: float) -> float:
    """Point-dipole coupling scale (mu0 h / 4 pi) g1 g2 / r^3 in Hz.

    Gyromagnetic ratios in Hz/G (signed), separation in nm.  This is the
    scalar multiplying the dimensionless (1 - 3 rhat rhat) tensor when the
    Hamiltonian is expressed in ordinary-frequency units.
    """
    if r_nm <= 0.0:
        raise ValueError("separation must be positive")
    g1 = gamma1_hz_per_g * 1e4  # Hz/T
    g2 = gamma2_hz_per_g * 1e4
    r = r_nm * 1e-9
    return MU0_SI * PLANCK_SI * g1 * g2 / (4.0 * math.pi * r ** 3)


def ppm_to_density_nm3(ppm: float) -> float:
    """Defect concentration in ppm of carbon sites to number density in nm^-3."""
    return ppm * 1e-6 * DIAMOND_ATOM_DENSITY_NM3


def density_nm3_to_ppm(n_nm3: float) -> float:
    return n_nm3 / DIAMOND_ATOM_DENSITY_NM3 * 1e6


def constants_table() -> dict:
    """Audit table of every physical constant, with units, for file output."""
    return {
        "gamma_e_mhz_per_gauss": {
            "value": GAMMA_E_MHZ_PER_G,
            "units": "MHz/G",
            "description": "electron gyromagnetic ratio (signed, g ~ 2.0024)",
        },
        "gamma_n14_hz_per_gauss": {
            "value": GAMMA_N14_HZ_PER_G,
            "units": "Hz/G",
            "description": "14N nuclear gyromagnetic ratio",
        },
        "gamma_c13_hz_per_gauss": {
            "value": GAMMA_C13_HZ_PER_G,
            "units": "Hz/G",
            "description": "13C nuclear gyromagnetic ratio",
        },
        "a_parallel_mhz": {
            "value": A_PAR_MHZ,
            "units": "MHz",
            "description": "axial 14N hyperfine constant of the nitrogen center",
        },
        "a_perp_mhz": {
            "value": A_PERP_MHZ,
            "units": "MHz",
            "description": "transverse 14N hyperfine constant",
        },
        "q_n14_mhz": {
            "value": Q_N14_MHZ,
            "units": "MHz",
            "description": "14N quadrupole constant",
        },
        "d_nv_mhz": {
            "value": D_NV_MHZ,
            "units": "MHz",
            "description": "NV ground-state zero-field splitting",
        },
        "diamond_lattice_nm": {
            "value": DIAMOND_LATTICE_NM,
            "units": "nm",
            "description": "conventional diamond cubic lattice constant",
        },
        "diamond_bond_nm": {
            "value": DIAMOND_BOND_NM,
            "units": "nm",
            "description": "nearest-neighbor bond length, a sqrt(3)/4",
        },
        "diamond_atom_density_cm3": {
            "value": DIAMOND_ATOM_DENSITY_CM3,
            "units": "cm^-3",
            "description": "carbon site density used for ppm conversions",
        },
        "c13_abundance": {
            "value": C13_ABUNDANCE,
            "units": "1",
            "description": "natural 13C isotopic abundance",
        },
        "kappa_id_ppm_us": {
            "value": KAPPA_ID_PPM_US,
            "units": "ppm*us",
            "description": "instantaneous-diffusion calibration for "
                           "concentration_from_td (ppm = kappa / T_D)",
        },
        "mu0_si": {
            "value": MU0_SI,
            "units": "T^2 m^3 / J",
            "description": "vacuum permeability",
        },
        "planck_si": {
            "value": PLANCK_SI,
            "units": "J s",
            "description": "Planck constant",
        },
    }
