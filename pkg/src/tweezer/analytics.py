"""Closed-form Boltzmann statistics in a 3-D harmonic trap and motional
figures of merit.

The energy density is E^2 exp(-E/kT) / (2 (kT)^3). Its cumulative and its
truncated first moment are regularized lower incomplete gamma functions,
P(3, eta) and 3 kT P(4, eta) / P(3, eta); scipy's ``gammainc`` evaluates them
with full relative precision from eta ~ 1e-300 up to the saturated tail, so no
hand-written series or asymptotic branches are needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from . import constants as C
from .trap import TrapPotential


@dataclass(frozen=True)
class MotionFigures:
    n_perp: float
    eta_ld: float
    eta_th: float
    mean_freq: float  # Hz


def f_th(energy, temperature):
    kt = C.k_B * temperature
    e = np.asarray(energy, dtype=float)
    return e**2 * np.exp(-e / kt) / (2 * kt**3)


def p_surv(energy, temperature):
    """Probability that the thermal energy lies below `energy`."""
    eta = np.asarray(energy, dtype=float) / (C.k_B * temperature)
    return gammainc(3, eta)


def p_surv_eta(eta):
    return gammainc(3, np.asarray(eta, dtype=float))


def mean_energy_ratio(eta):
    """<E>/(kT) for a distribution truncated at eta = U_trunc/kT."""
    eta = np.asarray(eta, dtype=float)
    return 3 * gammainc(4, eta) / gammainc(3, eta)


def mean_energy_truncated(temperature, u_trunc):
    return C.k_B * temperature * mean_energy_ratio(u_trunc / (C.k_B * temperature))


def recoil_energy(wavelength, mass=C.m_Rb87):
    return C.h**2 / (2 * mass * wavelength**2)


def motion_figures(mean_energy, temperature, pot: TrapPotential,
                   recoil_wavelength=780 * C.nm) -> MotionFigures:
    """Mean radial vibrational number and Lamb-Dicke parameters.

    The mean trap frequency is the geometric mean (nu_perp^2 nu_par)^(1/3), and
    hbar*omega is evaluated as h*nu.
    """
    nu_perp, nu_par = pot.nu_perp, pot.nu_par
    mean_freq = (nu_perp**2 * nu_par) ** (1 / 3)
    quantum = C.h * mean_freq
    e_r = recoil_energy(recoil_wavelength, pot.cfg.atom_mass)
    eta_ld = np.sqrt(e_r / quantum)
    return MotionFigures(
        n_perp=mean_energy / (3 * C.h * nu_perp),
        eta_ld=float(eta_ld),
        eta_th=float(eta_ld * np.sqrt(C.k_B * temperature / quantum)),
        mean_freq=float(mean_freq),
    )


def eta_th_depth_scaling(eta_th_ref, u_ref, u_new):
    return eta_th_ref * (u_new / u_ref) ** -0.25


def fit_survival_temperature(energies, p, sigma, scale=0.95, t_guess=30e-6):
    """Weighted least-squares fit of scale * P_surv(E; T) to survival data.

    Returns (T, sigma_T) in kelvin.
    """
    from scipy.optimize import curve_fit

    e = np.asarray(energies, dtype=float)
    model = lambda e_, t_: scale * p_surv(e_, t_ * 1e-6)
    popt, pcov = curve_fit(model, e, np.asarray(p, dtype=float), p0=[t_guess * 1e6],
                           sigma=np.asarray(sigma, dtype=float), absolute_sigma=True,
                           bounds=(1e-6, np.inf))
    return float(popt[0]) * 1e-6, float(np.sqrt(pcov[0, 0])) * 1e-6
