"""Optical tweezer potential: Gaussian transverse profile, Lorentzian axial
profile, tilted by gravity along one transverse axis.

All energies returned by :func:`potential_energy` are measured from the
gravity-shifted minimum of the potential, so a trapped atom at rest at the
bottom of the well has zero energy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from . import constants as C


class UntrappableError(ValueError):
    """Raised when gravity overwhelms the optical gradient (no barrier)."""


@dataclass(frozen=True)
class TrapConfig:
    power: float = 10 * C.mW
    waist: float = 1.03 * C.um
    wavelength: float = 850 * C.nm
    depth_per_power: float = 2.8 * C.mK * C.k_B / (10 * C.mW)  # J/W
    atom_mass: float = C.m_Rb87
    gravity: float = C.g
    gravity_axis: str = "y"

    def __post_init__(self):
        if not self.power >= 0:
            raise ValueError(f"power must be >= 0, got {self.power}")
        for name in ("waist", "wavelength", "depth_per_power", "atom_mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.gravity < 0:
            raise ValueError("gravity must be >= 0")
        if self.gravity_axis not in ("x", "y"):
            raise ValueError("gravity_axis must be one of the transverse axes 'x', 'y'")

    @property
    def rayleigh_range(self) -> float:
        return np.pi * self.waist**2 / self.wavelength

    @property
    def u0(self) -> float:
        return self.depth_per_power * self.power

    def with_depth(self, u0: float) -> "TrapConfig":
        """Same trap with the power chosen to give optical depth `u0` (J)."""
        return replace(self, power=u0 / self.depth_per_power)


@dataclass(frozen=True)
class TrapPotential:
    u0: float
    z_r: float
    omega_perp: float
    omega_par: float
    effective_depth: float
    energy_zero: float
    min_position: float  # coordinate of the minimum along the gravity axis (m)
    barrier_position: float  # -inf when gravity is off
    cfg: TrapConfig
    lifted_zero: float = 0.0  # energy_zero + u0, kept separately for precision

    @property
    def nu_perp(self) -> float:
        return self.omega_perp / (2 * np.pi)

    @property
    def nu_par(self) -> float:
        return self.omega_par / (2 * np.pi)


def no_barrier_depth(cfg: TrapConfig) -> float:
    """Optical depth below which the gravity-axis barrier disappears.

    The peak gradient of U0*exp(-2y^2/w^2) is 2*U0*exp(-1/2)/w at y = w/2;
    equating it with m*g gives the threshold.
    """
    return cfg.atom_mass * cfg.gravity * cfg.waist * np.exp(0.5) / 2


def _lifted_energy(u0, cfg: TrapConfig, x, y, z):
    """Optical + gravitational energy plus U0 (zero at the focus without gravity).

    Written as U0 (s - expm1(-a)) / (1 + s) so that energies near the trap
    bottom keep full relative precision.
    """
    a = 2 * (x * x + y * y) / cfg.waist**2
    s = (z / cfg.rayleigh_range) ** 2
    q = y if cfg.gravity_axis == "y" else x
    return u0 * (s - np.expm1(-a)) / (1 + s) + cfg.atom_mass * cfg.gravity * q


def _axis_cut(u0, cfg: TrapConfig):
    """Lifted energy along the gravity axis through the focus."""
    m_g = cfg.atom_mass * cfg.gravity
    w2 = cfg.waist**2

    def cut(q):
        return -u0 * np.expm1(-2 * q * q / w2) + m_g * q

    return cut


def _locate_minimum(u0, cfg: TrapConfig) -> tuple[float, float]:
    cut = _axis_cut(u0, cfg)
    if cfg.gravity == 0:
        return 0.0, 0.0
    # the minimum sits between the inflection point (-w/2) and the focus
    res = minimize_scalar(
        cut, bounds=(-cfg.waist / 2, 0.0), method="bounded",
        options={"xatol": 1e-14 * cfg.waist},
    )
    return float(res.x), float(cut(res.x))


def _locate_barrier(u0, cfg: TrapConfig) -> tuple[float, float]:
    """(position, lifted energy) of the local maximum on the downhill side."""
    cut = _axis_cut(u0, cfg)
    w = cfg.waist
    radii = np.geomspace(w / 10, 20 * w, 400)
    vals = cut(-radii)
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    if interior.size == 0:
        raise UntrappableError("no local maximum along the gravity axis")
    i = interior[0]
    a, b, c = -radii[i + 1], -radii[i], -radii[i - 1]
    res = minimize_scalar(lambda q: -cut(q), bracket=(a, b, c), method="golden",
                          tol=1e-10)
    return float(res.x), float(cut(res.x))


def locate_barrier(pot: TrapPotential) -> tuple[float, float]:
    """Barrier position along the gravity axis and the effective depth (J)."""
    return pot.barrier_position, pot.effective_depth


def build_potential(cfg: TrapConfig) -> TrapPotential:
    u0 = cfg.u0
    if cfg.gravity > 0 and u0 <= no_barrier_depth(cfg):
        raise UntrappableError(
            f"depth {u0 / C.k_B:.3g} K is below the no-barrier threshold "
            f"{no_barrier_depth(cfg) / C.k_B:.3g} K"
        )
    if u0 <= 0:
        raise UntrappableError("zero laser power: no trap")
    m, w, zr = cfg.atom_mass, cfg.waist, cfg.rayleigh_range
    y_min, e_min = _locate_minimum(u0, cfg)
    if cfg.gravity == 0:
        y_bar, depth = -np.inf, u0
    else:
        y_bar, e_bar = _locate_barrier(u0, cfg)
        depth = e_bar - e_min
    return TrapPotential(
        u0=u0,
        z_r=zr,
        omega_perp=np.sqrt(4 * u0 / (m * w**2)),
        omega_par=np.sqrt(2 * u0 / (m * zr**2)),
        effective_depth=depth,
        energy_zero=e_min - u0,
        min_position=y_min,
        barrier_position=y_bar,
        cfg=cfg,
        lifted_zero=e_min,
    )


def potential_energy(pot: TrapPotential, x, y, z):
    """Potential energy (J) above the trap minimum; accepts arrays."""
    return _lifted_energy(pot.u0, pot.cfg, x, y, z) - pot.lifted_zero


def scale_power(pot: TrapPotential, new_power: float) -> TrapPotential:
    if new_power < 0:
        raise ValueError("power must be >= 0")
    if new_power == pot.cfg.power:
        return pot
    return build_potential(replace(pot.cfg, power=new_power))


def potential_at_depth(cfg: TrapConfig, u0: float) -> TrapPotential:
    return build_potential(cfg.with_depth(u0))
