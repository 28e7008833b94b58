"""Adiabatic invariants of the radial (gravity-axis) motion.

The action of an orbit is taken as half the closed-orbit integral,
``0.5 * int_{q-}^{q+} sqrt(2 m (E - V(q))) dq``, which reduces to
``int_0^{q_max}`` for a symmetric well and stays an adiabatic invariant when
gravity makes the well lopsided. ``V`` is measured from the tilted minimum.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .trap import TrapConfig, TrapPotential, potential_at_depth


class NoRootError(RuntimeError):
    pass


@dataclass(frozen=True)
class AxisCut:
    """1-D potential along the gravity axis through the focus, zero at the minimum."""

    u0: float
    waist: float
    mass: float
    gravity: float
    q_min: float
    q_barrier: float
    barrier: float

    @classmethod
    def from_potential(cls, pot: TrapPotential) -> "AxisCut":
        cfg = pot.cfg
        return cls(pot.u0, cfg.waist, cfg.atom_mass, cfg.gravity, pot.min_position,
                   pot.barrier_position, pot.effective_depth)

    @classmethod
    def at_depth(cls, cfg: TrapConfig, depth: float) -> "AxisCut":
        return cls.from_potential(potential_at_depth(cfg, depth))

    def _raw_shifted(self, q):
        # raw potential + U0, written with expm1 to stay exact near the bottom
        return -self.u0 * np.expm1(-2 * q * q / self.waist**2) + self.mass * self.gravity * q

    def __call__(self, q):
        return self._raw_shifted(q) - self._raw_shifted(self.q_min)

    def force(self, q, u0=None):
        u0 = self.u0 if u0 is None else u0
        w2 = self.waist**2
        return -(4 * u0 * q / w2 * np.exp(-2 * q * q / w2) + self.mass * self.gravity)


def _side_integral(energy, potential, q_min, q_turn, mass):
    """int sqrt(2m(E-V)) dq from the minimum to a turning point.

    q = q_min + (q_turn - q_min) sin^2(theta) removes the square-root
    behaviour at the turning point.
    """
    span = q_turn - q_min

    def integrand(theta):
        s, c = np.sin(theta), np.cos(theta)
        q = q_min + span * s * s
        return np.sqrt(max(2 * mass * (energy - potential(q)), 0.0)) * 2 * abs(span) * s * c

    val, _ = quad(integrand, 0.0, np.pi / 2, epsabs=0.0, epsrel=1e-11, limit=200)
    return val


def action_integral(energy, potential, q_min, lo_bracket, hi_bracket, mass):
    """Half closed-orbit action for a generic 1-D well with minimum at `q_min`.

    `lo_bracket` and `hi_bracket` are points on either side of the minimum
    where the potential already exceeds (or equals) `energy`.
    """
    if energy <= 0:
        raise ValueError("energy must be > 0 (measured from the well bottom)")
    f = lambda q: potential(q) - energy
    # a bracket at or below `energy` is itself the turning point (the barrier top)
    q_lo = lo_bracket if f(lo_bracket) <= 0 else brentq(f, lo_bracket, q_min, xtol=1e-300, rtol=1e-15)
    q_hi = hi_bracket if f(hi_bracket) <= 0 else brentq(f, q_min, hi_bracket, xtol=1e-300, rtol=1e-15)
    return 0.5 * (_side_integral(energy, potential, q_min, q_lo, mass)
                  + _side_integral(energy, potential, q_min, q_hi, mass))


def cut_action(energy, cut: AxisCut):
    if energy <= 0:
        raise ValueError("energy must be > 0")
    if energy > cut.barrier * (1 + 1e-12):
        raise ValueError("energy exceeds the barrier: motion is unbounded")
    energy = min(energy, cut.barrier)
    w = cut.waist
    if cut.gravity == 0 and energy >= cut.u0:
        # separatrix of the pure Gaussian: sqrt(2 m U0) * int_0^inf exp(-q^2/w^2)
        return np.sqrt(2 * cut.mass * cut.u0) * w * np.sqrt(np.pi) / 2
    hi = w
    while cut(hi) < energy:
        hi *= 2
    if cut.gravity == 0:
        lo = -hi
    else:
        lo = cut.q_barrier
    return action_integral(energy, cut, cut.q_min, lo, hi, cut.mass)


def action_1d(energy: float, depth: float, cfg: TrapConfig) -> float:
    """Action (J s) at `energy` above the minimum of the trap of optical depth `depth`."""
    return cut_action(energy, AxisCut.at_depth(cfg, depth))


def match_action(energy: float, depth_from: float, depth_to: float, cfg: TrapConfig) -> float:
    """Energy in the trap of depth `depth_to` with the same action as `energy`
    has in the trap of depth `depth_from`."""
    target = action_1d(energy, depth_from, cfg)
    cut = AxisCut.at_depth(cfg, depth_to)
    top = cut_action(cut.barrier, cut)
    if target > top * (1 + 1e-12):
        raise NoRootError("action exceeds the separatrix action of the target trap")
    if target >= top:
        return cut.barrier
    return _invert_action(cut, target)


def _invert_action(cut: AxisCut, target: float) -> float:
    """Energy below the barrier of `cut` whose action equals `target`."""
    f = lambda e: cut_action(e, cut) - target
    # start the lower bracket well above the scale where the gravity shift
    # of the minimum eats the significant digits, and step down only if needed
    lo = cut.barrier * 1e-6
    while f(lo) > 0:
        lo *= 1e-3
        if lo < cut.barrier * 1e-200:
            raise NoRootError("action too small to bracket")
    return brentq(f, lo, cut.barrier, xtol=1e-300, rtol=1e-13)


def map_escape_energy(u_esc: float, u_i: float, cfg: TrapConfig) -> float:
    """Initial energy (J) of an atom that reaches the barrier of the shallow
    trap of depth `u_esc` after an adiabatic lowering from depth `u_i`."""
    if not 0 < u_esc <= u_i:
        raise ValueError("need 0 < u_esc <= u_i")
    deep = AxisCut.at_depth(cfg, u_i)
    if u_esc == u_i:
        return deep.barrier
    shallow = AxisCut.at_depth(cfg, u_esc)
    target = cut_action(shallow.barrier, shallow)
    if target > cut_action(deep.barrier, deep):
        raise NoRootError("escape action not bracketed in the initial trap")
    return _invert_action(deep, target)


@dataclass(frozen=True)
class ActionMapTable:
    """Monotone map between U_esc/U_i and E_i/U_eff,i.

    Energies are normalized by the effective depth of the initial trap so that
    the identity ramp maps exactly onto (1, 1).
    """

    u_ratio: np.ndarray
    e_ratio: np.ndarray
    u_i: float
    _fwd: PchipInterpolator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        u = np.asarray(self.u_ratio, dtype=float)
        e = np.asarray(self.e_ratio, dtype=float)
        if u.shape != e.shape or u.ndim != 1 or u.size == 0:
            raise ValueError("u_ratio and e_ratio must be equal-length 1-D arrays")
        if np.any(np.diff(u) <= 0) or np.any(np.diff(e) <= 0):
            raise ValueError("table must be strictly increasing in both columns")
        if u[-1] != 1.0 or e[-1] != 1.0:
            raise ValueError("last row must be (1, 1)")
        object.__setattr__(self, "u_ratio", u)
        object.__setattr__(self, "e_ratio", e)
        if u.size >= 2:
            object.__setattr__(self, "_fwd", PchipInterpolator(np.log(u), np.log(e)))

    @property
    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.u_ratio.tolist(), self.e_ratio.tolist()))

    def energy_ratio(self, u_ratio):
        """Forward lookup U_esc/U_i -> E_i/U_eff,i."""
        r = np.asarray(u_ratio, dtype=float)
        if np.any((r < self.u_ratio[0]) | (r > 1.0)):
            raise ValueError("ratio outside the tabulated range")
        if self._fwd is None:
            return np.ones_like(r)
        out = np.exp(self._fwd(np.log(r)))
        # nodes are returned verbatim
        idx = np.searchsorted(self.u_ratio, r)
        idx = np.clip(idx, 0, self.u_ratio.size - 1)
        hit = self.u_ratio[idx] == r
        return np.where(hit, self.e_ratio[idx], out)

    def escape_ratio(self, e_ratio):
        """Inverse lookup E_i/U_eff,i -> U_esc/U_i on the same interpolant."""
        e = np.atleast_1d(np.asarray(e_ratio, dtype=float))
        if np.any((e < self.e_ratio[0]) | (e > 1.0)):
            raise ValueError("energy ratio outside the tabulated range")
        out = np.empty_like(e)
        lo, hi = np.log(self.u_ratio[0]), 0.0
        for k, ek in enumerate(e):
            node = np.flatnonzero(self.e_ratio == ek)
            if node.size:
                out[k] = self.u_ratio[node[0]]
                continue
            le = np.log(ek)
            out[k] = np.exp(brentq(lambda x: float(self._fwd(x)) - le, lo, hi,
                                   xtol=1e-15, rtol=1e-15))
        return out if np.ndim(e_ratio) else float(out[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["u_ratio", "e_ratio"])
        for u, e in self.rows:
            wr.writerow([_num(u), _num(e)])
        return buf.getvalue()


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def build_action_map(u_i: float, u_ratios: Sequence[float], cfg: TrapConfig) -> ActionMapTable:
    r = np.unique(np.asarray(u_ratios, dtype=float))
    if r.size == 0 or r[0] <= 0 or r[-1] > 1:
        raise ValueError("ratios must lie in (0, 1]")
    if r[-1] != 1.0:
        r = np.append(r, 1.0)
    eff_i = AxisCut.at_depth(cfg, u_i).barrier
    e = np.array([map_escape_energy(rk * u_i, u_i, cfg) / eff_i for rk in r[:-1]] + [1.0])
    return ActionMapTable(r, e, u_i)


def adiabatic_temperature(t_i, u_i, u_f):
    return t_i * np.sqrt(u_f / u_i)


@dataclass(frozen=True)
class RampProfile:
    times: np.ndarray
    depths: np.ndarray
    shape: str = "custom"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        u = np.asarray(self.depths, dtype=float)
        if t.shape != u.shape or t.ndim != 1:
            raise ValueError("times and depths must be equal-length 1-D arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(u <= 0):
            raise ValueError("depths must be > 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "depths", u)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def depth_at(self, t):
        return np.interp(t, self.times, self.depths)


DEFAULT_RAMP_DURATION = 2.5e-3  # s


def linear_ramp(u_start, u_end, duration=DEFAULT_RAMP_DURATION, n=2001) -> RampProfile:
    """Depth (proportional to power) varied linearly in time."""
    t = np.linspace(0.0, duration, n)
    return RampProfile(t, u_start + (u_end - u_start) * t / duration, "linear-in-power")


def smoothstep_ramp(u_start, u_end, duration=DEFAULT_RAMP_DURATION, n=2001) -> RampProfile:
    """Default lowering profile: 3s^2 - 2s^3 in power."""
    t = np.linspace(0.0, duration, n)
    s = t / duration
    return RampProfile(t, u_start + (u_end - u_start) * s * s * (3 - 2 * s), "smoothstep")


def constant_margin_ramp(u_start, u_end, margin, cfg: TrapConfig, n=2001) -> RampProfile:
    """Ramp holding |d(omega)/dt| / omega^2 at `margin` on the axial frequency.

    With omega proportional to sqrt(U) this means 1/omega grows linearly in
    time, which is the fastest ramp honouring a fixed adiabaticity margin.
    """
    w_start = _omegas(np.array([u_start]), cfg)[1][0]
    w_end = _omegas(np.array([u_end]), cfg)[1][0]
    duration = abs(1 / w_end - 1 / w_start) / margin
    t = np.linspace(0.0, duration, n)
    sign = 1.0 if w_end < w_start else -1.0
    omega = 1 / (1 / w_start + sign * margin * t)
    return RampProfile(t, u_start * (omega / w_start) ** 2, "custom")


def _omegas(depths, cfg: TrapConfig):
    m, w, zr = cfg.atom_mass, cfg.waist, cfg.rayleigh_range
    return np.sqrt(4 * depths / (m * w**2)), np.sqrt(2 * depths / (m * zr**2))


def check_adiabaticity(ramp: RampProfile, cfg: TrapConfig) -> tuple[float, float]:
    """Largest |d(omega)/dt| / omega^2 over the ramp and both axes, and when it occurs."""
    if ramp.times.size < 3:
        raise ValueError("need at least 3 ramp samples")
    worst, when = 0.0, float(ramp.times[0])
    for omega in _omegas(ramp.depths, cfg):
        if np.ptp(omega) == 0:
            continue
        rate = np.abs(np.gradient(omega, ramp.times, edge_order=2)) / omega**2
        k = int(np.argmax(rate))
        if rate[k] > worst:
            worst, when = float(rate[k]), float(ramp.times[k])
    return worst, when


def hold_time_check(u_min: float, hold: float, cfg: TrapConfig) -> bool:
    """True if the atom performs at least ten axial oscillations during `hold`."""
    nu_par = _omegas(np.array([u_min]), cfg)[1][0] / (2 * np.pi)
    # relative slack absorbs rounding at the inclusive boundary
    return bool(hold * nu_par >= 10 * (1 - 1e-12))
