"""Phase-space sampling of a single trapped atom.

Two sources are supported: a thermal Maxwell-Boltzmann state in the harmonic
approximation, and a discretized truncated Boltzmann distribution where the
total energy is drawn from equally spaced bins, split at random among the three
axes, and given a random oscillation phase per axis.

Randomness comes from counter-based Philox streams keyed by ``(seed,
stream_id)`` so that any partition of the work across processes reproduces the
same draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import constants as C
from .trap import TrapPotential

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSeed:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream_id <= _MASK64):
            raise ValueError("seed and stream_id must be 64-bit unsigned integers")

    def generator(self) -> np.random.Generator:
        key = (self.stream_id << 64) | self.seed
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, stream_id: int) -> "RngSeed":
        return RngSeed(self.seed, stream_id & _MASK64)


RngLike = Union[RngSeed, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngSeed):
        return rng.generator()
    return rng


@dataclass(frozen=True)
class PhaseSpaceState:
    """Position (m) and velocity (m/s); fields may be scalars or equal-length arrays."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    vz: np.ndarray

    def __len__(self):
        return np.size(self.x)

    def kinetic_energy(self, mass: float):
        return 0.5 * mass * (self.vx**2 + self.vy**2 + self.vz**2)

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.x, self.y, self.z,
                                            self.vx, self.vy, self.vz), axis=-1)


@dataclass(frozen=True)
class ThermalSpec:
    temperature: float

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")


@dataclass(frozen=True)
class TruncatedSpec:
    temperature: float
    truncation_energy: float
    n_bins: int = 10

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if not self.truncation_energy > 0:
            raise ValueError("truncation_energy must be > 0")
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")

    def bin_energies(self) -> np.ndarray:
        j = np.arange(1, self.n_bins + 1)
        return (j - 0.5) * self.truncation_energy / self.n_bins

    def bin_weights(self) -> np.ndarray:
        """Normalized discretized E^2 exp(-E/kT) weights."""
        e = self.bin_energies()
        kt = C.k_B * self.temperature
        # shift the exponent by the first bin for numerical safety
        w = (e / e[0]) ** 2 * np.exp(-(e - e[0]) / kt)
        return w / w.sum()

    def bin_mean_energy(self) -> float:
        return float(np.dot(self.bin_energies(), self.bin_weights()))


def _axis_omegas(pot: TrapPotential) -> np.ndarray:
    return np.array([pot.omega_perp, pot.omega_perp, pot.omega_par])


def _gravity_offsets(pot: TrapPotential) -> tuple[float, float]:
    if pot.cfg.gravity_axis == "y":
        return 0.0, pot.min_position
    return pot.min_position, 0.0


def sample_thermal(spec: ThermalSpec, pot: TrapPotential, rng: RngLike,
                   n: int | None = None) -> PhaseSpaceState:
    """Gaussian positions (harmonic widths) and Maxwellian velocities.

    With ``n=None`` a single state of scalars is returned, otherwise arrays of
    length ``n``. Positions are centred on the gravity-shifted minimum.
    """
    gen = as_generator(rng)
    m = pot.cfg.atom_mass
    kt = C.k_B * spec.temperature
    size = 1 if n is None else n
    u = gen.standard_normal((6, size))
    sig_q = np.sqrt(kt / (m * _axis_omegas(pot) ** 2))
    sig_v = np.sqrt(kt / m)
    ox, oy = _gravity_offsets(pot)
    state = PhaseSpaceState(
        x=ox + sig_q[0] * u[0], y=oy + sig_q[1] * u[1], z=sig_q[2] * u[2],
        vx=sig_v * u[3], vy=sig_v * u[4], vz=sig_v * u[5],
    )
    return _squeeze(state) if n is None else state


def simplex_split(total_energy, rng: RngLike, n: int | None = None):
    """Split energies uniformly on the 2-simplex E1 + E2 + E3 = total.

    Uses the spacings of two sorted uniforms. The third share is taken as the
    remainder so the components add back to the total.
    """
    if np.any(np.asarray(total_energy) < 0):
        raise ValueError("total_energy must be >= 0")
    gen = as_generator(rng)
    size = 1 if n is None else n
    u = np.sort(gen.random((size, 2)), axis=1)
    total = np.broadcast_to(np.asarray(total_energy, dtype=float), (size,))
    e1 = total * u[:, 0]
    e2 = total * (u[:, 1] - u[:, 0])
    e3 = np.maximum(total - e1 - e2, 0.0)
    if n is None:
        return float(e1[0]), float(e2[0]), float(e3[0])
    return e1, e2, e3


def sample_truncated(spec: TruncatedSpec, pot: TrapPotential, rng: RngLike,
                     n: int | None = None) -> PhaseSpaceState:
    gen = as_generator(rng)
    size = 1 if n is None else n
    m = pot.cfg.atom_mass
    energies = spec.bin_energies()
    cdf = np.cumsum(spec.bin_weights())
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, gen.random(size), side="right")
    total = energies[np.minimum(idx, spec.n_bins - 1)]
    shares = np.stack(simplex_split(total, gen, size))
    phase = gen.uniform(0.0, 2 * np.pi, (3, size))
    omega = _axis_omegas(pot)[:, None]
    amp = np.sqrt(2 * shares / (m * omega**2))
    q = amp * np.cos(phase)
    v = np.sqrt(2 * shares / m) * np.sin(phase)
    ox, oy = _gravity_offsets(pot)
    state = PhaseSpaceState(x=ox + q[0], y=oy + q[1], z=q[2], vx=v[0], vy=v[1], vz=v[2])
    return _squeeze(state) if n is None else state


def harmonic_energy(state: PhaseSpaceState, pot: TrapPotential, per_axis: bool = False):
    """Energy of the state in the harmonic approximation of the trap."""
    m = pot.cfg.atom_mass
    ox, oy = _gravity_offsets(pot)
    om = _axis_omegas(pot)
    q = (state.x - ox, state.y - oy, state.z)
    v = (state.vx, state.vy, state.vz)
    parts = [0.5 * m * vk**2 + 0.5 * m * wk**2 * qk**2 for qk, vk, wk in zip(q, v, om)]
    if per_axis:
        return parts
    return parts[0] + parts[1] + parts[2]


def sample(source, pot: TrapPotential, rng: RngLike, n: int | None = None) -> PhaseSpaceState:
    if isinstance(source, ThermalSpec):
        return sample_thermal(source, pot, rng, n)
    if isinstance(source, TruncatedSpec):
        return sample_truncated(source, pot, rng, n)
    raise TypeError(f"unknown source distribution {source!r}")


def _squeeze(state: PhaseSpaceState) -> PhaseSpaceState:
    return PhaseSpaceState(*(float(np.asarray(c).reshape(-1)[0]) for c in
                             (state.x, state.y, state.z, state.vx, state.vy, state.vz)))
