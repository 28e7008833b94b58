"""Release-and-recapture Monte-Carlo.

Each trajectory is a single closed-form ballistic step under gravity; the atom
counts as recaptured when its total energy in the restored trap, measured from
the trap minimum, is below the effective (gravity-limited) depth.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .sampling import (PhaseSpaceState, RngSeed, ThermalSpec, TruncatedSpec,
                       sample)
from .trap import TrapPotential, potential_energy

# trajectories drawn per Philox stream; fixes the partition of work so that
# results do not depend on the number of workers
BLOCK_SIZE = 1024


@dataclass(frozen=True)
class RRPoint:
    dt: float
    p: float
    sigma: float
    n: int


@dataclass(frozen=True)
class RRCurve:
    points: tuple[RRPoint, ...]

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        dts = [pt.dt for pt in pts]
        if any(b <= a for a, b in zip(dts, dts[1:])):
            raise ValueError("release times must be strictly increasing")
        for pt in pts:
            if not (0.0 <= pt.p <= 1.0) or pt.sigma < 0:
                raise ValueError(f"invalid curve point {pt}")

    @classmethod
    def from_arrays(cls, dt, p, sigma, n) -> "RRCurve":
        """Build a curve from columns given in any order of release time."""
        dt, p, sigma = (np.asarray(a, dtype=float) for a in (dt, p, sigma))
        n = np.broadcast_to(np.asarray(n), dt.shape)
        order = np.argsort(dt, kind="stable")
        return cls(tuple(RRPoint(float(dt[i]), float(p[i]), float(sigma[i]), int(n[i]))
                         for i in order))

    @property
    def dt(self) -> np.ndarray:
        return np.array([pt.dt for pt in self.points])

    @property
    def p(self) -> np.ndarray:
        return np.array([pt.p for pt in self.points])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([pt.sigma for pt in self.points])

    @property
    def n(self) -> np.ndarray:
        return np.array([pt.n for pt in self.points])

    def __len__(self):
        return len(self.points)


Source = Union[ThermalSpec, TruncatedSpec]


@dataclass(frozen=True)
class SimPlan:
    dt_grid: Sequence[float]
    source: Source
    n_trajectories: int = 10_000
    scale: float = 0.95
    workers: int = 1

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if not 0 < self.scale <= 1:
            raise ValueError("scale must lie in (0, 1]")
        if any(t < 0 for t in self.dt_grid):
            raise ValueError("release times must be >= 0")


def free_flight(state: PhaseSpaceState, dt: float, g: float,
                gravity_axis: str = "y") -> PhaseSpaceState:
    if dt < 0:
        raise ValueError("dt must be >= 0")
    drop = 0.5 * g * dt * dt
    x = state.x + state.vx * dt
    y = state.y + state.vy * dt
    z = state.z + state.vz * dt
    vx, vy = state.vx, state.vy
    if gravity_axis == "y":
        y = y - drop
        vy = vy - g * dt
    else:
        x = x - drop
        vx = vx - g * dt
    return PhaseSpaceState(x, y, z, vx, vy, state.vz)


def total_energy(state: PhaseSpaceState, pot: TrapPotential):
    return state.kinetic_energy(pot.cfg.atom_mass) + potential_energy(
        pot, state.x, state.y, state.z)


def is_recaptured(state: PhaseSpaceState, pot: TrapPotential):
    return total_energy(state, pot) < pot.effective_depth


def dt_stream_key(dt: float) -> int:
    """Stream prefix from the release time in picoseconds.

    Keying on the value (not the grid index) makes results independent of the
    order in which release times are listed.
    """
    return int(round(dt * 1e12))


def _count_block(pot, source, seed, dt, block, size):
    rng = RngSeed(seed, (dt_stream_key(dt) << 24) | block)
    state = sample(source, pot, rng, size)
    landed = free_flight(state, dt, pot.cfg.gravity, pot.cfg.gravity_axis)
    return int(np.count_nonzero(is_recaptured(landed, pot)))


def recapture_counts(plan: SimPlan, pot: TrapPotential, seed: int) -> np.ndarray:
    """Raw recapture counts per release time (before plateau scaling)."""
    n = plan.n_trajectories
    n_blocks = -(-n // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, n - b * BLOCK_SIZE) for b in range(n_blocks)]
    tasks = [(dt, b, sizes[b]) for dt in plan.dt_grid for b in range(n_blocks)]

    def run(task):
        dt, b, size = task
        return _count_block(pot, plan.source, seed, dt, b, size)

    if plan.workers > 1:
        with ThreadPoolExecutor(plan.workers) as ex:
            counts = list(ex.map(run, tasks))
    else:
        counts = [run(t) for t in tasks]
    return np.asarray(counts, dtype=np.int64).reshape(len(plan.dt_grid), n_blocks).sum(axis=1)


def simulate_rr(plan: SimPlan, pot: TrapPotential, seed: int) -> RRCurve:
    n = plan.n_trajectories
    raw = recapture_counts(plan, pot, seed) / n
    sigma = plan.scale * np.sqrt(raw * (1 - raw) / n)
    return RRCurve.from_arrays(plan.dt_grid, plan.scale * raw, sigma, n)
