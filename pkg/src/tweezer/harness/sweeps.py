"""Synthetic experiments and the sweep pipelines behind the figure tables."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy

from .. import __version__
from .. import constants as C
from ..adiabatic import adiabatic_temperature, build_action_map, map_escape_energy
from ..analytics import fit_survival_temperature, mean_energy_truncated, p_surv
from ..flight import RRCurve
from ..sampling import RngSeed
from ..thermometry import FitError, auto_fit_temperature, model_curve
from ..trap import TrapConfig, UntrappableError, no_barrier_depth, potential_at_depth
from .config import ExperimentConfig

# Wilson score interval at one standard deviation
WILSON_Z = 1.0


def derive_seed(master: int, *path: int) -> int:
    ss = np.random.SeedSequence(master, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


def wilson_half_width(k, n, z: float = WILSON_Z):
    p = np.asarray(k, dtype=float) / n
    return z / (1 + z * z / n) * np.sqrt(p * (1 - p) / n + z * z / (4.0 * n * n))


def binomial_curve(dt, p_model, n_sequences: int, rng: np.random.Generator) -> RRCurve:
    """Finite-sequence data drawn around a model curve."""
    k = rng.binomial(n_sequences, np.clip(np.asarray(p_model, dtype=float), 0, 1))
    p = k / n_sequences
    sigma = np.sqrt(p * (1 - p) / n_sequences)
    edge = (k == 0) | (k == n_sequences)
    sigma[edge] = wilson_half_width(k[edge], n_sequences)
    return RRCurve.from_arrays(dt, p, sigma, n_sequences)


def synth_experiment(true_t: float, cfg: ExperimentConfig, *, u0: float | None = None,
                     dt_grid=None, truncation_energy: float | None = None,
                     n_bins: int | None = None, seed: int | None = None) -> RRCurve:
    """Release-and-recapture data at `true_t` with binomial counting noise.

    `u0` selects the trap depth (default: the initial depth of `cfg`); with a
    truncation energy the atoms come from the truncated sampler and only the
    fraction surviving the truncation can be recaptured.
    """
    seed = cfg.seed if seed is None else seed
    pot = potential_at_depth(cfg.trap, cfg.depth_initial if u0 is None else u0)
    dt = cfg.release_times() if dt_grid is None else tuple(dt_grid)
    model = model_curve(true_t, pot, dt, cfg.n_traj, cfg.scale, derive_seed(seed, 0),
                        truncation_energy=truncation_energy, n_bins=n_bins or cfg.n_bins,
                        workers=cfg.workers)
    rng = RngSeed(derive_seed(seed, 1)).generator()
    return binomial_curve(model.dt, model.p, cfg.n_sequences, rng)


def p_rr_zero(curve: RRCurve) -> tuple[float, float]:
    """Mean of the four smallest-release-time points and its standard error."""
    p, s = curve.p[:4], curve.sigma[:4]
    return float(p.mean()), float(np.sqrt(np.sum(s**2)) / p.size)


@dataclass
class SweepResult:
    columns: list[str]
    records: list[dict]
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in ("config_hash", "seed"):
            if k in self.meta:
                buf.write(f"# {k}={self.meta[k]}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.columns)
        for rec in self.records:
            wr.writerow([_fmt(rec[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"meta": self.meta, "columns": self.columns,
                           "records": self.records}, indent=2, sort_keys=True,
                          default=_json_default)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _json_default(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))


def provenance(cfg: ExperimentConfig, **extra) -> dict:
    meta = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "versions": {"tweezer": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
    }
    meta.update(extra)
    return meta


def _map_points(fn, n: int, workers: int) -> list:
    if workers > 1 and n > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(fn, range(n)))
    return [fn(i) for i in range(n)]


def _uk(e_joule: float) -> float:
    return e_joule / C.k_B * 1e6


def _require_grid(cfg: ExperimentConfig):
    if not cfg.u_min_grid:
        raise ValueError("this sweep needs a non-empty u_min_grid")


def escape_energy_or_none(u_min: float, u_i: float, trap: TrapConfig) -> float | None:
    """Initial-trap energy mapped from the shallow depth; None when untrappable."""
    if trap.gravity > 0 and u_min <= no_barrier_depth(trap):
        return None
    return map_escape_energy(min(u_min, u_i), u_i, trap)


def run_spectroscopy_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Survival after adiabatic lowering to each U_min, plus the remapped
    cumulative energy distribution and a thermal fit to it."""
    _require_grid(cfg)
    u_i = cfg.depth_initial
    rng = RngSeed(derive_seed(cfg.seed, 2)).generator()
    records = []
    for u_min in cfg.u_min_grid:
        e_i = escape_energy_or_none(u_min, u_i, cfg.trap)
        p_model = 0.0 if e_i is None else cfg.scale * float(p_surv(e_i, cfg.temperature))
        k = rng.binomial(cfg.n_sequences, p_model)
        p = k / cfg.n_sequences
        sigma = (float(wilson_half_width(k, cfg.n_sequences)) if k in (0, cfg.n_sequences)
                 else math.sqrt(p * (1 - p) / cfg.n_sequences))
        records.append({
            "u_min_uK": _uk(u_min), "u_ratio": u_min / u_i,
            "e_ratio": float("nan") if e_i is None else e_i / u_i,
            "p_model": p_model, "p": p, "sigma": sigma, "n": cfg.n_sequences,
        })
    ok = [r for r in records if not math.isnan(r["e_ratio"])]
    fit = {}
    if len(ok) >= 3:
        t_fit, s_fit = fit_survival_temperature(
            np.array([r["e_ratio"] for r in ok]) * u_i, np.array([r["p"] for r in ok]),
            np.array([r["sigma"] for r in ok]), cfg.scale, t_guess=cfg.temperature)
        fit = {"t_fit_uK": t_fit * 1e6, "sigma_t_uK": s_fit * 1e6}
    cols = ["u_min_uK", "u_ratio", "e_ratio", "p_model", "p", "sigma", "n"]
    return SweepResult(cols, records, provenance(cfg, sequence="spectroscopy", **fit))


def truncation_bins(cfg: ExperimentConfig, u_trunc: float) -> int:
    """Bin count keeping the energy bins no wider than kT/10."""
    return max(cfg.n_bins, math.ceil(10 * u_trunc / (C.k_B * cfg.temperature)))


def run_truncation_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Truncate by adiabatic lowering to U_min, restore the trap, then
    measure by release and recapture; fit T with the truncated model."""
    _require_grid(cfg)
    u_i = cfg.depth_initial
    pot = potential_at_depth(cfg.trap, u_i)
    dt = cfg.release_times()

    def point(idx: int) -> dict:
        u_min = cfg.u_min_grid[idx]
        rec = {"u_min_uK": _uk(u_min)}
        u_trunc = escape_energy_or_none(u_min, u_i, cfg.trap)
        nan = float("nan")
        if u_trunc is None:
            rec.update(p_rr0=0.0, p_rr0_sigma=0.0, t_uK=nan, sigma_t_uK=nan,
                       e_mean_uK=nan, u_trunc_uK=0.0, e_mean_model_uK=0.0)
            return rec
        n_bins = truncation_bins(cfg, u_trunc)
        data = synth_experiment(cfg.temperature, cfg, u0=u_i, dt_grid=dt,
                                truncation_energy=u_trunc, n_bins=n_bins,
                                seed=derive_seed(cfg.seed, 3, idx))
        p0, s0 = p_rr_zero(data)
        rec.update(p_rr0=p0, p_rr0_sigma=s0, u_trunc_uK=_uk(u_trunc),
                   e_mean_model_uK=_uk(mean_energy_truncated(cfg.temperature, u_trunc)))
        try:
            fit = auto_fit_temperature(data, pot, cfg.temperature, n_traj=cfg.n_traj,
                                       scale=cfg.scale, seed=derive_seed(cfg.seed, 4, idx),
                                       truncation_energy=u_trunc, n_bins=n_bins)
            rec.update(t_uK=fit.t_best * 1e6, sigma_t_uK=fit.sigma_t * 1e6,
                       e_mean_uK=_uk(mean_energy_truncated(fit.t_best, u_trunc)))
        except FitError:
            rec.update(t_uK=nan, sigma_t_uK=nan, e_mean_uK=nan)
        return rec

    records = _map_points(point, len(cfg.u_min_grid), cfg.workers)
    cols = ["u_min_uK", "p_rr0", "t_uK", "sigma_t_uK", "e_mean_uK",
            "p_rr0_sigma", "u_trunc_uK", "e_mean_model_uK"]
    return SweepResult(cols, records, provenance(cfg, sequence="truncate_then_rr"))


def run_adiabatic_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Release and recapture performed in the lowered trap; the atom follows
    the ideal adiabatic law T/sqrt(U) = const."""
    _require_grid(cfg)
    u_i = cfg.depth_initial
    base_dt = np.asarray(cfg.release_times())

    def point(idx: int) -> dict:
        u_min = min(cfg.u_min_grid[idx], u_i)
        t_pred = adiabatic_temperature(cfg.temperature, u_i, u_min)
        rec = {"u_min_uK": _uk(u_min), "t_pred_uK": t_pred * 1e6}
        nan = float("nan")
        try:
            pot = potential_at_depth(cfg.trap, u_min)
        except UntrappableError:
            rec.update(p_rr0=0.0, p_rr0_sigma=0.0, t_uK=nan, sigma_t_uK=nan, e_mean_uK=nan)
            return rec
        # release times stretched with the thermal velocity scale
        dt = tuple(base_dt * math.sqrt(cfg.temperature / t_pred))
        data = synth_experiment(t_pred, cfg, u0=u_min, dt_grid=dt,
                                seed=derive_seed(cfg.seed, 5, idx))
        p0, s0 = p_rr_zero(data)
        rec.update(p_rr0=p0, p_rr0_sigma=s0)
        try:
            fit = auto_fit_temperature(data, pot, t_pred, n_traj=cfg.n_traj, scale=cfg.scale,
                                       seed=derive_seed(cfg.seed, 6, idx))
            rec.update(t_uK=fit.t_best * 1e6, sigma_t_uK=fit.sigma_t * 1e6,
                       e_mean_uK=3 * fit.t_best * 1e6)
        except FitError:
            rec.update(t_uK=nan, sigma_t_uK=nan, e_mean_uK=nan)
        return rec

    records = _map_points(point, len(cfg.u_min_grid), cfg.workers)
    cols = ["u_min_uK", "p_rr0", "t_uK", "sigma_t_uK", "e_mean_uK", "p_rr0_sigma", "t_pred_uK"]
    law = cfg.temperature / math.sqrt(_uk(u_i))
    return SweepResult(cols, records, provenance(
        cfg, sequence="adiabatic_rr", scaling_law_uK_per_sqrt_uK=law))


def run_action_map(cfg: ExperimentConfig) -> SweepResult:
    table = build_action_map(cfg.depth_initial, cfg.u_ratio_grid, cfg.trap)
    records = [{"u_ratio": u, "e_ratio": e} for u, e in table.rows]
    return SweepResult(["u_ratio", "e_ratio"], records,
                       provenance(cfg, sequence="action_map"))
