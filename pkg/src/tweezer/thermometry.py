"""Temperature fits of release-and-recapture curves.

The Monte-Carlo model is evaluated on a grid of temperatures, chi-square is
computed against the data for each, and a parabola through the five grid
points around the minimum gives the best temperature. The uncertainty is
sqrt(2 / chi2'') combined in quadrature with the statistical uncertainty of
the parabola vertex.

Every grid temperature reuses the same random streams, so the model curves
differ only through the temperature and chi-square(T) is smooth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analytics import p_surv
from .flight import RRCurve, SimPlan, simulate_rr
from .sampling import ThermalSpec, TruncatedSpec
from .trap import TrapPotential


class FitError(RuntimeError):
    pass


class GridNotBracketingError(FitError):
    pass


class NoisyModelError(FitError):
    pass


@dataclass(frozen=True)
class FitResult:
    t_best: float
    sigma_t: float
    chi2_min: float
    scale_used: float
    t_grid: np.ndarray
    chi2_values: np.ndarray
    curvature: float = float("nan")
    vertex_sigma: float = 0.0


def chi_square(data: RRCurve, model: RRCurve) -> float:
    if len(data) != len(model) or not np.array_equal(data.dt, model.dt):
        raise ValueError("data and model must share the same release-time grid")
    sigma = data.sigma
    if np.any(sigma <= 0):
        raise ValueError("every data uncertainty must be > 0")
    return float(np.sum((model.p - data.p) ** 2 / sigma**2))


def parabola_vertex(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares quadratic through (T, chi2) points.

    Returns the vertex position, the second derivative d2chi2/dT2 and the
    standard error of the vertex propagated from the fit covariance. The
    covariance is scaled by the residual variance, so an exact parabola
    has zero vertex error.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 points")
    t, y = pts[:, 0], pts[:, 1]
    if np.unique(t).size != t.size:
        raise ValueError("temperatures must be distinct")
    # centre and scale for conditioning
    t0, ts = t.mean(), np.ptp(t) / 2
    u = (t - t0) / ts
    design = np.stack([u * u, u, np.ones_like(u)], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    a, b, _ = coef
    if a <= 0:
        raise NoisyModelError("chi-square is not convex near its minimum; increase n_traj")
    u_v = -b / (2 * a)
    n = t.size
    if n > 3:
        resid = y - design @ coef
        s2 = float(resid @ resid) / (n - 3)
        cov = s2 * np.linalg.inv(design.T @ design)
        grad = np.array([b / (2 * a * a), -1 / (2 * a)])
        var = float(grad @ cov[:2, :2] @ grad)
    else:
        var = 0.0
    return t0 + ts * u_v, 2 * a / ts**2, ts * np.sqrt(max(var, 0.0))


def model_curve(temperature: float, pot: TrapPotential, dt_grid, n_traj: int, scale: float,
                seed: int, truncation_energy: float | None = None, n_bins: int = 10,
                workers: int = 1) -> RRCurve:
    """Simulated recapture curve at one temperature.

    With a truncation energy the atoms are drawn from the truncated sampler
    and the plateau also carries the probability of surviving the truncation.
    """
    if truncation_energy is None:
        source, level = ThermalSpec(temperature), scale
    else:
        source = TruncatedSpec(temperature, truncation_energy, n_bins)
        level = scale * float(p_surv(truncation_energy, temperature))
    plan = SimPlan(tuple(dt_grid), source, n_traj, scale=max(level, 1e-300), workers=workers)
    return simulate_rr(plan, pot, seed)


def model_curves(t_grid, pot, dt_grid, n_traj, scale, seed, **kw) -> list[RRCurve]:
    return [model_curve(t, pot, dt_grid, n_traj, scale, seed, **kw) for t in t_grid]


def _best_scale(data: RRCurve, model: RRCurve, scale: float) -> float:
    """Plateau factor minimizing chi-square for a model produced at `scale`."""
    base = model.p / scale
    w = 1 / data.sigma**2
    denom = float(np.sum(w * base * base))
    if denom == 0:
        return scale
    return float(np.clip(np.sum(w * base * data.p) / denom, 1e-6, 1.0))


def _rescaled(data: RRCurve, curve: RRCurve, scale: float) -> tuple[float, float]:
    """Best plateau factor for `curve` and the chi-square at that factor."""
    s = _best_scale(data, curve, scale)
    curve = RRCurve.from_arrays(curve.dt, np.clip(curve.p * s / scale, 0, 1),
                                curve.sigma * s / scale, curve.n)
    return s, chi_square(data, curve)


def fit_from_curves(data: RRCurve, t_grid, curves: Sequence[RRCurve], scale: float,
                    fit_scale: bool = False) -> FitResult:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 5 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be sorted with at least 5 points")
    chi2 = np.empty(t_grid.size)
    scales = np.full(t_grid.size, scale)
    for k, curve in enumerate(curves):
        if fit_scale:
            scales[k], chi2[k] = _rescaled(data, curve, scale)
        else:
            chi2[k] = chi_square(data, curve)
    k_min = int(np.argmin(chi2))
    if k_min < 2 or k_min > t_grid.size - 3:
        raise GridNotBracketingError(
            f"chi-square minimum at T={t_grid[k_min]:.4g} K is at the grid edge")
    sel = slice(k_min - 2, k_min + 3)
    t_v, curv, sig_v = parabola_vertex(np.column_stack([t_grid[sel], chi2[sel]]))
    if not t_grid[0] <= t_v <= t_grid[-1]:
        raise NoisyModelError("parabola vertex falls outside the grid")
    sigma_t = float(np.hypot(np.sqrt(2 / curv), sig_v))
    return FitResult(
        t_best=float(t_v), sigma_t=sigma_t, chi2_min=float(chi2[k_min]),
        scale_used=float(scales[k_min]), t_grid=t_grid, chi2_values=chi2,
        curvature=float(curv), vertex_sigma=float(sig_v),
    )


def fit_temperature(data: RRCurve, pot: TrapPotential, t_grid, n_traj: int = 10_000,
                    scale: float = 0.95, seed: int = 0, fit_scale: bool = False,
                    truncation_energy: float | None = None, n_bins: int = 10,
                    workers: int = 1) -> FitResult:
    curves = model_curves(t_grid, pot, data.dt, n_traj, scale, seed,
                          truncation_energy=truncation_energy, n_bins=n_bins,
                          workers=workers)
    return fit_from_curves(data, t_grid, curves, scale, fit_scale)


def refine_grid(t_center: float, rel_width: float = 0.4, n: int = 13) -> np.ndarray:
    return np.linspace(t_center * (1 - rel_width), t_center * (1 + rel_width), n)


def auto_fit_temperature(data: RRCurve, pot: TrapPotential, t_guess: float,
                         n_traj: int = 10_000, scale: float = 0.95, seed: int = 0,
                         n_fine: int = 15, fit_scale: bool = False, **kw) -> FitResult:
    """Two-stage fit: coarse log grid over a factor 4 either side of
    `t_guess`, then a fine linear grid across the coarse minimum."""
    coarse = t_guess * np.geomspace(0.25, 4.0, 17)
    curves = model_curves(coarse, pot, data.dt, n_traj, scale, seed, **kw)
    chi2 = [_rescaled(data, c, scale)[1] if fit_scale else chi_square(data, c)
            for c in curves]
    k = int(np.clip(np.argmin(chi2), 1, coarse.size - 2))
    fine = np.linspace(coarse[k - 1], coarse[k + 1], n_fine)
    return fit_temperature(data, pot, fine, n_traj, scale, seed, fit_scale=fit_scale, **kw)
