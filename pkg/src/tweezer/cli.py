"""Command-line entry point.

Exit codes: 0 success, 2 bad usage (unknown flag or subcommand), 3 malformed
configuration, 4 unreadable or unwritable path, 5 numerical or domain error.
Errors are reported on stderr as a one-line JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .adiabatic import NoRootError
from .flight import RRCurve, SimPlan, simulate_rr
from .harness.config import ConfigError, ExperimentConfig, load_config
from .harness.sweeps import (SweepResult, provenance, run_action_map, run_adiabatic_sweep,
                             run_spectroscopy_sweep, run_truncation_sweep, synth_experiment,
                             _fmt, _json_default)
from .sampling import ThermalSpec
from .thermometry import FitError, auto_fit_temperature
from .trap import UntrappableError, potential_at_depth

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_DOMAIN = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def curve_to_csv(curve: RRCurve, meta: dict) -> str:
    buf = io.StringIO()
    for k in ("config_hash", "seed"):
        buf.write(f"# {k}={meta[k]}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["dt_us", "p", "sigma", "n"])
    for pt in curve.points:
        wr.writerow([_fmt(pt.dt * 1e6), _fmt(pt.p), _fmt(pt.sigma), _fmt(pt.n)])
    return buf.getvalue()


def curve_from_csv(path: Path) -> RRCurve:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    try:
        dt = np.array([float(r["dt_us"]) for r in rows]) * 1e-6
        p = [float(r["p"]) for r in rows]
        sigma = [float(r["sigma"]) for r in rows]
        n = [int(float(r["n"])) for r in rows]
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: not a recapture curve CSV ({exc})") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return RRCurve.from_arrays(dt, p, sigma, n)


def _dump_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _emit_sweep(res: SweepResult, out: Path, stem: str) -> list[Path]:
    paths = [out / f"{stem}.csv", out / f"{stem}.json"]
    _write(paths[0], res.to_csv())
    _write(paths[1], res.to_json() + "\n")
    return paths


def cmd_rr_sim(cfg: ExperimentConfig, args) -> list[Path]:
    """Synthetic release-and-recapture data (or the noiseless model with --model)."""
    out = cfg.output_dir()
    if args.model:
        pot = potential_at_depth(cfg.trap, cfg.depth_initial)
        plan = SimPlan(cfg.release_times(), ThermalSpec(cfg.temperature), cfg.n_traj,
                       cfg.scale, cfg.workers)
        curve = simulate_rr(plan, pot, cfg.seed)
    else:
        curve = synth_experiment(cfg.temperature, cfg)
    meta = provenance(cfg, sequence="release_recapture", temperature_uK=cfg.temperature * 1e6,
                      noiseless=bool(args.model))
    paths = [out / "rr_curve.csv", out / "rr_curve.json"]
    _write(paths[0], curve_to_csv(curve, meta))
    _write(paths[1], _dump_json(meta))
    return paths


def cmd_rr_fit(cfg: ExperimentConfig, args) -> list[Path]:
    path = Path(args.data)
    try:
        data = curve_from_csv(path)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    pot = potential_at_depth(cfg.trap, cfg.depth_initial)
    guess = args.t_guess * 1e-6 if args.t_guess else cfg.temperature
    fit = auto_fit_temperature(data, pot, guess, n_traj=cfg.n_traj, scale=cfg.scale,
                               seed=cfg.seed, fit_scale=args.fit_scale, workers=cfg.workers)
    meta = provenance(cfg, sequence="release_recapture", data_file=str(path))
    meta["fit"] = {
        "t_uK": fit.t_best * 1e6, "sigma_t_uK": fit.sigma_t * 1e6, "chi2_min": fit.chi2_min,
        "dof": len(data) - 1, "scale_used": fit.scale_used,
        "t_grid_uK": (fit.t_grid * 1e6).tolist(), "chi2_values": fit.chi2_values.tolist(),
    }
    out = cfg.output_dir() / "rr_fit.json"
    _write(out, _dump_json(meta))
    return [out]


def cmd_spectroscopy(cfg, args):
    return _emit_sweep(run_spectroscopy_sweep(cfg), cfg.output_dir(), "spectroscopy")


def cmd_truncate(cfg, args):
    return _emit_sweep(run_truncation_sweep(cfg), cfg.output_dir(), "truncation")


def cmd_adiabatic(cfg, args):
    return _emit_sweep(run_adiabatic_sweep(cfg), cfg.output_dir(), "adiabatic")


def cmd_action_map(cfg, args):
    return _emit_sweep(run_action_map(cfg), cfg.output_dir(), "action_map")


def cmd_figures(cfg, args):
    if not cfg.u_min_grid:
        raise ConfigError("figures needs u_min_grid in the config")
    out = cfg.output_dir()
    paths = []
    paths += _emit_sweep(run_spectroscopy_sweep(cfg), out, "spectroscopy")
    paths += _emit_sweep(run_action_map(cfg), out, "action_map")
    paths += _emit_sweep(run_truncation_sweep(cfg), out, "truncation")
    paths += _emit_sweep(run_adiabatic_sweep(cfg), out, "adiabatic")
    return paths


COMMANDS = {
    "rr-sim": (cmd_rr_sim, "simulate a release-and-recapture curve with counting noise"),
    "rr-fit": (cmd_rr_fit, "fit a temperature to a recapture curve CSV"),
    "spectroscopy": (cmd_spectroscopy, "adiabatic-lowering survival sweep"),
    "truncate": (cmd_truncate, "truncation sweep followed by release and recapture"),
    "adiabatic": (cmd_adiabatic, "release and recapture in adiabatically lowered traps"),
    "action-map": (cmd_action_map, "constant-action escape-energy table"),
    "figures": (cmd_figures, "all four sweep tables from one config"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tweezer", description="Single-atom optical tweezer thermometry.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", "-c", help="key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable), e.g. --set 'temperature=31 uK'")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--output", "-o", help="output directory")
        p.add_argument("--workers", type=int, help="worker threads")
        if name == "rr-sim":
            p.add_argument("--model", action="store_true",
                           help="write the noiseless Monte-Carlo curve instead of synthetic data")
        if name == "rr-fit":
            p.add_argument("data", help="curve CSV with columns dt_us,p,sigma,n")
            p.add_argument("--t-guess", type=float, help="starting temperature (uK)")
            p.add_argument("--fit-scale", action="store_true",
                           help="fit the plateau factor jointly")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    try:
        overrides = list(args.set)
        for key in ("seed", "output", "workers"):
            if getattr(args, key) is not None:
                overrides.append(f"{key}={getattr(args, key)}")
        cfg = load_config(args.config, overrides)
        paths = COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except (UntrappableError, NoRootError, FitError, ValueError, ArithmeticError) as exc:
        return _fail(EXIT_DOMAIN, type(exc).__name__, str(exc))
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
