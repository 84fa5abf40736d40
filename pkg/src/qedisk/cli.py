"""Command-line front end.

    qedisk spectrum --config run.cfg --output out/
    qedisk kernel   --config run.cfg --output out/
    qedisk fit      --config run.cfg --output out/
    qedisk simulate --config run.cfg --output out/
    qedisk sweep    --config run.cfg --output out/ --jobs 4

Every verb reads the same flat config (see :mod:`qedisk.config`). Trajectory
files are named by a hash of the sweep point's settings, and the summary is
written in declared sweep order, so output does not depend on ``--jobs``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config, require
from .dynamics import (
    LorentzianModeParams,
    classify_regime,
    lorentzian_kernel,
    markov_rate,
    modes_from_peaks,
    solve_analytic,
    solve_pseudomode,
    solve_volterra,
)
from .errors import ConfigError, QEDiskError
from .fitting import fit_lorentzians
from .kernel import EmitterConfig, build_kernel_table, nondyn_shift
from .spectral import (
    GreensCoefficients,
    GreensSeriesSpectrum,
    LorentzianSumSpectrum,
    MaterialParams,
    PurcellSpectrum,
    TabulatedSpectrum,
    sigma_inter_re,
    sigma_res,
    write_spectrum_csv,
)

log = logging.getLogger("qedisk")

SUMMARY_HEADER = [
    "point_id",
    "param",
    "value",
    "delta_ndyn_eV",
    "markov_rate_eV",
    "regime",
    "t99_fs",
    "solver",
    "converged",
]


# --------------------------------------------------------------------------
# building blocks


def build_spectrum(cfg: RunConfig) -> PurcellSpectrum:
    if cfg.lorentzians is not None:
        return LorentzianSumSpectrum(cfg.lorentzians, tuple(cfg.support), cfg.host_eps)
    if cfg.spectrum_csv is not None:
        return TabulatedSpectrum.from_csv(cfg.spectrum_csv, host_eps=cfg.host_eps)
    require(cfg, "z")
    coeffs = GreensCoefficients.from_csv(cfg.greens_coefficients)
    return GreensSeriesSpectrum(cfg.z, cfg.disk_radius, coeffs, cfg.host_eps).tabulate()


def build_emitter(cfg: RunConfig) -> EmitterConfig:
    require(cfg, "omega0", "gamma0", "z")
    return EmitterConfig(
        omega0=cfg.omega0,
        Gamma0=cfg.gamma0,
        z=cfg.z,
        rwa=cfg.rwa,
        shift_prefactor=cfg.shift_prefactor,
        include_baseline=cfg.include_baseline,
    )


def grid_from(cfg: RunConfig) -> np.ndarray:
    require(cfg, "grid")
    lo, hi, count = cfg.grid
    if count != int(count) or count < 1 or not hi >= lo or (count > 1 and hi == lo):
        raise ConfigError(f"empty or invalid grid {cfg.grid}; need lo < hi and count >= 1")
    return np.linspace(lo, hi, int(count))


def point_id(cfg: RunConfig) -> str:
    return hashlib.sha256(cfg.canonical().encode("utf-8")).hexdigest()[:12]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


# --------------------------------------------------------------------------
# verbs


def emit_spectrum(cfg: RunConfig, out: Path) -> list[Path]:
    grid = grid_from(cfg)
    spec = build_spectrum(cfg)
    written = [out / "spectrum.csv"]
    write_spectrum_csv(written[0], grid, spec.evaluate(grid))
    if cfg.sigma0 is not None:
        path = out / "conductivity.csv"
        qualities = [cfg.quality] if cfg.quality else ["high", "low"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["quality", "omega_eV", "re_sigma_res", "im_sigma_res", "re_sigma_inter"])
            for q in qualities:
                mat = MaterialParams.preset(q, cfg.sigma0)
                res = np.asarray(sigma_res(grid, mat))
                inter = np.asarray(sigma_inter_re(grid, mat))
                for w, s, si in zip(grid, res, inter):
                    writer.writerow([q, repr(float(w)), repr(float(s.real)), repr(float(s.imag)), repr(float(si))])
        written.append(path)
    return written


def emit_kernel(cfg: RunConfig, out: Path) -> list[Path]:
    require(cfg, "tmax", "dt")
    table = build_kernel_table(
        build_emitter(cfg), build_spectrum(cfg), cfg.tmax, cfg.dt, points_per_width=cfg.points_per_width
    )
    path = out / "kernel.csv"
    table.to_csv(path)
    return [path]


def emit_fit(cfg: RunConfig, out: Path) -> list[Path]:
    report = fit_lorentzians(build_spectrum(cfg), cfg.n_peaks, cfg.fit_window, cfg.pinned_center)
    path = out / "fit.csv"
    report.to_csv(path)
    if report.poor_fit:
        log.warning("poor fit: relative residual %.3g", report.residual)
    return [path]


def _pseudomode_peaks(cfg: RunConfig, spec: PurcellSpectrum):
    if cfg.lorentzians is not None:
        return cfg.lorentzians
    return fit_lorentzians(spec, cfg.n_peaks, cfg.fit_window).peaks


def _analytic_params(cfg: RunConfig, spec, emitter, delta) -> LorentzianModeParams:
    if cfg.lorentzians is not None and len(cfg.lorentzians) == 1:
        peaks = cfg.lorentzians
    else:
        # single Lorentzian centred on the emitter
        peaks = fit_lorentzians(spec, 1, cfg.fit_window, pinned_center=emitter.omega0).peaks
    return modes_from_peaks(peaks, emitter, delta)[0]


def run_point(cfg: RunConfig, param: str, value, out: Path) -> list[list[str]]:
    """Solve one sweep point with the configured solver(s); one summary row per solver."""
    pid = point_id(cfg)
    solvers = ["volterra", "pseudomode", "analytic"] if cfg.solver == "all" else [cfg.solver]
    base = [pid, param, _fmt(value)]
    try:
        require(cfg, "tmax", "dt")
        emitter = build_emitter(cfg)
        spec = build_spectrum(cfg)
        delta = nondyn_shift(emitter, spec)
        rate = markov_rate(emitter, spec)
    except (QEDiskError, OSError) as exc:
        return [base + ["", "", f"error: {type(exc).__name__}: {exc}", "", s, "False"] for s in solvers]

    rows = []
    for name in solvers:
        try:
            if name == "volterra":
                if cfg.lorentzian_extent == "extended" and cfg.lorentzians is not None:
                    modes = modes_from_peaks(cfg.lorentzians, emitter, delta)
                    result = solve_volterra(
                        emitter, spec, cfg.tmax, cfg.dt, kernel=lambda t: lorentzian_kernel(t, modes), tol=cfg.tol
                    )
                else:
                    result = solve_volterra(
                        emitter, spec, cfg.tmax, cfg.dt, tol=cfg.tol, points_per_width=cfg.points_per_width
                    )
            elif name == "pseudomode":
                modes = modes_from_peaks(_pseudomode_peaks(cfg, spec), emitter, delta)
                result = solve_pseudomode(emitter, modes, cfg.tmax, cfg.dt, delta_ndyn=delta)
            else:
                params = _analytic_params(cfg, spec, emitter, delta)
                result = solve_analytic(params, cfg.tmax, cfg.dt, delta)
            regime = classify_regime(result, emitter) if result.converged else "unconverged"
            result.to_csv(out / f"traj_{pid}_{name}.csv", regime=regime)
            rows.append(
                base
                + [repr(delta), repr(rate), regime, repr(result.decay_time(0.01)), name, str(result.converged)]
            )
        except QEDiskError as exc:
            rows.append(base + [repr(delta), repr(rate), f"error: {type(exc).__name__}: {exc}", "", name, "False"])
    return rows


def _run_point_args(args):
    return run_point(*args)


def run_sweep(cfg: RunConfig, out: Path, jobs: int = 1) -> Path:
    if cfg.sweep_param is None:
        points = [(cfg, "", "")]
    else:
        points = [(cfg.with_value(cfg.sweep_param, v), cfg.sweep_param, v) for v in cfg.sweep_values]
    tasks = [(c, p, v, out) for c, p, v in points]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point_args, tasks))
    else:
        results = [_run_point_args(t) for t in tasks]
    path = out / "summary.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for rows in results:
            writer.writerows(rows)
    return path


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qedisk", description="Emitter dynamics near a MoS2 nanodisk.")
    sub = parser.add_subparsers(dest="verb", required=True)
    helps = {
        "spectrum": "write the Purcell spectrum (and conductivity table) on a grid",
        "kernel": "tabulate the memory kernel",
        "fit": "fit Lorentzians to the spectrum",
        "simulate": "solve the emitter dynamics for one configuration",
        "sweep": "solve over the configured sweep axis",
    }
    for verb, text in helps.items():
        p = sub.add_parser(verb, help=text)
        p.add_argument("--config", required=True, type=Path, help="key = value run file")
        p.add_argument("--output", type=Path, default=None, help="output directory (default: config output_dir or .)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        out = args.output or cfg.output_dir or Path(".")
        out.mkdir(parents=True, exist_ok=True)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.verb == "spectrum":
            written = emit_spectrum(cfg, out)
        elif args.verb == "kernel":
            written = emit_kernel(cfg, out)
        elif args.verb == "fit":
            written = emit_fit(cfg, out)
        elif args.verb == "simulate":
            if cfg.sweep_param is not None:
                raise ConfigError("config has a sweep axis; use the 'sweep' verb")
            written = [run_sweep(cfg, out, 1)]
        else:
            if cfg.sweep_param is None:
                raise ConfigError("sweep needs sweep_param and sweep_values")
            written = [run_sweep(cfg, out, args.jobs)]
    except (QEDiskError, OSError) as exc:
        print(f"qedisk: error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
