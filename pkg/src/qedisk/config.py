"""Run configuration: a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored. Exactly one spectrum source must
be given (``spectrum_csv``, ``lorentzians`` or ``greens_coefficients``).
Relative paths are resolved against the directory of the config file.

Example::

    omega0 = 1.92128          # eV
    gamma0 = 59e-6            # eV
    z = 2.0                   # nm
    rwa = false
    lorentzians = 500, 1.95, 0.001; 300, 1.97, 0.002   # lambda, omega (eV), beta (eV)
    support = 1.5, 2.5
    solver = all
    tmax = 5000
    dt = 0.5
    sweep_param = gamma0
    sweep_values = 59e-6, 413.5e-6
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .kernel import SHIFT_PREFACTORS

SOLVERS = ("volterra", "pseudomode", "analytic", "all")
EXTENTS = ("support", "extended")

# sweepable parameters and how their values are parsed
SWEEP_PARAMS = {
    "omega0": float,
    "gamma0": float,
    "z": float,
    "disk_radius": float,
    "host_eps": float,
    "dt": float,
    "tmax": float,
    "rwa": None,  # bool
    "shift_prefactor": str,
}


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _float(text: str, key: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    return value


def _floats(text: str, key: str, sep: str = ",") -> tuple:
    parts = [p for p in (s.strip() for s in text.split(sep)) if p]
    return tuple(_float(p, key) for p in parts)


def _peaks(text: str) -> tuple:
    peaks = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        vals = _floats(chunk, "lorentzians")
        if len(vals) != 3:
            raise ConfigError(f"lorentzians: expected 'lambda, omega, beta', got {chunk.strip()!r}")
        peaks.append(vals)
    if not peaks:
        raise ConfigError("lorentzians: no peaks given")
    return tuple(peaks)


def parse_sweep_value(param: str, text: str):
    kind = SWEEP_PARAMS[param]
    if kind is None:
        return _bool(text)
    if kind is str:
        return text.strip()
    return _float(text, "sweep_values")


@dataclass(frozen=True)
class RunConfig:
    # emitter
    omega0: float | None = None
    gamma0: float | None = None
    z: float | None = None
    rwa: bool = True
    shift_prefactor: str = "one-over-2pi"
    include_baseline: bool = False
    # spectrum source (exactly one)
    spectrum_csv: Path | None = None
    lorentzians: tuple | None = None
    greens_coefficients: Path | None = None
    support: tuple | None = None
    disk_radius: float | None = None
    host_eps: float = 1.0
    # material, for the conductivity table
    quality: str | None = None
    sigma0: float | None = None
    # solvers
    solver: str = "volterra"
    tmax: float | None = None
    dt: float | None = None
    tol: float = 1e-3
    points_per_width: int = 100
    lorentzian_extent: str = "support"
    # fitting
    n_peaks: int = 1
    fit_window: tuple | None = None
    pinned_center: float | None = None
    # spectrum output grid (lo, hi, count)
    grid: tuple | None = None
    # sweep
    sweep_param: str | None = None
    sweep_values: tuple = field(default_factory=tuple)
    output_dir: Path | None = None

    def with_value(self, param: str, value) -> "RunConfig":
        return replace(self, **{param: value})

    def canonical(self) -> str:
        """Stable text form of every setting, used to derive sweep-point ids."""
        parts = []
        for f in fields(self):
            if f.name in ("output_dir", "sweep_param", "sweep_values"):
                continue
            parts.append(f"{f.name}={getattr(self, f.name)!r}")
        return ";".join(parts)


_PARSERS = {
    "omega0": _float,
    "gamma0": _float,
    "z": _float,
    "rwa": lambda t, k: _bool(t),
    "shift_prefactor": lambda t, k: t.strip(),
    "include_baseline": lambda t, k: _bool(t),
    "spectrum_csv": lambda t, k: Path(t.strip()),
    "lorentzians": lambda t, k: _peaks(t),
    "greens_coefficients": lambda t, k: Path(t.strip()),
    "support": _floats,
    "disk_radius": _float,
    "host_eps": _float,
    "quality": lambda t, k: t.strip().lower(),
    "sigma0": _float,
    "solver": lambda t, k: t.strip().lower(),
    "tmax": _float,
    "dt": _float,
    "tol": _float,
    "points_per_width": lambda t, k: int(_float(t, k)),
    "lorentzian_extent": lambda t, k: t.strip().lower(),
    "n_peaks": lambda t, k: int(_float(t, k)),
    "fit_window": _floats,
    "pinned_center": _float,
    "grid": _floats,
    "sweep_param": lambda t, k: t.strip(),
    "sweep_values": lambda t, k: tuple(v.strip() for v in t.split(",") if v.strip()),
    "output_dir": lambda t, k: Path(t.strip()),
}


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    base_dir = Path(base_dir)
    values = {}
    for key, raw in parser["run"].items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _PARSERS[key](raw, key)
    for key in ("spectrum_csv", "greens_coefficients", "output_dir"):
        if key in values and not values[key].is_absolute():
            values[key] = base_dir / values[key]
    if "sweep_values" in values and "sweep_param" in values:
        param = values["sweep_param"]
        if param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep_param must be one of {sorted(SWEEP_PARAMS)}, got {param!r}")
        values["sweep_values"] = tuple(parse_sweep_value(param, v) for v in values["sweep_values"])
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)


def validate(cfg: RunConfig) -> None:
    sources = [
        name for name in ("spectrum_csv", "lorentzians", "greens_coefficients") if getattr(cfg, name) is not None
    ]
    if len(sources) != 1:
        raise ConfigError(
            "exactly one spectrum source is required "
            f"(spectrum_csv, lorentzians or greens_coefficients); got {sources or 'none'}"
        )
    if cfg.lorentzians is not None and cfg.support is None:
        raise ConfigError("lorentzians need a support = lo, hi")
    if cfg.greens_coefficients is not None and cfg.disk_radius is None:
        raise ConfigError("greens_coefficients need disk_radius")
    if cfg.support is not None and (len(cfg.support) != 2 or not cfg.support[0] < cfg.support[1]):
        raise ConfigError("support must be 'lo, hi' with lo < hi")
    if cfg.solver not in SOLVERS:
        raise ConfigError(f"solver must be one of {SOLVERS}")
    if cfg.lorentzian_extent not in EXTENTS:
        raise ConfigError(f"lorentzian_extent must be one of {EXTENTS}")
    if cfg.shift_prefactor not in SHIFT_PREFACTORS:
        raise ConfigError(f"shift_prefactor must be one of {sorted(SHIFT_PREFACTORS)}")
    if cfg.quality is not None and cfg.quality not in ("high", "low"):
        raise ConfigError("quality must be 'high' or 'low'")
    if cfg.fit_window is not None and len(cfg.fit_window) != 2:
        raise ConfigError("fit_window must be 'lo, hi'")
    if cfg.grid is not None and len(cfg.grid) != 3:
        raise ConfigError("grid must be 'lo, hi, count'")
    if cfg.n_peaks < 1:
        raise ConfigError("n_peaks must be >= 1")
    if (cfg.sweep_param is None) != (not cfg.sweep_values):
        raise ConfigError("sweep_param and sweep_values go together")
    if cfg.sweep_param is not None:
        if cfg.sweep_param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep_param must be one of {sorted(SWEEP_PARAMS)}")
        if len(set(map(repr, cfg.sweep_values))) != len(cfg.sweep_values):
            raise ConfigError("sweep_values contain duplicates")


def require(cfg: RunConfig, *keys: str) -> None:
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(f"missing config key(s): {', '.join(missing)}")
