"""Spectral density, non-dynamical shift and memory kernel of the emitter.

The memory kernel is

    K(tau) = (i / hbar^2) exp(i w0' tau / hbar) * int J~(w) exp(-i w tau / hbar) dw

in 1/fs^2, with energies in eV and tau in fs. The frequency integral runs
over the spectrum support only and is evaluated with a Filon rule: the
spectral density is replaced by its piecewise-linear interpolant on a node
grid and each panel is integrated against the exponential exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import czt

from .constants import HBAR, TWO_PI
from .errors import DomainError, KernelConvergenceError, SupportTooNarrowError
from .spectral import GreensSeriesSpectrum, PurcellSpectrum, TabulatedSpectrum

SHIFT_PREFACTORS = {
    "one-over-2pi": 1.0 / TWO_PI,
    "literal-2pi": TWO_PI,
}


@dataclass(frozen=True)
class EmitterConfig:
    """Two-level emitter on the disk axis.

    Attributes:
        omega0: transition energy (eV).
        Gamma0: free-space decay width at omega0 (eV).
        z: distance from the disk (nm).
        rwa: True for the rotating-wave spectral density, False to include
            counter-rotating corrections and the non-dynamical shift.
        shift_prefactor: "one-over-2pi" or "literal-2pi", the two readings
            of the prefactor in front of the shift integral.
        include_baseline: integrate the full lambda(omega) inside the support
            instead of only its induced part lambda - sqrt(eps).
    """

    omega0: float
    Gamma0: float
    z: float
    rwa: bool = True
    shift_prefactor: str = "one-over-2pi"
    include_baseline: bool = False

    def __post_init__(self):
        if not (self.omega0 > 0 and math.isfinite(self.omega0)):
            raise DomainError("omega0 must be > 0")
        if not (self.Gamma0 >= 0 and math.isfinite(self.Gamma0)):
            raise DomainError("Gamma0 must be >= 0")
        if not self.z > 0:
            raise DomainError("z must be > 0")
        if self.shift_prefactor not in SHIFT_PREFACTORS:
            raise DomainError(
                f"shift_prefactor must be one of {sorted(SHIFT_PREFACTORS)}"
            )


def _check_position(emitter: EmitterConfig, spec: PurcellSpectrum):
    if isinstance(spec, GreensSeriesSpectrum) and round(spec.z, 9) != round(emitter.z, 9):
        raise DomainError(
            f"spectrum data is for z={spec.z} nm but the emitter sits at z={emitter.z} nm"
        )


def rwa_factor(omega, emitter: EmitterConfig):
    """(2 w0 / (w0 + w))^2 beyond the RWA, 1 with it."""
    omega = np.asarray(omega, dtype=float)
    if emitter.rwa:
        return np.ones_like(omega)
    return (2.0 * emitter.omega0 / (emitter.omega0 + omega)) ** 2


def spectral_density(omega, emitter: EmitterConfig, spec: PurcellSpectrum):
    """J(omega) in eV: Gamma0 lambda(omega) / 2pi, times the counter-rotating factor."""
    omega = np.asarray(omega, dtype=float)
    if np.any(~(omega > 0)):
        raise DomainError("omega must be > 0")
    _check_position(emitter, spec)
    out = rwa_factor(omega, emitter) * emitter.Gamma0 * spec.evaluate(omega) / TWO_PI
    return float(out) if out.ndim == 0 else out


def spectral_density_tilde(omega, emitter: EmitterConfig, spec: PurcellSpectrum):
    """J~(omega) = J(omega) (omega / omega0)^3."""
    omega = np.asarray(omega, dtype=float)
    out = spectral_density(omega, emitter, spec) * (omega / emitter.omega0) ** 3
    return float(out) if np.ndim(out) == 0 else out


def kernel_density(omega, emitter: EmitterConfig, spec: PurcellSpectrum):
    """The J~ that enters the memory kernel: induced part only unless
    ``emitter.include_baseline``; zero outside the support."""
    omega = np.asarray(omega, dtype=float)
    lam = spec.evaluate(omega)
    if not emitter.include_baseline:
        lam = lam - spec.baseline
    lo, hi = spec.support
    lam = np.where((omega >= lo) & (omega <= hi), lam, 0.0)
    scale = rwa_factor(omega, emitter) * emitter.Gamma0 / TWO_PI
    return scale * lam * (omega / emitter.omega0) ** 3


# --------------------------------------------------------------------------
# Non-dynamical shift

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _gauss_panels(f, nodes: np.ndarray) -> np.ndarray:
    """Integral of f over every panel [nodes[k], nodes[k+1]], 10-point Gauss-Legendre."""
    a, b = nodes[:-1], nodes[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    return half * (f(x) @ _GL_W)


def shift_integrand(omega, emitter: EmitterConfig, spec: PurcellSpectrum):
    """2 w^3 / (w0^2 (w0 + w)^2) * Gamma0 * lambda(w)  (lambda as used by the kernel)."""
    w0 = emitter.omega0
    omega = np.asarray(omega, dtype=float)
    lam = spec.evaluate(omega)
    if not emitter.include_baseline:
        lam = lam - spec.baseline
    return 2.0 * omega**3 / (w0 * w0 * (w0 + omega) ** 2) * emitter.Gamma0 * lam


def nondyn_shift(
    emitter: EmitterConfig,
    spec: PurcellSpectrum,
    tail_tol: float | None = 0.05,
    edge_fraction: float = 0.01,
) -> float:
    """Counter-rotating level shift Delta_ndyn in eV (exactly 0 with the RWA).

    The integral runs over the spectrum support. If the last ``edge_fraction``
    of the support holds more than ``tail_tol`` of the integral, the support
    is judged too narrow and :class:`SupportTooNarrowError` is raised.
    """
    if emitter.rwa:
        return 0.0
    _check_position(emitter, spec)
    lo, hi = spec.support
    nodes = _shift_nodes(spec)

    def f(x):
        return shift_integrand(x, emitter, spec)

    total = float(np.sum(_gauss_panels(f, nodes)))
    if tail_tol is not None and total != 0.0:
        edge = hi - edge_fraction * (hi - lo)
        tail_nodes = np.concatenate(([edge], nodes[nodes > edge]))
        tail = float(np.sum(_gauss_panels(f, tail_nodes)))
        if abs(tail) > tail_tol * abs(total):
            raise SupportTooNarrowError(
                f"last {edge_fraction:.0%} of the support carries {abs(tail / total):.1%} "
                f"of the shift integral (limit {tail_tol:.0%}); widen the spectrum support"
            )
    return SHIFT_PREFACTORS[emitter.shift_prefactor] * total


def _shift_nodes(spec: PurcellSpectrum) -> np.ndarray:
    if isinstance(spec, (TabulatedSpectrum, GreensSeriesSpectrum)):
        return np.asarray(spec.quadrature_nodes(), dtype=float)
    # smooth closed-form spectra: Gauss panels a few per linewidth are plenty
    return spec.quadrature_nodes(points_per_width=4)


# --------------------------------------------------------------------------
# Filon transform of a piecewise-linear function

_SERIES_TERMS = 12
_FACT = np.array([math.factorial(n) for n in range(_SERIES_TERMS)], dtype=float)
_N = np.arange(_SERIES_TERMS)
_A_COEF = 1.0 / (_FACT * (_N + 1) * (_N + 2))
_B_COEF = 1.0 / (_FACT * (_N + 2))


def _panel_weights(theta: np.ndarray):
    """A = int_0^1 (1-u) e^{-i theta u} du and B = int_0^1 u e^{-i theta u} du."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 0.2
    th = np.where(small, 1.0, theta)
    e = np.exp(-1j * th)
    full_int = (1.0 - e) / (1j * th)
    B = (e * (1.0 + 1j * th) - 1.0) / (th * th)
    A = full_int - B
    if np.any(small):
        powers = (-1j * theta[small, None]) ** _N[None, :]
        A = np.where(small, 0j, A)
        B = np.where(small, 0j, B)
        A[small] = powers @ _A_COEF
        B[small] = powers @ _B_COEF
    return A, B


def _is_uniform(x: np.ndarray, rtol: float = 1e-10) -> bool:
    if x.size < 3:
        return True
    d = np.diff(x)
    return bool(np.all(np.abs(d - d[0]) <= rtol * abs(d[0])))


def filon_transform(x: np.ndarray, f: np.ndarray, s: np.ndarray, chunk: int = 256) -> np.ndarray:
    """int L(x) exp(-i x s) dx for the piecewise-linear interpolant L of (x, f).

    Exact for every panel; works on any strictly increasing node set. Uses a
    chirp-z evaluation when both ``x`` and ``s`` are uniform grids.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=complex)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if x.size < 2:
        raise DomainError("need at least two quadrature nodes")
    if s.size >= 16 and x.size >= 16 and _is_uniform(x) and _is_uniform(s) and s[0] == 0.0:
        return _filon_uniform(x, f, s)
    return _filon_direct(x, f, s, chunk)


def _filon_direct(x, f, s, chunk):
    h = np.diff(x)
    out = np.empty(s.size, dtype=complex)
    for start in range(0, s.size, chunk):
        ss = s[start:start + chunk]
        theta = h[None, :] * ss[:, None]
        A, B = _panel_weights(theta.ravel())
        A = A.reshape(theta.shape)
        B = B.reshape(theta.shape)
        phase = np.exp(-1j * x[None, :-1] * ss[:, None])
        out[start:start + chunk] = np.sum(phase * h[None, :] * (A * f[None, :-1] + B * f[None, 1:]), axis=1)
    return out


def _filon_uniform(x, f, s):
    n = x.size
    h = (x[-1] - x[0]) / (n - 1)
    ds = (s[-1] - s[0]) / (s.size - 1)
    theta = h * s
    # sum_k f_k exp(-i k h s_m) for all m in O((n + m) log)
    dft = czt(f, m=s.size, w=np.exp(-1j * h * ds), a=1.0)
    A, B = _panel_weights(theta)
    eb = np.exp(1j * theta) * B
    interior = A + eb  # = sinc^2(theta / 2)
    shift = np.exp(-1j * x[0] * s)
    last = np.exp(-1j * (n - 1) * theta)
    total = interior * dft + (A - interior) * f[0] + (eb - interior) * f[-1] * last
    return h * shift * total


# --------------------------------------------------------------------------
# Memory kernel


def _kernel_nodes(spec: PurcellSpectrum, points_per_width: int) -> np.ndarray:
    if not hasattr(spec, "quadrature_nodes"):
        raise DomainError(f"{type(spec).__name__} has no quadrature grid")
    try:
        nodes = spec.quadrature_nodes(points_per_width=points_per_width)
    except NotImplementedError:
        raise DomainError(f"{type(spec).__name__} has no quadrature grid") from None
    return np.asarray(nodes, dtype=float)


def _refine(nodes: np.ndarray) -> np.ndarray:
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    out = np.empty(2 * nodes.size - 1)
    out[0::2] = nodes
    out[1::2] = mid
    return out


def _kernel_from_nodes(tau, nodes, emitter, spec, omega0p, interpolate_from=None):
    if interpolate_from is not None:
        # refined grid for sampled data: linear interpolant is unchanged
        base = kernel_density(interpolate_from, emitter, spec)
        vals = np.interp(nodes, interpolate_from, base)
    else:
        vals = kernel_density(nodes, emitter, spec)
    s = np.asarray(tau, dtype=float) / HBAR
    transform = filon_transform(nodes - omega0p, vals, s)
    return 1j / HBAR**2 * transform


def memory_kernel(
    tau,
    emitter: EmitterConfig,
    spec: PurcellSpectrum,
    delta_ndyn: float | None = None,
    points_per_width: int = 100,
):
    """K(tau) in 1/fs^2 for tau >= 0 (fs), in the frame rotating at w0 - Delta_ndyn."""
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise DomainError("tau must be >= 0")
    _check_position(emitter, spec)
    if delta_ndyn is None:
        delta_ndyn = nondyn_shift(emitter, spec)
    nodes = _kernel_nodes(spec, points_per_width)
    out = _kernel_from_nodes(tau_arr.ravel(), nodes, emitter, spec, emitter.omega0 - delta_ndyn)
    return complex(out[0]) if tau_arr.ndim == 0 else out.reshape(tau_arr.shape)


def kernel_integral(emitter: EmitterConfig, spec: PurcellSpectrum, points_per_width: int = 100) -> float:
    """int J~ dw over the support (eV^2), with the same quadrature as the kernel."""
    nodes = _kernel_nodes(spec, points_per_width)
    return float(trapezoid(kernel_density(nodes, emitter, spec), nodes))


@dataclass(frozen=True)
class KernelTable:
    """Memory kernel sampled on a uniform grid tau_k = k * dt, k = 0..N.

    ``refinement_error`` is max |K_h - K_{h/2}| / max |K_h| from recomputing
    with the frequency grid halved (0 when not checked).
    """

    tau: np.ndarray
    values: np.ndarray
    omega_cut: float
    quadrature: str
    delta_ndyn: float
    refinement_error: float = 0.0

    @property
    def dt(self) -> float:
        return float(self.tau[1] - self.tau[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# omega_cut_eV={self.omega_cut!r}\n")
            fh.write(f"# quadrature={self.quadrature}\n")
            fh.write(f"# delta_ndyn_eV={self.delta_ndyn!r}\n")
            fh.write(f"# refinement_error={self.refinement_error!r}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["tau_fs", "re_K", "im_K"])
            for t, k in zip(self.tau, self.values):
                writer.writerow([repr(float(t)), repr(float(k.real)), repr(float(k.imag))])

    @classmethod
    def from_csv(cls, path) -> "KernelTable":
        meta = {}
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key.strip()] = val.strip()
                elif line.startswith("tau_fs"):
                    continue
                elif line.strip():
                    rows.append([float(v) for v in line.split(",")])
        arr = np.array(rows)
        return cls(
            tau=arr[:, 0],
            values=arr[:, 1] + 1j * arr[:, 2],
            omega_cut=float(meta["omega_cut_eV"]),
            quadrature=meta["quadrature"],
            delta_ndyn=float(meta["delta_ndyn_eV"]),
            refinement_error=float(meta.get("refinement_error", 0.0)),
        )


def tau_grid(tmax: float, dt: float) -> np.ndarray:
    if not (tmax > 0 and dt > 0):
        raise DomainError("tmax and dt must be > 0")
    n = int(round(tmax / dt))
    if not math.isclose(n * dt, tmax, rel_tol=1e-9):
        raise DomainError(f"tmax={tmax} is not a whole number of steps dt={dt}")
    return dt * np.arange(n + 1)


def build_kernel_table(
    emitter: EmitterConfig,
    spec: PurcellSpectrum,
    tmax: float,
    dt: float,
    points_per_width: int = 100,
    rtol: float = 1e-4,
    check_refinement: bool = True,
    delta_ndyn: float | None = None,
) -> KernelTable:
    """Tabulate K on [0, tmax] with step dt.

    With ``check_refinement`` the kernel is recomputed on a frequency grid of
    half the spacing; a relative change above ``rtol`` raises
    :class:`KernelConvergenceError`.
    """
    tau = tau_grid(tmax, dt)
    _check_position(emitter, spec)
    if delta_ndyn is None:
        delta_ndyn = nondyn_shift(emitter, spec)
    omega0p = emitter.omega0 - delta_ndyn
    nodes = _kernel_nodes(spec, points_per_width)
    values = _kernel_from_nodes(tau, nodes, emitter, spec, omega0p)
    err = 0.0
    if check_refinement:
        if isinstance(spec, (TabulatedSpectrum, GreensSeriesSpectrum)):
            fine = _kernel_from_nodes(tau, _refine(nodes), emitter, spec, omega0p, interpolate_from=nodes)
        else:
            fine = _kernel_from_nodes(
                tau, _kernel_nodes(spec, 2 * points_per_width), emitter, spec, omega0p
            )
        scale = float(np.max(np.abs(fine)))
        err = float(np.max(np.abs(fine - values))) / scale if scale > 0 else 0.0
        if err > rtol:
            raise KernelConvergenceError(
                f"memory kernel changed by {err:.2e} (relative) when the frequency grid was "
                f"halved; tolerance {rtol:.0e}. Increase points_per_width (now {points_per_width})"
            )
        values = fine
    quad = f"filon-linear nodes={nodes.size} points_per_width={points_per_width}"
    return KernelTable(
        tau=tau,
        values=values,
        omega_cut=float(spec.support[1]),
        quadrature=quad,
        delta_ndyn=float(delta_ndyn),
        refinement_error=err,
    )
