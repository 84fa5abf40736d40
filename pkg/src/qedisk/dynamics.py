"""Excited-state amplitude c1(t) of the emitter.

Three routes:

* :func:`solve_volterra` integrates dc1/dt = i int_0^t K(t - s) c1(s) ds
  directly (trapezoidal history, trapezoidal time stepping);
* :func:`solve_pseudomode` replaces each Lorentzian of the spectral density
  by a damped auxiliary mode and integrates the resulting linear ODEs;
* :func:`analytic_lorentzian` is the closed form for one Lorentzian
  extended over the whole frequency axis.

Amplitudes are reported in the frame rotating at w0' = w0 - Delta_ndyn.
Times in fs, energies in eV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve, find_peaks

from .constants import HBAR, TWO_PI
from .errors import DomainError, NotConvergedError
from .kernel import (
    EmitterConfig,
    KernelTable,
    build_kernel_table,
    nondyn_shift,
    rwa_factor,
    tau_grid,
)
from .spectral import PurcellSpectrum

REGIMES = ("markovian", "strong", "ultrastrong+trapping")


@dataclass(frozen=True)
class LorentzianModeParams:
    """One Lorentzian component of J~: Gamma0 lambda beta^2 / (2 pi ((w - w_c)^2 + beta^2)).

    ``strength`` is Gamma0 * lambda (eV) and ``detuning`` the emitter
    frequency (including any shift) minus ``center``.
    """

    center: float
    width: float
    strength: float
    detuning: float

    def __post_init__(self):
        if not self.width > 0:
            raise DomainError("Lorentzian width beta must be > 0")
        if not self.strength >= 0:
            raise DomainError("Lorentzian strength must be >= 0")

    @classmethod
    def from_emitter(cls, center, width, strength, omega0_prime) -> "LorentzianModeParams":
        return cls(center=center, width=width, strength=strength, detuning=omega0_prime - center)

    @property
    def beta_tilde(self) -> complex:
        return complex(self.width, -self.detuning)

    @property
    def q(self) -> complex:
        return np.sqrt(complex(self.beta_tilde**2 - 2.0 * self.strength * self.width))


def modes_from_peaks(
    peaks: Sequence[tuple[float, float, float]],
    emitter: EmitterConfig,
    delta_ndyn: float = 0.0,
) -> list[LorentzianModeParams]:
    """Pseudomodes for Purcell peaks (lam_j, w_j, beta_j).

    The (w/w0)^3 and counter-rotating factors are evaluated at each peak centre.
    """
    omega0p = emitter.omega0 - delta_ndyn
    modes = []
    for lam, w, beta in peaks:
        factor = float(rwa_factor(w, emitter)) * (w / emitter.omega0) ** 3
        modes.append(LorentzianModeParams.from_emitter(w, beta, emitter.Gamma0 * lam * factor, omega0p))
    return modes


@dataclass(frozen=True)
class DynamicsResult:
    """Trajectory of c1 on a uniform time grid.

    ``convergence`` holds the step-halving check: the largest population
    difference between the dt and dt/2 runs and the tolerance it was held to.
    """

    t: np.ndarray
    c1: np.ndarray
    solver_id: str
    dt: float
    delta_ndyn: float = 0.0
    convergence: dict = field(default_factory=dict)

    @property
    def population(self) -> np.ndarray:
        return np.abs(self.c1) ** 2

    @property
    def converged(self) -> bool:
        return bool(self.convergence.get("converged", True))

    def to_csv(self, path, regime: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# solver_id={self.solver_id}\n")
            fh.write(f"# dt_fs={self.dt!r}\n")
            fh.write(f"# delta_ndyn_eV={self.delta_ndyn!r}\n")
            fh.write(f"# regime={regime if regime is not None else ''}\n")
            fh.write(f"# converged={self.converged}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t_fs", "re_c1", "im_c1", "population"])
            pop = self.population
            for t, c, p in zip(self.t, self.c1, pop):
                writer.writerow([repr(float(t)), repr(float(c.real)), repr(float(c.imag)), repr(float(p))])

    def decay_time(self, level: float = 0.01) -> float:
        """Time after which the population stays below ``level`` (nan if it is still
        above at the end). Oscillation minima dipping under ``level`` don't count."""
        above = np.nonzero(self.population >= level)[0]
        if above.size == 0:
            return float(self.t[0])
        if above[-1] == self.t.size - 1:
            return math.nan
        return float(self.t[above[-1] + 1])


# --------------------------------------------------------------------------
# Closed form


def _sinhc(x):
    """sinh(x) / x, continuous at 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 + x2 / 6.0 + x2 * x2 / 120.0, np.sinh(xs) / xs)


def analytic_lorentzian(t, params: LorentzianModeParams):
    """c1(t) for a single Lorentzian extended over the whole frequency axis.

    c1 = exp(-bt t / 2) [cosh(q t / 2) + (bt / q) sinh(q t / 2)], with
    bt = beta - i Delta and q = sqrt(bt^2 - 2 Gamma0 lambda beta). The
    ratio sinh(qt/2)/q is evaluated as (t/2) sinhc(qt/2), so q -> 0 is regular.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("t must be >= 0")
    bt = params.beta_tilde / HBAR
    q = params.q / HBAR
    if q.real < 0:
        q = -q
    x = q * t_arr / 2.0
    big = np.abs(x) > 20.0
    with np.errstate(over="ignore", invalid="ignore"):
        direct = np.exp(-bt * t_arr / 2.0) * (np.cosh(x) + bt * (t_arr / 2.0) * _sinhc(x))
        if np.any(big):
            # exponential form avoids inf * 0 when cosh overflows
            plus = 0.5 * (1.0 + bt / q) * np.exp((q - bt) * t_arr / 2.0)
            minus = 0.5 * (1.0 - bt / q) * np.exp(-(q + bt) * t_arr / 2.0)
            direct = np.where(big, plus + minus, direct)
    return complex(direct) if t_arr.ndim == 0 else direct


def lorentzian_kernel(tau, modes: Sequence[LorentzianModeParams]):
    """Exact kernel of a Lorentzian sum extended to (-inf, inf), in 1/fs^2:
    K(tau) = (i / hbar^2) sum_j (S_j beta_j / 2) exp((i Delta_j - beta_j) tau / hbar)."""
    tau = np.asarray(tau, dtype=float)
    out = np.zeros(tau.shape, dtype=complex)
    for m in modes:
        out = out + 0.5 * m.strength * m.width * np.exp((1j * m.detuning - m.width) * tau / HBAR)
    return 1j * out / HBAR**2


def lorentzian_kernel_table(modes, tmax: float, dt: float, delta_ndyn: float = 0.0) -> KernelTable:
    tau = tau_grid(tmax, dt)
    return KernelTable(
        tau=tau,
        values=lorentzian_kernel(tau, modes),
        omega_cut=math.inf,
        quadrature="closed-form extended Lorentzian",
        delta_ndyn=delta_ndyn,
    )


def markov_rate(emitter: EmitterConfig, spec: PurcellSpectrum) -> float:
    """Golden-rule width Gamma0 * lambda(w0) in eV."""
    return emitter.Gamma0 * float(spec.evaluate(emitter.omega0))


# --------------------------------------------------------------------------
# Volterra solver

_BLOCK = 2048


def volterra_march(kernel: np.ndarray, dt: float) -> np.ndarray:
    """Solve dc/dt = i int_0^t K(t - s) c(s) ds, c(0) = 1, on t_n = n dt.

    Trapezoidal rule for the history integral and for the time step; the
    equation is linear, so the implicit step is solved exactly. Past blocks
    of the history are added by FFT convolution, the current block directly.
    """
    K = np.asarray(kernel, dtype=complex)
    n_steps = K.size - 1
    c = np.zeros(K.size, dtype=complex)
    cw = np.zeros(K.size, dtype=complex)  # trapezoid-weighted history c~
    c[0] = 1.0
    cw[0] = 0.5
    if n_steps == 0:
        return c
    K_rev = K[::-1].copy()
    last = K.size - 1
    alpha = 0.5j * dt * K[0]
    denom = 1.0 - 0.5 * dt * alpha
    f_prev = 0j
    block = n_steps if n_steps <= 2 * _BLOCK else _BLOCK
    start = 0
    far = np.zeros(block + 1, dtype=complex)
    for m in range(1, n_steps + 1):
        if m - start > block:
            start = m - 1
            hi = min(start + block, n_steps)
            far = fftconvolve(cw[:start], K[: hi + 1])[start : hi + 1]
        near = np.dot(K_rev[last - (m - start) : last], cw[start:m])
        hist = 1j * dt * (far[m - start] + near)
        c[m] = (c[m - 1] + 0.5 * dt * (f_prev + hist)) / denom
        cw[m] = c[m]
        f_prev = hist + alpha * c[m]
    return c


def _pop_diff_on_coarse(coarse: np.ndarray, fine: np.ndarray) -> float:
    return float(np.max(np.abs(np.abs(coarse) ** 2 - np.abs(fine[::2]) ** 2)))


def solve_volterra(
    emitter: EmitterConfig,
    spec: PurcellSpectrum | None,
    tmax: float,
    dt: float,
    *,
    kernel: KernelTable | Callable | None = None,
    tol: float = 1e-3,
    check: bool = True,
    points_per_width: int = 100,
    kernel_rtol: float = 1e-4,
) -> DynamicsResult:
    """Integrate the amplitude equation with the memory kernel of ``spec``.

    ``kernel`` overrides the kernel: either a callable tau -> K(tau) in
    1/fs^2, or a :class:`KernelTable` whose step equals ``dt / 2`` or ``dt``.
    With ``check`` the run is repeated at dt/2 and flagged unconverged if the
    populations differ by more than ``tol`` anywhere on the coarse grid.
    """
    t = tau_grid(tmax, dt)
    half = tau_grid(tmax, dt / 2) if check else None
    if kernel is None:
        if spec is None:
            raise DomainError("need a spectrum or an explicit kernel")
        delta = nondyn_shift(emitter, spec)
        table = build_kernel_table(
            emitter,
            spec,
            tmax,
            dt / 2 if check else dt,
            points_per_width=points_per_width,
            rtol=kernel_rtol,
            delta_ndyn=delta,
        )
        fine_K = table.values
        quad = table.quadrature
    elif isinstance(kernel, KernelTable):
        delta = kernel.delta_ndyn
        fine_K = _table_on_grid(kernel, half if check else t)
        quad = kernel.quadrature
    else:
        delta = 0.0 if spec is None else nondyn_shift(emitter, spec)
        fine_K = np.asarray(kernel(half if check else t), dtype=complex)
        quad = "user kernel"
    if check:
        c_fine = volterra_march(fine_K, dt / 2)
        c = volterra_march(fine_K[::2], dt)
        diff = _pop_diff_on_coarse(c, c_fine)
        report = {"dt": dt, "max_pop_diff_dt_vs_half": diff, "tol": tol, "converged": diff <= tol}
    else:
        c = volterra_march(fine_K, dt)
        report = {"dt": dt, "converged": True, "checked": False}
    report["kernel"] = quad
    return DynamicsResult(t=t, c1=c, solver_id="volterra", dt=dt, delta_ndyn=delta, convergence=report)


def _table_on_grid(table: KernelTable, grid: np.ndarray) -> np.ndarray:
    step = int(round((grid[1] - grid[0]) / table.dt))
    if step < 1 or not math.isclose(step * table.dt, grid[1] - grid[0], rel_tol=1e-9):
        raise DomainError("kernel table step does not divide the solver step")
    vals = table.values[::step]
    if vals.size < grid.size:
        raise DomainError("kernel table does not cover the requested time span")
    return vals[: grid.size]


# --------------------------------------------------------------------------
# Pseudomode solver


def _pseudomode_matrix(modes: Sequence[LorentzianModeParams]) -> np.ndarray:
    n = len(modes)
    A = np.zeros((n + 1, n + 1), dtype=complex)
    for j, m in enumerate(modes, start=1):
        g = math.sqrt(0.5 * m.strength * m.width) / HBAR
        A[0, j] = -1j * g
        A[j, 0] = -1j * g
        A[j, j] = (1j * m.detuning - m.width) / HBAR
    return A


def radau_step_matrix(A: np.ndarray, h: float) -> np.ndarray:
    """One-step propagator of the 3-stage Radau IIA method for y' = A y.

    For a linear system the method reduces to the (2,3) Pade approximant
    R(z) = (1 + 2z/5 + z^2/20) / (1 - 3z/5 + 3z^2/20 - z^3/60), z = hA.
    """
    Z = h * A
    eye = np.eye(A.shape[0], dtype=complex)
    Z2 = Z @ Z
    P = eye + 0.4 * Z + Z2 / 20.0
    Q = eye - 0.6 * Z + 0.15 * Z2 - (Z2 @ Z) / 60.0
    return np.linalg.solve(Q, P)


def _propagate(M: np.ndarray, n_steps: int, dim: int) -> np.ndarray:
    y = np.zeros(dim, dtype=complex)
    y[0] = 1.0
    c = np.empty(n_steps + 1, dtype=complex)
    c[0] = 1.0
    for k in range(1, n_steps + 1):
        y = M @ y
        c[k] = y[0]
    return c


def solve_pseudomode(
    emitter: EmitterConfig,
    modes: Sequence[LorentzianModeParams],
    tmax: float,
    dt: float,
    *,
    delta_ndyn: float = 0.0,
    tol: float = 1e-6,
) -> DynamicsResult:
    """Integrate the emitter coupled to one damped mode per Lorentzian.

    dc1/dt = -i sum_j g_j b_j,  db_j/dt = (i Delta_j - beta_j) b_j - i g_j c1,
    g_j^2 = S_j beta_j / 2 (divided by hbar^2). Fixed-step Radau IIA; the run
    is repeated at dt/2 and flagged if populations differ by more than ``tol``.
    ``emitter`` and ``delta_ndyn`` are recorded for provenance only; the
    detunings in ``modes`` already include any shift.
    """
    t = tau_grid(tmax, dt)
    n = t.size - 1
    if not modes:
        c = np.ones(t.size, dtype=complex)
        report = {"dt": dt, "max_pop_diff_dt_vs_half": 0.0, "tol": tol, "converged": True}
        return DynamicsResult(t, c, "pseudomode", dt, delta_ndyn, report)
    A = _pseudomode_matrix(modes)
    c = _propagate(radau_step_matrix(A, dt), n, A.shape[0])
    c_half = _propagate(radau_step_matrix(A, dt / 2), 2 * n, A.shape[0])
    diff = _pop_diff_on_coarse(c, c_half)
    report = {"dt": dt, "max_pop_diff_dt_vs_half": diff, "tol": tol, "converged": diff <= tol}
    return DynamicsResult(t, c, "pseudomode", dt, delta_ndyn, report)


def solve_analytic(params: LorentzianModeParams, tmax: float, dt: float, delta_ndyn: float = 0.0) -> DynamicsResult:
    t = tau_grid(tmax, dt)
    return DynamicsResult(
        t, analytic_lorentzian(t, params), "analytic", dt, delta_ndyn, {"dt": dt, "converged": True}
    )


# --------------------------------------------------------------------------
# Regime classification

REVIVAL_PROMINENCE = 0.01
PLATEAU_MIN_LEVEL = 0.05
PLATEAU_MAX_STD = 0.01
ULTRASTRONG_PERIOD_FACTOR = 1.25


def revivals(result: DynamicsResult, prominence: float = REVIVAL_PROMINENCE) -> np.ndarray:
    """Indices of population maxima that follow a minimum with the given prominence."""
    pop = result.population
    peaks, _ = find_peaks(pop, prominence=prominence)
    return peaks


def early_oscillation_period(result: DynamicsResult, n_peaks: int = 5, prominence: float = 1e-3) -> float:
    """Mean spacing (fs) of the first ``n_peaks`` population maxima; nan if fewer than two."""
    peaks, _ = find_peaks(result.population, prominence=prominence)
    peaks = peaks[:n_peaks]
    if peaks.size < 2:
        return math.nan
    return float(np.mean(np.diff(result.t[peaks])))


def plateau(result: DynamicsResult, fraction: float = 0.2) -> tuple[float, float]:
    """Mean and standard deviation of the population over the last ``fraction`` of the run."""
    pop = result.population
    n = max(2, int(round(fraction * pop.size)))
    tail = pop[-n:]
    return float(np.mean(tail)), float(np.std(tail))


def classify_regime(result: DynamicsResult, emitter: EmitterConfig) -> str:
    """Label a converged trajectory "markovian", "strong" or "ultrastrong+trapping"."""
    if not result.converged:
        raise NotConvergedError("refusing to classify an unconverged trajectory")
    period = early_oscillation_period(result)
    level, spread = plateau(result)
    bare_period = TWO_PI * HBAR / emitter.omega0
    if (
        math.isfinite(period)
        and period <= ULTRASTRONG_PERIOD_FACTOR * bare_period
        and level > PLATEAU_MIN_LEVEL
        and spread < PLATEAU_MAX_STD
    ):
        return "ultrastrong+trapping"
    if revivals(result).size >= 1:
        return "strong"
    return "markovian"
