"""Lorentzian decomposition of Purcell spectra.

Fits act on the induced part lambda(w) - sqrt(eps) of a spectrum, with the
model

    sum_j lam_j / (1 + ((w - w_j) / beta_j)^2),

so a fit feeds straight into :class:`LorentzianSumSpectrum` and
:func:`qedisk.dynamics.modes_from_peaks`. The residual is the relative L2
error over the fit window, ||model - data|| / ||data||, with the norms taken
as trapezoid integrals over the spectrum's sample nodes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import least_squares
from scipy.signal import find_peaks, peak_widths

from .errors import DomainError, FitConsistencyError
from .spectral import LorentzianSumSpectrum, PurcellSpectrum

POOR_FIT_RESIDUAL = 0.2
MIN_SAMPLES_PER_WIDTH = 5
CONSISTENCY_TOL = 1e-8


@dataclass(frozen=True)
class FitReport:
    """Result of :func:`fit_lorentzians`.

    Attributes:
        peaks: (lam_j, w_j, beta_j) sorted by w_j.
        residual: relative L2 error of the fit over ``window``.
        window: (w_lo, w_hi) in eV.
        pinned_center: the fixed centre of a pinned fit, else None.
        poor_fit: residual above :data:`POOR_FIT_RESIDUAL`.
    """

    peaks: tuple
    residual: float
    window: tuple
    pinned_center: float | None = None
    poor_fit: bool = False

    def to_spectrum(self, support=None, host_eps: float = 1.0) -> LorentzianSumSpectrum:
        return LorentzianSumSpectrum(self.peaks, tuple(support or self.window), host_eps)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# residual={self.residual!r}\n")
            fh.write(f"# window_eV={self.window[0]!r},{self.window[1]!r}\n")
            fh.write(f"# pinned_center_eV={'' if self.pinned_center is None else repr(self.pinned_center)}\n")
            fh.write(f"# poor_fit={self.poor_fit}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["peak_index", "lambda_j", "omega_j_eV", "beta_j_eV"])
            for k, (lam, w, beta) in enumerate(self.peaks):
                writer.writerow([k, repr(float(lam)), repr(float(w)), repr(float(beta))])

    @classmethod
    def from_csv(cls, path) -> "FitReport":
        meta = {}
        peaks = []
        with open(path, newline="", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key] = val
                elif line.startswith("peak_index") or not line.strip():
                    continue
                else:
                    _, lam, w, beta = line.strip().split(",")
                    peaks.append((float(lam), float(w), float(beta)))
        lo, hi = (float(v) for v in meta["window_eV"].split(","))
        pinned = meta.get("pinned_center_eV", "")
        return cls(
            peaks=tuple(peaks),
            residual=float(meta["residual"]),
            window=(lo, hi),
            pinned_center=float(pinned) if pinned else None,
            poor_fit=meta.get("poor_fit") == "True",
        )


def _window_nodes(spec: PurcellSpectrum, window) -> np.ndarray:
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise DomainError(f"empty fit window [{lo}, {hi}]")
    s_lo, s_hi = spec.support
    if lo < s_lo or hi > s_hi:
        raise DomainError(f"fit window [{lo}, {hi}] leaves the spectrum support [{s_lo}, {s_hi}]")
    nodes = np.asarray(spec.quadrature_nodes(), dtype=float)
    nodes = nodes[(nodes >= lo) & (nodes <= hi)]
    if nodes.size < 3:
        raise DomainError(f"fit window [{lo}, {hi}] holds fewer than 3 samples")
    return nodes


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def _model(params: np.ndarray, x: np.ndarray, n: int) -> np.ndarray:
    a, c, b = params[:n], params[n:2 * n], params[2 * n:]
    u = (x[:, None] - c[None, :]) / b[None, :]
    return np.sum(a[None, :] / (1.0 + u * u), axis=1)


def _jacobian(params: np.ndarray, x: np.ndarray, n: int) -> np.ndarray:
    a, c, b = params[:n], params[n:2 * n], params[2 * n:]
    u = (x[:, None] - c[None, :]) / b[None, :]
    d = 1.0 / (1.0 + u * u)
    d_a = d
    d_c = 2.0 * a * u * d * d / b
    d_b = 2.0 * a * u * u * d * d / b
    return np.hstack([d_a, d_c, d_b])


def _initial_guess(x: np.ndarray, y: np.ndarray, n_peaks: int, pinned_center):
    idx, _ = find_peaks(y)
    if idx.size == 0:
        idx = np.array([int(np.argmax(y))])
    order = idx[np.argsort(-y[idx], kind="stable")]
    _, _, left, right = peak_widths(y, order, rel_height=0.5)
    index = np.arange(x.size)
    hwhm = 0.5 * (np.interp(right, index, x) - np.interp(left, index, x))
    floor = float(np.min(np.diff(x)))
    guesses = [(float(y[k]), float(x[k]), max(float(hw), floor)) for k, hw in zip(order, hwhm)]
    guesses = guesses[:n_peaks]
    # not enough maxima: split the tallest peak into shoulders
    a0, c0, b0 = guesses[0]
    k = 1
    while len(guesses) < n_peaks:
        sign = 1 if k % 2 else -1
        guesses.append((0.5 * a0, c0 + sign * ((k + 1) // 2) * b0, b0))
        k += 1
    if pinned_center is not None:
        a_pin = float(np.interp(pinned_center, x, y))
        guesses[0] = (max(a_pin, 1e-12 * max(abs(a0), 1.0)), float(pinned_center), guesses[0][2])
    return guesses


def _check_sampling(x: np.ndarray, guesses) -> None:
    h = float(np.max(np.diff(x)))
    for _, c, b in guesses:
        if 2.0 * b < MIN_SAMPLES_PER_WIDTH * h:
            raise DomainError(
                f"peak near {c:.6g} eV has linewidth {2 * b:.3g} eV but samples are {h:.3g} eV apart; "
                f"need at least {MIN_SAMPLES_PER_WIDTH} samples per linewidth"
            )


def fit_lorentzians(
    spec: PurcellSpectrum,
    n_peaks: int,
    window=None,
    pinned_center: float | None = None,
) -> FitReport:
    """Least-squares fit of ``n_peaks`` Lorentzians to the induced part of ``spec``.

    Args:
        spec: any spectrum with a sample grid (tabulated data, Green's
            series, or a Lorentzian sum sampled on its quadrature nodes).
        n_peaks: number of Lorentzians, >= 1.
        window: (w_lo, w_hi) inside the support; defaults to the support.
        pinned_center: if given, the first peak's centre is held at this value.

    Returns:
        FitReport with peaks sorted by centre. ``poor_fit`` is set when the
        relative L2 residual exceeds 0.2.
    """
    if int(n_peaks) != n_peaks or n_peaks < 1:
        raise DomainError("n_peaks must be a positive integer")
    n_peaks = int(n_peaks)
    window = tuple(spec.support) if window is None else (float(window[0]), float(window[1]))
    if pinned_center is not None and not window[0] <= pinned_center <= window[1]:
        raise DomainError("pinned_center lies outside the fit window")
    x = _window_nodes(spec, window)
    y = np.asarray(spec.induced(x), dtype=float)
    sw = np.sqrt(_trapezoid_weights(x))
    norm = math.sqrt(float(np.sum((sw * y) ** 2)))
    if norm == 0.0:
        raise DomainError("induced spectrum vanishes on the fit window")

    guesses = _initial_guess(x, y, n_peaks, pinned_center)
    _check_sampling(x, guesses)
    p0 = np.array([g[0] for g in guesses] + [g[1] for g in guesses] + [g[2] for g in guesses])
    free = np.ones(p0.size, dtype=bool)
    if pinned_center is not None:
        free[n_peaks] = False
    lower = np.concatenate([np.full(n_peaks, -np.inf), np.full(n_peaks, -np.inf), np.full(n_peaks, 1e-12)])

    def full(q):
        p = p0.copy()
        p[free] = q
        return p

    def resid(q):
        return sw * (_model(full(q), x, n_peaks) - y)

    def jac(q):
        return sw[:, None] * _jacobian(full(q), x, n_peaks)[:, free]

    sol = least_squares(
        resid,
        p0[free],
        jac=jac,
        bounds=(lower[free], np.inf),
        x_scale="jac",
        ftol=1e-15,
        xtol=1e-15,
        gtol=1e-15,
        max_nfev=2000,
    )
    p = full(sol.x)
    a, c, b = p[:n_peaks], p[n_peaks:2 * n_peaks], p[2 * n_peaks:]
    order = np.argsort(c, kind="stable")
    peaks = tuple((float(a[k]), float(c[k]), float(b[k])) for k in order)
    residual = math.sqrt(float(np.sum(sol.fun**2))) / norm
    return FitReport(
        peaks=peaks,
        residual=residual,
        window=window,
        pinned_center=None if pinned_center is None else float(pinned_center),
        poor_fit=residual > POOR_FIT_RESIDUAL,
    )


def fit_quality(report: FitReport, spec: PurcellSpectrum, check: bool = True) -> float:
    """Relative L2 residual of ``report`` against ``spec``, recomputed from scratch.

    With ``check`` the value must match ``report.residual`` to 1e-8, otherwise
    :class:`FitConsistencyError` is raised (the report does not describe this
    spectrum, or the optimizer's bookkeeping is off).
    """
    x = _window_nodes(spec, report.window)
    data = np.asarray(spec.induced(x), dtype=float)
    model = np.zeros_like(x)
    for lam, w, beta in report.peaks:
        model += lam * beta**2 / ((x - w) ** 2 + beta**2)
    den = trapezoid(data * data, x)
    if den <= 0:
        raise DomainError("induced spectrum vanishes on the fit window")
    value = math.sqrt(trapezoid((model - data) ** 2, x) / den)
    if check and abs(value - report.residual) > CONSISTENCY_TOL:
        raise FitConsistencyError(
            f"recomputed residual {value:.12g} differs from the fit's {report.residual:.12g}"
        )
    return value
