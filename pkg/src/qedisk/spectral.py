"""Purcell-factor spectra of an emitter above a MoS2 nanodisk.

Contains the two-dimensional conductivity model of MoS2 (excitonic and
interband parts), the quasi-static image series for the induced Green's
tensor on the disk axis, and three interchangeable representations of a
Purcell spectrum lambda(omega):

* :class:`TabulatedSpectrum` - samples, linearly interpolated;
* :class:`LorentzianSumSpectrum` - baseline sqrt(eps) plus Lorentzian peaks;
* :class:`GreensSeriesSpectrum` - evaluated from stored series coefficients.

All spectra are immutable and evaluate to ``sqrt(eps)`` outside their
support.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .constants import ALPHA_FS, C_LIGHT, HBAR, wavenumber
from .errors import CoefficientsUnavailable, DomainError, UnphysicalInputError

QUALITY_PRESETS = {
    "high": (0.5e-3, 1.1e-3),
    "low": (2.5e-3, 5.6e-3),
}

MIN_POINTS_PER_LINEWIDTH = 10


@dataclass(frozen=True)
class MaterialParams:
    """MoS2 conductivity parameters.

    Energies in eV, lengths in nm, ``v`` in nm/fs. ``sigma0`` sets the scale
    of the interband term and has no default.
    """

    sigma0: float
    omega_A: float = 1.9
    omega_B: float = 2.1
    gamma_A: float = 0.5e-3
    gamma_B: float = 1.1e-3
    a_ex: float = 0.8
    v: float = 0.55
    omegaB_beta: float = 0.84
    m_scale: float = 1.0

    def __post_init__(self):
        for name in ("omega_A", "omega_B", "gamma_A", "gamma_B", "a_ex", "v"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise DomainError(f"{name} must be positive, got {val!r}")
        if not self.omega_A < self.omega_B:
            raise DomainError("omega_A must be below omega_B")
        if not math.isfinite(self.sigma0):
            raise DomainError("sigma0 must be finite")

    @classmethod
    def preset(cls, quality: str, sigma0: float, **overrides) -> "MaterialParams":
        """Material with the damping pair of a named quality ("high" or "low")."""
        try:
            gamma_A, gamma_B = QUALITY_PRESETS[quality]
        except KeyError:
            raise DomainError(
                f"unknown quality {quality!r}; expected one of {sorted(QUALITY_PRESETS)}"
            ) from None
        return cls(sigma0=sigma0, gamma_A=gamma_A, gamma_B=gamma_B, **overrides)


def _positive_omega(omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(~(omega > 0)):
        raise DomainError("omega must be > 0")
    return omega


def sigma_res(omega, mat: MaterialParams):
    """Excitonic (A and B) conductivity of MoS2 in nm/fs (Gaussian units).

    Frequencies are converted to rad/fs before use, so the prefactor
    ``4 alpha c v^2 / (pi a_ex^2 omega)`` carries units of nm/fs^2 and each
    resonant term units of fs.
    """
    omega = _positive_omega(omega)
    w = omega / HBAR
    pref = 4.0 * ALPHA_FS * C_LIGHT * mat.v**2 / (math.pi * mat.a_ex**2 * w)
    total = 0j
    for wk, gk in ((mat.omega_A, mat.gamma_A), (mat.omega_B, mat.gamma_B)):
        total = total + (-1j) / ((wk - gk * 1j) / HBAR - w)
    out = pref * total
    return complex(out) if out.ndim == 0 else out


def sigma_inter_re(omega, mat: MaterialParams):
    """Real part of the interband conductivity, in units of ``mat.sigma0``.

    Zero below the B exciton; the step is taken as right-continuous.
    """
    omega = _positive_omega(omega)
    big_omega = omega / mat.omega_B
    mix = mat.omegaB_beta
    energy = np.sqrt(1.0 + 2.0 * mix + big_omega**2)
    step = np.heaviside(omega - mat.omega_B, 1.0)
    e_tilde = mat.m_scale * step / energy
    bracket = 1.0 + (1.0 + 2.0 * mix) / big_omega**2 * (1.0 + mix - energy)
    out = mat.sigma0 * e_tilde * bracket
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Green's-tensor image series


def _key(value: float) -> float:
    return round(float(value), 9)


@dataclass(frozen=True)
class GreensCoefficients:
    """Series coefficients c_n(z, omega) keyed by (z [nm], omega [eV]).

    Each entry is a finite complex array ``c_0 .. c_Nmax``; lookups are exact
    (to 1e-9) and never interpolate.
    """

    entries: Mapping[tuple[float, float], np.ndarray]

    def __post_init__(self):
        clean = {}
        for (z, w), seq in self.entries.items():
            arr = np.asarray(seq, dtype=complex).ravel()
            if arr.size == 0 or not np.all(np.isfinite(arr)):
                raise DomainError(f"coefficients at z={z}, omega={w} empty or non-finite")
            arr.setflags(write=False)
            clean[(_key(z), _key(w))] = arr
        object.__setattr__(self, "entries", clean)

    def lookup(self, z: float, omega: float) -> np.ndarray:
        try:
            return self.entries[(_key(z), _key(omega))]
        except KeyError:
            raise CoefficientsUnavailable(
                f"coefficients unavailable at z={z} nm, omega={omega} eV"
            ) from None

    def n_max(self, z: float, omega: float) -> int:
        return self.lookup(z, omega).size - 1

    def omegas_at(self, z: float) -> np.ndarray:
        zk = _key(z)
        return np.array(sorted(w for (zz, w) in self.entries if zz == zk))

    @classmethod
    def from_csv(cls, path) -> "GreensCoefficients":
        """Read a ``z_nm,omega_eV,n,re_c,im_c`` table.

        Every (z, omega) group must list a contiguous run n = 0..Nmax.
        """
        groups: dict[tuple[float, float], dict[int, complex]] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(row for row in fh if not row.startswith("#"))
            expected = ["z_nm", "omega_eV", "n", "re_c", "im_c"]
            if reader.fieldnames != expected:
                raise DomainError(f"coefficient file header must be {','.join(expected)}")
            for row in reader:
                key = (float(row["z_nm"]), float(row["omega_eV"]))
                n = int(row["n"])
                groups.setdefault(key, {})[n] = complex(float(row["re_c"]), float(row["im_c"]))
        entries = {}
        for key, terms in groups.items():
            if sorted(terms) != list(range(len(terms))):
                raise DomainError(f"non-contiguous series indices at z={key[0]}, omega={key[1]}")
            entries[key] = [terms[n] for n in range(len(terms))]
        return cls(entries)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["z_nm", "omega_eV", "n", "re_c", "im_c"])
            for (z, w) in sorted(self.entries):
                for n, c in enumerate(self.entries[(z, w)]):
                    writer.writerow([repr(z), repr(w), n, repr(float(c.real)), repr(float(c.imag))])


def geometry_factors(z: float, R: float, n_terms: int) -> np.ndarray:
    """[R~ - z/R]^(2n+2) / R~ for n = 0..n_terms-1, with R~ = sqrt((z/R)^2 + 1)."""
    zr = z / R
    rt = math.sqrt(zr * zr + 1.0)
    # rt - zr == 1 / (rt + zr), which avoids cancellation for large z/R
    x = 1.0 / (rt + zr)
    n = np.arange(n_terms)
    return x ** (2 * n + 2) / rt


@dataclass(frozen=True)
class GreenValue:
    """Truncated series value with an estimate of the neglected tail."""

    value: complex
    tail: float
    n_max: int


def green_xx(z: float, omega: float, coeffs: GreensCoefficients, R: float) -> GreenValue:
    """Induced G_xx on the disk axis (units 1/nm).

    The tail estimate assumes the unknown coefficients stay bounded by the
    largest stored magnitude; it is infinite when z = 0 because the series
    then has no geometric damping.
    """
    if not R > 0:
        raise DomainError("disk radius R must be > 0")
    if z < 0:
        raise DomainError("z must be >= 0")
    if not omega > 0:
        raise DomainError("omega must be > 0")
    cn = coeffs.lookup(z, omega)
    k = wavenumber(omega)
    pref = -1.0 / (2.0 * k * k)
    geo = geometry_factors(z, R, cn.size)
    value = pref * complex(np.sum(cn * geo))

    zr = z / R
    rt = math.sqrt(zr * zr + 1.0)
    x2 = (1.0 / (rt + zr)) ** 2
    bound = float(np.max(np.abs(cn)))
    if bound == 0.0:
        tail = 0.0
    elif x2 >= 1.0:
        tail = math.inf
    else:
        # sum_{n > Nmax} x^(2n+2) / rt
        tail = abs(pref) * bound * x2 ** (cn.size + 1) / (rt * (1.0 - x2))
    return GreenValue(value=value, tail=tail, n_max=cn.size - 1)


def purcell_factor(omega, im_gxx, eps: float = 1.0, direction=(1.0, 0.0, 0.0)):
    """Purcell factor sqrt(eps) + (6 pi c / omega) Im G_xx.

    ``omega`` in eV, ``im_gxx`` in 1/nm. Only the x-oriented dipole is
    supported.
    """
    if tuple(float(d) for d in direction) != (1.0, 0.0, 0.0):
        raise DomainError("only an x-oriented transition dipole is supported")
    if eps < 1:
        raise DomainError("host permittivity must be >= 1")
    omega = _positive_omega(omega)
    lam = math.sqrt(eps) + 6.0 * math.pi / wavenumber(omega) * np.asarray(im_gxx, dtype=float)
    if np.any(lam < 0):
        raise UnphysicalInputError(
            "negative Purcell factor: Green's coefficients are inconsistent"
        )
    return float(lam) if lam.ndim == 0 else lam


# --------------------------------------------------------------------------
# Spectrum representations


class PurcellSpectrum:
    """Common interface: ``support``, ``host_eps`` and vectorised ``evaluate``."""

    host_eps: float
    support: tuple[float, float]

    @property
    def baseline(self) -> float:
        return math.sqrt(self.host_eps)

    def evaluate(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = np.full(omega.shape, self.baseline)
        lo, hi = self.support
        inside = (omega >= lo) & (omega <= hi)
        if np.any(inside):
            out[inside] = self._evaluate_inside(omega[inside])
        return float(out) if out.ndim == 0 else out

    def induced(self, omega):
        """lambda(omega) - sqrt(eps)."""
        return self.evaluate(omega) - self.baseline

    def _evaluate_inside(self, omega):
        raise NotImplementedError

    def quadrature_nodes(self, points_per_width: int = 100, max_nodes: int = 2_000_000) -> np.ndarray:
        """Frequency nodes on which a piecewise-linear model of this spectrum is built."""
        raise NotImplementedError

    def _check_support(self):
        lo, hi = self.support
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DomainError(f"support must be finite with lo < hi, got {self.support}")
        if lo < 0:
            raise DomainError("support must lie at non-negative frequencies")
        if self.host_eps < 1:
            raise DomainError("host permittivity must be >= 1")


@dataclass(frozen=True)
class TabulatedSpectrum(PurcellSpectrum):
    """Samples (omega_i, lambda_i), linearly interpolated between nodes."""

    omega: np.ndarray
    lam: np.ndarray
    host_eps: float = 1.0
    support: tuple[float, float] = field(init=False)

    def __post_init__(self):
        w = np.array(self.omega, dtype=float)
        lam = np.array(self.lam, dtype=float)
        if w.ndim != 1 or w.shape != lam.shape or w.size < 2:
            raise DomainError("need matching 1-D arrays with at least two samples")
        if np.any(np.diff(w) <= 0):
            raise DomainError("tabulated omega must be strictly increasing")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise DomainError("tabulated lambda must be finite and >= 0")
        w.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "support", (float(w[0]), float(w[-1])))
        self._check_support()
        self._warn_undersampled()

    def _warn_undersampled(self):
        induced = self.lam - self.baseline
        if induced.size < 3 or induced.max() <= 0:
            return
        peaks, _ = find_peaks(induced, prominence=0.01 * induced.max())
        if peaks.size == 0:
            return
        widths = peak_widths(induced, peaks, rel_height=0.5)[0]
        if np.any(widths < MIN_POINTS_PER_LINEWIDTH):
            warnings.warn(
                f"tabulated spectrum resolves a peak with {widths.min():.1f} samples per "
                f"linewidth (< {MIN_POINTS_PER_LINEWIDTH}); linear interpolation will be inaccurate",
                stacklevel=3,
            )

    def _evaluate_inside(self, omega):
        return np.interp(omega, self.omega, self.lam)

    def quadrature_nodes(self, points_per_width: int = 100, max_nodes: int = 2_000_000) -> np.ndarray:
        return self.omega

    @classmethod
    def from_csv(cls, path, host_eps: float = 1.0) -> "TabulatedSpectrum":
        w, lam = read_spectrum_csv(path)
        return cls(w, lam, host_eps=host_eps)

    def __eq__(self, other):
        return (
            isinstance(other, TabulatedSpectrum)
            and self.host_eps == other.host_eps
            and np.array_equal(self.omega, other.omega)
            and np.array_equal(self.lam, other.lam)
        )

    __hash__ = None


@dataclass(frozen=True)
class LorentzianSumSpectrum(PurcellSpectrum):
    """sqrt(eps) + sum_j lam_j beta_j^2 / ((omega - omega_j)^2 + beta_j^2) on a support.

    ``peaks`` holds (lam_j, omega_j, beta_j) triples with lam_j >= 0 and
    beta_j > 0. The baseline is added exactly once.
    """

    peaks: tuple[tuple[float, float, float], ...]
    support: tuple[float, float]
    host_eps: float = 1.0

    def __post_init__(self):
        peaks = tuple((float(a), float(w), float(b)) for a, w, b in self.peaks)
        for a, w, b in peaks:
            if not (a >= 0 and b > 0 and w > 0) or not all(map(math.isfinite, (a, w, b))):
                raise DomainError(f"invalid Lorentzian peak {(a, w, b)}")
        object.__setattr__(self, "peaks", peaks)
        object.__setattr__(self, "support", (float(self.support[0]), float(self.support[1])))
        self._check_support()

    def peak_sum(self, omega):
        omega = np.asarray(omega, dtype=float)
        total = np.zeros_like(omega)
        for a, w, b in self.peaks:
            total = total + a / (1.0 + ((omega - w) / b) ** 2)
        return total

    def _evaluate_inside(self, omega):
        return self.baseline + self.peak_sum(omega)

    def quadrature_nodes(self, points_per_width: int = 100, max_nodes: int = 2_000_000) -> np.ndarray:
        lo, hi = self.support
        if self.peaks:
            h = min(b for _, _, b in self.peaks) / points_per_width
        else:
            h = (hi - lo) / 16
        n = int(math.ceil((hi - lo) / h)) + 1
        if n > max_nodes:
            raise DomainError(
                f"quadrature would need {n} nodes; narrow the support or lower points_per_width"
            )
        return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class GreensSeriesSpectrum(PurcellSpectrum):
    """lambda(omega) at fixed z from stored image-series coefficients.

    Evaluates only at frequencies present in the coefficient table; the
    support spans the stored frequencies at this z.
    """

    z: float
    R: float
    coeffs: GreensCoefficients
    host_eps: float = 1.0
    support: tuple[float, float] = field(init=False)

    def __post_init__(self):
        nodes = self.coeffs.omegas_at(self.z)
        if nodes.size < 2:
            raise CoefficientsUnavailable(f"fewer than two frequencies stored at z={self.z} nm")
        object.__setattr__(self, "support", (float(nodes[0]), float(nodes[-1])))
        self._check_support()

    def _evaluate_inside(self, omega):
        out = np.empty_like(omega)
        for i, w in enumerate(omega):
            g = green_xx(self.z, w, self.coeffs, self.R)
            out[i] = purcell_factor(w, g.value.imag, self.host_eps)
        return out

    def quadrature_nodes(self, points_per_width: int = 100, max_nodes: int = 2_000_000) -> np.ndarray:
        return self.coeffs.omegas_at(self.z)

    def tabulate(self) -> TabulatedSpectrum:
        nodes = self.quadrature_nodes()
        return TabulatedSpectrum(nodes, self.evaluate(nodes), host_eps=self.host_eps)


def eval_spectrum(spec: PurcellSpectrum, omega):
    """Evaluate any spectrum representation; outside the support returns sqrt(eps)."""
    return spec.evaluate(omega)


# --------------------------------------------------------------------------
# CSV


def read_spectrum_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if header != ["omega_eV", "lambda"]:
            raise DomainError("spectrum CSV header must be omega_eV,lambda")
        rows = [(float(a), float(b)) for a, b in reader]
    if not rows:
        raise DomainError(f"spectrum CSV {path} has no samples")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def write_spectrum_csv(path, omega: Sequence[float], lam: Iterable[float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["omega_eV", "lambda"])
        for w, v in zip(omega, lam):
            writer.writerow([repr(float(w)), repr(float(v))])
