"""Spontaneous-emission dynamics of a quantum emitter near a MoS2 nanodisk.

Modules:
    spectral  conductivity models, Green's-series and Purcell spectra
    kernel    spectral density, non-dynamical shift, memory kernel
    dynamics  Volterra, pseudomode and closed-form solvers; regime labels
    fitting   Lorentzian decomposition of spectra
    cli       batch front end (``qedisk`` command)
"""

from .dynamics import (
    DynamicsResult,
    LorentzianModeParams,
    analytic_lorentzian,
    classify_regime,
    markov_rate,
    modes_from_peaks,
    solve_analytic,
    solve_pseudomode,
    solve_volterra,
)
from .fitting import FitReport, fit_lorentzians, fit_quality
from .kernel import (
    EmitterConfig,
    KernelTable,
    build_kernel_table,
    memory_kernel,
    nondyn_shift,
    spectral_density,
    spectral_density_tilde,
)
from .spectral import (
    GreensCoefficients,
    GreensSeriesSpectrum,
    LorentzianSumSpectrum,
    MaterialParams,
    PurcellSpectrum,
    TabulatedSpectrum,
    eval_spectrum,
    green_xx,
    purcell_factor,
    sigma_inter_re,
    sigma_res,
)

__version__ = "0.1.0"

__all__ = [
    "DynamicsResult",
    "EmitterConfig",
    "FitReport",
    "GreensCoefficients",
    "GreensSeriesSpectrum",
    "KernelTable",
    "LorentzianModeParams",
    "LorentzianSumSpectrum",
    "MaterialParams",
    "PurcellSpectrum",
    "TabulatedSpectrum",
    "analytic_lorentzian",
    "build_kernel_table",
    "classify_regime",
    "eval_spectrum",
    "fit_lorentzians",
    "fit_quality",
    "green_xx",
    "markov_rate",
    "memory_kernel",
    "modes_from_peaks",
    "nondyn_shift",
    "purcell_factor",
    "sigma_inter_re",
    "sigma_res",
    "solve_analytic",
    "solve_pseudomode",
    "solve_volterra",
    "spectral_density",
    "spectral_density_tilde",
]
