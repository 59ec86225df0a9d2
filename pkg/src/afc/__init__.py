"""Atomic frequency comb modelling: comb efficiency, echo propagation,
preparation pulse trains, optical pumping and Zeeman side structure."""

__version__ = "0.1.0"

from .errors import ConfigurationError, NumericalError, ResolutionError, ValidationError
from .spectral import (AbsorptionProfile, FourierCoefficients, FrequencyGrid, fourier_coefficients,
                       lorentzian_convolve, synthesize_profile)
from .comb import (CombSpec, EfficiencyReport, build_comb_profile, efficiency_from_coefficients,
                   lorentzian_comb_optimal_efficiency, optimal_report, square_comb_optimal_efficiency)
from .echo import echo_amplitudes_ode, make_probe_pulse, propagate, transfer_function
from .pulses import PulseSequence, make_pp_sequence, make_s_sequence, sequence_spectrum
from .pumping import PumpConfig, efficiency_vs_power_curve, integrate_rate_equations, predict_comb
from .magnetic import LevelStructure, efficiency_vs_field, matching_fields

__all__ = [
    "__version__",
    "ConfigurationError", "NumericalError", "ResolutionError", "ValidationError",
    "AbsorptionProfile", "FourierCoefficients", "FrequencyGrid", "fourier_coefficients",
    "lorentzian_convolve", "synthesize_profile",
    "CombSpec", "EfficiencyReport", "build_comb_profile", "efficiency_from_coefficients",
    "lorentzian_comb_optimal_efficiency", "optimal_report", "square_comb_optimal_efficiency",
    "echo_amplitudes_ode", "make_probe_pulse", "propagate", "transfer_function",
    "PulseSequence", "make_pp_sequence", "make_s_sequence", "sequence_spectrum",
    "PumpConfig", "efficiency_vs_power_curve", "integrate_rate_equations", "predict_comb",
    "LevelStructure", "efficiency_vs_field", "matching_fields",
]
