import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afc.comb import CombSpec, build_comb_profile, square_comb_optimal_width
from afc.echo import (echo_amplitudes_ode, energy_law_check, make_probe_pulse, observed_coefficients,
                      propagate, transfer_function, transfer_on_pulse)
from afc.errors import ConfigurationError, NumericalError, ResolutionError
from afc.spectral import AbsorptionProfile, FourierCoefficients, FrequencyGrid

from oracles import square_lorentzian_convolution

T = 1.5e-6
P = 2 * math.pi / T


def coeffs(a0, am1, extra=()):
    """Coefficient set with alpha_0, alpha_{-1} and optional higher orders."""
    n_max = 1 + len(extra)
    arr = np.zeros(2 * n_max + 1, dtype=complex)
    arr[n_max] = a0
    for n, v in enumerate((am1, *extra), start=1):
        arr[n_max - n] = v
        arr[n_max + n] = np.conj(v)
    return FourierCoefficients(arr, T)


def flat(value, ppp=512):
    g = FrequencyGrid.periodic(T, ppp)
    return AbsorptionProfile(g, np.full(ppp, value), max(value, 1.0))


# ---------------------------------------------------------------- transfer function


def test_transparent_medium():
    omega = np.linspace(-3 * P, 3 * P, 101)
    assert np.allclose(transfer_function(flat(0.0), 0.05 / T, 1.0, omega), 1.0, atol=0)


def test_uniform_absorber_is_beer_lambert():
    omega = np.linspace(-3 * P, 3 * P, 101)
    H = transfer_function(flat(2.0), 0.05 / T, 1.0, omega)
    assert np.allclose(np.abs(H) ** 2, math.exp(-2.0), rtol=1e-12)
    assert np.allclose(np.angle(H), 0.0, atol=1e-10)  # linear phase with zero slope in the retarded frame


def test_square_comb_transmission_against_arctan_sum():
    aL, gamma = 5.0, 0.047 / T
    g = FrequencyGrid.periodic(T, 4096)
    w = square_comb_optimal_width(aL, T)
    prof = build_comb_profile(CombSpec("square", aL, 1.0, T, w), g)
    x = np.linspace(-P / 2, P / 2, 41)
    H = transfer_function(prof, gamma, 1.0, x)
    k = np.arange(-5000, 5001)[:, None] * P
    smoothed = aL * square_lorentzian_convolution(x[None, :] - k, w, gamma).sum(axis=0)
    assert np.allclose(np.abs(H) ** 2, np.exp(-smoothed), rtol=2e-3)
    centre = np.abs(H[20]) ** 2
    edge = np.abs(H[0]) ** 2
    assert math.exp(-5.0) < centre < math.exp(-4.5)
    assert edge > 0.9


def test_transfer_needs_resolved_gamma():
    with pytest.raises(ResolutionError):
        transfer_function(flat(1.0, 64), 0.01 / T, 1.0, [0.0])
    with pytest.raises(ConfigurationError):
        transfer_function(flat(1.0), 0.0, 1.0, [0.0])


# ---------------------------------------------------------------- propagation


def test_vacuum_gives_unit_transmission():
    pulse = make_probe_pulse(450e-9, T, n_samples=2**14, window_periods=64)
    train = propagate(pulse, np.ones(pulse.n_samples))
    assert train.amplitudes[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.abs(train.amplitudes[1:]) < 1e-12)


def test_uniform_absorber_amplitude():
    pulse = make_probe_pulse(450e-9, T, n_samples=2**14, window_periods=64)
    train = propagate(pulse, transfer_on_pulse(flat(1.0), 0.05 / T, 1.0, pulse))
    assert train.amplitudes[0] == pytest.approx(math.exp(-0.5), abs=1e-9)
    assert np.all(np.abs(train.amplitudes[1:]) < 1e-9)


def test_pulse_longer_than_delay_rejected():
    with pytest.raises(ConfigurationError):
        make_probe_pulse(2e-6, T)


def test_square_comb_echo_matches_closed_form():
    gamma = 0.005 / T
    g = FrequencyGrid.periodic(T, 8192)
    prof = build_comb_profile(CombSpec("square", 5.0, 1.0, T, square_comb_optimal_width(5.0, T)), g)
    pulse = make_probe_pulse(450e-9, T)
    train = propagate(pulse, transfer_on_pulse(prof, gamma, 1.0, pulse))
    assert train.efficiency == pytest.approx(0.371, abs=0.008)
    c = observed_coefficients(prof, gamma, 2)
    assert train.efficiency == pytest.approx(abs(c.alpha_minus1) ** 2 * math.exp(-c.alpha0), rel=1e-3)
    # causality and no gain
    assert train.pre_arrival_energy <= 1e-8 * train.output_energy
    assert train.output_energy <= train.input_energy


@pytest.mark.parametrize("aL, eta_expected", [(20.0, 0.0729), (40 * math.pi, 0.5355)])
def test_narrow_peaks_keep_energy_in_the_spectrum(aL, eta_expected):
    gamma = 0.005 / T
    g = FrequencyGrid.periodic(T, 16384)
    prof = build_comb_profile(CombSpec("square", aL, 1.0, T, 0.05 / T), g)
    pulse = make_probe_pulse(100e-9, T, "gaussian")
    train = propagate(pulse, transfer_on_pulse(prof, gamma, 1.0, pulse), p_max=6)
    assert train.output_energy / train.input_energy >= 0.9
    assert train.efficiency == pytest.approx(eta_expected, rel=2e-3)


# ---------------------------------------------------------------- echo ODE


def test_ode_without_modulation_has_no_echo():
    a = echo_amplitudes_ode(coeffs(1.0, 0.0), 1.0, 1)
    assert abs(a[1]) == 0.0
    assert a[0] == pytest.approx(math.exp(-0.5), rel=1e-12)


def test_ode_reaches_forward_bound():
    a = echo_amplitudes_ode(coeffs(2.0, 2.0), 1.0, 1)
    assert abs(a[1]) ** 2 == pytest.approx(4 * math.exp(-2), rel=1e-10)


def test_ode_depth_five_values():
    a = echo_amplitudes_ode(coeffs(1.4303, 1.2456), 1.0, 1)
    assert abs(a[1]) ** 2 == pytest.approx(0.3712, abs=5e-4)


@given(st.floats(0.0, 8.0), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
def test_ode_matches_poisson_amplitudes(a0, re, im):
    # with only alpha_{-1}, a_p(L) = (-alpha_{-1} L)^p / p! exp(-alpha_0 L / 2)
    am1 = complex(re, im)
    a = echo_amplitudes_ode(coeffs(a0, am1), 1.0, 1, n_steps=400)
    assert a[1] == pytest.approx(-am1 * math.exp(-a0 / 2), abs=1e-9)
    a = echo_amplitudes_ode(coeffs(a0, am1, (0.0, 0.0)), 1.0, 3, n_steps=400)
    for p in range(4):
        assert a[p] == pytest.approx((-am1) ** p / math.factorial(p) * math.exp(-a0 / 2), abs=1e-9)


def test_ode_step_check_fails_loudly():
    with pytest.raises(NumericalError):
        echo_amplitudes_ode(coeffs(400.0, 100.0), 1.0, 1, n_steps=20)


# ---------------------------------------------------------------- energy law


def test_energy_law_vacuum_and_uniform():
    pulse = make_probe_pulse(450e-9, T, n_samples=2**14, window_periods=64)
    g = FrequencyGrid.periodic(T, 1024)
    vac = AbsorptionProfile(g, np.zeros(1024), 1.0)
    assert energy_law_check(pulse, vac, 0.05 / T, 1.0) < 1e-12  # zero up to FFT rounding
    assert energy_law_check(pulse, AbsorptionProfile(g, np.full(1024, 1.5), 2.0), 0.05 / T, 1.0) < 1e-10


@settings(max_examples=5)
@given(st.floats(0.5, 10.0), st.floats(0.2, 2.5))
def test_energy_law_on_square_combs(aL, uT):
    pulse = make_probe_pulse(450e-9, T, n_samples=2**14, window_periods=64)
    g = FrequencyGrid.periodic(T, 2048)
    prof = build_comb_profile(CombSpec("square", aL, 1.0, T, uT / T), g)
    assert energy_law_check(pulse, prof, 0.047 / T, 1.0) < 1e-6


# ---------------------------------------------------------------- transmission widths


def _transmission(profile, gamma, x):
    return np.abs(transfer_function(profile, gamma, 1.0, x)) ** 2


def _opaque_width(profile, gamma):
    """Width of the region around a tooth where less than half the light gets through."""
    x = np.linspace(-P / 2, P / 2, 1001)
    return np.count_nonzero(_transmission(profile, gamma, x) < 0.5) * (x[1] - x[0])


def _window_fwhm(profile, gamma):
    """FWHM of the transparent window between two teeth."""
    x = np.linspace(0.0, P, 1001)
    tr = _transmission(profile, gamma, x)
    return np.count_nonzero(tr >= tr.max() / 2) * (x[1] - x[0])


def test_lorentzian_structures_broaden_with_depth_square_windows_do_not():
    gamma = 0.002 / T
    g = FrequencyGrid.periodic(T, 8192)
    widths_l, widths_s = [], []
    depths = [4.0, 16.0, 64.0]
    for aL in depths:
        widths_l.append(_opaque_width(build_comb_profile(CombSpec("lorentzian", aL, 1.0, T, 0.05 / T), g), gamma))
        widths_s.append(_window_fwhm(build_comb_profile(CombSpec("square", aL, 1.0, T, 0.5 / T), g), gamma))
    for i in (1, 2):
        expected = math.sqrt((depths[i] / math.log(2) - 1) / (depths[0] / math.log(2) - 1))
        assert widths_l[i] / widths_l[0] == pytest.approx(expected, rel=0.1)
        assert widths_s[i] / widths_s[0] == pytest.approx(1.0, rel=0.02)
