import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from afc.comb import (FORWARD_BOUND, CombSpec, build_comb_profile, efficiency_from_coefficients,
                      golden_section_maximize, lorentzian_comb_coefficients, lorentzian_comb_efficiency,
                      lorentzian_comb_optimal_efficiency, lorentzian_comb_optimal_width, lorentzian_comb_values,
                      optimal_report, square_comb_efficiency, square_comb_numeric_optimal_width,
                      square_comb_optimal_efficiency, square_comb_optimal_width)
from afc.errors import ConfigurationError
from afc.spectral import FrequencyGrid, fourier_coefficients

from oracles import brute_force_argmax, eta_square, lorentzian_comb_quad_coeff

T = 1.5e-6


def test_forward_bound_value():
    assert FORWARD_BOUND == pytest.approx(0.5413411329, rel=1e-9)


def test_no_modulation_no_echo():
    assert efficiency_from_coefficients(1.3, 0.0, 1.0) == 0.0


def test_thin_peak_limit_reaches_bound():
    assert efficiency_from_coefficients(2.0, 2.0, 1.0) == pytest.approx(4 * math.exp(-2), rel=1e-14)


def test_complex_coefficient_uses_modulus():
    assert efficiency_from_coefficients(1.0, 0.6 + 0.8j, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)


def test_gain_rejected_unless_classical():
    with pytest.raises(ConfigurationError):
        efficiency_from_coefficients(-0.1, 0.5, 1.0)
    assert efficiency_from_coefficients(-0.1, 0.5, 1.0, allow_gain=True) == pytest.approx(0.25 * math.exp(0.1))
    with pytest.raises(ConfigurationError):
        efficiency_from_coefficients(1.0, 0.5, 0.0)


def test_optimal_width_limits():
    assert square_comb_optimal_width(0.0, T) * T == pytest.approx(math.pi / 2, abs=1e-15)
    assert square_comb_optimal_width(2 * math.pi, T) * T == pytest.approx(math.pi / 4, abs=1e-15)
    # reference value 0.56100 is rounded; the closed form is 0.560982
    assert square_comb_optimal_width(10.0, T) * T == pytest.approx(math.atan(0.2 * math.pi), abs=1e-15)
    assert square_comb_optimal_width(10.0, T) * T == pytest.approx(0.5610, abs=5e-5)


@pytest.mark.parametrize("aL", [0.3, 2.0, 10.0, 137.0])
def test_optimal_width_matches_brute_force_sweep(aL):
    u = brute_force_argmax(lambda v: eta_square(aL, v), 1e-9, math.pi)
    assert math.atan2(2 * math.pi, aL) == pytest.approx(u, abs=1e-6)
    assert square_comb_numeric_optimal_width(aL, 1.0) == pytest.approx(u, abs=1e-6)


def test_optimal_efficiency_values():
    assert square_comb_optimal_efficiency(0.0) == 0.0
    # exponent alpha_M L Gamma T / pi, evaluated independently
    u = math.atan(2 * math.pi / 10)
    assert square_comb_optimal_efficiency(10.0) == pytest.approx(eta_square(10.0, u), rel=1e-14)
    assert square_comb_optimal_efficiency(10.0) == pytest.approx(0.4806, abs=5e-4)
    assert square_comb_optimal_efficiency(5.0) == pytest.approx(0.3712, abs=5e-4)
    assert square_comb_optimal_efficiency(1e3) == pytest.approx(0.5413, abs=5e-4)


def test_depth_five_report():
    r = optimal_report("square", 5.0, 1.0)
    assert r.width == pytest.approx(math.atan(2 * math.pi / 5), abs=1e-15)
    assert r.width == pytest.approx(0.89861, abs=5e-5)
    assert r.alpha0_L == pytest.approx(5 * r.width / math.pi, rel=1e-14)
    assert r.alpha0_L == pytest.approx(1.4303, abs=1e-4)  # rounded reference; closed form is 1.43023
    assert r.alpha1_L == pytest.approx(1.2456, abs=5e-4)
    assert r.optimum_flag


def test_doubled_exponent_is_not_used():
    # doubling the exponent would give about 0.35 at depth 10 and lose the 54% asymptote
    u = math.atan(2 * math.pi / 1e3)
    doubled = (1e3 * math.sin(u) / math.pi) ** 2 * math.exp(-2 * 1e3 * u / math.pi)
    assert doubled < 0.2
    assert square_comb_optimal_efficiency(1e3) > 0.54


@given(st.floats(1e-3, 1e4), st.floats(1e-3, 1e4))
def test_optimal_efficiency_monotone_and_bounded(a, b):
    lo, hi = sorted((a, b))
    assert square_comb_optimal_efficiency(lo) <= square_comb_optimal_efficiency(hi) + 1e-15
    assert square_comb_optimal_efficiency(hi) <= FORWARD_BOUND + 1e-9


@given(st.floats(1e-2, 1e3), st.floats(1e-4, math.pi - 1e-4))
def test_square_efficiency_never_exceeds_optimum(aL, u):
    assert square_comb_efficiency(aL, u) <= square_comb_optimal_efficiency(aL) + 1e-12


# ---------------------------------------------------------------- Lorentzian combs


@pytest.mark.parametrize("u", [0.05, 0.4, 1.3])
def test_lorentzian_coefficients_against_image_sum(u):
    a0, a1 = lorentzian_comb_coefficients(1.0, u, 1.0)
    assert a0 == pytest.approx(lorentzian_comb_quad_coeff(1.0, u, 0), rel=1e-6)
    assert a1 == pytest.approx(lorentzian_comb_quad_coeff(1.0, u, 1), rel=1e-6)


def test_lorentzian_profile_is_max_normalized():
    x = np.linspace(-math.pi, math.pi, 2001)
    v = lorentzian_comb_values(x, 2.0, 0.3, 1.0)
    assert v.max() == pytest.approx(2.0, rel=1e-12)
    assert v[np.argmin(np.abs(x - 0.3))] == pytest.approx(1.0, rel=0.05)  # half maximum near HWHM


def test_lorentzian_optimum_limits():
    assert lorentzian_comb_optimal_efficiency(1e-6) < 1e-12
    u = lorentzian_comb_optimal_width(20.0, 1.0)
    eta = lorentzian_comb_optimal_efficiency(20.0)
    assert 0 < u < math.pi and math.isfinite(u)
    assert eta < FORWARD_BOUND
    ref = brute_force_argmax(lambda v: lorentzian_comb_efficiency(20.0, v), 1e-6, math.pi - 1e-6)
    assert u == pytest.approx(ref, abs=1e-6)


@given(st.floats(1e-2, 1e3))
def test_square_beats_lorentzian(aL):
    assert square_comb_optimal_efficiency(aL) >= lorentzian_comb_optimal_efficiency(aL)


def test_golden_section_on_parabola():
    x, fx, it = golden_section_maximize(lambda v: -(v - 0.3) ** 2, 0.0, 1.0, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-9)
    assert it < 100


# ---------------------------------------------------------------- profiles


def test_zero_width_square_is_empty():
    g = FrequencyGrid.periodic(T, 256)
    assert np.all(build_comb_profile(CombSpec("square", 1.0, 1.0, T, 0.0), g).values == 0)


def test_touching_teeth_rejected():
    with pytest.raises(ConfigurationError):
        CombSpec("square", 1.0, 1.0, T, math.pi / T)


@pytest.mark.parametrize("aL", [5.0, 20.0])
def test_optimal_profiles_duty_cycle_shrinks(aL):
    g = FrequencyGrid.periodic(T, 2048)
    prof = build_comb_profile(CombSpec("square", aL, 1.0, T, square_comb_optimal_width(aL, T)), g)
    duty = prof.values.sum() / (aL * g.n_points)
    assert duty == pytest.approx(math.atan(2 * math.pi / aL) / math.pi, rel=1e-12)


@pytest.mark.parametrize("aL", [0.5, 5.0, 50.0])
def test_sampled_comb_matches_closed_form(aL):
    g = FrequencyGrid.periodic(T, 2048)
    w = square_comb_optimal_width(aL, T)
    c = fourier_coefficients(build_comb_profile(CombSpec("square", aL, 1.0, T, w), g), 1)
    sampled = efficiency_from_coefficients(c.alpha0, c.alpha_minus1, 1.0)
    assert sampled == pytest.approx(square_comb_optimal_efficiency(aL), rel=1e-3)
