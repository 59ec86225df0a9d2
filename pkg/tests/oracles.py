"""Reference computations written independently of the package.

They use adaptive quadrature, brute-force sweeps or textbook algebra so that
a test compares two routes that share no code.
"""

import math

import numpy as np
from scipy import integrate


def quad_fourier_square(alpha_max, width_T, n):
    """alpha_n of a square comb by adaptive quadrature over one period (T = 1)."""
    # alpha_n = (1/2pi) int_{-pi}^{pi} alpha(x) e^{i n x} dx, tooth on [-w, w]
    re, _ = integrate.quad(lambda x: math.cos(n * x), -width_T, width_T, epsabs=1e-13, epsrel=1e-13)
    im, _ = integrate.quad(lambda x: math.sin(n * x), -width_T, width_T, epsabs=1e-13, epsrel=1e-13)
    return alpha_max * complex(re, im) / (2 * math.pi)


def eta_square(aL, uT):
    """Retrieval efficiency of a square comb, from the coefficient formulas."""
    a0 = aL * uT / math.pi
    a1 = aL * math.sin(uT) / math.pi
    return a1 * a1 * math.exp(-a0)


def brute_force_argmax(f, lo, hi, n=20001, refine=3):
    """Maximize ``f`` on ``[lo, hi]`` by repeated dense sampling."""
    for _ in range(refine):
        x = np.linspace(lo, hi, n)
        y = np.array([f(v) for v in x])
        i = int(np.argmax(y))
        lo, hi = x[max(i - 2, 0)], x[min(i + 2, n - 1)]
    return 0.5 * (lo + hi)


def lorentzian_comb_quad_coeff(alpha_max, u, n, images=2000):
    """alpha_n of a max-normalized periodized Lorentzian comb (T = 1, HWHM u).

    The comb is summed image by image and integrated with quad; the peak
    value is found from the same sum.
    """
    k = np.arange(-images, images + 1) * 2 * math.pi

    # images beyond the cut are nearly u^2/(x - 2 pi k)^2; their sum is ~ u^2 / (2 pi^2 (K + 1/2))
    tail = u * u / (2 * math.pi**2 * (images + 0.5))

    def raw(x):
        return float(np.sum(u * u / (u * u + (x - k) ** 2))) + tail

    peak = raw(0.0)
    re, _ = integrate.quad(lambda x: raw(x) * math.cos(n * x), -math.pi, math.pi, limit=400,
                           epsabs=1e-12, epsrel=1e-12)
    return alpha_max * re / (2 * math.pi * peak)


def square_lorentzian_convolution(x, half_width, gamma):
    """Unit-area Lorentzian (HWHM gamma) convolved with the indicator of [-half_width, half_width]."""
    return (np.arctan((half_width - x) / gamma) + np.arctan((half_width + x) / gamma)) / math.pi


def three_level_after_decay(RT1, r, TZ_over_T1, N=2.0):
    """Level-1 population once the excited state has decayed, after pumping
    to steady state. Found by long-time implicit integration of the rate
    equations with time in units of T1, then the decay step n1 + r n2."""
    zr = 1.0 / TZ_over_T1

    def rhs(_t, n):
        n1, n2, n3 = n
        return [0.5 * RT1 * (n2 - n1) + r * n2 - zr * (n1 - n3),
                0.5 * RT1 * (n1 - n2) - n2,
                (1 - r) * n2 - zr * (n3 - n1)]

    t_end = 60.0 * (TZ_over_T1 + 1.0 + 1.0 / max(RT1, 1e-12))
    sol = integrate.solve_ivp(rhs, (0.0, t_end), [N / 2, 0.0, N / 2], method="Radau",
                              rtol=1e-11, atol=1e-14)
    n1, n2, _ = sol.y[:, -1]
    return n1 + r * n2
