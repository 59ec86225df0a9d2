"""Retrieval efficiency of an atomic frequency comb and optimal comb shapes.

The forward echo efficiency of a comb with Fourier coefficients ``alpha_0``
and ``alpha_{-1}`` over a length ``L`` is

    eta = |alpha_{-1} L|^2 exp(-alpha_0 L)

Two parametric shapes are supported, both with peaks of height ``alpha_M``:

* square: ``alpha_M`` on ``|delta| <= Gamma`` in every period, zero elsewhere;
* lorentzian: periodized Lorentzian peaks of half-width ``Gamma``, scaled so
  the maximum of the periodic sum equals ``alpha_M`` (no gain anywhere).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError
from .spectral import PERIOD_RTOL, AbsorptionProfile, FrequencyGrid

FORWARD_BOUND = 4 * math.exp(-2)
GOLDEN = (math.sqrt(5) - 1) / 2
SHAPES = ("square", "lorentzian", "custom")


@dataclass(frozen=True)
class CombSpec:
    """Parametric comb description.

    Attributes:
        shape: 'square', 'lorentzian' or 'custom'.
        alpha_max: peak absorption alpha_M (1/m).
        length: medium length L (m).
        period_time: echo delay T (s); the comb period is 2*pi/T.
        width: half-width at half maximum Gamma (rad/s) for parametric shapes.
        profile: sampled profile for the 'custom' shape.
    """

    shape: str
    alpha_max: float
    length: float
    period_time: float
    width: float = 0.0
    profile: AbsorptionProfile | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigurationError(f"unknown comb shape '{self.shape}'")
        if self.alpha_max < 0 or self.length < 0:
            raise ConfigurationError("alpha_max and length must be non-negative")
        if self.period_time <= 0:
            raise ConfigurationError("period_time must be positive")
        wT = self.width * self.period_time
        if self.shape == "square" and not 0 <= wT < math.pi:
            raise ConfigurationError(f"square comb needs 0 <= Gamma*T < pi (peaks overlap), got {wT:.6g}")
        if self.shape == "lorentzian" and not wT > 0:
            raise ConfigurationError("lorentzian comb needs a positive width")
        if self.shape == "custom" and self.profile is None:
            raise ConfigurationError("custom comb needs a sampled profile")

    @property
    def alpha_max_L(self) -> float:
        return self.alpha_max * self.length


@dataclass(frozen=True)
class EfficiencyReport:
    eta: float
    alpha0_L: float
    alpha1_L: float
    optimum_flag: bool = False
    width: float | None = None


def efficiency_from_coefficients(alpha0: float, alpha_minus1: complex, length: float,
                                 allow_gain: bool = False) -> float:
    """``|alpha_{-1} L|^2 exp(-alpha_0 L)``.

    A negative ``alpha0`` means net gain and is rejected unless ``allow_gain``
    is set (classical exploration mode).
    """
    if length <= 0:
        raise ConfigurationError("length must be positive")
    if alpha0 < 0 and not allow_gain:
        raise ConfigurationError("negative alpha0 implies gain; pass allow_gain=True to explore it")
    return float(abs(alpha_minus1 * length) ** 2 * math.exp(-alpha0 * length))


def square_comb_coefficients(alpha_max: float, width: float, period_time: float) -> tuple[float, float]:
    """``(alpha_0, alpha_{-1})`` of a square comb of half-width ``width``."""
    u = width * period_time
    return alpha_max * u / math.pi, alpha_max * math.sin(u) / math.pi


def lorentzian_comb_coefficients(alpha_max: float, width: float, period_time: float) -> tuple[float, float]:
    """``(alpha_0, alpha_{-1})`` of the max-normalized periodized Lorentzian comb.

    The periodic sum of Lorentzians of half-width Gamma has coefficients
    proportional to ``exp(-|n| Gamma T)``; scaling its maximum to alpha_M gives
    ``alpha_n = alpha_M tanh(Gamma T / 2) exp(-|n| Gamma T)``.
    """
    u = width * period_time
    a0 = alpha_max * math.tanh(u / 2)
    return a0, a0 * math.exp(-u)


def lorentzian_comb_values(delta, alpha_max: float, width: float, period_time: float) -> np.ndarray:
    """Max-normalized periodized Lorentzian comb sampled at ``delta``."""
    u = width * period_time
    return alpha_max * math.tanh(u / 2) * math.sinh(u) / (math.cosh(u) - np.cos(np.asarray(delta) * period_time))


def square_comb_optimal_width(alpha_max_L: float, period_time: float) -> float:
    """Half-width maximizing the square-comb efficiency: ``arctan(2 pi / (alpha_M L)) / T``."""
    if alpha_max_L < 0:
        raise ConfigurationError("alpha_max_L must be non-negative")
    if period_time <= 0:
        raise ConfigurationError("period_time must be positive")
    return math.atan2(2 * math.pi, alpha_max_L) / period_time


def square_comb_efficiency(alpha_max_L: float, width_T: float) -> float:
    """Square-comb efficiency as a function of the dimensionless half-width Gamma*T."""
    a0L = alpha_max_L * width_T / math.pi
    a1L = alpha_max_L * math.sin(width_T) / math.pi
    return a1L * a1L * math.exp(-a0L)


def lorentzian_comb_efficiency(alpha_max_L: float, width_T: float) -> float:
    t = math.tanh(width_T / 2)
    a0L = alpha_max_L * t
    a1L = a0L * math.exp(-width_T)
    return a1L * a1L * math.exp(-a0L)


def square_comb_optimal_efficiency(alpha_max_L: float) -> float:
    """Efficiency at the optimal width, i.e. the efficiency formula evaluated at
    ``Gamma T = arctan(2 pi / (alpha_M L))``.

    Tends to ``4 exp(-2)`` for deep combs.
    """
    if alpha_max_L < 0:
        raise ConfigurationError("alpha_max_L must be non-negative")
    if alpha_max_L == 0:
        return 0.0
    return square_comb_efficiency(alpha_max_L, math.atan2(2 * math.pi, alpha_max_L))


def golden_section_maximize(f, lo: float, hi: float, xtol: float, max_iter: int = 500):
    """Maximize a unimodal scalar function on ``[lo, hi]``.

    Returns ``(x, f(x), n_iter)``. Raises :class:`NumericalError` if the bracket
    does not shrink below ``xtol`` within ``max_iter`` iterations.
    """
    if not hi > lo:
        raise ConfigurationError("empty bracket")
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for it in range(1, max_iter + 1):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        if b - a <= xtol:
            x = (a + b) / 2
            return x, f(x), it
    raise NumericalError(f"golden-section search did not converge: bracket [{a}, {b}] after {max_iter} steps")


def _optimize_width(eta_of_uT, period_time: float, label: str) -> tuple[float, float]:
    tol = 1e-9 * math.pi
    x, fx, _ = golden_section_maximize(eta_of_uT, 0.0, math.pi, tol)
    if not np.isfinite(fx):
        raise NumericalError(f"{label} optimizer returned a non-finite efficiency")
    if x < 10 * tol or x > math.pi - 10 * tol:
        raise NumericalError(f"{label} optimum sits on the bracket edge (Gamma*T={x:.3g}); no interior maximum")
    return x / period_time, fx


def square_comb_numeric_optimal_width(alpha_max_L: float, period_time: float) -> float:
    """Golden-section maximization of the square-comb efficiency over (0, pi/T)."""
    if alpha_max_L <= 0:
        raise ConfigurationError("alpha_max_L must be positive")
    width, _ = _optimize_width(lambda u: square_comb_efficiency(alpha_max_L, u), period_time, "square")
    return width


def lorentzian_comb_optimal_width(alpha_max_L: float, period_time: float) -> float:
    """Half-width of the Lorentzian comb that maximizes the efficiency (numeric)."""
    if not alpha_max_L > 0:
        raise ConfigurationError("alpha_max_L must be positive")
    if period_time <= 0:
        raise ConfigurationError("period_time must be positive")
    width, _ = _optimize_width(lambda u: lorentzian_comb_efficiency(alpha_max_L, u), period_time, "lorentzian")
    return width


def lorentzian_comb_optimal_efficiency(alpha_max_L: float) -> float:
    if alpha_max_L == 0:
        return 0.0
    width_T = lorentzian_comb_optimal_width(alpha_max_L, 1.0)
    return lorentzian_comb_efficiency(alpha_max_L, width_T)


def optimal_report(shape: str, alpha_max_L: float, period_time: float) -> EfficiencyReport:
    """Efficiency report at the optimal width of a parametric shape."""
    if shape == "square":
        width = square_comb_optimal_width(alpha_max_L, period_time)
        a0, a1 = square_comb_coefficients(alpha_max_L, width, period_time)
    elif shape == "lorentzian":
        width = lorentzian_comb_optimal_width(alpha_max_L, period_time)
        a0, a1 = lorentzian_comb_coefficients(alpha_max_L, width, period_time)
    else:
        raise ConfigurationError(f"no optimum defined for shape '{shape}'")
    eta = efficiency_from_coefficients(a0, a1, 1.0)
    return EfficiencyReport(eta, a0, a1, True, width)


def build_comb_profile(spec: CombSpec, grid: FrequencyGrid) -> AbsorptionProfile:
    """Sample a parametric comb onto a periodic grid.

    Square edges are area-weighted: the grid cell containing an edge gets the
    fraction of the cell that lies inside the tooth. This keeps ``alpha_0``
    exact and removes the edge-snapping bias of a plain threshold.
    """
    if grid.period is None:
        raise ConfigurationError("comb profiles need a periodic grid")
    if abs(grid.period_time - spec.period_time) > PERIOD_RTOL * spec.period_time:
        raise ConfigurationError("grid period does not match the comb period")
    if spec.shape == "custom":
        prof = spec.profile
        if prof.grid != grid:
            raise ConfigurationError("custom profile lives on a different grid")
        return prof
    P = grid.period
    # detuning folded into [-P/2, P/2)
    x = (grid.points + P / 2) % P - P / 2
    if spec.shape == "square":
        d = grid.spacing
        # overlap of the cell [x - d/2, x + d/2] with the tooth [-Gamma, Gamma]
        overlap = np.minimum(x + d / 2, spec.width) - np.maximum(x - d / 2, -spec.width)
        frac = np.clip(overlap / d, 0.0, 1.0)
        values = spec.alpha_max * frac
    else:
        values = lorentzian_comb_values(x, spec.alpha_max, spec.width, spec.period_time)
    return AbsorptionProfile(grid, values, spec.alpha_max)
