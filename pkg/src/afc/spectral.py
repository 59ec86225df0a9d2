"""Frequency grids, absorption profiles, Fourier-series coefficients and
Lorentzian convolution.

All detunings are angular frequencies in rad/s. A periodic grid carries its
period ``P = 2*pi/T`` where ``T`` is the comb's echo delay.

Fourier convention: a periodic absorption profile is expanded as

    alpha(delta) = sum_n alpha_n exp(-i n delta T)

so that ``alpha_n = (1/P) * integral over one period of alpha(delta) exp(+i n delta T)``.
With this choice a square comb of half-width Gamma and height alpha_M has
``alpha_0 = alpha_M Gamma T / pi`` and ``alpha_{-1} = alpha_M sin(Gamma T) / pi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import signal

from .errors import ConfigurationError, ResolutionError

# Relative tolerance used when checking that a span is a whole number of periods.
PERIOD_RTOL = 1e-9
MIN_SAMPLES_PER_PERIOD = 8


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform half-open detuning axis ``[delta_min, delta_max)``.

    Points are ``delta_min + k * spacing`` for ``k = 0 .. n_points-1`` with
    ``spacing = (delta_max - delta_min) / n_points``. The half-open layout
    makes a grid covering whole periods tile seamlessly, which is what the
    periodic quadratures and circular convolutions rely on.
    """

    delta_min: float
    delta_max: float
    n_points: int
    period: float | None = None

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ConfigurationError(f"n_points must be an integer >= 2, got {self.n_points}")
        if not np.isfinite(self.delta_min) or not np.isfinite(self.delta_max):
            raise ConfigurationError("grid bounds must be finite")
        if self.delta_max <= self.delta_min:
            raise ConfigurationError("delta_max must exceed delta_min")
        if self.period is not None:
            if self.period <= 0:
                raise ConfigurationError("period must be positive")
            ratio = self.span / self.period
            if abs(ratio - round(ratio)) > PERIOD_RTOL * max(1.0, ratio) or round(ratio) < 1:
                raise ConfigurationError(
                    f"grid span {self.span:.6g} is not a whole number of periods {self.period:.6g}"
                )

    @classmethod
    def periodic(cls, period_time: float, points_per_period: int, n_periods: int = 1) -> "FrequencyGrid":
        """Grid of ``n_periods`` comb periods centred on zero detuning."""
        if period_time <= 0:
            raise ConfigurationError("period_time must be positive")
        period = 2 * np.pi / period_time
        half = n_periods * period / 2
        return cls(-half, half, int(points_per_period) * int(n_periods), period)

    @classmethod
    def centered(cls, half_span: float, n_points: int) -> "FrequencyGrid":
        """Non-periodic grid ``[-half_span, half_span)``."""
        return cls(-half_span, half_span, n_points, None)

    @property
    def span(self) -> float:
        return self.delta_max - self.delta_min

    @property
    def spacing(self) -> float:
        return self.span / self.n_points

    @property
    def is_periodic(self) -> bool:
        return self.period is not None

    @property
    def period_time(self) -> float:
        if self.period is None:
            raise ConfigurationError("grid has no period")
        return 2 * np.pi / self.period

    @property
    def n_periods(self) -> int:
        if self.period is None:
            raise ConfigurationError("grid has no period")
        return int(round(self.span / self.period))

    @property
    def points_per_period(self) -> float:
        if self.period is None:
            raise ConfigurationError("grid has no period")
        return self.n_points / (self.span / self.period)

    @cached_property
    def points(self) -> np.ndarray:
        pts = self.delta_min + self.spacing * np.arange(self.n_points)
        pts.setflags(write=False)
        return pts

    def __len__(self):
        return self.n_points


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AbsorptionProfile:
    """Sampled absorption coefficient alpha(delta) in 1/m, bounded by ``alpha_max``.

    Values within ``1e-12 * alpha_max`` of the bounds are snapped onto them so
    that rounding in upstream arithmetic never trips the no-gain check.
    """

    grid: FrequencyGrid
    values: np.ndarray
    alpha_max: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise ConfigurationError(
                f"profile has {vals.shape} values for a grid of {self.grid.n_points} points"
            )
        if not np.isfinite(self.alpha_max) or self.alpha_max < 0:
            raise ConfigurationError("alpha_max must be finite and non-negative")
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("profile contains non-finite values")
        slack = 1e-12 * max(self.alpha_max, 1e-300)
        if vals.min() < -slack or vals.max() > self.alpha_max + slack:
            raise ConfigurationError(
                f"profile leaves [0, alpha_max]: range [{vals.min():.6g}, {vals.max():.6g}], "
                f"alpha_max={self.alpha_max:.6g}"
            )
        object.__setattr__(self, "values", _readonly(np.clip(vals, 0.0, self.alpha_max)))

    @property
    def is_periodic(self) -> bool:
        return self.grid.is_periodic

    def mean(self) -> float:
        return float(self.values.mean())

    def with_values(self, values) -> "AbsorptionProfile":
        return AbsorptionProfile(self.grid, values, self.alpha_max)


@dataclass(frozen=True)
class FourierCoefficients:
    """Coefficients ``alpha_n`` for ``-n_max <= n <= n_max`` (1/m).

    ``values[n_max + n]`` holds ``alpha_n``.
    """

    values: np.ndarray
    period_time: float
    n_max: int = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 1 or vals.size % 2 != 1:
            raise ConfigurationError("coefficient array must have odd length 2*n_max+1")
        object.__setattr__(self, "values", _readonly(vals, complex))
        object.__setattr__(self, "n_max", vals.size // 2)

    def __getitem__(self, n: int) -> complex:
        if abs(n) > self.n_max:
            raise IndexError(f"order {n} beyond n_max={self.n_max}")
        return complex(self.values[self.n_max + n])

    @property
    def alpha0(self) -> float:
        return self[0].real

    @property
    def alpha_minus1(self) -> complex:
        return self[-1]

    def orders(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)


def _require_periodic(grid: FrequencyGrid):
    if grid.period is None:
        raise ConfigurationError("operation needs a periodic grid (grid.period is unset)")
    if grid.points_per_period < MIN_SAMPLES_PER_PERIOD:
        raise ResolutionError(
            f"{grid.points_per_period:g} samples per period; at least {MIN_SAMPLES_PER_PERIOD} required"
        )


def fourier_coefficients(profile: AbsorptionProfile, n_max: int) -> FourierCoefficients:
    """Fourier coefficients of a periodic profile by equal-weight periodic quadrature.

    The average of ``alpha * exp(+i n delta T)`` over the whole grid equals the
    one-period average because the grid spans a whole number of periods.
    Negative orders are set to the exact conjugates of the positive ones, which
    is the Hermitian symmetry of a real profile.
    """
    grid = profile.grid
    _require_periodic(grid)
    n_max = int(n_max)
    if n_max < 0:
        raise ConfigurationError("n_max must be non-negative")
    if 2 * n_max >= grid.points_per_period:
        raise ResolutionError(f"n_max={n_max} aliases with {grid.points_per_period:g} samples per period")
    T = grid.period_time
    n = np.arange(n_max + 1)
    phase = np.exp(1j * T * np.outer(n, grid.points))
    positive = phase @ profile.values / grid.n_points
    positive[0] = positive[0].real
    coeffs = np.concatenate([np.conj(positive[:0:-1]), positive])
    return FourierCoefficients(coeffs, T)


def synthesize_profile(
    coeffs: FourierCoefficients, grid: FrequencyGrid, alpha_max: float, clamp: bool = True
) -> AbsorptionProfile:
    """Evaluate the truncated series on ``grid``; optionally clamp to [0, alpha_max]."""
    if grid.period is not None and abs(grid.period_time - coeffs.period_time) > PERIOD_RTOL * coeffs.period_time:
        raise ConfigurationError("grid period does not match the coefficient period")
    orders = coeffs.orders()
    series = np.exp(-1j * coeffs.period_time * np.outer(grid.points, orders)) @ coeffs.values
    values = series.real
    if clamp:
        values = np.clip(values, 0.0, alpha_max)
    return AbsorptionProfile(grid, values, alpha_max)


def periodic_lorentzian(x, gamma: float, period_time: float) -> np.ndarray:
    """Unit-area Lorentzian of half-width ``gamma`` summed over all periods.

    Poisson summation gives ``sinh(g) / (P (cosh(g) - cos(x T)))`` with
    ``g = gamma T`` and ``P = 2 pi / T``; it integrates to one over a period.
    """
    g = gamma * period_time
    P = 2 * np.pi / period_time
    return np.sinh(g) / (P * (np.cosh(g) - np.cos(np.asarray(x) * period_time)))


def lorentzian(x, gamma: float) -> np.ndarray:
    """Unit-area Lorentzian ``gamma / (pi (gamma^2 + x^2))``."""
    x = np.asarray(x, dtype=float)
    return gamma / (np.pi * (gamma**2 + x**2))


def _check_gamma(grid: FrequencyGrid, gamma: float):
    if not gamma > 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    if grid.spacing > gamma / 4:
        raise ResolutionError(
            f"grid spacing {grid.spacing:.4g} rad/s exceeds gamma/4 = {gamma / 4:.4g} rad/s"
        )


def lorentzian_convolve(values, grid: FrequencyGrid | None = None, gamma: float | None = None,
                        boundary: str | None = None):
    """Convolve a sampled spectrum with the unit-area Lorentzian of half-width ``gamma``.

    ``values`` may be an :class:`AbsorptionProfile` (its grid is used and a
    profile is returned) or a plain array sampled on ``grid``.

    ``boundary='periodic'`` (default on periodic grids) performs a circular
    convolution with the periodized kernel, normalized so that its discrete sum
    is exactly one; constants are then fixed points and integrals are kept.
    ``boundary='open'`` treats the spectrum as zero outside the grid.
    """
    profile = None
    if isinstance(values, AbsorptionProfile):
        profile = values
        grid = profile.grid
        values = profile.values
    if grid is None or gamma is None:
        raise ConfigurationError("lorentzian_convolve needs a grid and gamma")
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_points,):
        raise ConfigurationError("spectrum length does not match the grid")
    _check_gamma(grid, gamma)
    if boundary is None:
        boundary = "periodic" if grid.is_periodic else "open"

    dx = grid.spacing
    n = grid.n_points
    if boundary == "periodic":
        if not grid.is_periodic:
            raise ConfigurationError("periodic boundary needs a periodic grid")
        offsets = dx * np.arange(n)
        kernel = periodic_lorentzian(offsets, gamma, grid.period_time)
        kernel /= kernel.sum()
        out = np.fft.irfft(np.fft.rfft(values) * np.fft.rfft(kernel), n)
    elif boundary == "open":
        offsets = dx * np.arange(-(n - 1), n)
        kernel = lorentzian(offsets, gamma) * dx
        out = signal.fftconvolve(values, kernel, mode="full")[n - 1: 2 * n - 1]
    else:
        raise ConfigurationError(f"unknown boundary '{boundary}'")

    if profile is not None:
        return profile.with_values(np.clip(out, 0.0, profile.alpha_max))
    return out


def central_period(profile: AbsorptionProfile, period_time: float) -> AbsorptionProfile:
    """Restrict a wide profile to the period ``[-P/2, P/2)`` and mark it periodic.

    The source grid must contain that window exactly on its sample points.
    """
    grid = profile.grid
    P = 2 * np.pi / period_time
    per = P / grid.spacing
    if abs(per - round(per)) > 1e-6:
        raise ResolutionError("grid spacing does not divide the comb period")
    per = int(round(per))
    start = (-P / 2 - grid.delta_min) / grid.spacing
    if abs(start - round(start)) > 1e-6 or round(start) < 0 or round(start) + per > grid.n_points:
        raise ResolutionError("central period is not aligned with the grid points")
    i0 = int(round(start))
    sub = FrequencyGrid(-P / 2, P / 2, per, P)
    return AbsorptionProfile(sub, profile.values[i0:i0 + per], profile.alpha_max)
