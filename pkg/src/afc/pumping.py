"""Optical pumping of the inhomogeneous line into a spectral comb.

Three-level model per frequency bin: ground sublevel 1 (probed), excited
state 2 and shelving sublevel 3. With pumping rate R, radiative lifetime T1,
branching ratio r of the decay back to 1 and shelving lifetime TZ,

    dn1/dt = -R/2 (n1 - n2) + r n2 / T1 + (n3 - n1) / TZ
    dn2/dt =  R/2 (n1 - n2) - n2 / T1
    dn3/dt = (1 - r) n2 / T1 + (n1 - n3) / TZ

The pumping rate is ``R = power_scale * (Lhat (x) |E|^2) / (2 Tp)`` with
``Lhat`` the unit-area Lorentzian of half-width gamma and ``E`` the
dimensionless field spectrum of one pattern of duration Tp.

After the preparation the excited state decays, leaving ``n1 + r n2`` in the
probed level. In steady state, with ``x = R T1`` and ``eps = 1/((1-r) TZ/T1 + 3)``,

    alpha / alpha_M = c * ((1 + r) x + 2) / (x / eps + 4)

where ``c = 2`` when each bin holds a total population of two (both ground
sublevels thermally filled, so an unpumped bin absorbs alpha_M) and ``c = 1``
for the single-population form.

The comb is assumed uniform along the crystal (no pump depletion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, NumericalError
from .pulses import PulseSequence, sequence_spectrum
from .spectral import AbsorptionProfile, FrequencyGrid, central_period, fourier_coefficients, lorentzian_convolve

NORMALIZATIONS = {"two_level_ground": 2.0, "single": 1.0}


@dataclass(frozen=True)
class PumpConfig:
    """Pumping parameters. None of them has a default value on purpose.

    Attributes:
        T1: excited-state lifetime (s).
        TZ: shelving-level lifetime (s).
        r: branching ratio of the excited-state decay back to level 1.
        Tp: duration of one preparation pattern (s).
        gamma: homogeneous half-width (rad/s).
        power_scale: multiplier applied to |E|^2.
        normalization: 'two_level_ground' (population 2 per bin) or 'single'.
    """

    T1: float
    TZ: float
    r: float
    Tp: float
    gamma: float
    power_scale: float
    normalization: str = "two_level_ground"

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigurationError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        for name in ("T1", "TZ", "Tp", "gamma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                out.append(f"{name} must be positive and finite")
        if not 0 <= self.r <= 1:
            out.append("r must lie in [0, 1]")
        if not (np.isfinite(self.power_scale) and self.power_scale >= 0):
            out.append("power_scale must be non-negative")
        if self.normalization not in NORMALIZATIONS:
            out.append(f"normalization must be one of {sorted(NORMALIZATIONS)}")
        if not out and 2 * self.r > 1 + (1 - self.r) * self.TZ / self.T1:
            # beyond this the closed form rises above the unpumped level
            out.append("2r > 1 + (1-r) TZ/T1: pumping would raise absorption above alpha_M")
        return out

    @property
    def epsilon(self) -> float:
        return 1.0 / ((1 - self.r) * self.TZ / self.T1 + 3)

    @property
    def population(self) -> float:
        return NORMALIZATIONS[self.normalization]

    def with_power(self, power_scale: float) -> "PumpConfig":
        return replace(self, power_scale=power_scale)


@dataclass(frozen=True)
class PopulationState:
    n1: np.ndarray
    n2: np.ndarray
    n3: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.n1 + self.n2 + self.n3

    def after_decay(self, r: float) -> np.ndarray:
        """Level-1 population once the excited state has emptied."""
        return self.n1 + r * self.n2


def pumping_rate(power_spectrum, grid: FrequencyGrid, config: PumpConfig) -> np.ndarray:
    """Frequency-selective pumping rate R(delta) in 1/s."""
    S = np.asarray(power_spectrum, dtype=float)
    if np.any(S < -1e-12 * max(1.0, float(np.max(np.abs(S), initial=0.0)))):
        raise ConfigurationError("power spectrum has negative bins")
    S = np.clip(S, 0.0, None)
    R = config.power_scale * lorentzian_convolve(S, grid, config.gamma) / (2 * config.Tp)
    return np.clip(R, 0.0, None)


def net_pumping_rate(pump, refill, grid: FrequencyGrid, config: PumpConfig) -> np.ndarray:
    """Pumping rate of level 1 when part of the light refills it.

    The refill channel is subtracted from the pump before the homogeneous
    convolution and the result is floored at zero: a bin is never pumped
    *into* level 1 beyond its unpumped population.
    """
    signed = np.asarray(pump, dtype=float) - np.asarray(refill, dtype=float)
    R = config.power_scale * lorentzian_convolve(signed, grid, config.gamma) / (2 * config.Tp)
    return np.clip(R, 0.0, None)


def steady_state_populations(R, config: PumpConfig) -> PopulationState:
    """Closed-form steady state of the rate equations."""
    R = np.asarray(R, dtype=float)
    N = config.population
    x = R * config.T1
    k = (1 - config.r) * config.TZ / config.T1
    ratio = x / (x + 2)                          # n2 / n1
    n1 = N / (2 + ratio * (1 + k))
    n2 = n1 * ratio
    n3 = N - n1 - n2
    return PopulationState(n1, n2, n3)


def absorption_ratio(R, config: PumpConfig) -> np.ndarray:
    """``alpha / alpha_M`` after the preparation, from the closed form."""
    x = np.asarray(R, dtype=float) * config.T1
    eps = config.epsilon
    return config.population * ((1 + config.r) * x + 2) / (x / eps + 4)


def steady_state_absorption(R, grid: FrequencyGrid, config: PumpConfig, alpha_max: float) -> AbsorptionProfile:
    R = np.asarray(R, dtype=float)
    if np.any(R < 0):
        raise ConfigurationError("pumping rate must be non-negative")
    values = alpha_max * absorption_ratio(R, config)
    return AbsorptionProfile(grid, np.clip(values, 0.0, alpha_max), alpha_max)


def rate_matrices(R, config: PumpConfig) -> np.ndarray:
    """Per-bin generator ``A`` with ``dn/dt = A n`` (shape ``(..., 3, 3)``)."""
    R = np.asarray(R, dtype=float)
    h = R / 2
    iT1, iTZ, r = 1 / config.T1, 1 / config.TZ, config.r
    A = np.zeros(R.shape + (3, 3))
    A[..., 0, 0] = -h - iTZ
    A[..., 0, 1] = h + r * iT1
    A[..., 0, 2] = iTZ
    A[..., 1, 0] = h
    A[..., 1, 1] = -h - iT1
    A[..., 2, 0] = iTZ
    A[..., 2, 1] = (1 - r) * iT1
    A[..., 2, 2] = -iTZ
    return A


def _stationary(A: np.ndarray) -> np.ndarray:
    """Unit-sum null vectors of the generators ``A`` (shape ``(..., 3, 3)``)."""
    M = A.copy()
    M[..., 2, :] = 1.0
    b = np.zeros(A.shape[:-1])
    b[..., 2] = 1.0
    return np.linalg.solve(M, b[..., None])[..., 0]


def thermal_state(shape, config: PumpConfig) -> PopulationState:
    N = config.population
    half = np.full(shape, N / 2)
    return PopulationState(half.copy(), np.zeros(shape), half.copy())


def integrate_rate_equations(R, config: PumpConfig, duration: float, n_steps: int = 64,
                             initial: PopulationState | None = None) -> PopulationState:
    """Propagate the populations for ``duration`` seconds.

    Each bin is advanced exactly: ``n(t+dt) = n_s + expm(A dt) (n(t) - n_s)``
    where ``n_s`` is the stationary state obtained by a linear solve of the
    generator. Working on the deviation keeps rounding in ``expm`` of very
    stiff generators proportional to the (shrinking) transient. Bins with
    identical rates share one propagator. Nonnegativity and conservation of
    the per-bin population are checked after every step.
    """
    if not duration > 0:
        raise ConfigurationError("duration must be positive")
    if n_steps < 1:
        raise ConfigurationError("n_steps must be at least 1")
    R = np.atleast_1d(np.asarray(R, dtype=float))
    if np.any(R < 0):
        raise ConfigurationError("pumping rate must be non-negative")
    state = initial if initial is not None else thermal_state(R.shape, config)
    n = np.stack([state.n1, state.n2, state.n3], axis=-1).astype(float)
    N0 = n.sum(axis=-1)

    uniq, inverse = np.unique(R, return_inverse=True)
    inverse = inverse.reshape(R.shape)
    A = rate_matrices(uniq, config)
    props = linalg.expm(A * (duration / n_steps))[inverse]
    stationary = (_stationary(A)[inverse] * N0[..., None])
    for step in range(n_steps):
        n = stationary + np.einsum("...ij,...j->...i", props, n - stationary)
        if np.any(n < -1e-12 * N0[..., None]):
            raise NumericalError(f"negative population at step {step}")
        drift = np.max(np.abs(n.sum(axis=-1) - N0) / N0)
        if drift > 1e-9:
            raise NumericalError(f"population not conserved (relative drift {drift:.2e}) at step {step}")
        n = np.clip(n, 0.0, None)
    return PopulationState(n[..., 0], n[..., 1], n[..., 2])


def run_preparation(R, config: PumpConfig, repetitions: int, wait: float, n_steps: int = 64) -> PopulationState:
    """Pump for ``repetitions`` patterns, then let the system relax in the dark for ``wait`` s."""
    pumped = integrate_rate_equations(R, config, repetitions * config.Tp, n_steps)
    if wait <= 0:
        return pumped
    return integrate_rate_equations(np.zeros_like(np.asarray(R, dtype=float)), config, wait, n_steps, pumped)


def pump_grid(period_time: float, n_periods: int = 16, points_per_period: int = 1024) -> FrequencyGrid:
    """Open grid of ``n_periods`` comb periods centred on the carrier."""
    P = 2 * math.pi / period_time
    half = n_periods * P / 2
    return FrequencyGrid(-half, half, n_periods * points_per_period, None)


def predict_comb(seq: PulseSequence, config: PumpConfig, alpha_max: float,
                 grid: FrequencyGrid | None = None) -> AbsorptionProfile:
    """Absorption profile engraved by repeating ``seq`` until steady state."""
    grid = grid if grid is not None else pump_grid(seq.spacing)
    _, power = sequence_spectrum(seq, grid.points)
    R = pumping_rate(power, grid, config)
    return steady_state_absorption(R, grid, config, alpha_max)


@dataclass(frozen=True)
class PowerPoint:
    power_scale: float
    mean_transmission: float
    eta: float
    alpha0_L: float
    alpha1_L: float


def comb_figures(profile: AbsorptionProfile, period_time: float, length: float = 1.0) -> tuple[float, float, float, float]:
    """Mean transmission, efficiency, alpha0 L and |alpha_-1| L over the central period."""
    core = central_period(profile, period_time)
    c = fourier_coefficients(core, 1)
    a0L = c.alpha0 * length
    a1L = abs(c.alpha_minus1) * length
    eta = a1L * a1L * math.exp(-a0L)
    transmission = float(np.mean(np.exp(-core.values * length)))
    return transmission, eta, a0L, a1L


def efficiency_vs_power_curve(seq: PulseSequence, config: PumpConfig, alpha_max_L: float, powers,
                              grid: FrequencyGrid | None = None) -> list[PowerPoint]:
    """Efficiency and mean transmission of the predicted comb for each power scale.

    The medium length is taken as 1 m so that ``alpha_max`` equals ``alpha_max_L``.
    """
    powers = np.asarray(powers, dtype=float)
    if powers.ndim != 1 or powers.size == 0 or np.any(powers <= 0) or np.any(np.diff(powers) <= 0):
        raise ConfigurationError("power grid must be positive and strictly ascending")
    grid = grid if grid is not None else pump_grid(seq.spacing)
    _, power = sequence_spectrum(seq, grid.points)
    base_rate = pumping_rate(power, grid, config.with_power(1.0))
    out = []
    for p in powers:
        profile = steady_state_absorption(p * base_rate, grid, config, alpha_max_L)
        tr, eta, a0L, a1L = comb_figures(profile, seq.spacing)
        out.append(PowerPoint(float(p), tr, eta, a0L, a1L))
    return out
