"""Weak-field propagation of a probe pulse through a frequency-structured absorber.

This module is the numerical oracle for the comb efficiency formula. A probe
envelope ``Omega(t)`` (synthesis convention ``exp(-i omega t)``) is filtered by
the steady linear response of the medium,

    H(omega) = exp( -(L / 2 pi) * integral alpha(delta) / (gamma + i (delta - omega)) d delta )

whose modulus squared is ``exp(-(alpha (x) Lhat)(omega) L)`` with ``Lhat`` the
unit-area Lorentzian. For periodic profiles the integral runs over one period
with the periodized kernel ``-i (T/2) cot((x - i gamma) T / 2)``, which is the
exact sum of ``1 / (gamma + i x)`` over all periods.

Times are measured in the retarded frame, so the vacuum output equals the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError, ResolutionError
from .spectral import AbsorptionProfile, FourierCoefficients, FrequencyGrid, lorentzian_convolve

DEFAULT_SAMPLES = 2**16
DEFAULT_WINDOW_PERIODS = 512


@dataclass(frozen=True)
class ProbePulse:
    """Sampled probe envelope.

    Attributes:
        times: uniform time grid (s), starting at zero.
        envelope: complex Rabi frequency Omega(0, t) (rad/s).
        carrier_offset: detuning of the carrier from the comb centre (rad/s).
        center: arrival time of the pulse centre (s).
        duration: nominal pulse duration (s).
        period_time: comb delay T the window was laid out for (s).
    """

    times: np.ndarray
    envelope: np.ndarray
    carrier_offset: float
    center: float
    duration: float
    period_time: float

    def __post_init__(self):
        if self.times.shape != self.envelope.shape or self.times.ndim != 1:
            raise ConfigurationError("times and envelope must be 1-D arrays of equal length")
        if not np.all(np.isfinite(self.envelope)):
            raise ConfigurationError("pulse envelope must be finite")
        if self.duration >= self.period_time:
            raise ConfigurationError("echo windows overlap the input: pulse duration >= T")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_samples(self) -> int:
        return self.times.size

    @property
    def samples_per_period(self) -> int:
        return int(round(self.period_time / self.dt))

    @property
    def start(self) -> float:
        """First instant at which the input is non-zero."""
        nz = np.flatnonzero(np.abs(self.envelope) > 0)
        return float(self.times[nz[0]]) if nz.size else 0.0

    def angular_frequencies(self) -> np.ndarray:
        """Envelope frequencies in FFT order (rad/s), without the carrier offset."""
        return 2 * np.pi * np.fft.fftfreq(self.n_samples, self.dt)

    def spectrum(self) -> np.ndarray:
        """``sum_j Omega(t_j) exp(+i omega t_j) dt`` in FFT order."""
        return np.fft.ifft(self.envelope) * self.n_samples * self.dt

    def frequency_grid(self) -> FrequencyGrid:
        """Sorted detuning grid covered by the pulse spectrum (carrier included)."""
        n = self.n_samples
        dw = 2 * np.pi / (n * self.dt)
        lo = -(n // 2) * dw + self.carrier_offset
        return FrequencyGrid(lo, lo + n * dw, n)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.envelope) ** 2) * self.dt)


def make_probe_pulse(duration: float, period_time: float, shape: str = "rect",
                     n_samples: int = DEFAULT_SAMPLES, window_periods: int = DEFAULT_WINDOW_PERIODS,
                     carrier_offset: float = 0.0, amplitude: float = 1.0) -> ProbePulse:
    """Probe pulse laid out on a window of ``window_periods`` comb periods.

    The pulse centre sits one period after the window start so that the
    preceding quiet interval can be used to check causality. ``n_samples``
    must be divisible by ``window_periods`` so that echo delays fall on samples.

    Args:
        duration: full duration (rect) or intensity FWHM (gaussian) in s.
        period_time: comb delay T in s.
        shape: 'rect' or 'gaussian'.
    """
    if window_periods < 8:
        raise ConfigurationError("time window must cover at least 8 comb periods")
    if n_samples % window_periods:
        raise ConfigurationError("n_samples must be a multiple of window_periods")
    if duration <= 0 or period_time <= 0:
        raise ConfigurationError("duration and period_time must be positive")
    dt = period_time / (n_samples // window_periods)
    times = dt * np.arange(n_samples)
    center = period_time
    if shape == "rect":
        env = np.where(np.abs(times - center) < duration / 2, amplitude, 0.0).astype(complex)
    elif shape == "gaussian":
        sigma = duration / (2 * math.sqrt(math.log(2)))
        env = (amplitude * np.exp(-((times - center) ** 2) / (2 * sigma**2))).astype(complex)
        env[np.abs(times - center) > period_time / 2] = 0.0
    else:
        raise ConfigurationError(f"unknown probe shape '{shape}'")
    return ProbePulse(times, env, carrier_offset, center, duration, period_time)


@dataclass(frozen=True)
class EchoTrain:
    """Propagated output and its decomposition into echoes.

    ``amplitudes[p]`` is the matched-filter amplitude of the echo at delay pT
    (``a_0`` is the transmitted pulse); ``energies[p]`` is the energy found in
    the p-th gate relative to the input energy.
    """

    times: np.ndarray
    output: np.ndarray
    amplitudes: np.ndarray
    energies: np.ndarray
    input_energy: float
    output_energy: float
    pre_arrival_energy: float

    @property
    def efficiency(self) -> float:
        return float(abs(self.amplitudes[1]) ** 2)


def _periodic_chi(profile: AbsorptionProfile, gamma: float, omega: np.ndarray) -> np.ndarray:
    """``integral alpha(delta) K(delta - omega) d delta`` with the periodized kernel."""
    grid = profile.grid
    T = grid.period_time
    P = grid.period
    # the integrand is periodic, so use one period of the profile
    per = int(round(grid.points_per_period))
    delta = grid.points[:per]
    alpha = profile.values[:per]
    residues = np.mod(omega - grid.delta_min, P)
    # identical residues share a value; key them on a fine integer lattice
    keys = np.round(residues / P * 2**40).astype(np.int64)
    uniq, inverse = np.unique(keys, return_inverse=True)
    w = uniq.astype(float) / 2**40 * P + grid.delta_min
    chi = np.empty(uniq.size, dtype=complex)
    chunk = max(1, 2**22 // per)
    for s in range(0, uniq.size, chunk):
        x = delta[None, :] - w[s:s + chunk, None]
        kern = -0.5j * T / np.tan((x - 1j * gamma) * T / 2)
        chi[s:s + chunk] = kern @ alpha * grid.spacing
    return chi[inverse.reshape(omega.shape)]


def _open_chi(profile: AbsorptionProfile, gamma: float, omega: np.ndarray) -> np.ndarray:
    grid = profile.grid
    chi = np.empty(omega.size, dtype=complex)
    flat = omega.ravel()
    chunk = max(1, 2**22 // grid.n_points)
    for s in range(0, flat.size, chunk):
        x = grid.points[None, :] - flat[s:s + chunk, None]
        chi[s:s + chunk] = (1.0 / (gamma + 1j * x)) @ profile.values * grid.spacing
    return chi.reshape(omega.shape)


def transfer_function(profile: AbsorptionProfile, gamma: float, length: float, omega) -> np.ndarray:
    """Complex transfer function ``H(omega)`` of a medium of length ``length``.

    Args:
        profile: absorption profile; periodic grids use the exact periodized kernel,
            open grids integrate over the sampled support only.
        gamma: homogeneous half-width (rad/s).
        length: medium length (m).
        omega: a :class:`FrequencyGrid` or an array of angular frequencies.
    """
    if not gamma > 0:
        raise ConfigurationError("gamma must be positive")
    if profile.grid.spacing > gamma:
        raise ResolutionError(
            f"profile spacing {profile.grid.spacing:.4g} rad/s is coarser than gamma={gamma:.4g} rad/s"
        )
    if length < 0:
        raise ConfigurationError("length must be non-negative")
    omega = omega.points if isinstance(omega, FrequencyGrid) else np.asarray(omega, dtype=float)
    if profile.is_periodic:
        chi = _periodic_chi(profile, gamma, omega)
    else:
        chi = _open_chi(profile, gamma, omega)
    return np.exp(-length / (2 * np.pi) * chi)


def transfer_on_pulse(profile: AbsorptionProfile, gamma: float, length: float, pulse: ProbePulse) -> np.ndarray:
    """``H`` evaluated at the pulse's FFT frequencies (FFT order)."""
    return transfer_function(profile, gamma, length, pulse.angular_frequencies() + pulse.carrier_offset)


def propagate(pulse: ProbePulse, H: np.ndarray, p_max: int = 4) -> EchoTrain:
    """Filter the pulse by ``H`` (FFT order) and extract the echo train.

    Echo ``p`` is measured in a gate of width T centred on ``t0 + pT`` as the
    overlap with the delayed input template divided by the template energy.
    """
    H = np.asarray(H)
    if H.shape != pulse.envelope.shape:
        raise ConfigurationError("H must be sampled on the pulse's FFT frequencies")
    S = pulse.samples_per_period
    if abs(S * pulse.dt - pulse.period_time) > 1e-9 * pulse.period_time:
        raise ConfigurationError("comb delay T is not a whole number of time samples")
    n = pulse.n_samples
    if (p_max + 2) * S > n:
        raise ConfigurationError("time window too short for the requested echo orders")

    spec = pulse.spectrum()
    out = np.fft.fft(spec * H) / (n * pulse.dt)

    template = pulse.envelope
    t_energy = float(np.sum(np.abs(template) ** 2))
    if t_energy == 0:
        raise ConfigurationError("probe pulse has zero energy")
    c = int(round(pulse.center / pulse.dt))
    idx = np.arange(n)
    amps = np.empty(p_max + 1, dtype=complex)
    energies = np.empty(p_max + 1)
    for p in range(p_max + 1):
        lo, hi = c + p * S - S // 2, c + p * S + S - S // 2
        gate = (idx >= lo) & (idx < hi)
        shifted = np.roll(template, p * S)
        amps[p] = np.sum(out[gate] * np.conj(shifted[gate])) / t_energy
        energies[p] = float(np.sum(np.abs(out[gate]) ** 2)) / t_energy
    start = int(round(pulse.start / pulse.dt))
    pre = float(np.sum(np.abs(out[:start]) ** 2) * pulse.dt)
    return EchoTrain(pulse.times, out, amps, energies, pulse.energy(),
                     float(np.sum(np.abs(out) ** 2) * pulse.dt), pre)


def echo_amplitudes_ode(coeffs: FourierCoefficients, length: float, orders: int,
                        n_steps: int = 2000, check: bool = True) -> np.ndarray:
    """Integrate the echo-amplitude chain along z with classical RK4.

    ``d a_p / dz = -(alpha_0 / 2) a_p - sum_{m=1..p} alpha_{-m} a_{p-m}``,
    ``a_0(0) = 1``, ``a_p(0) = 0``. Returns ``[a_0(L), ..., a_orders(L)]``.
    With ``check`` the integration is repeated at half the step and must agree
    to 1e-8, otherwise :class:`NumericalError` is raised.
    """
    if orders < 0 or orders > coeffs.n_max:
        raise ConfigurationError(f"need coefficients through order {orders}, have {coeffs.n_max}")
    if length < 0:
        raise ConfigurationError("length must be non-negative")
    a_minus = np.array([coeffs[-m] for m in range(orders + 1)])
    a0 = coeffs.alpha0

    def rhs(a):
        d = -0.5 * a0 * a
        for p in range(1, orders + 1):
            d[p] -= np.dot(a_minus[1:p + 1], a[p - 1::-1][:p])
        return d

    def run(steps):
        h = length / steps
        a = np.zeros(orders + 1, dtype=complex)
        a[0] = 1.0
        for _ in range(steps):
            k1 = rhs(a)
            k2 = rhs(a + 0.5 * h * k1)
            k3 = rhs(a + 0.5 * h * k2)
            k4 = rhs(a + h * k3)
            a = a + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return a

    result = run(n_steps)
    if check and length > 0:
        fine = run(2 * n_steps)
        err = np.max(np.abs(fine - result))
        if err > 1e-8:
            raise NumericalError(f"echo ODE step check failed: halving the step changed a_p by {err:.2e}")
        result = fine
    return result


def observed_coefficients(profile: AbsorptionProfile, gamma: float, n_max: int) -> FourierCoefficients:
    """Fourier coefficients of the absorption seen through the homogeneous line."""
    from .spectral import fourier_coefficients

    return fourier_coefficients(lorentzian_convolve(profile, gamma=gamma), n_max)


def energy_law_check(pulse: ProbePulse, profile: AbsorptionProfile, gamma: float, length: float) -> float:
    """Max relative deviation between the propagated power spectrum and
    ``|input|^2 exp(-(alpha (x) Lhat) L)``.

    The expected filter comes from the circular FFT convolution of the profile
    on its own grid, so the pulse frequencies must land on profile grid points.
    """
    if not profile.is_periodic:
        raise ConfigurationError("energy-law check needs a periodic profile")
    omega = pulse.angular_frequencies() + pulse.carrier_offset
    grid = profile.grid
    pos = np.mod(omega - grid.delta_min, grid.span) / grid.spacing
    k = np.round(pos).astype(int) % grid.n_points
    if np.max(np.abs(pos - np.round(pos))) > 1e-6:
        raise ResolutionError("pulse frequencies are not commensurate with the profile grid")
    smoothed = lorentzian_convolve(profile.values, grid, gamma, boundary="periodic")
    expected_filter = np.exp(-smoothed[k] * length)

    H = transfer_on_pulse(profile, gamma, length, pulse)
    train = propagate(pulse, H, p_max=1)
    spec_in = pulse.spectrum()
    spec_out = np.fft.ifft(train.output) * pulse.n_samples * pulse.dt
    pin = np.abs(spec_in) ** 2
    mask = pin >= 1e-6 * pin.max()
    if not mask.any():
        raise NumericalError("pulse spectrum is empty")
    measured = np.abs(spec_out[mask]) ** 2 / pin[mask]
    return float(np.max(np.abs(measured / expected_filter[mask] - 1.0)))
