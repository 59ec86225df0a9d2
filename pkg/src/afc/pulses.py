"""Preparation pulse trains and their spectra.

A sequence is a set of short sub-pulses at centres ``t_k`` that are integer
multiples of the spacing ``T``. Amplitudes are dimensionless pulse areas: a
sub-pulse of amplitude ``A`` carries area ``A`` radians, so the field spectrum

    E(omega) = sum_k A_k * s(omega) * exp(i omega t_k)

is dimensionless, with ``s(0) = 1`` the normalized sub-pulse spectrum. The
analysis convention ``exp(+i omega t)`` matches the rest of the package.

Sinc-weighted trains ("S-sequences") produce periodic square bands; a pulse
pair ("PP") produces cosine fringes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .spectral import FrequencyGrid

SHAPES = ("rect", "gaussian")
CONVENTIONS = ("full_width", "half_width")


@dataclass(frozen=True)
class Pulse:
    center_time: float
    amplitude: complex
    duration: float
    shape: str = "rect"


@dataclass(frozen=True)
class PulseSequence:
    """A preparation pattern.

    Attributes:
        pulses: sub-pulses ordered by centre time.
        spacing: T, the grid on which pulse centres sit (s).
        pattern_duration: T_p, duration of one repetition of the pattern (s).
        band_half_width: half-width of the synthesized square bands (rad/s),
            or None for sequences that are not S-type.
        label: short name used in reports.
    """

    pulses: tuple[Pulse, ...]
    spacing: float
    pattern_duration: float
    band_half_width: float | None = None
    label: str = ""

    def __post_init__(self):
        if not self.pulses:
            raise ConfigurationError("a pulse sequence needs at least one pulse")
        if self.spacing <= 0:
            raise ConfigurationError("pulse spacing must be positive")
        for p in self.pulses:
            k = p.center_time / self.spacing
            if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
                raise ConfigurationError(f"pulse centre {p.center_time:.6g} s is not a multiple of T")
            if abs(p.amplitude) > 1 + 1e-12:
                raise ConfigurationError("pulse amplitudes must satisfy |A| <= 1")
            if p.duration <= 0:
                raise ConfigurationError("pulse durations must be positive")
            if p.shape not in SHAPES:
                raise ConfigurationError(f"unknown pulse shape '{p.shape}'")
        if self.span > self.pattern_duration * (1 + 1e-12):
            raise ConfigurationError(
                f"sequence span {self.span:.6g} s exceeds the pattern duration {self.pattern_duration:.6g} s"
            )

    @property
    def centers(self) -> np.ndarray:
        return np.array([p.center_time for p in self.pulses])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([p.amplitude for p in self.pulses], dtype=complex)

    @property
    def span(self) -> float:
        """Time occupied by the train: one slot of width T per pulse."""
        c = self.centers
        return float(c.max() - c.min() + self.spacing) if len(self.pulses) > 1 else self.pulses[0].duration

    def __len__(self):
        return len(self.pulses)


def sinc(u):
    """``sin(u)/u`` with ``sinc(0) = 1`` (unnormalized)."""
    return np.sinc(np.asarray(u) / np.pi)


def s_sequence_amplitudes(x: float, k_max: int) -> np.ndarray:
    """``P(k) = sinc(k x)`` for ``k = -k_max .. k_max``."""
    k = np.arange(-k_max, k_max + 1)
    return sinc(k * x)


def make_s_sequence(gamma_width: float, period: float, k_max: int = 30, pulse_duration: float = 300e-9,
                    pattern_duration: float = 100e-6, convention: str = "full_width",
                    shape: str = "rect", label: str | None = None) -> PulseSequence:
    """Sinc-weighted pulse train whose spectrum is a periodic square band.

    With ``convention='full_width'`` the amplitudes are ``sinc(k Gamma T / 2)`` and
    the bands have half-width ``Gamma/2`` (``Gamma`` acts as the full width).
    With ``convention='half_width'`` they are ``sinc(k Gamma T)`` and the bands
    have half-width ``Gamma``. Negative amplitudes are stored as a phase of pi.
    """
    if convention not in CONVENTIONS:
        raise ConfigurationError(f"unknown sinc convention '{convention}'")
    if period <= 0:
        raise ConfigurationError("period must be positive")
    u = gamma_width * period
    x = u / 2 if convention == "full_width" else u
    # the band half-width x/T must leave a gap between neighbouring bands
    if not 0 < x < math.pi:
        raise ConfigurationError(f"S-sequence band half-width times T must lie in (0, pi), got {x:.6g}")
    if k_max < 1:
        raise ConfigurationError("k_max must be at least 1")
    amps = s_sequence_amplitudes(x, k_max)
    pulses = tuple(
        Pulse((k + k_max) * period, complex(a), pulse_duration, shape)
        for k, a in zip(range(-k_max, k_max + 1), amps)
    )
    if label is None:
        label = f"S(x={x:.4g})"
    return PulseSequence(pulses, period, pattern_duration, x / period, label)


def make_s_sequence_for_band(band_half_width: float, period: float, **kwargs) -> PulseSequence:
    """S-sequence whose bands have the given half-width, whatever the convention."""
    convention = kwargs.get("convention", "full_width")
    gamma = 2 * band_half_width if convention == "full_width" else band_half_width
    return make_s_sequence(gamma, period, **kwargs)


def make_pp_sequence(period: float, pulse_duration: float = 300e-9, pattern_duration: float = 100e-6,
                     shape: str = "rect") -> PulseSequence:
    """Two equal pulses separated by ``period``; the spectrum is ``1 + cos(delta T)`` fringes."""
    if not period > 0:
        raise ConfigurationError("pulse-pair separation must be positive")
    pulses = (Pulse(0.0, 1.0 + 0j, pulse_duration, shape), Pulse(period, 1.0 + 0j, pulse_duration, shape))
    return PulseSequence(pulses, period, pattern_duration, None, "PP")


def subpulse_spectrum(omega, duration: float, shape: str = "rect") -> np.ndarray:
    """Normalized spectrum of one sub-pulse of unit area."""
    omega = np.asarray(omega, dtype=float)
    if shape == "rect":
        return sinc(omega * duration / 2)
    if shape == "gaussian":
        sigma = duration / (2 * math.sqrt(math.log(2)))
        return np.exp(-0.5 * (omega * sigma) ** 2)
    raise ConfigurationError(f"unknown pulse shape '{shape}'")


def array_factor(seq: PulseSequence, omega) -> np.ndarray:
    """``sum_k A_k exp(i omega t_k)``, the train's interference term."""
    omega = np.asarray(omega, dtype=float)
    return np.exp(1j * np.multiply.outer(omega, seq.centers)) @ seq.amplitudes


def sequence_spectrum(seq: PulseSequence, grid) -> tuple[np.ndarray, np.ndarray]:
    """Exact field spectrum ``E(omega)`` and power spectrum ``|E|^2``.

    ``grid`` is a :class:`FrequencyGrid` (which must cover ``[-pi/T, pi/T]``)
    or an array of angular frequencies.
    """
    if isinstance(grid, FrequencyGrid):
        half = math.pi / seq.spacing
        if grid.delta_min > -half * (1 + 1e-12) or grid.delta_max < half * (1 - 1e-12):
            raise ConfigurationError("spectrum grid must span at least [-pi/T, pi/T]")
        omega = grid.points
    else:
        omega = np.asarray(grid, dtype=float)
    field = np.zeros(omega.shape, dtype=complex)
    groups: dict[tuple[float, str], list[Pulse]] = {}
    for p in seq.pulses:
        groups.setdefault((p.duration, p.shape), []).append(p)
    for (duration, shape), pulses in groups.items():
        t = np.array([p.center_time for p in pulses])
        a = np.array([p.amplitude for p in pulses], dtype=complex)
        af = np.exp(1j * np.multiply.outer(omega, t)) @ a
        field += subpulse_spectrum(omega, duration, shape) * af
    return field, np.abs(field) ** 2


def band_mask(omega, band_half_width: float, period: float) -> np.ndarray:
    """Points whose detuning, folded into one period, lies inside the band."""
    P = 2 * math.pi / period
    x = (np.asarray(omega) + P / 2) % P - P / 2
    return np.abs(x) <= band_half_width


def in_band_fraction(seq: PulseSequence, n_points: int = 4096) -> float:
    """Fraction of the train's spectral energy (array factor only) that falls
    inside the target bands over the central period."""
    if seq.band_half_width is None:
        raise ConfigurationError("sequence has no target band")
    T = seq.spacing
    grid = FrequencyGrid.periodic(T, n_points)
    power = np.abs(array_factor(seq, grid.points)) ** 2
    inside = band_mask(grid.points, seq.band_half_width, T)
    return float(power[inside].sum() / power.sum())


def measured_band_half_width(seq: PulseSequence, n_points: int = 4096) -> tuple[float, float]:
    """Half-width of the central band read off the synthesized spectrum.

    The edge is where the array-factor amplitude crosses half of its plateau
    value (the plateau is taken as the median over the inner half of the band).
    Returns ``(half_width, grid_bin)`` in rad/s.
    """
    T = seq.spacing
    grid = FrequencyGrid.periodic(T, n_points)
    amp = np.abs(array_factor(seq, grid.points))
    x = grid.points
    nominal = seq.band_half_width if seq.band_half_width is not None else math.pi / (2 * T)
    plateau = float(np.median(amp[np.abs(x) <= nominal / 2]))
    half = plateau / 2
    right = x >= 0
    xr, ar = x[right], amp[right]
    below = np.flatnonzero(ar < half)
    if below.size == 0:
        raise ConfigurationError("no band edge found in the central period")
    i = below[0]
    # linear interpolation between the last point above and first below
    x0, x1, a0, a1 = xr[i - 1], xr[i], ar[i - 1], ar[i]
    edge = x0 + (a0 - half) * (x1 - x0) / (a0 - a1)
    return float(edge), grid.spacing


def write_sequence_csv(seq: PulseSequence, path) -> None:
    """One record per pulse: center_time_s, amplitude, phase_rad, duration_s."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["center_time_s", "amplitude", "phase_rad", "duration_s"])
        for p in seq.pulses:
            w.writerow([repr(p.center_time), repr(abs(p.amplitude)),
                        repr(float(np.angle(p.amplitude)) % (2 * math.pi) if p.amplitude != 0 else 0.0),
                        repr(p.duration)])


def read_sequence_csv(path, spacing: float, pattern_duration: float, shape: str = "rect",
                      label: str = "imported") -> PulseSequence:
    pulses = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            amp = float(row["amplitude"]) * np.exp(1j * float(row["phase_rad"]))
            pulses.append(Pulse(float(row["center_time_s"]), complex(amp), float(row["duration_s"]), shape))
    pulses.sort(key=lambda p: p.center_time)
    return PulseSequence(tuple(pulses), spacing, pattern_duration, None, label)
