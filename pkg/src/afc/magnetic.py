"""Zeeman side structure, matching fields and superhyperfine broadening.

Under a field B the ground and excited doublets split by ``Delta_g = delta_g B``
and ``Delta_e = delta_e B``. Light at one frequency then addresses four
transitions, so the preparation spectrum burns side holes at ``+-Delta_e`` and
creates anti-holes at ``+-Delta_g`` and ``+-(Delta_g - Delta_e)`` where the
shelved population re-appears. Slopes are in Hz/G and fields in gauss; the
returned shifts are angular frequencies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError
from .pulses import PulseSequence, sequence_spectrum
from .pumping import PumpConfig, comb_figures, net_pumping_rate, pump_grid, steady_state_absorption
from .spectral import AbsorptionProfile, FrequencyGrid, central_period

TWO_PI = 2 * math.pi


class ReplicaClippedWarning(UserWarning):
    """A shifted replica of the pump spectrum extends beyond the grid."""


@dataclass(frozen=True)
class LevelStructure:
    """Field and splitting slopes.

    Attributes:
        B: magnetic field (G).
        delta_g_per_G, delta_e_per_G: ground and excited Zeeman slopes (Hz/G).
        delta_S_per_G: superhyperfine slope (Hz/G).
        zeeman_lifetime_threshold_G: below this field the shelving lifetime is
            too short for a comb to survive and the efficiency is reported as 0.
    """

    B: float
    delta_g_per_G: float
    delta_e_per_G: float
    delta_S_per_G: float = 0.0
    zeeman_lifetime_threshold_G: float = 0.0

    def __post_init__(self):
        if self.B < 0:
            raise ConfigurationError("field B must be non-negative")
        if min(self.delta_g_per_G, self.delta_e_per_G, self.delta_S_per_G) < 0:
            raise ConfigurationError("splitting slopes must be non-negative")
        if self.zeeman_lifetime_threshold_G < 0:
            raise ConfigurationError("threshold field must be non-negative")

    @classmethod
    def tm_yag(cls, B: float, threshold_G: float = 50.0) -> "LevelStructure":
        """Tm:YAG slopes for a field along the crystal axis used in the measurements."""
        return cls(B, 28e3, 6.0e3, 1.05e3, threshold_G)

    def at(self, B: float) -> "LevelStructure":
        return replace(self, B=B)

    @property
    def Delta_g(self) -> float:
        return TWO_PI * self.delta_g_per_G * self.B

    @property
    def Delta_e(self) -> float:
        return TWO_PI * self.delta_e_per_G * self.B

    @property
    def superhyperfine_splitting(self) -> float:
        return TWO_PI * self.delta_S_per_G * self.B


@dataclass(frozen=True)
class SideComponent:
    shift: float
    sign: int
    weight: float
    kind: str


@dataclass(frozen=True)
class SideStructureSpec:
    components: tuple[SideComponent, ...]

    def __post_init__(self):
        for c in self.components:
            if c.weight < 0:
                raise ConfigurationError("side-structure weights must be non-negative")
            if c.sign not in (-1, 1):
                raise ConfigurationError("component sign must be -1 (hole) or +1 (anti-hole)")
        shifts = sorted((c.shift, c.sign, c.weight) for c in self.components)
        mirrored = sorted((-s, g, w) for s, g, w in shifts)
        if not np.allclose(np.array(shifts), np.array(mirrored), rtol=0, atol=1e-9 * (1 + max(abs(s[0]) for s in shifts))):
            raise ConfigurationError("side structure must be symmetric about zero")

    @classmethod
    def central_only(cls) -> "SideStructureSpec":
        return cls((SideComponent(0.0, -1, 1.0, "hole"),))


def side_structure(levels: LevelStructure, hole_weight: float = 1.0, antihole_weight: float = 0.5) -> SideStructureSpec:
    """Central hole, side holes at +-Delta_e and anti-holes at +-Delta_g, +-(Delta_g - Delta_e)."""
    dg, de = levels.Delta_g, levels.Delta_e
    comps = [
        SideComponent(0.0, -1, 1.0, "hole"),
        SideComponent(de, -1, hole_weight, "hole"),
        SideComponent(-de, -1, hole_weight, "hole"),
        SideComponent(dg, 1, antihole_weight, "antihole"),
        SideComponent(-dg, 1, antihole_weight, "antihole"),
        SideComponent(dg - de, 1, antihole_weight, "antihole"),
        SideComponent(-(dg - de), 1, antihole_weight, "antihole"),
    ]
    return SideStructureSpec(tuple(comps))


@dataclass(frozen=True)
class EffectivePump:
    """Pump (burning) and refill channels of the side-structure superposition."""

    pump: np.ndarray
    refill: np.ndarray

    @property
    def signed(self) -> np.ndarray:
        """Hole replicas counted positive (they burn level 1), anti-holes negative."""
        return self.pump - self.refill


def _shifted(values: np.ndarray, grid: FrequencyGrid, shift: float) -> tuple[np.ndarray, float]:
    """``values(delta - shift)`` by linear interpolation, zero outside; also
    returns the fraction of the replica's weight that fell off the grid."""
    if shift == 0:
        return values.copy(), 0.0
    x = grid.points
    out = np.interp(x - shift, x, values, left=0.0, right=0.0)
    total = values.sum()
    lost = 0.0
    if total > 0:
        lost = max(0.0, 1.0 - out.sum() / total)
    return out, lost


def effective_pump_spectrum(base_spectrum, grid: FrequencyGrid, spec: SideStructureSpec,
                            warn: bool = True) -> EffectivePump:
    """Superpose shifted, weighted copies of the pump spectrum.

    Holes (sign -1) add to the channel that empties level 1, anti-holes
    (sign +1) to the channel that refills it. Replica content shifted beyond
    the grid is dropped; a :class:`ReplicaClippedWarning` reports it.
    """
    base = np.asarray(base_spectrum, dtype=float)
    if base.shape != (grid.n_points,):
        raise ConfigurationError("base spectrum does not match the grid")
    pump = np.zeros_like(base)
    refill = np.zeros_like(base)
    worst = 0.0
    for c in spec.components:
        if c.weight == 0:
            continue
        shifted, lost = _shifted(base, grid, c.shift)
        worst = max(worst, lost)
        if c.sign < 0:
            pump += c.weight * shifted
        else:
            refill += c.weight * shifted
    if warn and worst > 1e-3:
        warnings.warn(f"side-structure replica clipped: {worst:.1%} of its weight lies outside the grid",
                      ReplicaClippedWarning, stacklevel=2)
    return EffectivePump(pump, refill)


@dataclass(frozen=True)
class TradeOff:
    B: float
    p: int
    p_prime: int
    cost: float
    Delta_e_T: float
    Delta_g_T: float


@dataclass(frozen=True)
class MatchingResult:
    side_comb_fields: tuple[float, ...]
    trade_offs: tuple[TradeOff, ...]

    @property
    def best_trade_off(self) -> TradeOff:
        return self.trade_offs[0]


def matching_fields(levels: LevelStructure, period: float, p_max: int = 3, p_prime_max: int = 12,
                    max_field_G: float | None = None) -> MatchingResult:
    """Fields where side combs fall in register with the main comb.

    ``B_p = p / (T delta_e)`` puts the side combs on top of the main comb.
    The joint condition also asks the anti-combs to sit half-way between
    teeth, ``Delta_g T = p' + 1/2``. For each ``(p, p')`` the least-squares
    field of the two conditions (in units of 1/T) is returned with its
    residual, sorted by residual.
    """
    if levels.delta_e_per_G <= 0:
        raise ConfigurationError("excited-state slope must be positive")
    if period <= 0:
        raise ConfigurationError("period must be positive")
    se = levels.delta_e_per_G * period     # Delta_e T per gauss (cycles)
    sg = levels.delta_g_per_G * period
    fields = tuple(p / se for p in range(1, p_max + 1))
    cands = []
    for p in range(1, p_max + 1):
        for q in range(0, p_prime_max + 1):
            B = (se * p + sg * (q + 0.5)) / (se**2 + sg**2)
            if max_field_G is not None and B > max_field_G:
                continue
            cost = math.hypot(se * B - p, sg * B - (q + 0.5))
            cands.append(TradeOff(B, p, q, cost, se * B, sg * B))
    cands.sort(key=lambda c: (c.cost, c.B))
    return MatchingResult(fields, tuple(cands))


def superhyperfine_broaden(profile: AbsorptionProfile, levels: LevelStructure,
                           satellite_weight: float = 0.5, site_spread: float = 0.0) -> AbsorptionProfile:
    """Convolve the comb with the superhyperfine doublet.

    The kernel keeps ``1 - satellite_weight`` of each feature in place and
    moves ``satellite_weight / 2`` to each of ``+-s`` with ``s = delta_S B``.
    ``site_spread`` > 0 gives the satellites a Lorentzian width of
    ``site_spread * s`` (half-width), representing a spread of ligand
    couplings around the effective slope. The convolution is done with the
    FFT over the profile's own grid (circular) and the result is clamped to
    ``[0, alpha_M]``.
    """
    if not 0 <= satellite_weight <= 1:
        raise ConfigurationError("satellite_weight must lie in [0, 1]")
    if site_spread < 0:
        raise ConfigurationError("site_spread must be non-negative")
    s = levels.superhyperfine_splitting
    if s == 0 or satellite_weight == 0:
        return profile
    grid = profile.grid
    tau = TWO_PI * np.fft.rfftfreq(grid.n_points, grid.spacing)
    kernel = (1 - satellite_weight) + satellite_weight * np.cos(tau * s) * np.exp(-site_spread * s * tau)
    out = np.fft.irfft(np.fft.rfft(profile.values) * kernel, grid.n_points)
    return profile.with_values(np.clip(out, 0.0, profile.alpha_max))


@dataclass(frozen=True)
class FieldPoint:
    B: float
    eta: float
    mean_transmission: float
    alpha0_L: float
    alpha1_L: float


def field_sweep_grid(period_time: float, max_shift: float, points_per_period: int = 1024) -> FrequencyGrid:
    """Open grid wide enough that the central period sees every replica up to ``max_shift``."""
    P = TWO_PI / period_time
    n_periods = 2 * int(math.ceil((max_shift + 4 * P) / P / 2)) + 16
    return pump_grid(period_time, n_periods, points_per_period)


def efficiency_vs_field(seq: PulseSequence, pump: PumpConfig, levels: LevelStructure, fields,
                        alpha_max_L: float, grid: FrequencyGrid | None = None,
                        hole_weight: float = 1.0, antihole_weight: float = 0.5,
                        satellite_weight: float = 0.5, site_spread: float = 0.0) -> list[FieldPoint]:
    """Comb efficiency as a function of field.

    For each field: side structure, effective pump, net pumping rate,
    steady-state comb, superhyperfine broadening of the central period and the
    efficiency from its Fourier coefficients. Fields below the lifetime
    threshold report zero efficiency with the unpumped transmission.
    """
    fields = np.asarray(fields, dtype=float)
    if fields.ndim != 1 or np.any(np.diff(fields) <= 0):
        raise ConfigurationError("field grid must be strictly ascending")
    if np.any(fields < 0):
        raise ConfigurationError("fields must be non-negative")
    T = seq.spacing
    grid = grid if grid is not None else pump_grid(T, 32, 1024)
    _, power = sequence_spectrum(seq, grid.points)
    out = []
    for B in fields:
        lv = levels.at(float(B))
        if B < lv.zeeman_lifetime_threshold_G:
            out.append(FieldPoint(float(B), 0.0, math.exp(-alpha_max_L), alpha_max_L, 0.0))
            continue
        spec = side_structure(lv, hole_weight, antihole_weight)
        with warnings.catch_warnings():
            # replicas pushed off a finite grid no longer reach the central period
            warnings.simplefilter("ignore", ReplicaClippedWarning)
            eff = effective_pump_spectrum(power, grid, spec)
        R = net_pumping_rate(eff.pump, eff.refill, grid, pump)
        profile = steady_state_absorption(R, grid, pump, alpha_max_L)
        core = central_period(profile, T)
        core = superhyperfine_broaden(core, lv, satellite_weight, site_spread)
        tr, eta, a0L, a1L = comb_figures(core, T)
        out.append(FieldPoint(float(B), eta, tr, a0L, a1L))
    return out
