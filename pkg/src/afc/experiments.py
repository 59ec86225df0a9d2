"""Declarative experiments: configuration parsing, validation, runs and fits.

Configuration files are JSON objects whose keys carry their units
(``period_us``, ``gamma_khz``, ``duration_ns``, ``field_gauss`` ...).
Frequencies given in kHz/MHz are ordinary frequencies and are converted to
angular frequencies internally. Every run validates the whole configuration
before computing anything and writes its tables only once all of them exist.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from . import __version__
from .comb import (CombSpec, build_comb_profile, efficiency_from_coefficients, lorentzian_comb_optimal_width,
                   optimal_report, square_comb_optimal_width)
from .echo import echo_amplitudes_ode, make_probe_pulse, observed_coefficients, propagate, transfer_on_pulse
from .errors import ConfigurationError, ValidationError
from .magnetic import LevelStructure, efficiency_vs_field, matching_fields
from .pulses import PulseSequence, make_pp_sequence, make_s_sequence_for_band, sequence_spectrum
from .pumping import (PumpConfig, absorption_ratio, efficiency_vs_power_curve, predict_comb, pump_grid,
                      pumping_rate)
from .spectral import AbsorptionProfile, FrequencyGrid

TWO_PI = 2 * math.pi

EXPERIMENTS = {
    "fig1_shapes": "optimal square and Lorentzian comb profiles over one period",
    "fig1b_curve": "optimal efficiency versus optical depth for square and Lorentzian combs",
    "fig2_spectrum": "field spectra |E(omega)| of preparation sequences, plus pulse tables",
    "fig6_power_curves": "efficiency versus mean transmission as the pump power is scanned",
    "fig5_field_sweep": "efficiency versus magnetic field with Zeeman side structure",
    "custom": "one comb evaluated by closed form, echo ODE and propagation, plus random-comb cross-checks",
}

CONVENTIONS = {
    "fourier_sign": "alpha(delta) = sum_n alpha_n exp(-i n delta T)",
    "lorentzian_kernel": "unit area",
    "optimal_efficiency_form": "efficiency formula at Gamma_opt T = arctan(2 pi / alpha_M L), exponent alpha_M L Gamma T / pi",
    "pump_rate_contrast": "exp(-gamma T)",
    "uniform_comb": "pump spectrum assumed uniform along the crystal (no depletion)",
}


# --------------------------------------------------------------------------- parsing


class _Reader:
    """Pulls typed values out of a config dict and records every problem."""

    def __init__(self, data, problems, prefix=""):
        self.data = data if isinstance(data, dict) else {}
        self.problems = problems
        self.prefix = prefix
        if not isinstance(data, dict):
            problems.append(f"{prefix or 'config'} must be an object")

    def _name(self, key):
        return f"{self.prefix}{key}"

    def section(self, key, required=True):
        if key not in self.data:
            if required:
                self.problems.append(f"missing section '{self._name(key)}'")
            return _Reader({}, [], self._name(key) + ".")
        return _Reader(self.data[key], self.problems, self._name(key) + ".")

    def has(self, key):
        return key in self.data

    def number(self, key, default=None, lo=None, hi=None, lo_open=False, required=None):
        required = default is None if required is None else required
        if key not in self.data:
            if required:
                self.problems.append(f"missing '{self._name(key)}'")
            return default
        v = self.data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.problems.append(f"'{self._name(key)}' must be a finite number")
            return default
        if lo is not None and (v < lo or (lo_open and v == lo)):
            self.problems.append(f"'{self._name(key)}' must be {'>' if lo_open else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            self.problems.append(f"'{self._name(key)}' must be <= {hi}, got {v}")
        return float(v)

    def integer(self, key, default=None, lo=None):
        v = self.number(key, default, lo)
        if v is not None and v != int(v):
            self.problems.append(f"'{self._name(key)}' must be an integer")
        return None if v is None else int(v)

    def choice(self, key, options, default=None):
        if key not in self.data:
            if default is None:
                self.problems.append(f"missing '{self._name(key)}'")
            return default
        v = self.data[key]
        if v not in options:
            self.problems.append(f"'{self._name(key)}' must be one of {list(options)}, got {v!r}")
            return default
        return v

    def numbers(self, key, default=None, lo=None, lo_open=False):
        if key not in self.data:
            if default is None:
                self.problems.append(f"missing '{self._name(key)}'")
            return default
        v = self.data[key]
        if not isinstance(v, list) or not v or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in v):
            self.problems.append(f"'{self._name(key)}' must be a non-empty list of numbers")
            return default
        if lo is not None and any(x < lo or (lo_open and x == lo) for x in v):
            self.problems.append(f"'{self._name(key)}' entries must be {'>' if lo_open else '>='} {lo}")
        return [float(x) for x in v]

    def strings(self, key, options, default=None):
        if key not in self.data:
            if default is None:
                self.problems.append(f"missing '{self._name(key)}'")
            return default
        v = self.data[key]
        if not isinstance(v, list) or not v or any(x not in options for x in v):
            self.problems.append(f"'{self._name(key)}' must be a non-empty list drawn from {list(options)}")
            return default
        return list(v)

    def flag(self, key, default=False):
        v = self.data.get(key, default)
        if not isinstance(v, bool):
            self.problems.append(f"'{self._name(key)}' must be true or false")
            return default
        return v


SEQUENCE_NAMES = ("PP", "S1/2", "S1/3", "S1/5")


@dataclass(frozen=True)
class PulseSettings:
    duration: float
    shape: str
    pattern_duration: float
    k_max: int
    convention: str


def _read_pulse(r: _Reader) -> PulseSettings:
    p = r.section("pulse")
    return PulseSettings(
        duration=(p.number("duration_ns", lo=0, lo_open=True) or 300) * 1e-9,
        shape=p.choice("shape", ("rect", "gaussian"), "rect"),
        pattern_duration=(p.number("pattern_duration_us", lo=0, lo_open=True) or 100) * 1e-6,
        k_max=p.integer("k_max", 30, lo=1),
        convention=p.choice("sinc_convention", ("full_width", "half_width"), "full_width"),
    )


def build_sequence(name: str, period: float, pulse: PulseSettings) -> PulseSequence:
    if name == "PP":
        return make_pp_sequence(period, pulse.duration, pulse.pattern_duration, pulse.shape)
    d = int(name.split("/")[1])
    return make_s_sequence_for_band(math.pi / (d * period), period, k_max=pulse.k_max,
                                    pulse_duration=pulse.duration, pattern_duration=pulse.pattern_duration,
                                    convention=pulse.convention, shape=pulse.shape, label=name)


def _read_pump(r: _Reader, period: float, gamma: float, problems) -> PumpConfig | None:
    p = r.section("pump")
    T1 = p.number("T1_ms", lo=0, lo_open=True)
    TZ = p.number("TZ_ms", lo=0, lo_open=True)
    br = p.number("branching_r", lo=0, hi=1)
    ps = p.number("power_scale", 1.0, lo=0, required=False)
    norm = p.choice("normalization", ("two_level_ground", "single"), "two_level_ground")
    pulse_tp = r.section("pulse", required=False).number("pattern_duration_us", 100.0, required=False)
    if None in (T1, TZ, br, gamma):
        return None
    try:
        return PumpConfig(T1 * 1e-3, TZ * 1e-3, br, pulse_tp * 1e-6, gamma, ps, norm)
    except ConfigurationError as exc:
        problems.extend(f"pump: {msg}" for msg in str(exc).split("; "))
        return None


@dataclass
class ExperimentConfig:
    experiment: str
    output_dir: Path
    raw: dict
    seed: int = 0
    workers: int = 1
    settings: dict = field(default_factory=dict)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ValidationError([f"config file not found: {path}"])
    except json.JSONDecodeError as exc:
        raise ValidationError([f"config is not valid JSON: {exc}"])
    return data


def parse_config(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a raw config dict; raise :class:`ValidationError` listing all problems."""
    problems: list[str] = []
    if not isinstance(data, dict) or not data:
        raise ValidationError(["configuration is empty"])
    r = _Reader(data, problems)
    exp = r.choice("experiment", tuple(EXPERIMENTS))
    out = data.get("output_dir")
    if not isinstance(out, str) or not out:
        problems.append("missing 'output_dir'")
        out = "."
    out_path = Path(out)
    if base_dir is not None and not out_path.is_absolute():
        out_path = base_dir / out_path
    seed = r.integer("seed", 0, lo=0)
    workers = r.integer("workers", 1, lo=1)
    s: dict = {}
    if exp is not None:
        _PARSERS[exp](r, s, problems)
    if problems:
        raise ValidationError(problems)
    return ExperimentConfig(exp, out_path, data, seed, workers, s)


def _common_period(r, s):
    s["period"] = (r.number("period_us", lo=0, lo_open=True) or 1.5) * 1e-6


def _common_gamma(r, s):
    g = r.number("gamma_khz", lo=0, lo_open=True)
    s["gamma"] = None if g is None else TWO_PI * g * 1e3


def _parse_fig1_shapes(r, s, problems):
    _common_period(r, s)
    s["depths"] = r.numbers("alpha_max_L", [5.0, 20.0], lo=0, lo_open=True)
    s["points_per_period"] = r.integer("points_per_period", 512, lo=8)


def _parse_fig1b(r, s, problems):
    d = r.section("depths")
    lo = d.number("min", lo=0, lo_open=True)
    hi = d.number("max", lo=0, lo_open=True)
    n = d.integer("n", lo=2)
    if lo is not None and hi is not None and hi <= lo:
        problems.append("'depths.max' must exceed 'depths.min'")
    s["spacing"] = d.choice("spacing", ("log", "linear"), "log")
    s["depths"] = (lo, hi, n)


def _parse_fig2(r, s, problems):
    _common_period(r, s)
    s["sequences"] = r.strings("sequences", SEQUENCE_NAMES)
    s["pulse"] = _read_pulse(r)
    s["span_mhz"] = r.number("detuning_span_mhz", 6.0, lo=0, lo_open=True)
    s["n_points"] = r.integer("n_points", 4001, lo=16)
    if s["span_mhz"] is not None and s["period"] and s["span_mhz"] * 1e6 < 1 / s["period"]:
        problems.append("'detuning_span_mhz' must cover at least one comb period")


def _parse_power_grid(r, s, problems, key="power_grid"):
    g = r.section(key)
    lo, hi, n = g.number("min", lo=0, lo_open=True), g.number("max", lo=0, lo_open=True), g.integer("n", lo=3)
    if lo is not None and hi is not None and hi <= lo:
        problems.append(f"'{key}.max' must exceed '{key}.min'")
    s["powers"] = (lo, hi, n)


def _parse_grid(r, s, n_periods_default=16):
    g = r.section("grid", required=False)
    s["points_per_period"] = g.integer("points_per_period", 1024, lo=64)
    s["n_periods"] = g.integer("n_periods", n_periods_default, lo=2)


def _parse_fig6(r, s, problems):
    _common_period(r, s)
    _common_gamma(r, s)
    s["sequences"] = r.strings("sequences", SEQUENCE_NAMES)
    s["pulse"] = _read_pulse(r)
    s["depths"] = r.numbers("alpha_max_L", lo=0, lo_open=True)
    _parse_power_grid(r, s, problems)
    _parse_grid(r, s)
    s["pump"] = _read_pump(r, s["period"], s["gamma"], problems)


def _parse_fig5(r, s, problems):
    _common_period(r, s)
    _common_gamma(r, s)
    s["sequence"] = r.choice("sequence", SEQUENCE_NAMES, "PP")
    s["pulse"] = _read_pulse(r)
    s["depth"] = r.number("alpha_max_L", lo=0, lo_open=True)
    f = r.section("field_gauss")
    lo, hi, step = f.number("min", lo=0), f.number("max", lo=0), f.number("step", lo=0, lo_open=True)
    if lo is not None and hi is not None and hi <= lo:
        problems.append("'field_gauss.max' must exceed 'field_gauss.min'")
    s["fields"] = (lo, hi, step)
    lv = r.section("levels")
    s["levels"] = dict(
        delta_g=lv.number("delta_g_khz_per_G", lo=0), delta_e=lv.number("delta_e_khz_per_G", lo=0, lo_open=True),
        delta_S=lv.number("delta_S_khz_per_G", 0.0, lo=0, required=False),
        threshold=lv.number("threshold_gauss", 0.0, lo=0, required=False))
    w = r.section("weights", required=False)
    s["weights"] = dict(hole=w.number("hole", 1.0, lo=0), antihole=w.number("antihole", 0.5, lo=0),
                        satellite=w.number("superhyperfine_satellite", 0.5, lo=0, hi=1),
                        site_spread=w.number("superhyperfine_site_spread", 0.0, lo=0))
    pw = r.data.get("power_scale", "auto")
    if pw != "auto" and (isinstance(pw, bool) or not isinstance(pw, (int, float)) or not pw > 0):
        problems.append("'power_scale' must be 'auto' or a positive number")
    s["power"] = pw
    if pw == "auto":
        _parse_power_grid(r, s, problems, "auto_power_grid")
    _parse_grid(r, s, 32)
    s["pump"] = _read_pump(r, s["period"], s["gamma"], problems)


def _parse_custom(r, s, problems):
    _common_period(r, s)
    _common_gamma(r, s)
    c = r.section("comb")
    s["shape"] = c.choice("shape", ("square", "lorentzian"))
    s["depth"] = c.number("alpha_max_L", lo=0, lo_open=True)
    width = c.data.get("width_khz", "optimal")
    if width != "optimal" and (isinstance(width, bool) or not isinstance(width, (int, float)) or not width > 0):
        problems.append("'comb.width_khz' must be 'optimal' or a positive number")
    s["width"] = width
    p = r.section("probe", required=False)
    s["probe_duration"] = p.number("duration_ns", 450.0, lo=0, lo_open=True) * 1e-9
    s["probe_shape"] = p.choice("shape", ("rect", "gaussian"), "rect")
    s["n_samples"] = p.integer("n_samples", 2**16, lo=1024)
    s["window_periods"] = p.integer("window_periods", 512, lo=8)
    s["points_per_period"] = r.integer("points_per_period", 8192, lo=64)
    s["n_random"] = r.integer("n_random_combs", 0, lo=0)
    if s["probe_duration"] and s["period"] and s["probe_duration"] >= s["period"]:
        problems.append("probe duration must be shorter than the comb period")
    if s["n_samples"] and s["window_periods"] and s["n_samples"] % s["window_periods"]:
        problems.append("'probe.n_samples' must be a multiple of 'probe.window_periods'")
    if s["gamma"] and s["period"] and s["points_per_period"]:
        if TWO_PI / s["period"] / s["points_per_period"] > s["gamma"] / 4:
            problems.append("'points_per_period' too small to resolve gamma (spacing must be <= gamma/4)")
        if s["points_per_period"] % s["window_periods"]:
            problems.append("'points_per_period' must be a multiple of 'probe.window_periods'")


_PARSERS = {
    "fig1_shapes": _parse_fig1_shapes,
    "fig1b_curve": _parse_fig1b,
    "fig2_spectrum": _parse_fig2,
    "fig6_power_curves": _parse_fig6,
    "fig5_field_sweep": _parse_fig5,
    "custom": _parse_custom,
}


# --------------------------------------------------------------------------- tables


@dataclass
class Table:
    name: str
    header: list[str]
    rows: list[list]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _pmap(fn, items, workers):
    """Map preserving input order; uses processes when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _grid_values(lo, hi, n, spacing="log"):
    return np.logspace(math.log10(lo), math.log10(hi), n) if spacing == "log" else np.linspace(lo, hi, n)


def _run_fig1_shapes(cfg: ExperimentConfig):
    s = cfg.settings
    T = s["period"]
    grid = FrequencyGrid.periodic(T, s["points_per_period"])
    header = ["detuning_hz"]
    cols = [grid.points / TWO_PI]
    for aL in s["depths"]:
        sq = build_comb_profile(CombSpec("square", aL, 1.0, T, square_comb_optimal_width(aL, T)), grid)
        lw = lorentzian_comb_optimal_width(aL, T)
        lo = build_comb_profile(CombSpec("lorentzian", aL, 1.0, T, lw), grid)
        header += [f"square_alphaL_{aL:g}", f"lorentzian_alphaL_{aL:g}"]
        cols += [sq.values, lo.values]
    rows = [list(r) for r in zip(*cols)]
    return [Table("fig1_shapes", header, rows)], {}


def _fig1b_row(aL):
    sq = optimal_report("square", aL, 1.0)
    lo = optimal_report("lorentzian", aL, 1.0)
    return [aL, sq.eta, lo.eta, sq.width, lo.width]


def _run_fig1b(cfg: ExperimentConfig):
    lo, hi, n = cfg.settings["depths"]
    depths = _grid_values(lo, hi, n, cfg.settings["spacing"])
    rows = _pmap(_fig1b_row, depths, cfg.workers)
    header = ["alpha_max_L", "eta_square_opt", "eta_lorentzian_opt", "width_T_square", "width_T_lorentzian"]
    return [Table("fig1b_curve", header, rows)], {}


def _run_fig2(cfg: ExperimentConfig):
    s = cfg.settings
    T = s["period"]
    half = TWO_PI * s["span_mhz"] * 1e6 / 2
    omega = np.linspace(-half, half, s["n_points"])
    header = ["detuning_hz"]
    cols = [omega / TWO_PI]
    tables = []
    for name in s["sequences"]:
        seq = build_sequence(name, T, s["pulse"])
        field_, _ = sequence_spectrum(seq, omega)
        header.append(f"abs_field_{_slug(name)}")
        cols.append(np.abs(field_))
        tables.append(_pulse_table(seq, name))
    return [Table("fig2_spectrum", header, [list(r) for r in zip(*cols)])] + tables, {}


def _slug(name):
    return name.replace("/", "_")


def _pulse_table(seq: PulseSequence, name: str) -> Table:
    rows = []
    for p in seq.pulses:
        phase = float(np.angle(p.amplitude)) % TWO_PI if abs(p.amplitude) > 0 else 0.0
        rows.append([p.center_time, abs(p.amplitude), phase, p.duration])
    return Table(f"pulses_{_slug(name)}", ["center_time_s", "amplitude", "phase_rad", "duration_s"], rows)


def _fig6_task(args):
    name, aL, T, pulse, pump, powers, ppp, nper = args
    seq = build_sequence(name, T, pulse)
    grid = pump_grid(T, nper, ppp)
    curve = efficiency_vs_power_curve(seq, pump, aL, powers, grid)
    return [[name, aL, c.power_scale, c.mean_transmission, c.eta, c.alpha0_L, c.alpha1_L] for c in curve]


def _run_fig6(cfg: ExperimentConfig):
    s = cfg.settings
    powers = _grid_values(*s["powers"])
    tasks = [(name, aL, s["period"], s["pulse"], s["pump"], powers, s["points_per_period"], s["n_periods"])
             for name in s["sequences"] for aL in s["depths"]]
    rows = [row for chunk in _pmap(_fig6_task, tasks, cfg.workers) for row in chunk]
    header = ["sequence", "alpha_max_L", "power_scale", "mean_transmission", "eta", "alpha0_L", "alpha1_L"]
    summary = {}
    for name in s["sequences"]:
        for aL in s["depths"]:
            sel = [r for r in rows if r[0] == name and r[1] == aL]
            best = max(sel, key=lambda r: r[4])
            summary[f"{name}@{aL:g}"] = {"best_eta": best[4], "power_scale": best[2], "mean_transmission": best[3]}
    return [Table("fig6_power_curves", header, rows)], {"best_points": summary}


def _run_fig5(cfg: ExperimentConfig):
    s = cfg.settings
    T = s["period"]
    seq = build_sequence(s["sequence"], T, s["pulse"])
    lo, hi, step = s["fields"]
    fields = np.round(np.arange(lo, hi + step / 2, step), 9)
    lvd = s["levels"]
    levels = LevelStructure(0.0, lvd["delta_g"] * 1e3, lvd["delta_e"] * 1e3, lvd["delta_S"] * 1e3, lvd["threshold"])
    pump = s["pump"]
    grid = pump_grid(T, s["n_periods"], s["points_per_period"])
    extra = {}
    if s["power"] == "auto":
        # best power for the comb alone, i.e. without side structure
        curve = efficiency_vs_power_curve(seq, pump, s["depth"], _grid_values(*s["powers"]), grid)
        best = max(curve, key=lambda c: c.eta)
        power = best.power_scale
        extra["auto_power_scale"] = power
    else:
        power = float(s["power"])
    w = s["weights"]
    res = efficiency_vs_field(seq, pump.with_power(power), levels, fields, s["depth"], grid,
                              w["hole"], w["antihole"], w["satellite"], w["site_spread"])
    rows = [[p.B, p.eta, p.mean_transmission, p.alpha0_L, p.alpha1_L] for p in res]
    m = matching_fields(levels, T, 3, max_field_G=hi)
    extra["matching_fields_gauss"] = list(m.side_comb_fields)
    extra["joint_trade_offs"] = [
        {"B_gauss": t.B, "p": t.p, "p_prime": t.p_prime, "residual": t.cost,
         "Delta_e_T": t.Delta_e_T, "Delta_g_T": t.Delta_g_T} for t in m.trade_offs[:5]]
    header = ["B_gauss", "eta", "mean_transmission", "alpha0_L", "alpha1_L"]
    return [Table("fig5_field_sweep", header, rows)], extra


def custom_routes(shape, aL, width, T, gamma, probe_duration, probe_shape="rect", n_samples=2**16,
                  window_periods=512, points_per_period=8192, profile=None):
    """Efficiency of one comb by the three independent routes."""
    grid = FrequencyGrid.periodic(T, points_per_period)
    if profile is None:
        profile = build_comb_profile(CombSpec(shape, aL, 1.0, T, width), grid)
    c = observed_coefficients(profile, gamma, 4)
    closed = efficiency_from_coefficients(c.alpha0, c.alpha_minus1, 1.0)
    ode = abs(echo_amplitudes_ode(c, 1.0, 1)[1]) ** 2
    pulse = make_probe_pulse(probe_duration, T, probe_shape, n_samples, window_periods)
    train = propagate(pulse, transfer_on_pulse(profile, gamma, 1.0, pulse), p_max=3)
    return {"closed_form": closed, "ode": ode, "propagation": train.efficiency,
            "alpha0_L": c.alpha0, "alpha1_L": abs(c.alpha_minus1),
            "pre_arrival_fraction": train.pre_arrival_energy / train.input_energy,
            "transmitted_energy_fraction": train.output_energy / train.input_energy}


def random_comb(rng: np.random.Generator, grid: FrequencyGrid, alpha_max: float, n_harmonics: int = 6) -> AbsorptionProfile:
    """Random no-gain comb in ``[0, alpha_max]``.

    A square or Lorentzian tooth of random width, a random background floor
    and a weak random band-limited ripple. The result is clipped into range.
    """
    T = grid.period_time
    x = grid.points
    width = rng.uniform(0.15, 2.0) / T
    shape = "square" if rng.random() < 0.5 else "lorentzian"
    tooth = build_comb_profile(CombSpec(shape, 1.0, 1.0, T, width), grid).values
    ripple = np.zeros_like(x)
    decay = rng.uniform(0.3, 0.8)
    for n in range(1, n_harmonics + 1):
        z = (rng.normal() + 1j * rng.normal()) * decay**n
        ripple += 2 * np.real(z * np.exp(-1j * n * x * T))
    ripple *= rng.uniform(0.0, 0.1) / max(np.max(np.abs(ripple)), 1e-300)
    floor = rng.uniform(0.0, 0.2)
    values = np.clip(floor + (1 - floor) * tooth + ripple, 0.0, 1.0) * alpha_max
    return AbsorptionProfile(grid, values, alpha_max)


def _run_custom(cfg: ExperimentConfig):
    s = cfg.settings
    T, gamma, aL = s["period"], s["gamma"], s["depth"]
    if s["width"] == "optimal":
        width = (square_comb_optimal_width(aL, T) if s["shape"] == "square"
                 else lorentzian_comb_optimal_width(aL, T))
    else:
        width = TWO_PI * s["width"] * 1e3
    kw = dict(probe_duration=s["probe_duration"], probe_shape=s["probe_shape"], n_samples=s["n_samples"],
              window_periods=s["window_periods"], points_per_period=s["points_per_period"])
    r = custom_routes(s["shape"], aL, width, T, gamma, **kw)
    header = ["comb", "alpha_max_L", "width_T", "eta_closed_form", "eta_ode", "eta_propagation",
              "alpha0_L", "alpha1_L", "pre_arrival_fraction"]
    rows = [[s["shape"], aL, width * T, r["closed_form"], r["ode"], r["propagation"],
             r["alpha0_L"], r["alpha1_L"], r["pre_arrival_fraction"]]]
    tables = [Table("custom", header, rows)]
    if s["n_random"]:
        rng = np.random.default_rng(cfg.seed)
        grid = FrequencyGrid.periodic(T, s["points_per_period"])
        orows = []
        for i in range(s["n_random"]):
            depth = float(rng.uniform(1.0, 10.0))
            prof = random_comb(rng, grid, depth)
            rr = custom_routes("custom", depth, 0.0, T, gamma, profile=prof, **kw)
            orows.append([i, depth, rr["closed_form"], rr["ode"], rr["propagation"], rr["pre_arrival_fraction"]])
        tables.append(Table("oracle_random_combs", ["index", "alpha_max_L", "eta_closed_form", "eta_ode",
                                                    "eta_propagation", "pre_arrival_fraction"], orows))
    return tables, {}


_RUNNERS = {
    "fig1_shapes": _run_fig1_shapes,
    "fig1b_curve": _run_fig1b,
    "fig2_spectrum": _run_fig2,
    "fig6_power_curves": _run_fig6,
    "fig5_field_sweep": _run_fig5,
    "custom": _run_custom,
}


def _conventions(cfg: ExperimentConfig) -> dict:
    conv = dict(CONVENTIONS)
    pulse = cfg.settings.get("pulse")
    if pulse is not None:
        conv["sinc_convention"] = pulse.convention
        conv["subpulse_shape"] = pulse.shape
    pump = cfg.settings.get("pump")
    if pump is not None:
        conv["pump_normalization"] = pump.normalization
    return conv


def _write_bundle(out_dir: Path, files: dict[str, str]):
    """Write all files into a staging directory, then move them into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".afc-", dir=out_dir))
    try:
        for name, text in files.items():
            (stage / name).write_text(text)
        for name in files:
            os.replace(stage / name, out_dir / name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run a validated experiment and write its CSV tables and manifest.

    Returns the manifest dictionary.
    """
    tables, extra = _RUNNERS[cfg.experiment](cfg)
    files = {f"{t.name}.csv": t.to_csv() for t in tables}
    manifest = {
        "experiment": cfg.experiment,
        "description": EXPERIMENTS[cfg.experiment],
        "version": __version__,
        "parameters": cfg.raw,
        "seed": cfg.seed,
        "conventions": _conventions(cfg),
        "outputs": sorted(files),
        "results": _jsonable(extra),
        "created_unix": time.time(),
    }
    files["manifest.json"] = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    _write_bundle(cfg.output_dir, files)
    return manifest


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# --------------------------------------------------------------------------- fitting


def read_profile_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column table ``detuning_hz, alpha_per_m``; returns angular detunings and alpha."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        raise ValidationError([f"measured spectrum not found: {path}"])
    if not rows or "detuning_hz" not in rows[0] or "alpha_per_m" not in rows[0]:
        raise ValidationError(["measured spectrum needs columns detuning_hz, alpha_per_m"])
    try:
        d = np.array([float(r["detuning_hz"]) for r in rows])
        a = np.array([float(r["alpha_per_m"]) for r in rows])
    except ValueError as exc:
        raise ValidationError([f"measured spectrum has a non-numeric entry: {exc}"])
    order = np.argsort(d)
    return TWO_PI * d[order], a[order]


def write_profile_csv(path, detuning, alpha) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["detuning_hz", "alpha_per_m"])
        for x, y in zip(np.asarray(detuning) / TWO_PI, alpha):
            w.writerow([f"{x:.12g}", f"{y:.12g}"])


@dataclass(frozen=True)
class FitReport:
    power_scale: float
    power_scale_stderr: float
    alpha_max: float
    alpha_max_stderr: float | None
    residual_norm: float
    n_points: int
    fitted_alpha_max: bool

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def compare_to_measurement(detuning, alpha, seq: PulseSequence, pump: PumpConfig, alpha_max: float,
                           fit_alpha_max: bool = False, grid: FrequencyGrid | None = None) -> FitReport:
    """Least-squares fit of the pump power (and optionally alpha_M) to a measured spectrum.

    The model is :func:`predict_comb` evaluated on an internal grid and
    linearly interpolated at the measured detunings. Points outside the model
    grid are ignored; if none remain the supports do not overlap.
    """
    detuning = np.asarray(detuning, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    grid = grid if grid is not None else pump_grid(seq.spacing)
    inside = (detuning >= grid.delta_min) & (detuning <= grid.points[-1])
    if inside.sum() < 3:
        raise ConfigurationError("measured spectrum does not overlap the model frequency range")
    x, y = detuning[inside], alpha[inside]
    _, power = sequence_spectrum(seq, grid.points)
    base = pumping_rate(power, grid, pump.with_power(1.0))

    def model(p, amax):
        return amax * np.interp(x, grid.points, absorption_ratio(p * base, pump))

    # coarse log scan seeds the local fit and avoids the flat low-power region
    scan = np.logspace(-10, 4, 57)
    costs = [np.sum((model(p, alpha_max) - y) ** 2) for p in scan]
    p0 = scan[int(np.argmin(costs))]
    if fit_alpha_max:
        scale = np.array([p0, alpha_max])

        def resid(v):
            return model(v[0] * scale[0], v[1] * scale[1]) - y

        sol = optimize.least_squares(resid, [1.0, 1.0], bounds=([0, 1e-12], [np.inf, np.inf]), method="trf",
                                     xtol=1e-14, ftol=1e-14, gtol=1e-14)
        p_hat, a_hat = sol.x * scale
    else:
        scale = np.array([p0])

        def resid(v):
            return model(v[0] * scale[0], alpha_max) - y

        sol = optimize.least_squares(resid, [1.0], bounds=([0], [np.inf]), method="trf",
                                     xtol=1e-14, ftol=1e-14, gtol=1e-14)
        p_hat, a_hat = sol.x[0] * scale[0], alpha_max
    m, k = y.size, sol.x.size
    rss = float(np.sum(sol.fun**2))
    J = sol.jac / scale[None, :]
    dof = max(m - k, 1)
    try:
        cov = np.linalg.inv(J.T @ J) * rss / dof
        errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        errs = np.full(k, np.inf)
    return FitReport(float(p_hat), float(errs[0]), float(a_hat),
                     float(errs[1]) if fit_alpha_max else None, math.sqrt(rss), int(m), fit_alpha_max)


def parse_fit_config(data: dict) -> dict:
    problems: list[str] = []
    if not isinstance(data, dict) or not data:
        raise ValidationError(["configuration is empty"])
    r = _Reader(data, problems)
    s: dict = {}
    _common_period(r, s)
    _common_gamma(r, s)
    s["sequence"] = r.choice("sequence", SEQUENCE_NAMES)
    s["pulse"] = _read_pulse(r)
    s["alpha_max"] = r.number("alpha_max_per_m", lo=0, lo_open=True)
    s["fit_alpha_max"] = r.flag("fit_alpha_max", False)
    _parse_grid(r, s)
    out = data.get("output_dir")
    if not isinstance(out, str) or not out:
        problems.append("missing 'output_dir'")
    s["output_dir"] = out
    s["pump"] = _read_pump(r, s["period"], s["gamma"], problems)
    if problems:
        raise ValidationError(problems)
    return s


def run_fit(measured_path, config: dict, base_dir: Path | None = None) -> FitReport:
    s = parse_fit_config(config)
    detuning, alpha = read_profile_csv(measured_path)
    seq = build_sequence(s["sequence"], s["period"], s["pulse"])
    grid = pump_grid(s["period"], s["n_periods"], s["points_per_period"])
    report = compare_to_measurement(detuning, alpha, seq, s["pump"], s["alpha_max"], s["fit_alpha_max"], grid)
    model = predict_comb(seq, s["pump"].with_power(report.power_scale), report.alpha_max, grid)
    fitted = np.interp(detuning, grid.points, model.values)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["detuning_hz", "alpha_measured_per_m", "alpha_model_per_m"])
    for d, a, f in zip(detuning / TWO_PI, alpha, fitted):
        w.writerow([f"{d:.12g}", f"{a:.12g}", f"{f:.12g}"])
    out = Path(s["output_dir"])
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out
    manifest = {"measured": str(measured_path), "parameters": config, "version": __version__,
                "fit": report.as_dict(), "conventions": {**CONVENTIONS, "pump_normalization": s["pump"].normalization,
                                                         "sinc_convention": s["pulse"].convention},
                "created_unix": time.time()}
    _write_bundle(out, {"fit_model.csv": buf.getvalue(),
                        "fit_report.json": json.dumps(manifest, indent=2, sort_keys=True) + "\n"})
    return report
