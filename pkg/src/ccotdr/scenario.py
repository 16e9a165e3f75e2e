"""Scenario configuration: line-based `section.key = value` files.

A scenario bundles everything one run needs: fiber inventory, probe code,
laser/noise, environment events, campaign timing, analysis settings, and
output controls.  `--set key=value` overrides are applied to the raw
key/value map before typing, so an override is exactly equivalent to
editing the file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, PhysicsError
from .fibermodel import (
    FiberModel,
    SensingConstants,
    StrainTone,
    TemperatureProfile,
    build_fbg_array,
    generate_scatterers,
)
from .probe import build_frame, golay_pair, required_zero_pad, spatial_resolution
from .sim import LaserModel, NoiseModel

KINDS = ("acoustic", "thermal", "fbg")


@dataclass
class FbgArraySpec:
    count: int = 0
    spacing: float = 0.05  # m
    start: float = 1.0  # m
    base_wavelength: float = 1550e-9  # m
    variation_amplitude: float = 0.0  # m
    variation_period: float = 10.0  # gratings
    sigma: float = 20e-12  # m
    peak_amplitude: float = 0.03


@dataclass
class SweepSpec:
    step: float = 5e-12  # m
    points: int = 21


@dataclass
class EventSpec:
    kind: str = "strain_tone"
    span: tuple[float, float] = (0.0, 0.0)
    amplitude: float = 0.0  # m, strain tones
    frequency: float = 0.0  # Hz
    phase: float = 0.0  # rad
    profile_t: tuple[float, ...] = ()  # s, temperature events
    profile_c: tuple[float, ...] = ()  # degC (absolute)
    dn_dt: float = 1e-5  # 1/K
    time_constant: float = 60.0  # s


@dataclass
class Scenario:
    name: str = "unnamed"
    kind: str = "acoustic"
    # fiber
    fiber_length: float = 100.0  # m
    group_index: float = 1.468
    attenuation_db_per_km: float = 0.2
    wavelength: float = 1550e-9  # m
    scatterer_density: float | None = None  # 1/m, None = 10 per resolution cell
    scatterer_rms_reflectivity: float = 1e-4
    fiber_seed: int | None = None  # None = derived from campaign seed
    reflectors: list[tuple[float, float]] = field(default_factory=list)  # (m, dB)
    fbg: FbgArraySpec | None = None
    sweep: SweepSpec = field(default_factory=SweepSpec)
    # probe
    order: int = 11
    symbol_rate: float = 1e9  # Hz
    samples_per_symbol: int = 2
    zero_pad_symbols: int | None = None  # None = required + margin
    pad_margin_symbols: int = 64
    # laser / noise
    linewidth: float = 100.0  # Hz
    awgn_sigma: float = 0.0
    noise_enabled: bool = True
    # events
    events: list[EventSpec] = field(default_factory=list)
    # campaign
    shot_rate: float = 2000.0  # Hz
    duration: float = 1.0  # s
    seed: int = 1234
    # analysis
    gauge_length: float = 4.0  # m
    gauge_margin_db: float = 0.0
    gauges: list[tuple[float, float]] = field(default_factory=list)  # explicit pairs
    search_radius: float = 0.0  # m, endpoint snap window
    fade_margin_db: float = 10.0
    slope_window: float = 2.7  # s
    start_temperature: float | None = None  # degC, None = profile start
    smoothing_samples: int = 3
    strain_optic_factor: float = 0.79
    phase_convention: str = "single_pass"
    # output
    out_dir: str = "out"
    max_csv_rows: int = 512
    max_csv_cols: int = 1024
    batch_pairs: int = 0  # 0 = auto

    # ------------------------------------------------------------------
    def resolution(self) -> float:
        return spatial_resolution(self.symbol_rate, self.group_index)

    def density(self) -> float:
        if self.scatterer_density is not None:
            return self.scatterer_density
        return 10.0 / self.resolution()

    def required_pad(self) -> int:
        return required_zero_pad(self.fiber_length, self.group_index, self.symbol_rate)

    def pad(self) -> int:
        if self.zero_pad_symbols is not None:
            return self.zero_pad_symbols
        return self.required_pad() + self.pad_margin_symbols

    def constants(self) -> SensingConstants:
        return SensingConstants(
            strain_optic_factor=self.strain_optic_factor,
            phase_convention=self.phase_convention,
        )

    def laser(self, wavelength: float | None = None) -> LaserModel:
        return LaserModel(
            wavelength=self.wavelength if wavelength is None else wavelength,
            linewidth=self.linewidth,
        )

    def noise(self) -> NoiseModel:
        return NoiseModel(awgn_sigma=self.awgn_sigma, enabled=self.noise_enabled)

    def build_events(self):
        out = []
        for ev in self.events:
            if ev.kind == "strain_tone":
                out.append(
                    StrainTone(
                        span=ev.span,
                        peak_elongation=ev.amplitude,
                        frequency=ev.frequency,
                        phase=ev.phase,
                    )
                )
            else:
                base = ev.profile_c[0]
                out.append(
                    TemperatureProfile(
                        span=ev.span,
                        times=np.asarray(ev.profile_t),
                        delta_kelvin=np.asarray(ev.profile_c) - base,
                        dn_dt=ev.dn_dt,
                        time_constant=ev.time_constant,
                    )
                )
        return out

    def build_model(self) -> FiberModel:
        seed = self.fiber_seed
        if seed is None:
            seed = self.seed ^ 0x5CA77E12
        scatterers = generate_scatterers(
            self.fiber_length, self.density(), self.scatterer_rms_reflectivity, seed
        )
        fbgs = []
        if self.fbg is not None and self.fbg.count > 0:
            fbgs = build_fbg_array(
                self.fbg.count,
                self.fbg.spacing,
                self.fbg.start,
                self.fbg.base_wavelength,
                self.fbg.variation_amplitude,
                self.fbg.variation_period,
                self.fbg.sigma,
                self.fbg.peak_amplitude,
                fiber_length=self.fiber_length,
            )
        model = FiberModel(
            length=self.fiber_length,
            group_index=self.group_index,
            attenuation_db_per_km=self.attenuation_db_per_km,
            wavelength=self.wavelength,
            scatterers=scatterers,
            fbgs=fbgs,
        )
        from .fibermodel import add_point_reflector

        for pos, db in self.reflectors:
            add_point_reflector(model, pos, db)
        return model

    def build_frames(self):
        pair = golay_pair(self.order)
        pad = self.pad()
        fa = build_frame(pair, "A", self.samples_per_symbol, pad, self.symbol_rate)
        fb = build_frame(pair, "B", self.samples_per_symbol, pad, self.symbol_rate)
        return fa, fb

    def sweep_wavelengths(self) -> np.ndarray:
        k = np.arange(self.sweep.points) - (self.sweep.points - 1) / 2.0
        return self.wavelength + k * self.sweep.step

    def validate(self) -> None:
        """Physics feasibility; raises PhysicsError before any simulation."""
        pad = self.pad()
        need = self.required_pad()
        if pad < need:
            raise PhysicsError(
                f"probe.zero_pad_symbols = {pad} is below the {need} symbols needed "
                f"for a {self.fiber_length} m fiber: shots would overlap"
            )
        frame_duration = (2**self.order + pad) / self.symbol_rate
        if self.shot_rate > 1.0 / frame_duration:
            raise PhysicsError(
                f"campaign.shot_rate_hz = {self.shot_rate} exceeds 1/frame duration "
                f"= {1.0 / frame_duration:.6g} Hz"
            )
        if self.density() * self.fiber_length > 1e8:
            raise PhysicsError("scatterer count exceeds 1e8; reduce density or length")
        for pos, _ in self.reflectors:
            if not 0 <= pos <= self.fiber_length:
                raise PhysicsError(f"reflector at {pos} m outside the fiber")
        for ev in self.events:
            a, b = ev.span
            if a < 0 or b > self.fiber_length or b < a:
                raise PhysicsError(f"event span [{a}, {b}] m outside the fiber")
            if ev.kind == "temperature" and len(ev.profile_t) < 2:
                raise PhysicsError("temperature events need at least 2 profile points")
        for z1, z2 in self.gauges:
            if not (0 <= z1 < z2 <= self.fiber_length):
                raise PhysicsError(f"gauge ({z1}, {z2}) m not inside the fiber")


# ---------------------------------------------------------------------------
# raw text parsing


def parse_config_text(text: str) -> dict[str, str]:
    """`section.key = value` lines -> raw string map; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def apply_overrides(raw: dict[str, str], overrides) -> dict[str, str]:
    out = dict(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {value!r} as a number") from None


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {value!r} as an integer") from None


def _parse_bool(key: str, value: str) -> bool:
    v = value.lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"key {key!r}: cannot parse {value!r} as a boolean")


def _parse_pair(key: str, value: str) -> tuple[float, float]:
    parts = [p for p in value.split(",") if p.strip()]
    if len(parts) != 2:
        raise ConfigError(f"key {key!r}: expected 'low,high', got {value!r}")
    return (_parse_float(key, parts[0]), _parse_float(key, parts[1]))


def _parse_profile(key: str, value: str) -> tuple[tuple[float, ...], tuple[float, ...]]:
    times, vals = [], []
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ConfigError(f"key {key!r}: expected 't:value' pairs, got {part!r}")
        t, v = part.split(":", 1)
        times.append(_parse_float(key, t))
        vals.append(_parse_float(key, v))
    if len(times) < 2:
        raise ConfigError(f"key {key!r}: need at least two profile points")
    return tuple(times), tuple(vals)


def build_scenario(raw: dict[str, str]) -> Scenario:
    """Typed Scenario from a raw key map; unknown keys are an error."""
    scn = Scenario()
    events: dict[int, EventSpec] = {}
    gauges: dict[int, tuple[float, float]] = {}
    reflectors: dict[int, list] = {}

    def event(n: int) -> EventSpec:
        return events.setdefault(n, EventSpec())

    for key, value in raw.items():
        parts = key.split(".")
        try:
            if key == "scenario.name":
                scn.name = value
            elif key == "scenario.kind":
                if value not in KINDS:
                    raise ConfigError(f"key {key!r}: kind must be one of {KINDS}")
                scn.kind = value
            elif key == "fiber.length_m":
                scn.fiber_length = _parse_float(key, value)
            elif key == "fiber.group_index":
                scn.group_index = _parse_float(key, value)
            elif key == "fiber.attenuation_db_per_km":
                scn.attenuation_db_per_km = _parse_float(key, value)
            elif key == "fiber.wavelength_nm":
                scn.wavelength = _parse_float(key, value) * 1e-9
            elif key == "fiber.scatterer_density_per_m":
                scn.scatterer_density = None if value == "auto" else _parse_float(key, value)
            elif key == "fiber.scatterer_rms_reflectivity":
                scn.scatterer_rms_reflectivity = _parse_float(key, value)
            elif key == "fiber.seed":
                scn.fiber_seed = None if value == "auto" else _parse_int(key, value)
            elif parts[0] == "reflector" and len(parts) == 3:
                n = _parse_int(key, parts[1])
                slot = reflectors.setdefault(n, [None, None])
                if parts[2] == "position_m":
                    slot[0] = _parse_float(key, value)
                elif parts[2] == "reflectivity_db":
                    slot[1] = _parse_float(key, value)
                else:
                    raise ConfigError(f"unknown key {key!r}")
            elif key == "fbg.count":
                scn.fbg = scn.fbg or FbgArraySpec()
                scn.fbg.count = _parse_int(key, value)
            elif key == "fbg.spacing_m":
                scn.fbg = scn.fbg or FbgArraySpec()
                scn.fbg.spacing = _parse_float(key, value)
            elif key == "fbg.start_m":
                scn.fbg = scn.fbg or FbgArraySpec()
                scn.fbg.start = _parse_float(key, value)
            elif key == "fbg.base_wavelength_nm":
                scn.fbg = scn.fbg or FbgArraySpec()
                scn.fbg.base_wavelength = _parse_float(key, value) * 1e-9
            elif key == "fbg.variation_amplitude_pm":
                scn.fbg = scn.fbg or FbgArraySpec()
                scn.fbg.variation_amplitude = _parse_float(key, value) * 1e-12
            elif key == "fbg.variation_period_gratings":
                scn.fbg = scn.fbg or FbgArraySpec()
                scn.fbg.variation_period = _parse_float(key, value)
            elif key == "fbg.sigma_pm":
                scn.fbg = scn.fbg or FbgArraySpec()
                scn.fbg.sigma = _parse_float(key, value) * 1e-12
            elif key == "fbg.peak_amplitude":
                scn.fbg = scn.fbg or FbgArraySpec()
                scn.fbg.peak_amplitude = _parse_float(key, value)
            elif key == "sweep.step_pm":
                scn.sweep.step = _parse_float(key, value) * 1e-12
            elif key == "sweep.points":
                scn.sweep.points = _parse_int(key, value)
            elif key == "probe.order":
                scn.order = _parse_int(key, value)
            elif key == "probe.symbol_rate_hz":
                scn.symbol_rate = _parse_float(key, value)
            elif key == "probe.samples_per_symbol":
                scn.samples_per_symbol = _parse_int(key, value)
            elif key == "probe.zero_pad_symbols":
                scn.zero_pad_symbols = None if value == "auto" else _parse_int(key, value)
            elif key == "probe.pad_margin_symbols":
                scn.pad_margin_symbols = _parse_int(key, value)
            elif key == "laser.linewidth_hz":
                scn.linewidth = _parse_float(key, value)
            elif key == "noise.awgn_sigma":
                scn.awgn_sigma = _parse_float(key, value)
            elif key == "noise.enabled":
                scn.noise_enabled = _parse_bool(key, value)
            elif parts[0] == "event" and len(parts) == 3:
                n = _parse_int(key, parts[1])
                ev = event(n)
                sub = parts[2]
                if sub == "kind":
                    if value not in ("strain_tone", "temperature"):
                        raise ConfigError(
                            f"key {key!r}: kind must be strain_tone or temperature"
                        )
                    ev.kind = value
                elif sub == "span_m":
                    ev.span = _parse_pair(key, value)
                elif sub == "amplitude_m":
                    ev.amplitude = _parse_float(key, value)
                elif sub == "frequency_hz":
                    ev.frequency = _parse_float(key, value)
                elif sub == "phase_rad":
                    ev.phase = _parse_float(key, value)
                elif sub == "profile_c":
                    ev.profile_t, ev.profile_c = _parse_profile(key, value)
                elif sub == "dn_dt_per_k":
                    ev.dn_dt = _parse_float(key, value)
                elif sub == "time_constant_s":
                    ev.time_constant = _parse_float(key, value)
                else:
                    raise ConfigError(f"unknown key {key!r}")
            elif key == "campaign.shot_rate_hz":
                scn.shot_rate = _parse_float(key, value)
            elif key == "campaign.duration_s":
                scn.duration = _parse_float(key, value)
            elif key == "campaign.seed":
                scn.seed = _parse_int(key, value)
            elif key == "analysis.gauge_length_m":
                scn.gauge_length = _parse_float(key, value)
            elif key == "analysis.gauge_margin_db":
                scn.gauge_margin_db = _parse_float(key, value)
            elif parts[0] == "analysis" and len(parts) == 3 and parts[1] == "gauge":
                gauges[_parse_int(key, parts[2])] = _parse_pair(key, value)
            elif key == "analysis.search_radius_m":
                scn.search_radius = _parse_float(key, value)
            elif key == "analysis.fade_margin_db":
                scn.fade_margin_db = _parse_float(key, value)
            elif key == "analysis.slope_window_s":
                scn.slope_window = _parse_float(key, value)
            elif key == "analysis.start_temperature_c":
                scn.start_temperature = None if value == "auto" else _parse_float(key, value)
            elif key == "analysis.smoothing_samples":
                scn.smoothing_samples = _parse_int(key, value)
            elif key == "analysis.strain_optic_factor":
                scn.strain_optic_factor = _parse_float(key, value)
            elif key == "analysis.phase_convention":
                if value not in ("single_pass", "double_pass"):
                    raise ConfigError(
                        f"key {key!r}: must be single_pass or double_pass"
                    )
                scn.phase_convention = value
            elif key == "output.directory":
                scn.out_dir = value
            elif key == "output.max_csv_rows":
                scn.max_csv_rows = _parse_int(key, value)
            elif key == "output.max_csv_cols":
                scn.max_csv_cols = _parse_int(key, value)
            elif key == "pipeline.batch_pairs":
                scn.batch_pairs = _parse_int(key, value)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"key {key!r}: {exc}") from None

    for n in sorted(reflectors):
        pos, db = reflectors[n]
        if pos is None or db is None:
            raise ConfigError(
                f"reflector.{n} needs both position_m and reflectivity_db"
            )
        scn.reflectors.append((pos, db))
    scn.events = [events[n] for n in sorted(events)]
    scn.gauges = [gauges[n] for n in sorted(gauges)]
    for n, ev in zip(sorted(events), scn.events):
        if ev.kind == "temperature" and len(ev.profile_t) < 2:
            raise ConfigError(f"event.{n}: temperature events need profile_c")
    return scn


def load_scenario(path, overrides=None) -> Scenario:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    raw = apply_overrides(parse_config_text(text), overrides)
    return build_scenario(raw)
