"""Sensor fiber description and environment-to-optical-path conversion.

The fiber is an inventory of reflective elements: random Rayleigh
scatterers, discrete point reflectors (connectors), and Bragg gratings.
Strain and temperature events perturb the one-way optical path of every
element behind them; perturbations accumulate along the fiber, which is what
lets a phase gauge bracket and isolate an event.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Scatterer:
    position: float  # m from the launch connector
    reflectivity: complex  # field amplitude


@dataclass(frozen=True)
class PointReflector:
    position: float  # m
    power_reflectivity_db: float  # dB relative to probe power, <= 0
    #: optional fixed polarization (jx, jy); None draws one per simulation seed
    jones: tuple[complex, complex] | None = None

    @property
    def field_amplitude(self) -> float:
        return 10.0 ** (self.power_reflectivity_db / 20.0)


@dataclass(frozen=True)
class Fbg:
    """Single grating with a Gaussian reflection line."""

    position: float  # m
    bragg_wavelength: float  # m
    spectral_sigma: float  # m, Gaussian width of the reflection line
    peak_amplitude: float  # field units at the Bragg wavelength


@dataclass
class FiberModel:
    """Immutable-after-construction inventory of one sensor fiber."""

    length: float  # m
    group_index: float = 1.468
    attenuation_db_per_km: float = 0.2
    wavelength: float = 1550e-9  # nominal probe wavelength, m
    scatterers: list[Scatterer] = field(default_factory=list)
    reflectors: list[PointReflector] = field(default_factory=list)
    fbgs: list[Fbg] = field(default_factory=list)

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("fiber length must be positive")
        if not 1.4 <= self.group_index <= 1.6:
            raise ValueError(f"group_index {self.group_index} outside [1.4, 1.6]")
        if self.attenuation_db_per_km < 0:
            raise ValueError("attenuation must be >= 0")
        for elems in (self.scatterers, self.reflectors, self.fbgs):
            for e in elems:
                self._check_position(e.position)

    def _check_position(self, z: float):
        if not 0.0 <= z <= self.length:
            raise ValueError(f"element position {z} m outside fiber [0, {self.length}] m")

    def element_positions(self) -> np.ndarray:
        """Positions of all elements, scatterers then reflectors then gratings."""
        return np.array(
            [s.position for s in self.scatterers]
            + [r.position for r in self.reflectors]
            + [g.position for g in self.fbgs],
            dtype=np.float64,
        )


def generate_scatterers(
    length: float, density: float, mean_amplitude: float, seed: int
) -> list[Scatterer]:
    """Draw the Rayleigh scatterer population for a fiber of given length.

    Positions are i.i.d. uniform on [0, length]; reflectivities are circular
    complex Gaussian, i.e. Rayleigh-distributed magnitude with uniform phase,
    scaled so the mean power E|r|^2 equals mean_amplitude**2
    (`mean_amplitude` is the RMS field reflectivity per scatterer).
    """
    if density <= 0:
        raise ValueError("density must be positive")
    if density * length > 1e8:
        raise ValueError(f"refusing to generate {density * length:.3g} scatterers (> 1e8)")
    count = int(round(density * length))
    rng = np.random.default_rng(seed)
    positions = rng.uniform(0.0, length, count)
    scale = mean_amplitude / np.sqrt(2.0)
    refl = scale * (rng.standard_normal(count) + 1j * rng.standard_normal(count))
    return [Scatterer(float(z), complex(r)) for z, r in zip(positions, refl)]


def add_point_reflector(
    model: FiberModel, position: float, power_reflectivity_db: float
) -> FiberModel:
    """Append a discrete reflector (e.g. a connector) to the model."""
    model._check_position(position)
    if power_reflectivity_db > 0:
        raise ValueError("power reflectivity must be <= 0 dB")
    model.reflectors.append(PointReflector(float(position), float(power_reflectivity_db)))
    return model


def build_fbg_array(
    count: int,
    spacing: float,
    start: float,
    base_wavelength: float,
    variation_amplitude: float = 0.0,
    variation_period: float = 10.0,
    sigma: float = 20e-12,
    peak_amplitude: float = 1e-2,
    fiber_length: float | None = None,
) -> list[Fbg]:
    """Equally spaced grating array with sinusoidal Bragg-wavelength variation.

    Grating k sits at start + k*spacing with
    lambda_B(k) = base + variation_amplitude * sin(2*pi*k / variation_period).
    The sine argument is reduced mod the period so the wavelength sequence
    repeats exactly every `variation_period` gratings.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    span_end = start + (count - 1) * spacing
    if fiber_length is not None and span_end > fiber_length:
        raise ValueError(
            f"grating array ends at {span_end} m, beyond fiber length {fiber_length} m"
        )
    k = np.arange(count, dtype=np.float64)
    phase = 2.0 * np.pi * np.mod(k, variation_period) / variation_period
    lambdas = base_wavelength + variation_amplitude * np.sin(phase)
    return [
        Fbg(float(start + i * spacing), float(lambdas[i]), float(sigma), float(peak_amplitude))
        for i in range(count)
    ]


def fbg_reflectivity(grating: Fbg, probe_wavelength: float) -> float:
    """Field reflectivity of one grating at the probe wavelength (phase 0)."""
    d = (probe_wavelength - grating.bragg_wavelength) / grating.spectral_sigma
    return grating.peak_amplitude * float(np.exp(-0.5 * d * d))


# ---------------------------------------------------------------------------
# environment events


@dataclass(frozen=True)
class StrainTone:
    """Sinusoidal elongation of the span [start, end].

    The total elongation at time t is peak_elongation * sin(2 pi f t + phase),
    distributed uniformly over the span.  Elements beyond the span carry the
    full optical-path change (path perturbations are cumulative along the
    fiber); elements inside carry the fraction of the span behind them.
    """

    span: tuple[float, float]
    peak_elongation: float  # m
    frequency: float  # Hz
    phase: float = 0.0  # rad

    def __post_init__(self):
        a, b = self.span
        if b < a:
            raise ValueError("span must be (start, end) with end >= start")
        if self.frequency < 0:
            raise ValueError("frequency must be >= 0")


@dataclass(frozen=True)
class TemperatureProfile:
    """Piecewise-linear chamber temperature change applied to a span.

    `times`/`delta_kelvin` give the chamber profile relative to the starting
    temperature.  The fiber core follows it through a first-order low-pass
    with time constant `time_constant`; the index change dn_dt * dT_core then
    acts over the overlap length between the span and the path to each
    element.
    """

    span: tuple[float, float]
    times: np.ndarray  # s, increasing
    delta_kelvin: np.ndarray  # K relative to start
    dn_dt: float = 1e-5  # 1/K, effective thermo-optic coefficient
    time_constant: float = 60.0  # s, chamber-to-core lag

    def __post_init__(self):
        a, b = self.span
        if b < a:
            raise ValueError("span must be (start, end) with end >= start")
        if self.time_constant < 0:
            raise ValueError("time_constant must be >= 0")
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.delta_kelvin, dtype=np.float64)
        if t.ndim != 1 or t.size < 1 or t.size != v.size:
            raise ValueError("times and delta_kelvin must be same-length 1-D arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("profile times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "delta_kelvin", v)


EnvironmentEvent = StrainTone | TemperatureProfile


@dataclass(frozen=True)
class SensingConstants:
    """Phase-sensitivity constants shared by simulation and analysis.

    strain_optic_factor is the effective fraction of geometric elongation
    that survives as optical-path change once the photoelastic effect is
    accounted for.  phase_convention selects how many passes of propagation
    phase the instrument reports per unit path: 'single_pass' counts one-way
    phase (2 pi / lambda per meter), 'double_pass' the physical round trip.
    The same convention is applied consistently when generating and when
    inverting phase, so analyses are self-consistent either way.
    """

    strain_optic_factor: float = 0.79
    phase_convention: str = "single_pass"

    def __post_init__(self):
        if not 0.0 < self.strain_optic_factor <= 1.0:
            raise ValueError("strain_optic_factor must be in (0, 1]")
        if self.phase_convention not in ("single_pass", "double_pass"):
            raise ValueError("phase_convention must be 'single_pass' or 'double_pass'")

    @property
    def pass_factor(self) -> float:
        """Propagation-phase multiplier: 1 for single-pass, 2 for double-pass."""
        return 1.0 if self.phase_convention == "single_pass" else 2.0


def first_order_lowpass(
    times: np.ndarray, values: np.ndarray, tau: float, t_eval: np.ndarray | float
) -> np.ndarray | float:
    """Exact first-order low-pass response to a piecewise-linear input.

    Solves tau * y' = x - y segment by segment (the response to a linear
    segment is linear-plus-exponential, so no numerical integration is
    needed).  Before the first node the input is held at values[0] and the
    response starts in steady state; after the last node the input is held
    constant and the response decays onto it.
    """
    t_nodes = np.asarray(times, dtype=np.float64)
    x_nodes = np.asarray(values, dtype=np.float64)
    scalar = np.isscalar(t_eval)
    te = np.atleast_1d(np.asarray(t_eval, dtype=np.float64))

    if tau == 0.0:
        out = np.interp(te, t_nodes, x_nodes, left=x_nodes[0], right=x_nodes[-1])
        return float(out[0]) if scalar else out

    # response at each node, by exact recursion over segments
    y_nodes = np.empty_like(x_nodes)
    y_nodes[0] = x_nodes[0]
    for i in range(len(t_nodes) - 1):
        dt = t_nodes[i + 1] - t_nodes[i]
        m = (x_nodes[i + 1] - x_nodes[i]) / dt
        a = y_nodes[i] - x_nodes[i] + m * tau
        y_nodes[i + 1] = x_nodes[i + 1] - m * tau + a * np.exp(-dt / tau)

    out = np.empty_like(te)
    before = te <= t_nodes[0]
    out[before] = x_nodes[0]
    after = te >= t_nodes[-1]
    if np.any(after):
        dt = te[after] - t_nodes[-1]
        out[after] = x_nodes[-1] + (y_nodes[-1] - x_nodes[-1]) * np.exp(-dt / tau)
    mid = ~(before | after)
    if np.any(mid):
        seg = np.searchsorted(t_nodes, te[mid], side="right") - 1
        t0 = t_nodes[seg]
        dt_seg = t_nodes[seg + 1] - t0
        m = (x_nodes[seg + 1] - x_nodes[seg]) / dt_seg
        x_t = x_nodes[seg] + m * (te[mid] - t0)
        a = y_nodes[seg] - x_nodes[seg] + m * tau
        out[mid] = x_t - m * tau + a * np.exp(-(te[mid] - t0) / tau)
    return float(out[0]) if scalar else out


def event_path_weight(
    event: EnvironmentEvent,
    positions: np.ndarray,
    group_index: float,
    constants: SensingConstants,
) -> np.ndarray:
    """Static spatial weight w(z) such that dOPL(z, t) = w(z) * A(t)."""
    z = np.asarray(positions, dtype=np.float64)
    a, b = event.span
    if isinstance(event, StrainTone):
        if b > a:
            frac = np.clip((z - a) / (b - a), 0.0, 1.0)
        else:
            frac = (z >= a).astype(np.float64)
        return group_index * constants.strain_optic_factor * event.peak_elongation * frac
    if isinstance(event, TemperatureProfile):
        overlap = np.clip(np.minimum(z, b) - a, 0.0, None)
        return event.dn_dt * overlap
    raise TypeError(f"unknown event type {type(event)!r}")


def event_time_factor(event: EnvironmentEvent, t: np.ndarray | float) -> np.ndarray | float:
    """Unitless (strain) or kelvin (temperature) time factor A(t)."""
    if isinstance(event, StrainTone):
        return np.sin(2.0 * np.pi * event.frequency * np.asarray(t, dtype=np.float64) + event.phase)
    if isinstance(event, TemperatureProfile):
        return first_order_lowpass(event.times, event.delta_kelvin, event.time_constant, t)
    raise TypeError(f"unknown event type {type(event)!r}")


def validate_events(model: FiberModel, events) -> None:
    for ev in events:
        a, b = ev.span
        if a < 0 or b > model.length:
            raise ValueError(
                f"event span [{a}, {b}] m outside fiber [0, {model.length}] m"
            )


def apply_environment(
    model: FiberModel,
    events,
    constants: SensingConstants,
    t: float,
    positions: np.ndarray | None = None,
) -> np.ndarray:
    """Optical-path change, in meters, at each position for time t.

    Contributions from all events add linearly; each individual contribution
    is non-decreasing along the fiber, so a gauge across an event sees the
    full path change while a gauge entirely upstream sees none.
    """
    validate_events(model, events)
    if positions is None:
        positions = model.element_positions()
    z = np.asarray(positions, dtype=np.float64)
    dopl = np.zeros_like(z)
    for ev in events:
        w = event_path_weight(ev, z, model.group_index, constants)
        dopl += w * event_time_factor(ev, t)
    return dopl
