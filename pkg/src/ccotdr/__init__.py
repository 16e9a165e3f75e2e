"""Coherent-correlation OTDR simulator and fiber-sensing DSP toolkit."""

from .probe import (
    C_VACUUM,
    GolayPair,
    ProbeFrame,
    build_frame,
    golay_pair,
    required_zero_pad,
    spatial_resolution,
)
from .fibermodel import (
    EnvironmentEvent,
    Fbg,
    FiberModel,
    PointReflector,
    Scatterer,
    SensingConstants,
    StrainTone,
    TemperatureProfile,
    add_point_reflector,
    apply_environment,
    build_fbg_array,
    fbg_reflectivity,
    first_order_lowpass,
    generate_scatterers,
)
from .sim import (
    LaserModel,
    NoiseModel,
    Shot,
    ShotSimulator,
    laser_phase_walk,
    run_campaign,
    simulate_shot,
)
from .compress import (
    CompressedProfile,
    Waterfall,
    compress_shot,
    golay_compress,
    nearest_index,
    position_axis,
    roi_gate,
    stack_waterfall,
    xcorr,
    xcorr_batch,
)
from .dsp import (
    FbgSpectrum,
    PeriodicityResult,
    PhaseSeries,
    SlopeSeries,
    TemperatureSeries,
    ToneDetection,
    amplitude_change_map,
    bragg_periodicity,
    core_temperature_series,
    detect_tone,
    differential_phase,
    fbg_spectra,
    inverse_filter_chamber,
    localize_tone,
    mean_power_trace,
    phase_slope,
    phase_to_strain,
    select_gauges,
    unwrap,
)
from .errors import (
    ConfigError,
    DetectionError,
    GeometryError,
    OverlapError,
    PhysicsError,
    TraceFormatError,
)

__version__ = "0.1.0"
