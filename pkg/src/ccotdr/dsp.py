"""Analyses on compressed waterfalls.

Four families of extraction, all pure transformations over a Waterfall:

* power:   averaged power trace (the fiber fingerprint) and the shot-to-shot
           amplitude-change map;
* phase:   differential phase between two positions (a gauge), tone
           detection and localization along the fiber;
* thermal: phase slopes over fixed windows, integration to a core
           temperature, and inverse filtering of the chamber-to-core lag;
* FBG:     per-grating reflection spectra from a wavelength sweep and the
           periodicity of the Bragg wavelengths over grating index.

Phase is taken from the higher-power polarization per position; amplitudes
sum power over both polarizations.  Per-sample confidence flags mark faded
positions whose power is below a caller-supplied floor; flagged samples are
linearly interpolated over time before any spectral analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter

from .compress import Waterfall
from .errors import DetectionError
from .fibermodel import SensingConstants, TemperatureProfile, first_order_lowpass


@dataclass(frozen=True)
class PhaseSeries:
    """Unwrapped differential phase of one gauge vs time."""

    values: np.ndarray  # rad
    sample_period: float  # s
    gauge: tuple[float, float]  # m, (z1, z2)
    t0: float = 0.0  # s, timestamp of first sample
    confidence: np.ndarray | None = None  # bool per sample, False = faded

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.sample_period * np.arange(self.values.size)


@dataclass(frozen=True)
class SlopeSeries:
    """Least-squares phase slope per window, rad/s at the window centers."""

    values: np.ndarray
    sample_period: float  # s, equals the window length
    t0: float  # s, center of the first window


@dataclass(frozen=True)
class TemperatureSeries:
    values: np.ndarray  # K (or degC, depending on the start temperature)
    sample_period: float  # s
    kind: str  # 'core' | 'chamber_estimate' | 'reference'
    t0: float = 0.0

    def __post_init__(self):
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if self.kind not in ("core", "chamber_estimate", "reference"):
            raise ValueError(f"unknown temperature series kind {self.kind!r}")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.sample_period * np.arange(self.values.size)


@dataclass(frozen=True)
class ToneDetection:
    frequency: float  # Hz
    power: float  # spectral peak power, arbitrary units
    detected: bool


@dataclass(frozen=True)
class PeriodicityResult:
    period: float  # gratings per cycle
    power: float
    detected: bool


@dataclass(frozen=True)
class FbgSpectrum:
    grating_index: int
    wavelengths: np.ndarray  # m
    powers: np.ndarray  # linear power
    bragg_estimate: float  # m


# ---------------------------------------------------------------------------
# power-domain analyses


def mean_power_trace(waterfall: Waterfall) -> np.ndarray:
    """Time-averaged power per position in dB (both polarizations summed)."""
    if waterfall.n_rows < 1:
        raise ValueError("waterfall must have at least one row")
    p = waterfall.combined_power().mean(axis=0)
    return 10.0 * np.log10(np.maximum(p, 1e-300))


def amplitude_change_map(waterfall: Waterfall) -> np.ndarray:
    """|amplitude(t+1) - amplitude(t)| per position; shape (rows-1, positions)."""
    if waterfall.n_rows < 2:
        raise ValueError("need at least two rows to difference")
    amp = np.sqrt(waterfall.combined_power())
    return np.abs(np.diff(amp, axis=0))


def select_gauges(
    positions: np.ndarray,
    power_db: np.ndarray,
    min_margin_db: float,
    gauge_length: float,
) -> list[tuple[float, float]]:
    """Pick gauge endpoint pairs spaced `gauge_length` apart.

    With a positive margin, positions whose power exceeds the local median
    (running window) by the margin anchor one gauge each; with margin 0 the
    result is a regular grid of gauges spanning the trace.
    """
    positions = np.asarray(positions, dtype=np.float64)
    power_db = np.asarray(power_db, dtype=np.float64)
    step = positions[1] - positions[0]
    if gauge_length < step:
        raise ValueError("gauge_length must be at least one position step")
    cells = max(1, int(round(gauge_length / step)))
    n = positions.size
    if min_margin_db <= 0:
        starts = np.arange(0, n - cells, cells)
        return [(float(positions[i]), float(positions[i + cells])) for i in starts]

    win = min(n if n % 2 == 1 else n - 1, 4 * cells + 1 if (4 * cells) % 2 == 0 else 4 * cells + 2, 401)
    win = max(3, win if win % 2 == 1 else win - 1)
    local_med = median_filter(power_db, size=win, mode="nearest")
    mask = power_db >= local_med + min_margin_db
    if not np.any(mask):
        raise DetectionError(f"no positions exceed the local median by {min_margin_db} dB")
    gauges = []
    idx = np.flatnonzero(mask)
    run_start = idx[0]
    prev = idx[0]
    runs = []
    for i in idx[1:]:
        if i != prev + 1:
            runs.append((run_start, prev))
            run_start = i
        prev = i
    runs.append((run_start, prev))
    for a, b in runs:
        peak = a + int(np.argmax(power_db[a : b + 1]))
        if peak + cells < n:
            gauges.append((float(positions[peak]), float(positions[peak + cells])))
        else:
            gauges.append((float(positions[peak - cells]), float(positions[peak])))
    return gauges


# ---------------------------------------------------------------------------
# phase-domain analyses


def unwrap(series: np.ndarray) -> np.ndarray:
    """Add multiples of 2 pi so consecutive differences lie in (-pi, pi]."""
    return np.unwrap(np.asarray(series, dtype=np.float64))


def _mean_power(waterfall: Waterfall) -> np.ndarray:
    """(n_pol, n_positions) time-mean power."""
    return np.mean(np.abs(waterfall.data) ** 2, axis=0)


def _pick_cell(waterfall: Waterfall, target: float, search_radius: float) -> int:
    """Index of the strongest position within `search_radius` of `target`."""
    z = waterfall.positions
    if not z[0] - 1e-9 <= target <= z[-1] + 1e-9:
        raise ValueError(f"position {target} m outside waterfall span [{z[0]}, {z[-1]}] m")
    if search_radius <= 0:
        return int(np.argmin(np.abs(z - target)))
    cand = np.flatnonzero(np.abs(z - target) <= search_radius)
    if cand.size == 0:
        return int(np.argmin(np.abs(z - target)))
    power = _mean_power(waterfall).sum(axis=0)
    return int(cand[np.argmax(power[cand])])


def _interpolate_flagged(values: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Linear interpolation over flagged samples, edges held."""
    if good.all():
        return values
    if not good.any():
        return values
    t = np.arange(values.size)
    out = values.copy()
    out[~good] = np.interp(t[~good], t[good], values[good])
    return out


def cell_phase(
    waterfall: Waterfall, z: float, search_radius: float = 0.0
) -> tuple[np.ndarray, float]:
    """Phase track of the strongest position near z (higher-power pol).

    Returns (wrapped phase per row, actual position used).  Building block
    for gauges whose endpoints live in different waterfall windows.
    """
    i = _pick_cell(waterfall, z, search_radius)
    pol = int(np.argmax(_mean_power(waterfall)[:, i]))
    return np.angle(waterfall.data[:, pol, i]).astype(np.float64), float(
        waterfall.positions[i]
    )


def differential_phase(
    waterfall: Waterfall,
    z1: float,
    z2: float,
    search_radius: float = 0.0,
    low_power_floor: float | None = None,
) -> PhaseSeries:
    """Phase difference between positions z2 and z1, unwrapped over time.

    Each endpoint uses the higher-power polarization of the strongest
    position within `search_radius` (phase gauges want back-scattering
    peaks, not faded cells).  Path perturbations are cumulative along the
    fiber, so the gauge isolates whatever happens between its endpoints.
    Rows whose endpoint power falls below `low_power_floor` (linear power)
    are flagged low-confidence and linearly interpolated.
    """
    if not z1 < z2:
        raise ValueError("need z1 < z2")
    i1 = _pick_cell(waterfall, z1, search_radius)
    i2 = _pick_cell(waterfall, z2, search_radius)
    if i1 == i2:
        raise ValueError("gauge endpoints collapsed onto the same position")
    mean_pow = _mean_power(waterfall)
    p1 = int(np.argmax(mean_pow[:, i1]))
    p2 = int(np.argmax(mean_pow[:, i2]))
    s1 = waterfall.data[:, p1, i1]
    s2 = waterfall.data[:, p2, i2]
    dphi = np.unwrap(np.angle(s2) - np.angle(s1))
    confidence = None
    if low_power_floor is not None:
        row_pow = np.minimum(np.abs(s1) ** 2, np.abs(s2) ** 2)
        confidence = row_pow >= low_power_floor
        dphi = _interpolate_flagged(dphi, confidence)
    z = waterfall.positions
    return PhaseSeries(
        values=dphi.astype(np.float64),
        sample_period=waterfall.row_period,
        gauge=(float(z[i1]), float(z[i2])),
        t0=float(waterfall.timestamps[0]),
        confidence=confidence,
    )


def _parabolic_refine(logmag: np.ndarray, k: int) -> float:
    """Sub-bin offset from a 3-point parabola on log magnitude, clamped."""
    if k <= 0 or k >= logmag.size - 1:
        return 0.0
    denom = logmag[k - 1] - 2.0 * logmag[k] + logmag[k + 1]
    if denom == 0.0:
        return 0.0
    delta = 0.5 * (logmag[k - 1] - logmag[k + 1]) / denom
    return float(np.clip(delta, -0.5, 0.5))


def detect_tone(series: PhaseSeries, margin_db: float = 6.0) -> ToneDetection:
    """Strongest spectral line of a phase series, parabolic-interpolated.

    The series is linearly detrended and Hann-windowed; the peak must exceed
    the median spectrum by `margin_db` to count as a detection.
    """
    y = np.asarray(series.values, dtype=np.float64)
    n = y.size
    if n < 64:
        raise ValueError("need at least 64 samples for tone detection")
    if series.sample_period <= 0:
        raise ValueError("series sample_period must be positive")
    t = np.arange(n)
    coef = np.polynomial.polynomial.polyfit(t, y, 1)
    y = y - np.polynomial.polynomial.polyval(t, coef)
    spec = np.abs(np.fft.rfft(y * np.hanning(n))) ** 2
    body = spec[1:]
    k = int(np.argmax(body)) + 1
    med = float(np.median(body))
    peak = float(spec[k])
    if peak <= 0.0 or (med > 0.0 and peak < med * 10.0 ** (margin_db / 10.0)):
        return ToneDetection(frequency=0.0, power=peak, detected=False)
    logmag = np.log(np.maximum(spec, 1e-300))
    delta = _parabolic_refine(logmag, k)
    freq = (k + delta) / (n * series.sample_period)
    return ToneDetection(frequency=float(freq), power=peak, detected=True)


def _selected_phase(waterfall: Waterfall) -> np.ndarray:
    """(rows, positions) phase of the per-position higher-power polarization."""
    mean_pow = _mean_power(waterfall)
    sel = np.argmax(mean_pow, axis=0)
    picked = np.take_along_axis(waterfall.data, sel[None, None, :], axis=1)[:, 0, :]
    return np.angle(picked)


def localize_tone(
    waterfall: Waterfall,
    frequency: float,
    gauge_length: float,
    fade_margin_db: float = 10.0,
    margin_db: float = 6.0,
) -> float:
    """Position of the gauge with the strongest response at `frequency`.

    Scans a gauge of `gauge_length` across every position, projects each
    unwrapped differential-phase track onto the target frequency, and
    returns the position label (leading edge) of the winning gauge.  Gauges
    whose endpoints are faded more than `fade_margin_db` below the median
    power are excluded.
    """
    if waterfall.n_rows < 2:
        raise ValueError("need at least two rows")
    nyquist = 0.5 / waterfall.row_period
    if not 0.0 < frequency < nyquist:
        raise ValueError(f"frequency {frequency} Hz outside (0, {nyquist}) Hz")
    cells = max(1, int(round(gauge_length / waterfall.position_step)))
    if cells >= waterfall.n_positions:
        raise ValueError("gauge_length exceeds the waterfall span")
    phase = _selected_phase(waterfall)
    dphi = np.unwrap(phase[:, cells:] - phase[:, :-cells], axis=0)
    dphi = dphi - dphi.mean(axis=0, keepdims=True)
    tt = waterfall.timestamps - waterfall.timestamps[0]
    probe = np.hanning(waterfall.n_rows) * np.exp(-2j * np.pi * frequency * tt)
    response = np.abs(probe @ dphi) ** 2

    cell_pow = _mean_power(waterfall).sum(axis=0)
    floor = np.median(cell_pow) * 10.0 ** (-fade_margin_db / 10.0)
    usable = (cell_pow[cells:] >= floor) & (cell_pow[:-cells] >= floor)
    if not np.any(usable):
        raise DetectionError("all gauges are faded below the usable floor")
    masked = np.where(usable, response, 0.0)
    best = int(np.argmax(masked))
    med = float(np.median(response[usable]))
    if med > 0.0 and masked[best] < med * 10.0 ** (margin_db / 10.0):
        raise DetectionError(
            f"no gauge exceeds the detection threshold at {frequency} Hz"
        )
    return float(waterfall.positions[best])


def phase_to_strain(
    dphi,
    gauge_length: float,
    constants: SensingConstants,
    wavelength: float,
    group_index: float,
):
    """Differential phase -> strain over the gauge.

    strain = dphi * lambda / (kappa * 2 pi * n_g * xi * gauge_length), with
    kappa the pass factor of the phase convention.  Under the single-pass
    convention 1 microstrain over 1 m of standard fiber at 1550 nm maps to
    4.7 rad.
    """
    if gauge_length <= 0:
        raise ValueError("gauge_length must be positive")
    kappa = constants.pass_factor
    scale = wavelength / (
        kappa * 2.0 * np.pi * group_index * constants.strain_optic_factor * gauge_length
    )
    return np.asarray(dphi, dtype=np.float64) * scale if np.ndim(dphi) else float(dphi * scale)


# ---------------------------------------------------------------------------
# thermal analyses


def phase_slope(series: PhaseSeries, window: float) -> SlopeSeries:
    """Least-squares slope per non-overlapping window of `window` seconds.

    Tone components average out once the window spans many tone periods,
    leaving the slow (thermal) drift.
    """
    dt = series.sample_period
    if dt <= 0:
        raise ValueError("series sample_period must be positive")
    w = int(round(window / dt))
    if w < 10:
        raise ValueError("window must cover at least 10 samples")
    n_win = series.values.size // w
    if n_win < 1:
        raise ValueError("series shorter than one window")
    y = series.values[: n_win * w].reshape(n_win, w)
    t = (np.arange(w) - (w - 1) / 2.0) * dt
    slopes = y @ t / np.sum(t * t)
    return SlopeSeries(
        values=slopes,
        sample_period=w * dt,
        t0=series.t0 + (w - 1) / 2.0 * dt,
    )


def core_temperature_series(
    slopes: SlopeSeries,
    span_length: float,
    wavelength: float,
    dn_dt: float,
    constants: SensingConstants,
    start_temperature: float = 0.0,
) -> TemperatureSeries:
    """Integrate phase slopes into the core temperature of a heated span.

    dT/dt = slope * lambda / (kappa * 2 pi * L * dn_dt); cumulative
    trapezoidal integration from the configured start temperature (the
    calibration is the known initial condition plus the configured dn_dt).
    """
    if span_length <= 0:
        raise ValueError("span_length must be positive")
    if dn_dt <= 0:
        raise ValueError("dn_dt must be positive")
    kappa = constants.pass_factor
    rate = slopes.values * wavelength / (kappa * 2.0 * np.pi * span_length * dn_dt)
    dt = slopes.sample_period
    temps = np.empty_like(rate)
    # first window center is dt/2 after the start of integration
    temps[0] = start_temperature + rate[0] * dt / 2.0
    if rate.size > 1:
        temps[1:] = temps[0] + np.cumsum(0.5 * (rate[1:] + rate[:-1]) * dt)
    return TemperatureSeries(values=temps, sample_period=dt, kind="core", t0=slopes.t0)


def _moving_average(y: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return y
    if width % 2 == 0:
        width += 1
    half = width // 2
    padded = np.concatenate([np.full(half, y[0]), y, np.full(half, y[-1])])
    kernel = np.full(width, 1.0 / width)
    return np.convolve(padded, kernel, mode="valid")


def inverse_filter_chamber(
    core: TemperatureSeries, tau: float, smoothing: int = 1
) -> TemperatureSeries:
    """Undo the first-order chamber-to-core lag: x = y + tau * dy/dt.

    The derivative is taken by central differences (one-sided at the ends)
    after a moving-average smoothing of `smoothing` samples.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    y = np.asarray(core.values, dtype=np.float64)
    if y.size < 3:
        raise ValueError("need at least 3 samples to differentiate")
    dt = core.sample_period
    ys = _moving_average(y, smoothing)
    dy = np.empty_like(ys)
    dy[1:-1] = (ys[2:] - ys[:-2]) / (2.0 * dt)
    dy[0] = (ys[1] - ys[0]) / dt
    dy[-1] = (ys[-1] - ys[-2]) / dt
    return TemperatureSeries(
        values=y + tau * dy,
        sample_period=dt,
        kind="chamber_estimate",
        t0=core.t0,
    )


def reference_core_series(
    event: TemperatureProfile, times: np.ndarray, start_temperature: float = 0.0
) -> np.ndarray:
    """Ground-truth core temperature at `times` for a chamber profile event."""
    return start_temperature + np.asarray(
        first_order_lowpass(event.times, event.delta_kelvin, event.time_constant, times)
    )


# ---------------------------------------------------------------------------
# FBG sweep analyses


def fbg_spectra(
    sweep,
    grating_positions,
) -> list[FbgSpectrum]:
    """Reflection spectrum per grating from a wavelength sweep of profiles.

    `sweep` maps probe wavelength -> CompressedProfile (dict or iterable of
    pairs).  The per-grating power at each wavelength is the combined-power
    maximum within a small window around the grating position; the Bragg
    estimate comes from a parabolic fit on log power around the spectral
    maximum (exact for a Gaussian line).
    """
    if hasattr(sweep, "items"):
        items = sorted(sweep.items())
    else:
        items = sorted(sweep)
    if len(items) < 3:
        raise ValueError("need at least 3 sweep wavelengths")
    wavelengths = np.array([w for w, _ in items], dtype=np.float64)
    profiles = [p for _, p in items]
    first = profiles[0]
    step = first.position_step
    grating_positions = np.asarray(grating_positions, dtype=np.float64)
    if grating_positions.size > 1:
        min_gap = float(np.min(np.diff(np.sort(grating_positions))))
        if min_gap < step:
            raise ValueError(
                f"grating spacing {min_gap:.4g} m below the position resolution {step:.4g} m"
            )
        half = max(1, int(round(0.4 * min_gap / step)))
    else:
        half = 2
    powers = np.stack([p.combined_power() for p in profiles], axis=0)
    z0 = first.origin
    n_cells = powers.shape[1]

    out = []
    for gi, zg in enumerate(grating_positions):
        center = int(round((zg - z0) / step))
        lo = max(0, center - half)
        hi = min(n_cells, center + half + 1)
        p = powers[:, lo:hi].max(axis=1)
        k = int(np.argmax(p))
        if 0 < k < p.size - 1 and np.all(p[k - 1 : k + 2] > 0):
            logp = np.log(p[k - 1 : k + 2])
            denom = logp[0] - 2.0 * logp[1] + logp[2]
            delta = 0.0 if denom == 0 else float(np.clip(0.5 * (logp[0] - logp[2]) / denom, -0.5, 0.5))
            grid = wavelengths[k] + delta * (wavelengths[min(k + 1, p.size - 1)] - wavelengths[k])
            bragg = float(grid)
        else:
            bragg = float(wavelengths[k])
        out.append(
            FbgSpectrum(
                grating_index=gi,
                wavelengths=wavelengths.copy(),
                powers=p,
                bragg_estimate=bragg,
            )
        )
    return out


def bragg_periodicity(
    bragg_estimates, margin_db: float = 6.0, min_periods: float = 3.0, pad_factor: int = 8
) -> PeriodicityResult:
    """Dominant period, in gratings, of the Bragg-wavelength sequence.

    Magnitude spectrum over grating index (Hann window, zero-padded),
    parabolic-interpolated peak.  Flat spectra, or periods so long that
    fewer than `min_periods` cycles fit in the data, report no periodicity.
    """
    x = np.asarray(bragg_estimates, dtype=np.float64)
    n = x.size
    if n < 8:
        raise ValueError("need at least 8 grating estimates")
    x = x - x.mean()
    nfft = pad_factor * n
    spec = np.abs(np.fft.rfft(x * np.hanning(n), nfft)) ** 2
    body = spec[1:]
    k = int(np.argmax(body)) + 1
    med = float(np.median(body))
    peak = float(spec[k])
    if peak <= 0.0 or (med > 0.0 and peak < med * 10.0 ** (margin_db / 10.0)):
        return PeriodicityResult(period=0.0, power=peak, detected=False)
    logmag = np.log(np.maximum(spec, 1e-300))
    delta = _parabolic_refine(logmag, k)
    freq = (k + delta) / nfft  # cycles per grating
    if freq <= 0.0:
        return PeriodicityResult(period=0.0, power=peak, detected=False)
    period = 1.0 / freq
    if n / period < min_periods:
        return PeriodicityResult(period=float(period), power=peak, detected=False)
    return PeriodicityResult(period=float(period), power=peak, detected=True)
