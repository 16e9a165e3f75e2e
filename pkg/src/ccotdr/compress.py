"""Correlation compression: received IQ -> complex reflectivity vs position.

Cross-correlating a shot with its transmit sequence compresses every echo
into a peak one symbol wide; summing the profiles of the two complementary
sequences cancels the correlation sidelobes.  Correlations run over
power-of-two FFTs in double precision and are normalized by the reference
energy, so an ideal reflector compresses to a peak equal to its field
reflectivity amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import GeometryError
from .probe import C_VACUUM
from .sim import Shot


def _next_pow2(n: int) -> int:
    m = 1
    while m < n:
        m <<= 1
    return m


def xcorr(received: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Aperiodic cross-correlation of `received` against `reference` via FFT.

    Returns len(received) - len(reference) + 1 lags starting at lag 0,
    normalized by the reference energy.  Matched-filter convention:
    out[j] = sum_i received[j + i] * conj(reference[i]) / sum_i |reference[i]|^2.
    """
    received = np.asarray(received)
    reference = np.asarray(reference)
    n, m = received.size, reference.size
    if m == 0:
        raise GeometryError("reference must be non-empty")
    if n < m:
        raise GeometryError(f"received ({n}) shorter than reference ({m})")
    energy = float(np.sum(np.abs(reference) ** 2))
    if energy == 0.0:
        raise GeometryError("reference has zero energy")
    nfft = _next_pow2(n + m)
    spec = np.fft.fft(received, nfft) * np.conj(np.fft.fft(reference, nfft))
    return np.fft.ifft(spec)[: n - m + 1] / energy


def xcorr_batch(received: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Row-wise `xcorr` for a (B, n) batch, reusing one reference FFT."""
    received = np.atleast_2d(np.asarray(received))
    reference = np.asarray(reference)
    n, m = received.shape[1], reference.size
    if n < m:
        raise GeometryError(f"received ({n}) shorter than reference ({m})")
    energy = float(np.sum(np.abs(reference) ** 2))
    nfft = _next_pow2(n + m)
    ref_spec = np.conj(np.fft.fft(reference, nfft))
    spec = np.fft.fft(received, nfft, axis=1) * ref_spec[None, :]
    return np.fft.ifft(spec, axis=1)[:, : n - m + 1] / energy


@dataclass(frozen=True)
class CompressedProfile:
    """Complex reflectivity vs position for one shot (or combined pair).

    `samples` has shape (n_polarizations, n_positions); position of sample i
    is origin + i * position_step.
    """

    samples: np.ndarray
    position_step: float  # m
    origin: float  # m
    timestamp: float  # s
    which: str | None = None  # 'A', 'B', or None once pair-combined

    @property
    def n_positions(self) -> int:
        return int(self.samples.shape[-1])

    @property
    def positions(self) -> np.ndarray:
        return self.origin + self.position_step * np.arange(self.n_positions)

    def combined_power(self) -> np.ndarray:
        """|s|^2 summed over polarizations."""
        return np.sum(np.abs(self.samples) ** 2, axis=0)


def position_axis(index, sample_rate: float, group_index: float):
    """Round-trip sample index -> position: z = c * i / (2 * n_g * fs)."""
    return C_VACUUM * np.asarray(index, dtype=np.float64) / (2.0 * group_index * sample_rate)


def nearest_index(position: float, sample_rate: float, group_index: float) -> int:
    """Position -> nearest round-trip sample index."""
    return int(round(2.0 * group_index * sample_rate * position / C_VACUUM))


def compress_shot(shot: Shot, reference: np.ndarray, group_index: float) -> CompressedProfile:
    """Correlate both polarizations of one shot against its code waveform."""
    px = xcorr(shot.iq_x, reference)
    py = xcorr(shot.iq_y, reference)
    step = float(position_axis(1, shot.sample_rate, group_index))
    return CompressedProfile(
        samples=np.vstack([px, py]),
        position_step=step,
        origin=0.0,
        timestamp=shot.timestamp,
        which=shot.which,
    )


def _geometry_equal(a: CompressedProfile, b: CompressedProfile) -> bool:
    return (
        a.samples.shape == b.samples.shape
        and abs(a.position_step - b.position_step) <= 1e-12 * max(a.position_step, b.position_step)
        and abs(a.origin - b.origin) <= 1e-9 + 1e-12 * abs(a.origin)
    )


def golay_compress(profile_a: CompressedProfile, profile_b: CompressedProfile) -> CompressedProfile:
    """Combine the profiles of consecutive A and B shots.

    Sample-wise combination (a + b) / 2; the factor of two is the pair
    normalization that keeps an ideal reflector's peak equal to its field
    amplitude.  Sidelobes cancel exactly for a static channel.
    """
    if not _geometry_equal(profile_a, profile_b):
        raise GeometryError("A/B profiles do not share the same geometry")
    if profile_a.which is not None and profile_b.which is not None:
        if {profile_a.which, profile_b.which} != {"A", "B"}:
            raise GeometryError(
                f"expected one A and one B profile, got {profile_a.which}/{profile_b.which}"
            )
    return CompressedProfile(
        samples=0.5 * (profile_a.samples + profile_b.samples),
        position_step=profile_a.position_step,
        origin=profile_a.origin,
        timestamp=0.5 * (profile_a.timestamp + profile_b.timestamp),
        which=None,
    )


def roi_gate(profile: CompressedProfile, window: tuple[float, float], decimate: int = 1) -> CompressedProfile:
    """Early data reduction: keep the position window, optionally decimated.

    The window is boundary-inclusive; `decimate` keeps every k-th sample and
    scales the position step accordingly.
    """
    if decimate < 1:
        raise ValueError("decimate must be >= 1")
    w0, w1 = window
    if w1 < w0:
        raise ValueError("window must be (low, high)")
    z = profile.positions
    eps = 1e-9 * max(profile.position_step, 1.0)
    inside = np.flatnonzero((z >= w0 - eps) & (z <= w1 + eps))
    if inside.size == 0:
        raise ValueError(f"window [{w0}, {w1}] m selects no samples")
    i0, i1 = int(inside[0]), int(inside[-1]) + 1
    samples = profile.samples[:, i0:i1:decimate]
    return replace(
        profile,
        samples=np.ascontiguousarray(samples),
        position_step=profile.position_step * decimate,
        origin=float(z[i0]),
    )


@dataclass(frozen=True)
class Waterfall:
    """Time x position stack of profiles sharing one geometry.

    `data` has shape (n_rows, n_polarizations, n_positions); rows are sorted
    by timestamp and uniformly spaced by `row_period`.
    """

    data: np.ndarray
    timestamps: np.ndarray  # s, one per row
    position_step: float  # m
    origin: float  # m
    row_period: float  # s, 0 for a single row

    @property
    def n_rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def n_positions(self) -> int:
        return int(self.data.shape[-1])

    @property
    def positions(self) -> np.ndarray:
        return self.origin + self.position_step * np.arange(self.n_positions)

    def combined_power(self) -> np.ndarray:
        """(n_rows, n_positions) power summed over polarizations."""
        return np.sum(np.abs(self.data) ** 2, axis=1)


def stack_waterfall(profiles) -> Waterfall:
    """Stack ordered profiles into a Waterfall, checking geometry and order."""
    profiles = list(profiles)
    if not profiles:
        raise ValueError("need at least one profile")
    first = profiles[0]
    for p in profiles[1:]:
        if not _geometry_equal(first, p):
            raise GeometryError("profiles do not share the same geometry")
    ts = np.array([p.timestamp for p in profiles], dtype=np.float64)
    if np.any(np.diff(ts) <= 0):
        raise ValueError("profiles must be ordered by strictly increasing timestamp")
    if ts.size > 1:
        dt = np.diff(ts)
        period = float(np.median(dt))
        if np.max(np.abs(dt - period)) > 1e-6 * period:
            raise ValueError("profile timestamps are not uniformly spaced")
    else:
        period = 0.0
    data = np.stack([p.samples for p in profiles], axis=0)
    return Waterfall(
        data=data,
        timestamps=ts,
        position_step=first.position_step,
        origin=first.origin,
        row_period=period,
    )
