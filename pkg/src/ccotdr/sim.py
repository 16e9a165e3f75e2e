"""Coherent back-scatter shot simulation.

Every reflective element k at position z_k contributes a delayed, scaled,
phase-rotated copy of the probe frame to the received baseband signal:

    r[m] = sum_k a_k * s[m - d_k] * exp(i * theta_k) + noise

with the round-trip delay d_k rounded to the nearest receiver sample, the
amplitude a_k combining reflectivity, round-trip attenuation and (for
gratings) the spectral response at the probe wavelength, and

    theta_k = -(kappa * 2 pi / lambda) * (n_g z_k + dOPL(z_k, t))
              + phi_laser[m] - phi_laser[m - d_k]

where kappa is the phase-convention pass factor and phi_laser is a Wiener
phase walk shared by probe and local oscillator (ideal homodyne, the LO path
sees the walk delayed by the round trip).  The element sum is a convolution
of the phase-rotated frame with the complex impulse response of the fiber
and is evaluated with FFTs, batched over shots.

Per-shot randomness is drawn from `numpy.random.default_rng(shot_seed)` in a
fixed order (laser-phase increments, then AWGN x-re, x-im, y-re, y-im), so a
shot is fully determined by its seed regardless of batching or worker count.
Each element's polarization (Jones vector) is derived by hashing its
position together with the simulator seed, making it independent of element
ordering; the shot of a union of scatterer sets is therefore the sample-wise
sum of the individual shots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OverlapError
from .fibermodel import (
    FiberModel,
    SensingConstants,
    event_path_weight,
    event_time_factor,
    fbg_reflectivity,
    validate_events,
)
from .probe import C_VACUUM, ProbeFrame, required_zero_pad


@dataclass(frozen=True)
class LaserModel:
    """Probe/LO source: wavelength and Lorentzian linewidth of the phase walk."""

    wavelength: float = 1550e-9  # m
    linewidth: float = 100.0  # Hz, 0 disables phase noise

    def __post_init__(self):
        if self.linewidth < 0:
            raise ValueError("linewidth must be >= 0")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")


@dataclass(frozen=True)
class NoiseModel:
    """Additive receiver noise per quadrature, per polarization, per sample."""

    awgn_sigma: float = 0.0  # field units
    enabled: bool = True

    def __post_init__(self):
        if self.awgn_sigma < 0:
            raise ValueError("awgn_sigma must be >= 0")

    @property
    def active(self) -> bool:
        return self.enabled and self.awgn_sigma > 0.0


@dataclass(frozen=True)
class Shot:
    """Received complex baseband of one probe frame, both polarizations."""

    timestamp: float  # s
    which: str  # 'A' or 'B'
    iq_x: np.ndarray
    iq_y: np.ndarray
    sample_rate: float  # Hz


def laser_phase_walk(
    linewidth: float, n: int, sample_period: float, seed
) -> np.ndarray:
    """Wiener phase noise: phi[0] = 0, increments ~ N(0, 2 pi dv Ts)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    phi = np.zeros(n)
    if linewidth > 0.0:
        rng = np.random.default_rng(seed)
        sigma = np.sqrt(2.0 * np.pi * linewidth * sample_period)
        np.cumsum(sigma * rng.standard_normal(n - 1), out=phi[1:])
    return phi


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """Vectorized SplitMix64 finalizer on uint64 arrays."""
    z = x + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _position_jones(positions: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Haar-uniform Jones vector per element, keyed by (seed, position).

    Hash-derived so that an element keeps its polarization no matter how the
    element list is ordered or partitioned.
    """
    bits = np.ascontiguousarray(positions, dtype=np.float64).view(np.uint64)
    key = _splitmix64(np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF)]))[0]
    h0 = _splitmix64(bits ^ key)
    h1 = _splitmix64(h0)
    h2 = _splitmix64(h1)
    to_unit = 1.0 / 2.0**64
    u = h0.astype(np.float64) * to_unit
    beta = 2.0 * np.pi * h1.astype(np.float64) * to_unit
    gamma = 2.0 * np.pi * h2.astype(np.float64) * to_unit
    jx = np.sqrt(u) * np.exp(1j * beta)
    jy = np.sqrt(1.0 - u) * np.exp(1j * gamma)
    return jx, jy


class ShotSimulator:
    """Precomputed single-fiber shot engine.

    Builds the element inventory (delays, amplitudes, polarizations, static
    phases) once, then evaluates shots one at a time or in batches.  Pure
    given (t, which, seed); safe to drive from multiple workers.
    """

    def __init__(
        self,
        model: FiberModel,
        frames: dict[str, ProbeFrame],
        events=(),
        constants: SensingConstants | None = None,
        laser: LaserModel | None = None,
        noise: NoiseModel | None = None,
        seed: int = 0,
    ):
        self.model = model
        self.constants = constants or SensingConstants()
        self.laser = laser or LaserModel(wavelength=model.wavelength)
        self.noise = noise or NoiseModel()
        self.events = tuple(events)
        validate_events(model, self.events)

        if not frames:
            raise ValueError("at least one probe frame is required")
        geoms = {
            (f.samples.size, f.samples_per_symbol, f.symbol_rate) for f in frames.values()
        }
        if len(geoms) != 1:
            raise ValueError("frames must share length, samples_per_symbol and symbol_rate")
        self.frames = dict(frames)
        any_frame = next(iter(frames.values()))
        need = required_zero_pad(model.length, model.group_index, any_frame.symbol_rate)
        for f in frames.values():
            if f.zero_pad_symbols < need:
                raise OverlapError(
                    f"zero pad {f.zero_pad_symbols} symbols < required {need} for "
                    f"{model.length} m fiber: echoes of consecutive frames would overlap"
                )
        self.sample_rate = any_frame.sample_rate
        self._n = any_frame.samples.size
        self._sps = any_frame.samples_per_symbol

        # --- element inventory ----------------------------------------
        lam = self.laser.wavelength
        pos, amp = [], []
        for s in model.scatterers:
            pos.append(s.position)
            amp.append(s.reflectivity)
        n_scatter = len(pos)
        for r in model.reflectors:
            pos.append(r.position)
            amp.append(complex(r.field_amplitude))
        for g in model.fbgs:
            pos.append(g.position)
            amp.append(complex(fbg_reflectivity(g, lam)))
        z = np.asarray(pos, dtype=np.float64)
        a = np.asarray(amp, dtype=np.complex128)

        ng = model.group_index
        # one-way attenuation alpha dB/km, round trip 2*alpha*z
        a = a * 10.0 ** (-model.attenuation_db_per_km * z * 1e-4)
        kappa = self.constants.pass_factor
        self._wave_factor = -kappa * 2.0 * np.pi / lam
        static_phase = self._wave_factor * ng * z
        a = a * np.exp(1j * static_phase)

        jx, jy = _position_jones(z, seed)
        for i, r in enumerate(model.reflectors):
            if r.jones is not None:
                jx[n_scatter + i] = r.jones[0]
                jy[n_scatter + i] = r.jones[1]

        d = np.rint(2.0 * z * ng / C_VACUUM * self.sample_rate).astype(np.int64)
        code_len = any_frame.n_code_symbols * self._sps
        if z.size and d.max() + code_len > self._n:
            raise OverlapError("farthest echo does not fit in the frame window")
        self._nbins = int(d.max()) + 1 if z.size else 1

        # elements are stored sorted by delay so per-shot binning is a plain
        # segmented reduction with no gather
        order = np.argsort(d, kind="stable")
        z = z[order]
        self._positions = z
        self._base_x = np.ascontiguousarray((a * jx)[order])
        self._base_y = np.ascontiguousarray((a * jy)[order])
        d_sorted = d[order]
        if z.size:
            starts = np.flatnonzero(np.r_[True, np.diff(d_sorted) > 0])
            self._starts = starts
            self._bin_ids = d_sorted[starts]
        else:
            self._starts = np.array([], dtype=np.int64)
            self._bin_ids = np.array([], dtype=np.int64)

        self._event_terms = [
            (event_path_weight(ev, z, ng, self.constants), ev) for ev in self.events
        ]

        nfft = 1
        while nfft < self._n + self._nbins:
            nfft <<= 1
        self._nfft = nfft
        self._which_order = sorted(self.frames)
        self._which_index = {w: i for i, w in enumerate(self._which_order)}
        self._frame_fft_stack = np.stack(
            [np.fft.fft(self.frames[w].samples, nfft) for w in self._which_order]
        )
        self._frame_fft = {
            w: self._frame_fft_stack[i] for w, i in self._which_index.items()
        }
        self._static_h: tuple[np.ndarray, np.ndarray] | None = None
        if not self.events:
            hx, hy = self._impulse_response(np.zeros(1))
            self._static_h = (np.fft.fft(hx[0], nfft), np.fft.fft(hy[0], nfft))

    @property
    def frame_duration(self) -> float:
        return next(iter(self.frames.values())).duration

    def _impulse_response(self, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Complex fiber impulse response per delay bin, one row per shot."""
        B = ts.size
        K = self._positions.size
        if K == 0:
            zeros = np.zeros((B, self._nbins), dtype=np.complex128)
            return zeros, zeros.copy()
        if self._event_terms:
            dopl = np.zeros((B, K))
            for w, ev in self._event_terms:
                factor = np.atleast_1d(np.asarray(event_time_factor(ev, ts), dtype=np.float64))
                dopl += factor[:, None] * w[None, :]
            rot = np.exp(1j * self._wave_factor * dopl)
            wx = rot * self._base_x[None, :]
            wy = rot * self._base_y[None, :]
        else:
            wx = np.broadcast_to(self._base_x, (B, K))
            wy = np.broadcast_to(self._base_y, (B, K))
        hx = np.zeros((B, self._nbins), dtype=np.complex128)
        hy = np.zeros((B, self._nbins), dtype=np.complex128)
        hx[:, self._bin_ids] = np.add.reduceat(wx, self._starts, axis=1)
        hy[:, self._bin_ids] = np.add.reduceat(wy, self._starts, axis=1)
        return hx, hy

    def batch_iq(self, timestamps, whichs, seeds) -> tuple[np.ndarray, np.ndarray]:
        """Received IQ for a batch of shots; rows follow the input order."""
        ts = np.atleast_1d(np.asarray(timestamps, dtype=np.float64))
        whichs = list(whichs)
        seeds = list(seeds)
        B = ts.size
        if len(whichs) != B or len(seeds) != B:
            raise ValueError("timestamps, whichs and seeds must have equal length")
        n, nfft = self._n, self._nfft

        if self._static_h is not None:
            Hx = self._static_h[0][None, :]
            Hy = self._static_h[1][None, :]
        else:
            hx, hy = self._impulse_response(ts)
            Hx = np.fft.fft(hx, nfft, axis=1)
            Hy = np.fft.fft(hy, nfft, axis=1)

        rngs = None
        if self.laser.linewidth > 0.0 or self.noise.active:
            rngs = [np.random.default_rng(s) for s in seeds]

        if self.laser.linewidth > 0.0:
            sigma = np.sqrt(2.0 * np.pi * self.laser.linewidth / self.sample_rate)
            phi = np.zeros((B, n))
            for r in range(B):
                np.cumsum(sigma * rngs[r].standard_normal(n - 1), out=phi[r, 1:])
            st = np.empty((B, n), dtype=np.complex128)
            for r in range(B):
                st[r] = self.frames[whichs[r]].samples * np.exp(-1j * phi[r])
            S = np.fft.fft(st, nfft, axis=1)
            rx = np.fft.ifft(S * Hx, axis=1)[:, :n]
            ry = np.fft.ifft(S * Hy, axis=1)[:, :n]
            carrier = np.exp(1j * phi)
            rx *= carrier
            ry *= carrier
        else:
            S = self._frame_fft_stack[[self._which_index[w] for w in whichs]]
            rx = np.fft.ifft(S * Hx, axis=1)[:, :n]
            ry = np.fft.ifft(S * Hy, axis=1)[:, :n]

        if self.noise.active:
            sig = self.noise.awgn_sigma
            for r in range(B):
                gx = rngs[r].standard_normal((2, n))
                gy = rngs[r].standard_normal((2, n))
                rx[r] += sig * (gx[0] + 1j * gx[1])
                ry[r] += sig * (gy[0] + 1j * gy[1])
        return np.ascontiguousarray(rx), np.ascontiguousarray(ry)

    def shot(self, t: float, which: str, seed: int) -> Shot:
        """Simulate a single shot."""
        if which not in self.frames:
            raise ValueError(f"no frame registered for sequence {which!r}")
        rx, ry = self.batch_iq([t], [which], [seed])
        return Shot(
            timestamp=float(t),
            which=which,
            iq_x=rx[0],
            iq_y=ry[0],
            sample_rate=self.sample_rate,
        )


def simulate_shot(
    model: FiberModel,
    frame: ProbeFrame,
    events=(),
    constants: SensingConstants | None = None,
    laser: LaserModel | None = None,
    noise: NoiseModel | None = None,
    t: float = 0.0,
    seed: int = 0,
) -> Shot:
    """One-off shot; `seed` fixes both polarization draw and noise streams."""
    sim = ShotSimulator(
        model, {frame.which: frame}, events, constants, laser, noise, seed=seed
    )
    return sim.shot(t, frame.which, seed)


def campaign_batch_size(n_elements: int, target: float = 2e6) -> int:
    """Shots per batch sized to keep the weight matrix around `target` cells."""
    if n_elements <= 0:
        return 128
    return int(np.clip(target // n_elements, 4, 128))


def run_campaign(
    model: FiberModel,
    frame_a: ProbeFrame,
    frame_b: ProbeFrame,
    events=(),
    constants: SensingConstants | None = None,
    laser: LaserModel | None = None,
    noise: NoiseModel | None = None,
    shot_rate: float = 2000.0,
    duration: float = 1.0,
    seed: int = 0,
    batch_size: int | None = None,
):
    """Yield alternating A/B shots at `shot_rate` for `duration` seconds.

    Shot i gets timestamp i/shot_rate and RNG seed `seed ^ i`, so the stream
    is reproducible and order-independent: any parallel evaluation that
    respects per-shot seeds produces the identical shots.
    """
    if seed < 0:
        raise ValueError("seed must be >= 0")
    sim = ShotSimulator(
        model, {"A": frame_a, "B": frame_b}, events, constants, laser, noise, seed=seed
    )
    if shot_rate > 1.0 / sim.frame_duration:
        raise OverlapError(
            f"shot rate {shot_rate} Hz exceeds 1/frame duration "
            f"{1.0 / sim.frame_duration:.6g} Hz"
        )
    n_shots = int(round(shot_rate * duration))
    if batch_size is None:
        batch_size = campaign_batch_size(len(model.element_positions()))
    for start in range(0, n_shots, batch_size):
        idx = np.arange(start, min(start + batch_size, n_shots))
        ts = idx / shot_rate
        whichs = ["A" if i % 2 == 0 else "B" for i in idx]
        seeds = [seed ^ int(i) for i in idx]
        rx, ry = sim.batch_iq(ts, whichs, seeds)
        for r, i in enumerate(idx):
            yield Shot(
                timestamp=float(ts[r]),
                which=whichs[r],
                iq_x=rx[r],
                iq_y=ry[r],
                sample_rate=sim.sample_rate,
            )
