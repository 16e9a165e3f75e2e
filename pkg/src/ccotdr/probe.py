"""Complementary Golay codes and BPSK probe-frame construction.

A probe frame is a +-1 code sequence transmitted at the configured symbol
rate with NRZ pulse shaping (no transmit filter), followed by enough zero
padding that the echo of one frame has fully returned before the next frame
launches.  Because the code compresses to a single-symbol-wide peak, the
two-point resolution of the whole instrument is set by the symbol rate
alone: dz = c / (2 * n_g * R).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: vacuum speed of light used throughout the package, m/s
C_VACUUM = 2.9979e8

#: largest accepted code order (2**20 symbols) -- guards memory
MAX_ORDER = 20


@dataclass(frozen=True)
class GolayPair:
    """Pair of +-1 sequences whose aperiodic autocorrelations sum to a delta.

    Both sequences have length 2**order.  The summed autocorrelation equals
    2 * length at lag zero and is exactly zero at every other lag, in integer
    arithmetic; this is what removes correlation sidelobes after combining
    the two half-measurements.
    """

    seq_a: np.ndarray
    seq_b: np.ndarray
    order: int

    @property
    def length(self) -> int:
        return int(self.seq_a.size)


def golay_pair(order: int) -> GolayPair:
    """Return the complementary pair of length 2**order.

    Built by recursive doubling from a = b = [+1] via
    (a, b) -> (a || b, a || -b).  Any complementary pair works for pulse
    compression; the doubling pair is the reproducible default.
    """
    if not isinstance(order, (int, np.integer)) or order < 0:
        raise ValueError("order must be a non-negative integer")
    if order > MAX_ORDER:
        raise ValueError(f"order {order} exceeds maximum {MAX_ORDER}")
    a = np.array([1], dtype=np.int64)
    b = np.array([1], dtype=np.int64)
    for _ in range(int(order)):
        a, b = np.concatenate([a, b]), np.concatenate([a, -b])
    return GolayPair(seq_a=a, seq_b=b, order=int(order))


@dataclass(frozen=True)
class ProbeFrame:
    """One BPSK transmit frame: NRZ-shaped code followed by zero padding.

    `samples` holds the baseband waveform at `samples_per_symbol` samples per
    symbol: the +-1 code samples first, then the zero pad.  BPSK maps bit +-1
    to field amplitude +-1 (carrier phase 0 / pi).
    """

    samples: np.ndarray
    symbol_rate: float
    samples_per_symbol: int
    which: str
    n_code_symbols: int
    zero_pad_symbols: int

    @property
    def sample_rate(self) -> float:
        return self.symbol_rate * self.samples_per_symbol

    @property
    def n_symbols(self) -> int:
        return self.n_code_symbols + self.zero_pad_symbols

    @property
    def duration(self) -> float:
        """Frame duration in seconds, code plus pad."""
        return self.n_symbols / self.symbol_rate

    @property
    def code_samples(self) -> np.ndarray:
        """The +-1 reference waveform without padding (correlation template)."""
        return self.samples[: self.n_code_symbols * self.samples_per_symbol]


def build_frame(
    pair: GolayPair,
    which: str,
    samples_per_symbol: int = 2,
    zero_pad_symbols: int = 0,
    symbol_rate: float = 1e9,
) -> ProbeFrame:
    """Expand one sequence of `pair` to an NRZ waveform and append the pad."""
    if which not in ("A", "B"):
        raise ValueError(f"which must be 'A' or 'B', got {which!r}")
    if samples_per_symbol < 1:
        raise ValueError("samples_per_symbol must be >= 1")
    if zero_pad_symbols < 0:
        raise ValueError("zero_pad_symbols must be >= 0")
    if symbol_rate <= 0:
        raise ValueError("symbol_rate must be positive")
    seq = pair.seq_a if which == "A" else pair.seq_b
    sps = int(samples_per_symbol)
    samples = np.concatenate(
        [np.repeat(seq.astype(np.float64), sps), np.zeros(int(zero_pad_symbols) * sps)]
    )
    return ProbeFrame(
        samples=samples,
        symbol_rate=float(symbol_rate),
        samples_per_symbol=sps,
        which=which,
        n_code_symbols=pair.length,
        zero_pad_symbols=int(zero_pad_symbols),
    )


def round_trip_time(fiber_length: float, group_index: float) -> float:
    """Two-way propagation time to the fiber end, seconds."""
    return 2.0 * fiber_length * group_index / C_VACUUM


def required_zero_pad(fiber_length: float, group_index: float, symbol_rate: float) -> int:
    """Minimum pad, in symbols, so only one sequence is ever in flight.

    ceil(symbol_rate * round-trip time); frames padded to at least this
    length guarantee non-overlapping shots for the given fiber.
    """
    if fiber_length < 0:
        raise ValueError("fiber_length must be >= 0")
    if symbol_rate <= 0:
        raise ValueError("symbol_rate must be positive")
    return int(math.ceil(symbol_rate * round_trip_time(fiber_length, group_index)))


def spatial_resolution(symbol_rate: float, group_index: float) -> float:
    """Two-point resolution in meters for a given symbol rate: c/(2*n_g*R)."""
    if symbol_rate <= 0:
        raise ValueError("symbol_rate must be positive")
    return C_VACUUM / (2.0 * group_index * symbol_rate)
