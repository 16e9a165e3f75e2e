"""Binary trace container for raw shots and compressed profiles.

Record layout (little-endian), records simply concatenated:

    magic   4 bytes  b"CCOT"
    version u16      format version, currently 1
    kind    u16      1 = shot (sequence A), 2 = shot (sequence B), 3 = profile
    sample_rate   f64
    position_step f64
    origin        f64
    count         u64   complex samples per polarization
    payload       count * 2 * 4 bytes per polarization, float32 (re, im)
                  interleaved, polarizations concatenated (x block, y block)

For shot records the axis is time: `sample_rate` is the receiver rate and
`origin` the shot timestamp in seconds.  For profile records the axis is
position (`origin`, `position_step` in meters) and `sample_rate` carries the
row timestamp in seconds, since profiles no longer have a time axis of their
own.  All records hold two polarizations.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import TraceFormatError

MAGIC = b"CCOT"
VERSION = 1
KIND_SHOT_A = 1
KIND_SHOT_B = 2
KIND_PROFILE = 3
N_POL = 2

_HEADER = struct.Struct("<4sHHdddQ")
HEADER_SIZE = _HEADER.size  # 40 bytes


@dataclass(frozen=True)
class TraceRecord:
    kind: int
    sample_rate: float
    position_step: float
    origin: float
    data: np.ndarray  # (N_POL, count) complex64

    @property
    def count(self) -> int:
        return int(self.data.shape[1])

    @property
    def is_shot(self) -> bool:
        return self.kind in (KIND_SHOT_A, KIND_SHOT_B)

    @property
    def which(self) -> str | None:
        return {KIND_SHOT_A: "A", KIND_SHOT_B: "B"}.get(self.kind)


def pack_record(record: TraceRecord) -> bytes:
    data = np.asarray(record.data, dtype=np.complex64)
    if data.ndim != 2 or data.shape[0] != N_POL:
        raise ValueError(f"data must have shape ({N_POL}, count)")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        record.kind,
        record.sample_rate,
        record.position_step,
        record.origin,
        data.shape[1],
    )
    interleaved = np.empty((N_POL, data.shape[1], 2), dtype="<f4")
    interleaved[..., 0] = data.real
    interleaved[..., 1] = data.imag
    return header + interleaved.tobytes()


def write_records(path, records) -> None:
    with open(path, "wb") as fh:
        for rec in records:
            fh.write(pack_record(rec))


def read_records(path) -> list[TraceRecord]:
    with open(path, "rb") as fh:
        blob = fh.read()
    records = []
    offset = 0
    total = len(blob)
    while offset < total:
        if total - offset < HEADER_SIZE:
            raise TraceFormatError(
                f"truncated header: expected {HEADER_SIZE} bytes, found {total - offset}",
                offset,
            )
        magic, version, kind, sample_rate, step, origin, count = _HEADER.unpack_from(
            blob, offset
        )
        if magic != MAGIC:
            raise TraceFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset)
        if version != VERSION:
            raise TraceFormatError(f"unsupported version {version}", offset + 4)
        if kind not in (KIND_SHOT_A, KIND_SHOT_B, KIND_PROFILE):
            raise TraceFormatError(f"unknown record kind {kind}", offset + 6)
        payload_size = count * N_POL * 8
        payload_off = offset + HEADER_SIZE
        if total - payload_off < payload_size:
            raise TraceFormatError(
                f"truncated payload: expected {payload_size} bytes, "
                f"found {total - payload_off}",
                payload_off,
            )
        raw = np.frombuffer(
            blob, dtype="<f4", count=count * N_POL * 2, offset=payload_off
        ).reshape(N_POL, count, 2)
        data = (raw[..., 0] + 1j * raw[..., 1]).astype(np.complex64)
        records.append(
            TraceRecord(
                kind=kind,
                sample_rate=sample_rate,
                position_step=step,
                origin=origin,
                data=data,
            )
        )
        offset = payload_off + payload_size
    return records


# ---------------------------------------------------------------------------
# CSV conversion (lossless at float32 precision)

_CSV_FMT = "%.9g"


def record_to_csv_lines(index: int, rec: TraceRecord) -> list[str]:
    lines = [
        f"# record {index} kind={rec.kind} sample_rate={rec.sample_rate!r} "
        f"position_step={rec.position_step!r} origin={rec.origin!r} count={rec.count}"
    ]
    if rec.is_shot:
        axis_name = "time_s"
        axis = rec.origin + np.arange(rec.count) / rec.sample_rate if rec.sample_rate else np.arange(rec.count, dtype=float)
    else:
        axis_name = "position_m"
        axis = rec.origin + rec.position_step * np.arange(rec.count)
    lines.append(f"record,{axis_name},re_x,im_x,re_y,im_y")
    x, y = rec.data[0], rec.data[1]
    for i in range(rec.count):
        lines.append(
            f"{index},{_CSV_FMT % axis[i]},{_CSV_FMT % x[i].real},{_CSV_FMT % x[i].imag},"
            f"{_CSV_FMT % y[i].real},{_CSV_FMT % y[i].imag}"
        )
    return lines


def convert_to_csv(input_path, output_path) -> int:
    """Dump a trace file to CSV; returns the number of records written."""
    records = read_records(input_path)
    with open(output_path, "w", newline="\n") as fh:
        for i, rec in enumerate(records):
            for line in record_to_csv_lines(i, rec):
                fh.write(line + "\n")
    return len(records)


def parse_csv(path) -> list[TraceRecord]:
    """Inverse of `convert_to_csv` (values exact at float32 precision)."""
    headers: list[dict] = []
    rows: dict[int, list[tuple[float, float, float, float]]] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# record"):
                fields = dict(
                    kv.split("=") for kv in line.split()[3:]
                )
                headers.append(
                    {
                        "kind": int(fields["kind"]),
                        "sample_rate": float(fields["sample_rate"]),
                        "position_step": float(fields["position_step"]),
                        "origin": float(fields["origin"]),
                        "count": int(fields["count"]),
                    }
                )
                rows[len(headers) - 1] = []
            elif line.startswith("record,"):
                continue
            else:
                parts = line.split(",")
                rows[int(parts[0])].append(tuple(float(v) for v in parts[2:6]))
    records = []
    for i, hdr in enumerate(headers):
        vals = np.array(rows[i], dtype=np.float32).reshape(hdr["count"], 4)
        data = np.empty((N_POL, hdr["count"]), dtype=np.complex64)
        data[0] = vals[:, 0] + 1j * vals[:, 1]
        data[1] = vals[:, 2] + 1j * vals[:, 3]
        records.append(
            TraceRecord(
                kind=hdr["kind"],
                sample_rate=hdr["sample_rate"],
                position_step=hdr["position_step"],
                origin=hdr["origin"],
                data=data,
            )
        )
    return records
