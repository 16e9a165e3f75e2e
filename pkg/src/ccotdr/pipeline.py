"""Scenario pipelines: simulate -> compress -> analyze -> report.

Campaign scenarios stream in fixed-size batches of shot pairs: each batch is
simulated, correlated, pair-combined, and reduced to complex64 rows before
the next batch runs, so memory stays bounded by the kept waterfall plus one
batch.  Batch boundaries are fixed by the scenario (not by the worker
count), every shot draws from its own seed, and partial sums are merged in
batch order, which makes outputs byte-identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from . import dsp, tracefile
from .compress import (
    CompressedProfile,
    Waterfall,
    position_axis,
    xcorr_batch,
)
from .errors import DetectionError
from .fibermodel import TemperatureProfile, first_order_lowpass
from .scenario import Scenario
from .sim import ShotSimulator, campaign_batch_size

_FMT = "%.10g"


# ---------------------------------------------------------------------------
# campaign plumbing


@dataclass(frozen=True)
class CampaignPlan:
    n_shots: int
    n_pairs: int
    batch_pairs: int

    def batches(self) -> list[tuple[int, int]]:
        """(first pair, last pair + 1) per batch."""
        return [
            (i, min(i + self.batch_pairs, self.n_pairs))
            for i in range(0, self.n_pairs, self.batch_pairs)
        ]


def _make_plan(scn: Scenario, n_elements: int) -> CampaignPlan:
    n_shots = int(round(scn.shot_rate * scn.duration))
    n_pairs = n_shots // 2
    if n_pairs < 1:
        raise ValueError("campaign too short: needs at least one A/B pair")
    batch_pairs = scn.batch_pairs or max(2, campaign_batch_size(n_elements) // 2)
    return CampaignPlan(n_shots=n_shots, n_pairs=n_pairs, batch_pairs=batch_pairs)


def _build_simulator(scn: Scenario) -> ShotSimulator:
    model = scn.build_model()
    fa, fb = scn.build_frames()
    return ShotSimulator(
        model,
        {"A": fa, "B": fb},
        scn.build_events(),
        scn.constants(),
        scn.laser(),
        scn.noise(),
        seed=scn.seed,
    )


class _BatchEngine:
    """Shared by the in-process path and pool workers."""

    def __init__(self, scn: Scenario, keep: slice | None):
        self.scn = scn
        self.sim = _build_simulator(scn)
        self.ref_a = self.sim.frames["A"].code_samples
        self.ref_b = self.sim.frames["B"].code_samples
        self.keep = keep

    def pair_rows(self, first: int, last: int):
        """Simulate and compress pairs [first, last).

        Returns (rows complex64 (n, pol, kept cells), pair timestamps,
        full-span power sum over the batch rows).
        """
        scn = self.scn
        shot_idx = np.arange(2 * first, 2 * last)
        ts = shot_idx / scn.shot_rate
        whichs = ["A" if i % 2 == 0 else "B" for i in shot_idx]
        seeds = [scn.seed ^ int(i) for i in shot_idx]
        rx, ry = self.sim.batch_iq(ts, whichs, seeds)
        pa_x = xcorr_batch(rx[0::2], self.ref_a)
        pb_x = xcorr_batch(rx[1::2], self.ref_b)
        pa_y = xcorr_batch(ry[0::2], self.ref_a)
        pb_y = xcorr_batch(ry[1::2], self.ref_b)
        px = 0.5 * (pa_x + pb_x)
        py = 0.5 * (pa_y + pb_y)
        power = (np.abs(px) ** 2 + np.abs(py) ** 2).sum(axis=0)
        rows = np.stack([px, py], axis=1)
        if self.keep is not None:
            rows = rows[:, :, self.keep]
        pair_ts = 0.5 * (ts[0::2] + ts[1::2])
        return rows.astype(np.complex64), pair_ts, power


_WORKER_ENGINE: _BatchEngine | None = None


def _worker_init(scn: Scenario, keep: slice | None):
    global _WORKER_ENGINE
    _WORKER_ENGINE = _BatchEngine(scn, keep)


def _worker_run(span: tuple[int, int]):
    assert _WORKER_ENGINE is not None
    return span[0], _WORKER_ENGINE.pair_rows(span[0], span[1])


def run_campaign_waterfall(
    scn: Scenario, workers: int = 1, keep: slice | None = None
) -> tuple[Waterfall, np.ndarray]:
    """All pairs of a campaign as a complex64 waterfall.

    Returns (waterfall over the kept cells, full-span mean power in dB).
    With workers > 1 the batches run in a process pool; results are merged
    in batch order so the output does not depend on the worker count.
    """
    engine = _BatchEngine(scn, keep)
    plan = _make_plan(scn, engine.sim._positions.size)
    spans = plan.batches()

    results: dict[int, tuple] = {}
    if workers <= 1 or len(spans) == 1:
        for span in spans:
            results[span[0]] = engine.pair_rows(span[0], span[1])
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_worker_init, initargs=(scn, keep)
        ) as pool:
            for first, payload in pool.map(_worker_run, spans, chunksize=1):
                results[first] = payload

    rows_parts, ts_parts = [], []
    power_sum = None
    for first, _last in spans:
        rows, pair_ts, power = results[first]
        rows_parts.append(rows)
        ts_parts.append(pair_ts)
        power_sum = power if power_sum is None else power_sum + power

    data = np.concatenate(rows_parts, axis=0)
    timestamps = np.concatenate(ts_parts)
    mean_power_db = 10.0 * np.log10(np.maximum(power_sum / plan.n_pairs, 1e-300))

    fs = scn.symbol_rate * scn.samples_per_symbol
    step = float(position_axis(1, fs, scn.group_index))
    origin = 0.0
    if keep is not None:
        origin = step * (keep.start or 0)
    period = float(np.median(np.diff(timestamps))) if timestamps.size > 1 else 0.0
    wf = Waterfall(
        data=data,
        timestamps=timestamps,
        position_step=step,
        origin=origin,
        row_period=period,
    )
    return wf, mean_power_db


# ---------------------------------------------------------------------------
# CSV writers (deterministic formatting)


def _write_csv(path, header: str, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_FMT % v for v in row) + "\n")


def _decimate_steps(n: int, limit: int) -> int:
    return max(1, int(np.ceil(n / max(1, limit))))


def write_power_trace(path, positions, power_db) -> None:
    _write_csv(path, "position_m,power_db", zip(positions, power_db))


def write_change_map(path, times, positions, change, max_rows, max_cols) -> None:
    rstep = _decimate_steps(change.shape[0], max_rows)
    cstep = _decimate_steps(change.shape[1], max_cols)
    sub = change[::rstep, ::cstep]
    pos = positions[::cstep]
    with open(path, "w", newline="\n") as fh:
        fh.write("time_s," + ",".join(_FMT % p for p in pos) + "\n")
        for t, row in zip(times[::rstep], sub):
            fh.write(_FMT % t + "," + ",".join(_FMT % v for v in row) + "\n")


def write_phase_waterfall(path, times, labels, series_matrix, max_rows) -> None:
    """series_matrix: (n_times, n_gauges) radians."""
    rstep = _decimate_steps(series_matrix.shape[0], max_rows)
    with open(path, "w", newline="\n") as fh:
        fh.write("time_s," + ",".join(f"gauge_{_FMT % z}_m" for z in labels) + "\n")
        for t, row in zip(times[::rstep], series_matrix[::rstep]):
            fh.write(_FMT % t + "," + ",".join(_FMT % v for v in row) + "\n")


def write_tones(path, tones) -> None:
    _write_csv(
        path,
        "frequency_hz,power,position_m",
        [(t["frequency"], t["power"], t["position"]) for t in tones],
    )


def write_temperature(path, times, columns: dict) -> None:
    names = list(columns)
    with open(path, "w", newline="\n") as fh:
        fh.write("time_s," + ",".join(names) + "\n")
        for i, t in enumerate(times):
            fh.write(
                _FMT % t + "," + ",".join(_FMT % columns[n][i] for n in names) + "\n"
            )


def write_fbg_spectra(path, spectra, positions, offsets) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(
            "grating_index,position_m,bragg_estimate_nm,"
            + ",".join("power_at_%s_pm" % (_FMT % (o * 1e12)) for o in offsets)
            + "\n"
        )
        for spec, z in zip(spectra, positions):
            fh.write(
                f"{spec.grating_index},{_FMT % z},{_FMT % (spec.bragg_estimate * 1e9)},"
                + ",".join(_FMT % p for p in spec.powers)
                + "\n"
            )


def write_summary(path, lines) -> None:
    with open(path, "w", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


# ---------------------------------------------------------------------------
# tone bookkeeping


def _cluster_tones(detections, freq_resolution: float):
    """Group per-gauge detections into distinct tones.

    Detections of the same physical tone agree in frequency across gauges;
    single-gauge outliers are kept only if nothing else was found.
    """
    det = sorted(detections, key=lambda d: d["frequency"])
    clusters = []
    for d in det:
        if clusters and d["frequency"] - clusters[-1][-1]["frequency"] <= 2.0 * freq_resolution:
            clusters[-1].append(d)
        else:
            clusters.append([d])
    keep = [c for c in clusters if len(c) >= 2]
    if not keep and clusters:
        keep = [max(clusters, key=lambda c: max(d["power"] for d in c))]
    out = []
    for c in keep:
        best = max(c, key=lambda d: d["power"])
        out.append(
            {
                "frequency": best["frequency"],
                "power": best["power"],
                "gauge": best["gauge"],
                "members": len(c),
            }
        )
    out.sort(key=lambda t: -t["power"])
    return out


def _grid_gauges(scn: Scenario, positions) -> list[tuple[float, float]]:
    """Overlapping gauge grid (half-gauge step) across the usable span."""
    step = positions[1] - positions[0]
    cells = max(1, int(round(scn.gauge_length / step)))
    half = max(1, cells // 2)
    n = positions.size
    gauges = []
    for start in range(0, n - cells, half):
        gauges.append((float(positions[start]), float(positions[start + cells])))
    return gauges


# ---------------------------------------------------------------------------
# per-kind analyses


def _analyze_acoustic(scn: Scenario, wf: Waterfall, power_db, out_dir) -> dict:
    positions = wf.positions
    write_power_trace(os.path.join(out_dir, "power_trace.csv"), positions, power_db)

    change = dsp.amplitude_change_map(wf)
    write_change_map(
        os.path.join(out_dir, "change_map.csv"),
        wf.timestamps[1:],
        positions,
        change,
        scn.max_csv_rows,
        scn.max_csv_cols,
    )
    mean_change = change.mean(axis=0)

    gauges = _grid_gauges(scn, positions)
    if scn.gauge_margin_db > 0:
        try:
            gauges += dsp.select_gauges(
                positions, power_db, scn.gauge_margin_db, scn.gauge_length
            )
        except DetectionError:
            pass
    gauges += scn.gauges

    detections = []
    series_cols, labels = [], []
    for z1, z2 in gauges:
        try:
            series = dsp.differential_phase(wf, z1, z2, search_radius=scn.search_radius)
        except ValueError:
            continue
        labels.append(z1)
        series_cols.append(series.values)
        try:
            tone = dsp.detect_tone(series)
        except ValueError:
            continue
        if tone.detected:
            detections.append(
                {"frequency": tone.frequency, "power": tone.power, "gauge": (z1, z2)}
            )

    if series_cols:
        matrix = np.stack(series_cols, axis=1)
        write_phase_waterfall(
            os.path.join(out_dir, "phase_waterfall.csv"),
            wf.timestamps,
            labels,
            matrix,
            scn.max_csv_rows,
        )

    freq_res = 1.0 / (wf.n_rows * wf.row_period) if wf.row_period else 1.0
    tones = _cluster_tones(detections, freq_res)
    for tone in tones:
        try:
            tone["position"] = dsp.localize_tone(
                wf, tone["frequency"], scn.gauge_length, fade_margin_db=scn.fade_margin_db
            )
        except (DetectionError, ValueError):
            tone["position"] = float("nan")
    write_tones(os.path.join(out_dir, "tones.csv"), tones)

    return {
        "positions": positions,
        "power_db": power_db,
        "mean_change": mean_change,
        "tones": tones,
        "n_gauges": len(gauges),
    }


def _thermal_event(scn: Scenario) -> TemperatureProfile:
    for ev in scn.build_events():
        if isinstance(ev, TemperatureProfile):
            return ev
    raise ValueError("thermal scenario needs a temperature event")


def _analyze_thermal(
    scn: Scenario,
    block1: Waterfall,
    block2: Waterfall,
    gauge: tuple[float, float],
    power_db,
    full_positions,
    out_dir,
) -> dict:
    event = _thermal_event(scn)
    radius = scn.search_radius or 2.0 * block1.position_step
    phi1, z1 = dsp.cell_phase(block1, gauge[0], radius)
    phi2, z2 = dsp.cell_phase(block2, gauge[1], radius)
    dphi = np.unwrap(phi2 - phi1)
    series = dsp.PhaseSeries(
        values=dphi,
        sample_period=block1.row_period,
        gauge=(z1, z2),
        t0=float(block1.timestamps[0]),
    )

    write_power_trace(os.path.join(out_dir, "power_trace.csv"), full_positions, power_db)
    write_phase_waterfall(
        os.path.join(out_dir, "phase_waterfall.csv"),
        block1.timestamps,
        [z1],
        series.values[:, None],
        scn.max_csv_rows,
    )

    tone = dsp.detect_tone(series)
    tones = []
    if tone.detected:
        tones.append(
            {
                "frequency": tone.frequency,
                "power": tone.power,
                "position": 0.5 * (z1 + z2),
            }
        )
    write_tones(os.path.join(out_dir, "tones.csv"), tones)

    # temperature chain
    span_length = event.span[1] - event.span[0]
    base = scn.start_temperature
    if base is None:
        base = 0.0
    slopes = dsp.phase_slope(series, scn.slope_window)
    constants = scn.constants()
    core = dsp.core_temperature_series(
        slopes, span_length, scn.wavelength, event.dn_dt, constants, start_temperature=base
    )
    chamber = dsp.inverse_filter_chamber(core, event.time_constant, scn.smoothing_samples)

    t = core.times
    ref_chamber = base + np.interp(
        t, event.times, event.delta_kelvin, left=event.delta_kelvin[0], right=event.delta_kelvin[-1]
    )
    ref_core = base + np.asarray(
        first_order_lowpass(event.times, event.delta_kelvin, event.time_constant, t)
    )

    # thermo-optic coefficient from measured phase rate vs true core rate
    kappa = constants.pass_factor
    w = slopes.sample_period
    edges_lo = first_order_lowpass(
        event.times, event.delta_kelvin, event.time_constant, t - w / 2.0
    )
    edges_hi = first_order_lowpass(
        event.times, event.delta_kelvin, event.time_constant, t + w / 2.0
    )
    ref_rate = (np.asarray(edges_hi) - np.asarray(edges_lo)) / w
    meas = slopes.values * scn.wavelength / (kappa * 2.0 * np.pi * span_length)
    strong = np.abs(ref_rate) >= 0.2 * np.max(np.abs(ref_rate))
    denom = float(np.sum(ref_rate[strong] ** 2))
    dn_dt_estimate = float(np.sum(meas[strong] * ref_rate[strong]) / denom) if denom else float("nan")

    t_ok = t >= t[0] + 3.0 * event.time_constant
    rmse = float(
        np.sqrt(np.mean((chamber.values[t_ok] - ref_chamber[t_ok]) ** 2))
    ) if np.any(t_ok) else float("nan")

    write_temperature(
        os.path.join(out_dir, "temperature.csv"),
        t,
        {
            "core_c": core.values,
            "chamber_estimate_c": chamber.values,
            "reference_core_c": ref_core,
            "reference_chamber_c": ref_chamber,
        },
    )

    return {
        "tones": tones,
        "gauge": (z1, z2),
        "slopes": slopes,
        "core": core,
        "chamber": chamber,
        "reference_core": ref_core,
        "reference_chamber": ref_chamber,
        "dn_dt_estimate": dn_dt_estimate,
        "chamber_rmse": rmse,
    }


def _fbg_sweep_profiles(scn: Scenario, workers: int = 1) -> dict[float, CompressedProfile]:
    """One pair-combined profile per sweep wavelength (static fiber)."""
    model = scn.build_model()
    fa, fb = scn.build_frames()
    out: dict[float, CompressedProfile] = {}
    fs = scn.symbol_rate * scn.samples_per_symbol
    step = float(position_axis(1, fs, scn.group_index))
    for j, lam in enumerate(scn.sweep_wavelengths()):
        sim = ShotSimulator(
            model,
            {"A": fa, "B": fb},
            (),
            scn.constants(),
            scn.laser(wavelength=float(lam)),
            scn.noise(),
            seed=scn.seed,
        )
        seed_j = scn.seed + 9973 * j
        ts = np.array([0.0, 1.0 / scn.shot_rate])
        rx, ry = sim.batch_iq(ts, ["A", "B"], [seed_j ^ 0, seed_j ^ 1])
        pa_x = xcorr_batch(rx[0:1], fa.code_samples)[0]
        pb_x = xcorr_batch(rx[1:2], fb.code_samples)[0]
        pa_y = xcorr_batch(ry[0:1], fa.code_samples)[0]
        pb_y = xcorr_batch(ry[1:2], fb.code_samples)[0]
        samples = np.stack([0.5 * (pa_x + pb_x), 0.5 * (pa_y + pb_y)])
        out[float(lam)] = CompressedProfile(
            samples=samples,
            position_step=step,
            origin=0.0,
            timestamp=float(ts.mean()),
        )
    return out


def _analyze_fbg(scn: Scenario, sweep: dict[float, CompressedProfile], out_dir) -> dict:
    fbg = scn.fbg
    if fbg is None or fbg.count < 1:
        raise ValueError("fbg scenario needs an fbg array")
    grating_positions = fbg.start + fbg.spacing * np.arange(fbg.count)
    spectra = dsp.fbg_spectra(sweep, grating_positions)
    estimates = np.array([s.bragg_estimate for s in spectra])
    periodicity = dsp.bragg_periodicity(estimates)

    offsets = np.array(sorted(sweep)) - scn.wavelength
    write_fbg_spectra(
        os.path.join(out_dir, "fbg_spectra.csv"), spectra, grating_positions, offsets
    )

    # peak count in a 2 m window of the center-wavelength profile
    center = min(sweep, key=lambda w: abs(w - scn.wavelength))
    prof = sweep[center]
    power = prof.combined_power()
    floor = np.median(power)
    peaks, _ = find_peaks(power, height=floor * 100.0, distance=2)
    peak_pos = prof.positions[peaks]
    win_lo = fbg.start + 1.01
    n_2m = int(np.sum((peak_pos >= win_lo) & (peak_pos < win_lo + 2.0)))

    # fraction of gratings resolved as distinct peaks of the strongest sweep
    best = np.stack([p.combined_power() for p in sweep.values()]).max(axis=0)
    resolved = 0
    step = prof.position_step
    for zg in grating_positions:
        c = int(round((zg - prof.origin) / step))
        lo, hi = max(0, c - 2), min(best.size, c + 3)
        k = lo + int(np.argmax(best[lo:hi]))
        edge_lo, edge_hi = max(0, k - 2), min(best.size - 1, k + 2)
        if best[k] > 4.0 * max(best[edge_lo], best[edge_hi]):
            resolved += 1

    truth = np.array(
        [
            fbg.base_wavelength
            + fbg.variation_amplitude
            * np.sin(2.0 * np.pi * np.mod(k, fbg.variation_period) / fbg.variation_period)
            for k in range(fbg.count)
        ]
    )
    bragg_err = estimates - truth

    return {
        "spectra": spectra,
        "bragg_estimates": estimates,
        "bragg_errors": bragg_err,
        "periodicity": periodicity,
        "peaks_in_2m": n_2m,
        "resolved_fraction": resolved / fbg.count,
    }


# ---------------------------------------------------------------------------
# entry points


def _thermal_windows(scn: Scenario, step: float, n_cells: int):
    """Cell windows around the configured gauge endpoints."""
    if not scn.gauges:
        raise ValueError("thermal scenario needs analysis.gauge.0 = z1,z2")
    z1, z2 = scn.gauges[0]
    radius = scn.search_radius or 2.0 * step

    def window(z):
        lo = max(0, int(np.floor((z - radius) / step)))
        hi = min(n_cells, int(np.ceil((z + radius) / step)) + 1)
        return slice(lo, hi)

    return (z1, z2), window(z1), window(z2)


def run_scenario(scn: Scenario, out_dir: str | None = None, workers: int = 1) -> dict:
    """Run one scenario end to end and write its report files.

    Returns a summary dict with the headline results; writes power_trace,
    change_map / phase_waterfall / tones / temperature / fbg_spectra CSVs as
    applicable plus summary.txt into the output directory.
    """
    scn.validate()
    out = out_dir or scn.out_dir
    os.makedirs(out, exist_ok=True)
    lines = [f"scenario: {scn.name}", f"kind: {scn.kind}", f"seed: {scn.seed}"]
    summary: dict = {"kind": scn.kind, "out_dir": out}

    if scn.kind == "fbg":
        sweep = _fbg_sweep_profiles(scn, workers)
        res = _analyze_fbg(scn, sweep, out)
        summary.update(res)
        p = res["periodicity"]
        lines.append(f"gratings: {scn.fbg.count}")
        lines.append(
            "periodicity_gratings: " + (_FMT % p.period if p.detected else "none")
        )
        lines.append(f"peaks_in_2m_window: {res['peaks_in_2m']}")
        lines.append(_FMT % res["resolved_fraction"] + " of gratings resolved")
        lines.append(
            "bragg_rms_error_pm: " + _FMT % (np.sqrt(np.mean(res["bragg_errors"] ** 2)) * 1e12)
        )
    elif scn.kind == "thermal":
        fs = scn.symbol_rate * scn.samples_per_symbol
        step = float(position_axis(1, fs, scn.group_index))
        frame_samples = (2**scn.order + scn.pad()) * scn.samples_per_symbol
        n_cells = frame_samples - 2**scn.order * scn.samples_per_symbol + 1
        gauge, w1, w2 = _thermal_windows(scn, step, n_cells)
        keep = slice(min(w1.start, w2.start), max(w1.stop, w2.stop))
        wf, power_db = run_campaign_waterfall(scn, workers, keep=keep)
        positions_full = position_axis(np.arange(power_db.size), fs, scn.group_index)
        b1 = Waterfall(
            data=wf.data[:, :, w1.start - keep.start : w1.stop - keep.start],
            timestamps=wf.timestamps,
            position_step=wf.position_step,
            origin=step * w1.start,
            row_period=wf.row_period,
        )
        b2 = Waterfall(
            data=wf.data[:, :, w2.start - keep.start : w2.stop - keep.start],
            timestamps=wf.timestamps,
            position_step=wf.position_step,
            origin=step * w2.start,
            row_period=wf.row_period,
        )
        res = _analyze_thermal(scn, b1, b2, gauge, power_db, positions_full, out)
        summary.update(res)
        lines.append(f"pairs: {wf.n_rows}")
        for t in res["tones"]:
            lines.append(
                f"tone: frequency_hz={_FMT % t['frequency']} power={_FMT % t['power']} "
                f"position_m={_FMT % t['position']}"
            )
        lines.append("dn_dt_estimate_per_k: " + _FMT % res["dn_dt_estimate"])
        lines.append("chamber_rmse_k: " + _FMT % res["chamber_rmse"])
        lines.append("slope_window_s: " + _FMT % res["slopes"].sample_period)
    else:  # acoustic
        wf, power_db = run_campaign_waterfall(scn, workers)
        res = _analyze_acoustic(scn, wf, power_db, out)
        summary.update(res)
        lines.append(f"pairs: {wf.n_rows}")
        lines.append(f"gauges_scanned: {res['n_gauges']}")
        for t in res["tones"]:
            lines.append(
                f"tone: frequency_hz={_FMT % t['frequency']} power={_FMT % t['power']} "
                f"position_m={_FMT % t['position']}"
            )

    write_summary(os.path.join(out, "summary.txt"), lines)
    summary["summary_lines"] = lines
    return summary


# ---------------------------------------------------------------------------
# staged commands (simulate / compress / analyze over trace files)


def simulate_to_file(scn: Scenario, out_path, workers: int = 1) -> int:
    """Write raw campaign shots to a trace file; returns the shot count.

    FBG sweeps write one file per wavelength into a directory instead.
    """
    scn.validate()
    if scn.kind == "fbg":
        os.makedirs(out_path, exist_ok=True)
        model = scn.build_model()
        fa, fb = scn.build_frames()
        n = 0
        for j, lam in enumerate(scn.sweep_wavelengths()):
            sim = ShotSimulator(
                model, {"A": fa, "B": fb}, (), scn.constants(),
                scn.laser(wavelength=float(lam)), scn.noise(), seed=scn.seed,
            )
            seed_j = scn.seed + 9973 * j
            ts = np.array([0.0, 1.0 / scn.shot_rate])
            rx, ry = sim.batch_iq(ts, ["A", "B"], [seed_j ^ 0, seed_j ^ 1])
            offset_pm = (lam - scn.wavelength) * 1e12
            path = os.path.join(out_path, f"sweep_{offset_pm:+08.2f}pm.ccot")
            recs = []
            for r, kind in enumerate((tracefile.KIND_SHOT_A, tracefile.KIND_SHOT_B)):
                recs.append(
                    tracefile.TraceRecord(
                        kind=kind,
                        sample_rate=sim.sample_rate,
                        position_step=0.0,
                        origin=float(ts[r]),
                        data=np.stack([rx[r], ry[r]]).astype(np.complex64),
                    )
                )
            tracefile.write_records(path, recs)
            n += 2
        return n

    engine = _BatchEngine(scn, None)
    plan = _make_plan(scn, engine.sim._positions.size)
    with open(out_path, "wb") as fh:
        for first, last in plan.batches():
            shot_idx = np.arange(2 * first, 2 * last)
            ts = shot_idx / scn.shot_rate
            whichs = ["A" if i % 2 == 0 else "B" for i in shot_idx]
            seeds = [scn.seed ^ int(i) for i in shot_idx]
            rx, ry = engine.sim.batch_iq(ts, whichs, seeds)
            for r in range(shot_idx.size):
                kind = tracefile.KIND_SHOT_A if whichs[r] == "A" else tracefile.KIND_SHOT_B
                rec = tracefile.TraceRecord(
                    kind=kind,
                    sample_rate=engine.sim.sample_rate,
                    position_step=0.0,
                    origin=float(ts[r]),
                    data=np.stack([rx[r], ry[r]]).astype(np.complex64),
                )
                fh.write(tracefile.pack_record(rec))
    return plan.n_shots


def compress_file(scn: Scenario, in_path, out_path) -> int:
    """Correlate a shot trace into a profile trace; returns the pair count."""
    fa, fb = scn.build_frames()
    refs = {"A": fa.code_samples, "B": fb.code_samples}
    fs = scn.symbol_rate * scn.samples_per_symbol
    step = float(position_axis(1, fs, scn.group_index))

    def compress_records(records):
        out = []
        shots = [r for r in records if r.is_shot]
        for ra, rb in zip(shots[0::2], shots[1::2]):
            if {ra.which, rb.which} != {"A", "B"}:
                raise ValueError("shot records must alternate A and B")
            prof = {}
            for rec in (ra, rb):
                x = xcorr_batch(rec.data.astype(np.complex128), refs[rec.which])
                prof[rec.which] = x
            samples = 0.5 * (prof["A"] + prof["B"])
            out.append(
                tracefile.TraceRecord(
                    kind=tracefile.KIND_PROFILE,
                    sample_rate=0.5 * (ra.origin + rb.origin),
                    position_step=step,
                    origin=0.0,
                    data=samples.astype(np.complex64),
                )
            )
        return out

    if scn.kind == "fbg":
        os.makedirs(out_path, exist_ok=True)
        n = 0
        for name in sorted(os.listdir(in_path)):
            if not name.endswith(".ccot"):
                continue
            recs = compress_records(tracefile.read_records(os.path.join(in_path, name)))
            tracefile.write_records(os.path.join(out_path, name), recs)
            n += len(recs)
        return n
    recs = compress_records(tracefile.read_records(in_path))
    tracefile.write_records(out_path, recs)
    return len(recs)


def _waterfall_from_records(records) -> Waterfall:
    profiles = [r for r in records if r.kind == tracefile.KIND_PROFILE]
    if not profiles:
        raise ValueError("trace file contains no profile records")
    ts = np.array([r.sample_rate for r in profiles])
    data = np.stack([r.data for r in profiles])
    period = float(np.median(np.diff(ts))) if ts.size > 1 else 0.0
    return Waterfall(
        data=data,
        timestamps=ts,
        position_step=profiles[0].position_step,
        origin=profiles[0].origin,
        row_period=period,
    )


def analyze_file(scn: Scenario, in_path, out_dir) -> dict:
    """Run the scenario analyses over an existing profile trace."""
    os.makedirs(out_dir, exist_ok=True)
    lines = [f"scenario: {scn.name}", f"kind: {scn.kind}", f"seed: {scn.seed}"]
    summary: dict = {"kind": scn.kind, "out_dir": out_dir}
    if scn.kind == "fbg":
        sweep = {}
        for name in sorted(os.listdir(in_path)):
            if not name.endswith(".ccot"):
                continue
            offset_pm = float(name[len("sweep_") : -len("pm.ccot")])
            recs = tracefile.read_records(os.path.join(in_path, name))
            prof_rec = [r for r in recs if r.kind == tracefile.KIND_PROFILE][0]
            sweep[scn.wavelength + offset_pm * 1e-12] = CompressedProfile(
                samples=prof_rec.data.astype(np.complex128),
                position_step=prof_rec.position_step,
                origin=prof_rec.origin,
                timestamp=prof_rec.sample_rate,
            )
        res = _analyze_fbg(scn, sweep, out_dir)
        summary.update(res)
        p = res["periodicity"]
        lines.append(
            "periodicity_gratings: " + (_FMT % p.period if p.detected else "none")
        )
        lines.append(f"peaks_in_2m_window: {res['peaks_in_2m']}")
    else:
        wf = _waterfall_from_records(tracefile.read_records(in_path))
        power_db = 10.0 * np.log10(np.maximum(wf.combined_power().mean(axis=0), 1e-300))
        if scn.kind == "thermal":
            gauge = scn.gauges[0]
            res = _analyze_thermal(scn, wf, wf, gauge, power_db, wf.positions, out_dir)
            summary.update(res)
            lines.append("dn_dt_estimate_per_k: " + _FMT % res["dn_dt_estimate"])
            lines.append("chamber_rmse_k: " + _FMT % res["chamber_rmse"])
        else:
            res = _analyze_acoustic(scn, wf, power_db, out_dir)
            summary.update(res)
            for t in res["tones"]:
                lines.append(
                    f"tone: frequency_hz={_FMT % t['frequency']} power={_FMT % t['power']} "
                    f"position_m={_FMT % t['position']}"
                )
    write_summary(os.path.join(out_dir, "summary.txt"), lines)
    summary["summary_lines"] = lines
    return summary
