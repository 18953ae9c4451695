"""Dataset ingestion: CMAPSS text files, N-CMAPSS CSV exports with cruise
filtering, pretraining series (CSV or synthetic), and CMAPSS-format synthesis
for self-contained runs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError, ParseError

# Canonical CMAPSS sensor order (columns 6..26 of the 26-column text format).
CMAPSS_SENSOR_NAMES = (
    "T2", "T24", "T30", "T50", "P2", "P15", "P30", "Nf", "Nc", "epr", "Ps30",
    "phi", "NRf", "NRc", "BPR", "farB", "htBleed", "Nf_dmd", "PCNfR_dmd",
    "W31", "W32",
)

CRUISE_ALT_MIN = 25000.0
CRUISE_ALT_MAX = 30000.0
CRUISE_MIN_LEN = 1024


@dataclass
class SegmentedSeries:
    """A univariate stream split into contiguous segments that windows must
    not span (e.g. separate cruise phases)."""

    segments: list[tuple[object, np.ndarray]]

    def __post_init__(self):
        for seg_id, values in self.segments:
            if len(values) == 0:
                raise DataError(f"segment {seg_id!r} is empty")

    @classmethod
    def single(cls, values, segment_id: object = 0) -> "SegmentedSeries":
        return cls([(segment_id, np.asarray(values, dtype=np.float64))])

    def total_length(self) -> int:
        return sum(len(v) for _, v in self.segments)

    def concatenated(self) -> np.ndarray:
        return np.concatenate([v for _, v in self.segments])

    def segment_lengths(self) -> list[int]:
        return [len(v) for _, v in self.segments]


@dataclass
class CmapssRecord:
    unit: int
    cycle: int
    op_settings: np.ndarray  # (3,)
    sensors: dict[str, float]


def _iter_lines(source):
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_cmapss(source) -> list[CmapssRecord]:
    """Parse 26-column whitespace-delimited CMAPSS lines, preserving order.

    `source` is a file object, an iterable of lines, or the full text.
    """
    records = []
    for lineno, line in enumerate(_iter_lines(source), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 26:
            raise ParseError(f"line {lineno}: expected 26 fields, got {len(tokens)}")
        try:
            values = [float(tok) for tok in tokens]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: non-numeric token ({exc})") from None
        sensors = dict(zip(CMAPSS_SENSOR_NAMES, values[5:]))
        records.append(CmapssRecord(unit=int(values[0]), cycle=int(values[1]),
                                    op_settings=np.array(values[2:5]), sensors=sensors))
    return records


def load_cmapss(path) -> list[CmapssRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_cmapss(fh)


def cmapss_to_text(records: list[CmapssRecord]) -> str:
    """Inverse of parse_cmapss (values round-trip through repr)."""
    lines = []
    for rec in records:
        fields = [str(rec.unit), str(rec.cycle)]
        fields += [repr(float(v)) for v in rec.op_settings]
        fields += [repr(float(rec.sensors[name])) for name in CMAPSS_SENSOR_NAMES]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def select_series(records: list[CmapssRecord], unit: int,
                  sensor_name: str) -> SegmentedSeries:
    """One sensor of one unit as a single-segment, cycle-ordered series."""
    if sensor_name not in CMAPSS_SENSOR_NAMES:
        raise ConfigurationError(f"unknown CMAPSS sensor name {sensor_name!r}")
    rows = [r for r in records if r.unit == unit]
    if not rows:
        raise DataError(f"unit {unit} not present in records")
    rows.sort(key=lambda r: r.cycle)
    values = np.array([r.sensors[sensor_name] for r in rows])
    return SegmentedSeries.single(values, segment_id=f"unit{unit}")


@dataclass
class NcmapssRecord:
    time: float
    altitude: float
    flight: int
    sensors: dict[str, float]


def parse_ncmapss_csv(source, columns: dict) -> list[NcmapssRecord]:
    """Parse an N-CMAPSS CSV export.

    `columns` maps roles to header names: {"time": ..., "altitude": ...,
    "flight": ..., "sensors": {sensor_id: column_name, ...}}.
    """
    for role in ("time", "altitude", "flight", "sensors"):
        if role not in columns:
            raise ConfigurationError(f"column map missing role {role!r}")
    reader = csv.DictReader(_iter_lines(source))
    if reader.fieldnames is None:
        raise ParseError("line 1: empty file, no CSV header")
    needed = [columns["time"], columns["altitude"], columns["flight"]]
    needed += list(columns["sensors"].values())
    missing = [c for c in needed if c not in reader.fieldnames]
    if missing:
        raise ConfigurationError(f"CSV header missing columns: {', '.join(missing)}")

    records = []
    for lineno, row in enumerate(reader, start=2):
        try:
            rec = NcmapssRecord(
                time=float(row[columns["time"]]),
                altitude=float(row[columns["altitude"]]),
                flight=int(float(row[columns["flight"]])),
                sensors={sid: float(row[col])
                         for sid, col in columns["sensors"].items()},
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"line {lineno}: bad value ({exc})") from None
        if not math.isfinite(rec.altitude):
            raise ParseError(f"line {lineno}: non-finite altitude")
        records.append(rec)
    return records


def filter_cruise(records: list[NcmapssRecord],
                  alt_min: float = CRUISE_ALT_MIN,
                  alt_max: float = CRUISE_ALT_MAX,
                  min_len: int = CRUISE_MIN_LEN) -> dict[str, SegmentedSeries]:
    """Keep maximal runs of consecutive records inside the cruise altitude
    band within a single flight; drop runs shorter than min_len. Returns one
    SegmentedSeries per sensor, all with identical segmentation."""
    if not records:
        return {}
    sensor_ids = list(records[0].sensors.keys())
    segments: list[tuple[object, list[NcmapssRecord]]] = []
    run: list[NcmapssRecord] = []

    def close_run():
        nonlocal run
        if len(run) >= min_len:
            seg_id = f"flight{run[0].flight}_seg{len(segments)}"
            segments.append((seg_id, run))
        run = []

    prev = None
    for rec in records:
        in_band = alt_min <= rec.altitude <= alt_max
        same_flight = prev is not None and rec.flight == prev.flight
        if in_band and (not run or same_flight):
            run.append(rec)
        else:
            close_run()
            if in_band:
                run.append(rec)
        prev = rec
    close_run()

    out = {}
    for sid in sensor_ids:
        segs = [(seg_id, np.array([r.sensors[sid] for r in recs]))
                for seg_id, recs in segments]
        out[sid] = SegmentedSeries(segs) if segs else SegmentedSeries([])
    return out


def load_pretrain_series(source, column: str) -> SegmentedSeries:
    """One numeric column of a headered CSV as a single-segment series."""
    reader = csv.DictReader(_iter_lines(source))
    if reader.fieldnames is None or column not in reader.fieldnames:
        raise ConfigurationError(f"CSV has no column {column!r}")
    values = []
    for lineno, row in enumerate(reader, start=2):
        try:
            values.append(float(row[column]))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"line {lineno}: bad value ({exc})") from None
    if not values:
        raise DataError("pretraining CSV has no data rows")
    return SegmentedSeries.single(values)


# Synthetic pretraining defaults; the T offset is asserted by tests.
SYNTH_T_OFFSET = 15.0


def synth_pretrain_series(kind: str, length: int, seed: int) -> SegmentedSeries:
    """Deterministic stand-in for external pretraining data.

    kind "T": slow drift + daily-cycle-like harmonic + noise around a fixed
    offset (temperature-like). kind "C": sum of mid-frequency sinusoids +
    noise (accelerometer-like). Sinusoid periods divide `length`, so the
    sample mean stays at the configured offset.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if kind not in ("T", "C"):
        raise ConfigurationError(f"pretraining kind must be 'T' or 'C', got {kind!r}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, ord(kind))))
    t = np.arange(length, dtype=np.float64)
    if kind == "T":
        slow = 1.5 * np.sin(2.0 * np.pi * 4.0 * t / length)
        daily = 3.0 * np.sin(2.0 * np.pi * 96.0 * t / length)
        values = SYNTH_T_OFFSET + slow + daily + rng.normal(0.0, 0.5, size=length)
    else:
        values = (np.sin(2.0 * np.pi * t / 32.0)
                  + 0.7 * np.sin(2.0 * np.pi * t / 50.0 + 1.0)
                  + 0.5 * np.sin(2.0 * np.pi * t / 128.0 + 2.0)
                  + rng.normal(0.0, 0.3, size=length))
    return SegmentedSeries.single(values, segment_id=f"synth-{kind}")


# --- CMAPSS-format synthesis -------------------------------------------------
#
# Used when the real FD001 file is not available: one unit with the
# dataset's exactly-constant sensors held constant and a late-life upward
# drift on T30/T50, matching the qualitative shape of unit 1.

_CMAPSS_CONST = {
    "T2": 518.67, "P2": 14.62, "epr": 1.3, "farB": 0.03,
    "Nf_dmd": 2388.0, "PCNfR_dmd": 100.0,
}

_CMAPSS_BASE = {
    "T24": 642.0, "T30": 1585.0, "T50": 1400.0, "P15": 21.61, "P30": 554.0,
    "Nf": 2388.1, "Nc": 9050.0, "Ps30": 47.3, "phi": 522.0, "NRf": 2388.1,
    "NRc": 8130.0, "BPR": 8.42, "htBleed": 392.0, "W31": 39.0, "W32": 23.4,
}

_CMAPSS_NOISE = {
    "T24": 0.5, "T30": 6.0, "T50": 2.5, "P15": 0.02, "P30": 0.9,
    "Nf": 0.1, "Nc": 20.0, "Ps30": 0.25, "phi": 0.7, "NRf": 0.1,
    "NRc": 30.0, "BPR": 0.04, "htBleed": 1.5, "W31": 0.18, "W32": 0.1,
}


def _late_drift(cycle: np.ndarray, onset: float, span: float, amplitude: float) -> np.ndarray:
    x = np.clip((cycle - onset) / span, 0.0, None)
    return amplitude * x ** 3


def synth_cmapss_unit(unit: int = 1, n_cycles: int = 220, seed: int = 20) -> list[CmapssRecord]:
    """Deterministic single-unit CMAPSS-like run-to-failure trajectory."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, unit)))
    cycle = np.arange(1, n_cycles + 1, dtype=np.float64)
    columns: dict[str, np.ndarray] = {}
    for name, value in _CMAPSS_CONST.items():
        columns[name] = np.full(n_cycles, value)
    for name, base in _CMAPSS_BASE.items():
        columns[name] = base + rng.normal(0.0, _CMAPSS_NOISE[name], size=n_cycles)
    # Degradation visible only in T30 and T50 (upward trend late in life).
    columns["T50"] = columns["T50"] + _late_drift(cycle, onset=0.75 * n_cycles,
                                                  span=0.25 * n_cycles, amplitude=30.0)
    columns["T30"] = columns["T30"] + _late_drift(cycle, onset=0.80 * n_cycles,
                                                  span=0.22 * n_cycles, amplitude=22.0)
    # P15 is discretized to two ticks in the real data.
    columns["P15"] = np.round(columns["P15"], 2)

    records = []
    for i in range(n_cycles):
        sensors = {name: float(columns[name][i]) for name in CMAPSS_SENSOR_NAMES}
        records.append(CmapssRecord(unit=unit, cycle=int(cycle[i]),
                                    op_settings=np.array([-0.0007, -0.0004, 100.0]),
                                    sensors=sensors))
    return records
