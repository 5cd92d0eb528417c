"""Readers for the supported dataset layouts and the canonical CSV format.

Canonical CSV is a long table with header
``subject_id,activity_id,recording_id,t_s,<channel columns>``; rows of a
recording are contiguous and sorted by ``t_s``.
"""
from __future__ import annotations

import csv
import io
import math
import re
from itertools import groupby
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import IngestError
from .records import CanonicalRecording

CANONICAL_FIXED = ["subject_id", "activity_id", "recording_id", "t_s"]

MHEALTH_CHANNELS = [
    "chest_acc_x", "chest_acc_y", "chest_acc_z",
    "ecg_lead1", "ecg_lead2",
    "ankle_acc_x", "ankle_acc_y", "ankle_acc_z",
    "ankle_gyro_x", "ankle_gyro_y", "ankle_gyro_z",
    "ankle_mag_x", "ankle_mag_y", "ankle_mag_z",
    "arm_acc_x", "arm_acc_y", "arm_acc_z",
    "arm_gyro_x", "arm_gyro_y", "arm_gyro_z",
    "arm_mag_x", "arm_mag_y", "arm_mag_z",
]
# MHEALTH files carry no timestamps; the UCI documentation gives 50 Hz.
MHEALTH_RATE = 50.0

WISDM_EXCLUDED = ("1637", "1638", "1639", "1640")
WISDM_ACTIVITIES = "ABCDEFGHIJKLMOPQRS"
WISDM_RATE = 20.0

SPAR_CHANNELS = ["acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z"]
SPAR_RATE = 50.0
_SPAR_NAME = re.compile(r"S(\d+)_E(\d+)_([LR])", re.IGNORECASE)


def ingest_dataset(root_path, adapter_name: str, **kwargs) -> list[CanonicalRecording]:
    adapters = {
        "mhealth": read_mhealth,
        "wisdm_watch": read_wisdm_watch,
        "spar": read_spar,
        "canonical_csv": read_canonical_csv,
    }
    try:
        reader = adapters[adapter_name]
    except KeyError:
        raise IngestError(f"unknown dataset adapter {adapter_name!r}; choose from {sorted(adapters)}") from None
    root = Path(root_path)
    if not root.exists():
        raise IngestError(f"dataset path does not exist: {root}")
    return reader(root, **kwargs)


# ---------------------------------------------------------------------------
# canonical CSV
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_canonical_csv(recordings: list[CanonicalRecording], path) -> None:
    if not recordings:
        raise IngestError("no recordings to write")
    names = recordings[0].channel_names
    for r in recordings:
        if r.channel_names != names:
            raise IngestError(f"recording {r.recording_id!r} has a different channel layout")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CANONICAL_FIXED + names) + "\n")
        for r in recordings:
            prefix = f"{r.subject_id},{r.activity_id},{r.recording_id},"
            buf = io.StringIO()
            for i, row in enumerate(r.samples):
                t = (r.start_offset + i) / r.sample_rate
                buf.write(prefix + _fmt(t) + "," + ",".join(map(_fmt, row)) + "\n")
            fh.write(buf.getvalue())


def _infer_rate(times: np.ndarray, where: str) -> float:
    if times.size < 2:
        raise IngestError(f"{where}: cannot infer sample rate from a single row")
    rate = (times.size - 1) / (times[-1] - times[0])
    return float(f"{rate:.9g}")


def read_canonical_csv(path, sample_rate: float | None = None) -> list[CanonicalRecording]:
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise IngestError(f"no .csv files under {path}")
        out = []
        for f in files:
            out.extend(read_canonical_csv(f, sample_rate=sample_rate))
        return out
    if not path.exists():
        raise IngestError(f"missing file: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if header[:4] != CANONICAL_FIXED or len(header) < 5:
            raise IngestError(f"{path}: line 1: header must start with {','.join(CANONICAL_FIXED)} "
                              "and name at least one channel")
        channels = header[4:]
        ncol = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != ncol:
                raise IngestError(f"{path}: line {lineno}: expected {ncol} fields, got {len(row)}")
            try:
                act = int(row[1])
                vals = [float(v) for v in row[3:]]
            except ValueError as exc:
                raise IngestError(f"{path}: line {lineno}: {exc}") from None
            if any(math.isnan(v) for v in vals):
                raise IngestError(f"{path}: line {lineno}: NaN value")
            rows.append((row[0], act, row[2], lineno, vals))

    recordings = []
    seen = set()
    for rec_id, group in groupby(rows, key=lambda r: r[2]):
        group = list(group)
        if rec_id in seen:
            raise IngestError(f"{path}: line {group[0][3]}: rows of recording {rec_id!r} are not contiguous")
        seen.add(rec_id)
        subject, act = group[0][0], group[0][1]
        for g in group:
            if g[0] != subject or g[1] != act:
                raise IngestError(f"{path}: line {g[3]}: recording {rec_id!r} mixes subjects or activities")
        block = np.array([g[4] for g in group], dtype=np.float64)
        times = block[:, 0]
        d = np.diff(times)
        if (d == 0).any():
            bad = group[int(np.flatnonzero(d == 0)[0]) + 1][3]
            raise IngestError(f"{path}: line {bad}: duplicated timestamp in recording {rec_id!r}")
        if (d < 0).any():
            bad = group[int(np.flatnonzero(d < 0)[0]) + 1][3]
            raise IngestError(f"{path}: line {bad}: timestamps not increasing in recording {rec_id!r}")
        rate = sample_rate or _infer_rate(times, f"{path}: recording {rec_id!r}")
        offset = int(round(times[0] * rate))
        recordings.append(
            CanonicalRecording(
                subject_id=subject, activity_id=act, sample_rate=rate,
                samples=block[:, 1:], channel_names=channels,
                recording_id=rec_id, start_offset=offset,
            )
        )
    return recordings


# ---------------------------------------------------------------------------
# MHEALTH
# ---------------------------------------------------------------------------

def _runs(labels: np.ndarray):
    """Yield (label, start, stop) for maximal runs of equal labels."""
    if labels.size == 0:
        return
    edges = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], edges])
    stops = np.concatenate([edges, [labels.size]])
    for a, b in zip(starts, stops):
        yield labels[a], int(a), int(b)


def read_mhealth(root: Path, sample_rate: float = MHEALTH_RATE) -> list[CanonicalRecording]:
    files = sorted(root.glob("mHealth_subject*.log"), key=lambda p: int(re.findall(r"\d+", p.stem)[-1]))
    if not files:
        raise IngestError(f"missing files: no mHealth_subject*.log under {root}")
    out = []
    for f in files:
        subject = "mhealth" + re.findall(r"\d+", f.stem)[-1]
        rows = []
        with open(f, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 24:
                    raise IngestError(f"{f}: line {lineno}: expected 24 columns, got {len(parts)}")
                try:
                    rows.append([float(p) for p in parts])
                except ValueError as exc:
                    raise IngestError(f"{f}: line {lineno}: {exc}") from None
        data = np.array(rows)
        labels = data[:, 23].astype(int)
        for n_run, (label, a, b) in enumerate(_runs(labels)):
            if label == 0:
                continue
            out.append(CanonicalRecording(
                subject_id=subject, activity_id=int(label) - 1, sample_rate=sample_rate,
                samples=data[a:b, :23], channel_names=MHEALTH_CHANNELS,
                recording_id=f"{subject}_a{label}_r{n_run}",
            ))
    return out


# ---------------------------------------------------------------------------
# WISDM (smart-watch streams only)
# ---------------------------------------------------------------------------

def _find_wisdm_dir(root: Path, sensor: str) -> Path:
    for cand in (root / "raw" / "watch" / sensor, root / "watch" / sensor, root / sensor):
        if cand.is_dir():
            return cand
    raise IngestError(f"missing directory: watch/{sensor} under {root}")


def _read_wisdm_file(path: Path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip().rstrip(";")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise IngestError(f"{path}: line {lineno}: expected 6 fields, got {len(parts)}")
            try:
                rows.append((parts[1].strip(), int(parts[2]), float(parts[3]), float(parts[4]),
                             float(parts[5]), lineno))
            except ValueError as exc:
                raise IngestError(f"{path}: line {lineno}: {exc}") from None
    return rows


def _wisdm_stream_runs(path: Path):
    runs = {}
    rows = _read_wisdm_file(path)
    for code, group in groupby(rows, key=lambda r: r[0]):
        group = list(group)
        t = np.array([g[1] for g in group], dtype=np.int64)
        d = np.diff(t)
        if (d == 0).any():
            line = group[int(np.flatnonzero(d == 0)[0]) + 1][5]
            raise IngestError(f"{path}: line {line}: duplicated timestamp")
        if (d < 0).any():
            line = group[int(np.flatnonzero(d < 0)[0]) + 1][5]
            raise IngestError(f"{path}: line {line}: timestamps not increasing")
        xyz = np.array([g[2:5] for g in group])
        runs.setdefault(code, []).append((t, xyz))
    return runs


def read_wisdm_watch(root: Path, sample_rate: float = WISDM_RATE,
                     exclude=WISDM_EXCLUDED) -> list[CanonicalRecording]:
    acc_dir = _find_wisdm_dir(root, "accel")
    gyr_dir = _find_wisdm_dir(root, "gyro")
    acc_files = sorted(acc_dir.glob("data_*_accel_watch.txt"))
    if not acc_files:
        raise IngestError(f"missing files: no data_*_accel_watch.txt under {acc_dir}")
    out = []
    for af in acc_files:
        subject = af.name.split("_")[1]
        if subject in exclude:
            continue
        gf = gyr_dir / f"data_{subject}_gyro_watch.txt"
        if not gf.exists():
            raise IngestError(f"missing file: {gf}")
        acc_runs = _wisdm_stream_runs(af)
        gyr_runs = _wisdm_stream_runs(gf)
        for code in sorted(acc_runs):
            if code not in WISDM_ACTIVITIES or code not in gyr_runs:
                continue
            for n_run, ((ta, xa), (tg, xg)) in enumerate(zip(acc_runs[code], gyr_runs[code])):
                t0 = max(ta[0], tg[0])
                t1 = min(ta[-1], tg[-1])
                if t1 <= t0 or len(ta) < 4 or len(tg) < 4:
                    continue
                n = int(math.floor((t1 - t0) * 1e-9 * sample_rate)) + 1
                grid = t0 * 1e-9 + np.arange(n) / sample_rate
                acc = CubicSpline(ta * 1e-9, xa, axis=0, bc_type="natural")(grid)
                gyr = CubicSpline(tg * 1e-9, xg, axis=0, bc_type="natural")(grid)
                out.append(CanonicalRecording(
                    subject_id=subject, activity_id=WISDM_ACTIVITIES.index(code),
                    sample_rate=sample_rate, samples=np.hstack([acc, gyr]),
                    channel_names=SPAR_CHANNELS, recording_id=f"{subject}_{code}_r{n_run}",
                ))
    return out


# ---------------------------------------------------------------------------
# SPAR
# ---------------------------------------------------------------------------

def read_spar(root: Path, sample_rate: float = SPAR_RATE) -> list[CanonicalRecording]:
    """Read SPAR exercise recordings.

    Accepts either per-recording CSV files whose names contain
    ``S<subject>_E<exercise>_<L|R>`` (six numeric columns, an optional
    leading time column and an optional header), or a seglearn-style
    ``watch_dataset.npy`` dictionary. Each shoulder counts as one subject.
    """
    npy = root / "watch_dataset.npy"
    if npy.exists():
        return _read_spar_npy(npy, sample_rate)
    files = sorted(p for p in root.rglob("*.csv") if _SPAR_NAME.search(p.name))
    if not files:
        raise IngestError(f"missing files: no S<n>_E<n>_<L|R>*.csv or watch_dataset.npy under {root}")
    out = []
    counts: dict[tuple, int] = {}
    for f in files:
        m = _SPAR_NAME.search(f.name)
        subject = f"S{int(m.group(1))}{m.group(3).upper()}"
        act = int(m.group(2))
        rows = []
        with open(f, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = [p for p in re.split(r"[,\s]+", line.strip()) if p]
                if not parts:
                    continue
                try:
                    vals = [float(p) for p in parts]
                except ValueError:
                    if lineno == 1:
                        continue
                    raise IngestError(f"{f}: line {lineno}: non-numeric field") from None
                if len(vals) not in (6, 7):
                    raise IngestError(f"{f}: line {lineno}: expected 6 or 7 columns, got {len(vals)}")
                rows.append((lineno, vals))
        if not rows:
            raise IngestError(f"{f}: no data rows")
        widths = {len(v) for _, v in rows}
        if len(widths) != 1:
            raise IngestError(f"{f}: line {rows[-1][0]}: inconsistent column count")
        data = np.array([v for _, v in rows])
        if data.shape[1] == 7:
            d = np.diff(data[:, 0])
            if (d == 0).any():
                raise IngestError(f"{f}: line {rows[int(np.flatnonzero(d == 0)[0]) + 1][0]}: duplicated timestamp")
            data = data[:, 1:]
        key = (subject, act)
        counts[key] = counts.get(key, 0) + 1
        out.append(CanonicalRecording(
            subject_id=subject, activity_id=act, sample_rate=sample_rate, samples=data,
            channel_names=SPAR_CHANNELS, recording_id=f"{subject}_E{act}_r{counts[key] - 1}",
        ))
    return out


def _read_spar_npy(path: Path, sample_rate: float) -> list[CanonicalRecording]:
    try:
        data = np.load(path, allow_pickle=True).item()
        X, y, subj, side = data["X"], data["y"], data["subject"], data["side"]
    except (KeyError, ValueError, AttributeError) as exc:
        raise IngestError(f"{path}: not a watch dataset dictionary ({exc})") from None
    out = []
    counts: dict[tuple, int] = {}
    for x, label, s, sd in zip(X, y, subj, side):
        subject = f"S{int(s)}{str(sd).upper()[:1]}"
        key = (subject, int(label))
        counts[key] = counts.get(key, 0) + 1
        out.append(CanonicalRecording(
            subject_id=subject, activity_id=int(label), sample_rate=sample_rate,
            samples=np.asarray(x, dtype=np.float64)[:, :6], channel_names=SPAR_CHANNELS,
            recording_id=f"{subject}_E{int(label)}_r{counts[key] - 1}",
        ))
    return out
