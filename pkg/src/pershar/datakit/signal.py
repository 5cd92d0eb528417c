"""Resampling, sliding-window segmentation and temporal splitting."""
from __future__ import annotations

import math
import warnings
from dataclasses import replace

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import DataError
from .records import CanonicalRecording, WindowSegment


def round_half_up(x: float) -> int:
    # guards against 200 * 0.2 == 40.00000000000001 style noise
    return int(math.floor(x + 0.5 + 1e-9))


def resample(recording: CanonicalRecording, target_hz: float) -> CanonicalRecording:
    """Resample every channel onto ``t_i = i / target_hz`` with a natural cubic spline.

    The output spans the original duration; a trailing partial interval is
    dropped. Equal source and target rates return the samples untouched.
    """
    if not target_hz > 0:
        raise DataError(f"target_hz must be positive, got {target_hz}")
    if recording.sample_rate == target_hz:
        return replace(recording, samples=recording.samples.copy())
    n = recording.n_samples
    if n < 4:
        raise DataError(
            f"recording {recording.recording_id!r} has {n} samples; cubic resampling needs at least 4"
        )
    t_src = np.arange(n) / recording.sample_rate
    n_out = int(math.floor(recording.duration * target_hz + 1e-9)) + 1
    t_out = np.arange(n_out) / target_hz
    spline = CubicSpline(t_src, recording.samples, axis=0, bc_type="natural")
    out = spline(t_out)
    offset = round_half_up(recording.start_offset * target_hz / recording.sample_rate)
    return replace(recording, samples=out, sample_rate=float(target_hz), start_offset=offset)


def window_length(window_seconds: float, sample_rate: float) -> int:
    return round_half_up(window_seconds * sample_rate)


def window_step(window_len: int, overlap_ratio: float) -> int:
    return max(1, round_half_up(window_len * (1.0 - overlap_ratio)))


def segment(recording: CanonicalRecording, window_seconds: float, overlap_ratio: float,
            origin: str = "") -> list[WindowSegment]:
    if not 0 <= overlap_ratio < 1:
        raise DataError(f"overlap_ratio must be in [0, 1), got {overlap_ratio}")
    wlen = window_length(window_seconds, recording.sample_rate)
    if wlen < 1:
        raise DataError(f"window of {window_seconds} s at {recording.sample_rate} Hz is empty")
    n = recording.n_samples
    if n < wlen:
        return []
    step = window_step(wlen, overlap_ratio)
    count = (n - wlen) // step + 1
    segs = []
    for i in range(count):
        lo = i * step
        segs.append(
            WindowSegment(
                subject_id=recording.subject_id,
                activity_id=recording.activity_id,
                start_index=recording.start_offset + lo,
                data=recording.samples[lo:lo + wlen],
                source_recording_id=recording.recording_id,
                origin=origin,
            )
        )
    return segs


def temporal_split(recording: CanonicalRecording, reference_fraction: float
                   ) -> tuple[CanonicalRecording, CanonicalRecording]:
    """Cut a recording in two along time: ``[0, floor(n*f))`` and the rest."""
    if not 0 < reference_fraction < 1:
        raise DataError(f"reference_fraction must be in (0, 1), got {reference_fraction}")
    n = recording.n_samples
    cut = int(math.floor(n * reference_fraction))
    if cut < 1 or cut >= n:
        raise DataError(
            f"split of {n} samples at fraction {reference_fraction} leaves an empty side "
            f"({recording.subject_id}, activity {recording.activity_id})"
        )
    head = replace(recording, samples=recording.samples[:cut])
    tail = replace(recording, samples=recording.samples[cut:],
                   start_offset=recording.start_offset + cut)
    return head, tail


def segment_split(recording: CanonicalRecording, reference_fraction: float,
                  window_seconds: float, overlap_ratio: float
                  ) -> tuple[list[WindowSegment], list[WindowSegment]]:
    """Split first, then window each side; warns when a side yields no windows."""
    ref, test = temporal_split(recording, reference_fraction)
    ref_segs = segment(ref, window_seconds, overlap_ratio, origin="reference")
    test_segs = segment(test, window_seconds, overlap_ratio, origin="test")
    for side, segs in (("reference", ref_segs), ("test", test_segs)):
        if not segs:
            warnings.warn(
                f"subject {recording.subject_id} activity {recording.activity_id}: "
                f"{side} side is shorter than one window",
                stacklevel=2,
            )
    return ref_segs, test_segs
