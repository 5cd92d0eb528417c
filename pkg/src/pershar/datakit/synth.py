from __future__ import annotations

import numpy as np

from ..errors import DataError
from .records import CanonicalRecording


def synth_dataset(n_subjects: int, n_classes: int, n_channels: int, sample_rate: float,
                  seconds_per_class: float, seed: int, *, noise: float = 0.3,
                  subject_spread: float = 0.12, outlier_classes=()) -> list[CanonicalRecording]:
    """Seeded multichannel sinusoid mixtures, one recording per (subject, class).

    Each class owns two fundamental frequencies on a grid wide enough that
    classes stay separable within a subject. Subjects perturb gain, offset,
    phase and tempo (a frequency scale of ``exp(N(0, subject_spread))``), so
    models trained on other people see shifted class signatures.
    Classes listed in ``outlier_classes`` get a much faster, larger signature
    that sits far from every other class.
    """
    if min(n_subjects, n_classes, n_channels) < 1 or sample_rate <= 0 or seconds_per_class <= 0:
        raise DataError("synth_dataset needs positive counts, rate and duration")
    rng = np.random.default_rng(seed)
    n = int(round(seconds_per_class * sample_rate))
    t = np.arange(n) / sample_rate

    base = 0.6 + 0.45 * np.arange(n_classes)
    freqs = np.stack([base, base * rng.uniform(1.6, 2.2, n_classes)], axis=1)
    amps = rng.uniform(0.2, 1.5, size=(n_classes, n_channels, 2))
    for c in outlier_classes:
        freqs[c] = [7.0, 11.0]
        amps[c] *= 3.0

    gains = np.exp(rng.normal(0.0, 0.3, size=(n_subjects, n_channels)))
    offsets = rng.normal(0.0, 0.5, size=(n_subjects, n_channels))
    tempo = np.exp(rng.normal(0.0, subject_spread, size=n_subjects))

    names = [f"ch_{i}" for i in range(n_channels)]
    recordings = []
    for s in range(n_subjects):
        sid = f"subj{s:02d}"
        for c in range(n_classes):
            phases = rng.uniform(0, 2 * np.pi, size=(n_channels, 2))
            x = np.zeros((n, n_channels))
            for j in range(2):
                arg = 2 * np.pi * freqs[c, j] * tempo[s] * t[:, None] + phases[None, :, j]
                x += amps[c, :, j] * np.sin(arg)
            x = gains[s] * x + offsets[s] + rng.normal(0.0, noise, size=(n, n_channels))
            recordings.append(CanonicalRecording(
                subject_id=sid, activity_id=c, sample_rate=float(sample_rate), samples=x,
                channel_names=names, recording_id=f"{sid}_c{c}",
            ))
    return recordings
