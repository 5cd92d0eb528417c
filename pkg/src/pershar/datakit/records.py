from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError


@dataclass(eq=False)
class CanonicalRecording:
    """One subject performing one activity, sampled uniformly.

    ``start_offset`` is the index of the first sample relative to the
    unsplit source recording, so windows cut from either side of a temporal
    split keep comparable sample ranges.
    """

    subject_id: str
    activity_id: int
    sample_rate: float
    samples: np.ndarray
    channel_names: list[str]
    recording_id: str = ""
    start_offset: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise DataError(f"samples must be 2-D (n_samples x n_channels), got shape {self.samples.shape}")
        n, c = self.samples.shape
        if n < 1 or c < 1:
            raise DataError(f"recording {self.recording_id!r} is empty: shape {self.samples.shape}")
        if np.isnan(self.samples).any():
            raise DataError(f"recording {self.recording_id!r} contains NaN")
        if not self.sample_rate > 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")
        if int(self.activity_id) < 0:
            raise DataError(f"activity_id must be >= 0, got {self.activity_id}")
        self.activity_id = int(self.activity_id)
        self.subject_id = str(self.subject_id)
        if len(self.channel_names) != c:
            raise DataError(f"{len(self.channel_names)} channel names for {c} channels")
        self.channel_names = list(self.channel_names)
        if not self.recording_id:
            self.recording_id = f"{self.subject_id}:{self.activity_id}"

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) / self.sample_rate

    def same_as(self, other: "CanonicalRecording") -> bool:
        return (
            self.subject_id == other.subject_id
            and self.activity_id == other.activity_id
            and self.sample_rate == other.sample_rate
            and self.channel_names == other.channel_names
            and self.recording_id == other.recording_id
            and self.start_offset == other.start_offset
            and self.samples.shape == other.samples.shape
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(eq=False)
class WindowSegment:
    subject_id: str
    activity_id: int
    start_index: int
    data: np.ndarray
    source_recording_id: str
    origin: str = ""

    @property
    def window_len(self) -> int:
        return self.data.shape[0]

    @property
    def stop_index(self) -> int:
        return self.start_index + self.window_len


@dataclass
class SplitPlan:
    reference_fraction: float
    boundaries: dict[str, int] = field(default_factory=dict)


@dataclass
class FoldPlan:
    k: int
    assignment: dict[str, int]
    seed: int

    def fold_subjects(self, fold: int) -> list[str]:
        return sorted(s for s, f in self.assignment.items() if f == fold)

    def train_subjects(self, fold: int) -> list[str]:
        return sorted(s for s, f in self.assignment.items() if f != fold)

    def sizes(self) -> list[int]:
        return [sum(1 for f in self.assignment.values() if f == i) for i in range(self.k)]


@dataclass(eq=False)
class SegmentSet:
    """Stacked windows with per-window provenance, the form models consume."""

    X: np.ndarray
    labels: np.ndarray
    subjects: np.ndarray
    recordings: np.ndarray
    starts: np.ndarray
    origins: np.ndarray

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def stops(self) -> np.ndarray:
        return self.starts + self.X.shape[1]

    @classmethod
    def from_segments(cls, segments: list[WindowSegment], n_channels: int | None = None,
                      window_len: int | None = None) -> "SegmentSet":
        if not segments:
            if n_channels is None or window_len is None:
                raise DataError("cannot stack an empty segment list without a shape")
            return cls(
                X=np.zeros((0, window_len, n_channels), dtype=np.float32),
                labels=np.zeros(0, dtype=np.int64),
                subjects=np.zeros(0, dtype=object),
                recordings=np.zeros(0, dtype=object),
                starts=np.zeros(0, dtype=np.int64),
                origins=np.zeros(0, dtype=object),
            )
        shapes = {s.data.shape for s in segments}
        if len(shapes) != 1:
            raise DataError(f"segments have mixed shapes {sorted(shapes)}")
        return cls(
            X=np.stack([s.data for s in segments]).astype(np.float32),
            labels=np.array([s.activity_id for s in segments], dtype=np.int64),
            subjects=np.array([s.subject_id for s in segments], dtype=object),
            recordings=np.array([s.source_recording_id for s in segments], dtype=object),
            starts=np.array([s.start_index for s in segments], dtype=np.int64),
            origins=np.array([s.origin for s in segments], dtype=object),
        )

    def subset(self, mask_or_index) -> "SegmentSet":
        return SegmentSet(
            X=self.X[mask_or_index],
            labels=self.labels[mask_or_index],
            subjects=self.subjects[mask_or_index],
            recordings=self.recordings[mask_or_index],
            starts=self.starts[mask_or_index],
            origins=self.origins[mask_or_index],
        )

    @staticmethod
    def concat(sets: list["SegmentSet"]) -> "SegmentSet":
        return SegmentSet(
            X=np.concatenate([s.X for s in sets]),
            labels=np.concatenate([s.labels for s in sets]),
            subjects=np.concatenate([s.subjects for s in sets]),
            recordings=np.concatenate([s.recordings for s in sets]),
            starts=np.concatenate([s.starts for s in sets]),
            origins=np.concatenate([s.origins for s in sets]),
        )
