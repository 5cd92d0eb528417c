from .adapters import ingest_dataset, read_canonical_csv, write_canonical_csv
from .folds import make_subject_folds
from .records import CanonicalRecording, FoldPlan, SegmentSet, SplitPlan, WindowSegment
from .signal import resample, segment, segment_split, temporal_split, window_length, window_step
from .synth import synth_dataset

__all__ = [
    "CanonicalRecording", "FoldPlan", "SegmentSet", "SplitPlan", "WindowSegment",
    "ingest_dataset", "make_subject_folds", "read_canonical_csv", "resample", "segment",
    "segment_split", "synth_dataset", "temporal_split", "window_length", "window_step",
    "write_canonical_csv",
]
