import numpy as np
import pytest

from pershar.datakit import SegmentSet, segment, synth_dataset


@pytest.fixture(scope="session")
def synth_small():
    return synth_dataset(4, 3, 6, 50.0, 20.0, seed=3)


@pytest.fixture(scope="session")
def synth_segments(synth_small):
    segs = []
    for r in synth_small:
        segs.extend(segment(r, 4.0, 0.5, origin="train"))
    return SegmentSet.from_segments(segs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
