import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pershar.datakit import (
    CanonicalRecording, SegmentSet, ingest_dataset, make_subject_folds, read_canonical_csv,
    resample, segment, segment_split, synth_dataset, temporal_split, write_canonical_csv,
)
from pershar.datakit.signal import window_length
from pershar.errors import DataError, IngestError


def rec(n, rate=50.0, channels=1, subject="s1", activity=0, values=None):
    data = np.arange(n * channels, dtype=float).reshape(n, channels) if values is None else values
    return CanonicalRecording(subject, activity, rate, data, [f"ch_{i}" for i in range(channels)])


class TestRecording:
    def test_rejects_nan(self):
        with pytest.raises(DataError):
            rec(5, values=np.array([[1.0], [np.nan], [2.0], [3.0], [4.0]]))

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            rec(0, values=np.zeros((0, 2)))


class TestResample:
    def test_halving_rate_length(self):
        out = resample(rec(1000, rate=100.0), 50.0)
        assert out.n_samples == 500
        assert out.sample_rate == 50.0

    def test_identity_when_rates_match(self):
        r = rec(100, rate=50.0, channels=3)
        out = resample(r, 50.0)
        assert out.samples.tobytes() == r.samples.tobytes()

    def test_sinusoid_upsampled_against_closed_form(self):
        t = np.arange(200) / 20.0
        r = rec(200, rate=20.0, values=np.sin(2 * np.pi * t)[:, None])
        out = resample(r, 50.0)
        t_out = np.arange(out.n_samples) / 50.0
        assert np.max(np.abs(out.samples[:, 0] - np.sin(2 * np.pi * t_out))) < 1e-2

    def test_too_short(self):
        with pytest.raises(DataError):
            resample(rec(3, rate=100.0), 50.0)

    def test_natural_spline_reproduces_lines(self):
        r = rec(40, rate=10.0, values=np.linspace(0, 3, 40)[:, None])
        out = resample(r, 25.0)
        t = np.arange(out.n_samples) / 25.0
        assert np.allclose(out.samples[:, 0], t * 10.0 * 3 / 39)


class TestSegment:
    def test_count_and_step(self):
        segs = segment(rec(1000), 4.0, 0.8)
        assert len(segs) == 21
        assert [s.start_index for s in segs[:3]] == [0, 40, 80]
        assert all(s.window_len == 200 for s in segs)

    def test_exact_fit(self):
        assert len(segment(rec(200), 4.0, 0.5)) == 1
        assert len(segment(rec(200), 4.0, 0.0)) == 1

    def test_short_recording_gives_nothing(self):
        assert segment(rec(199), 4.0, 0.8) == []

    def test_spar_window(self):
        assert window_length(4.0, 50.0) == 200

    def test_bad_overlap(self):
        with pytest.raises(DataError):
            segment(rec(500), 4.0, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 600), wsec=st.floats(0.1, 5.0), overlap=st.floats(0.0, 0.95))
    def test_windows_stay_inside_recording(self, n, wsec, overlap):
        r = rec(n, rate=20.0)
        segs = segment(r, wsec, overlap)
        wlen = window_length(wsec, 20.0)
        if wlen > n:
            assert segs == []
            return
        step = max(1, math.floor(wlen * (1 - overlap) + 0.5 + 1e-9))
        assert len(segs) == (n - wlen) // step + 1
        for s in segs:
            assert 0 <= s.start_index and s.stop_index <= n
            assert np.array_equal(s.data, r.samples[s.start_index:s.stop_index])


class TestTemporalSplit:
    def test_even(self):
        a, b = temporal_split(rec(1000), 0.5)
        assert (a.n_samples, b.n_samples) == (500, 500)
        assert b.start_offset == 500

    def test_floor(self):
        a, b = temporal_split(rec(1001), 0.5)
        assert (a.n_samples, b.n_samples) == (500, 501)

    def test_short_reference_side_warns(self):
        with pytest.warns(UserWarning, match="reference side"):
            ref, test = segment_split(rec(200), 0.1, 4.0, 0.8)
        assert ref == [] and test == []

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(50, 800), f=st.floats(0.05, 0.95), overlap=st.floats(0.0, 0.9))
    def test_no_window_crosses_boundary(self, n, f, overlap):
        r = rec(n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref, test = segment_split(r, f, 1.0, overlap)
        cut = math.floor(n * f)
        assert all(s.stop_index <= cut for s in ref)
        assert all(s.start_index >= cut for s in test)
        assert all(np.array_equal(s.data, r.samples[s.start_index:s.stop_index]) for s in ref + test)


class TestFolds:
    def test_balanced(self):
        plan = make_subject_folds([f"s{i}" for i in range(10)], 5, seed=0)
        assert plan.sizes() == [2] * 5

    def test_47_subjects(self):
        plan = make_subject_folds([str(i) for i in range(47)], 5, seed=1)
        assert sorted(plan.sizes()) == [9, 9, 9, 10, 10]

    def test_deterministic_and_order_free(self):
        ids = [f"s{i}" for i in range(13)]
        a = make_subject_folds(ids, 4, seed=5)
        b = make_subject_folds(list(reversed(ids)), 4, seed=5)
        assert a.assignment == b.assignment

    def test_duplicates_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            make_subject_folds(["a", "b", "a"], 2, seed=0)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(2, 60), k=st.integers(2, 10), seed=st.integers(0, 2**31))
    def test_partition(self, n, k, seed):
        if n < k:
            return
        ids = [f"x{i}" for i in range(n)]
        plan = make_subject_folds(ids, k, seed)
        folds = [set(plan.fold_subjects(i)) for i in range(k)]
        assert set().union(*folds) == set(ids)
        assert sum(len(f) for f in folds) == n
        assert max(plan.sizes()) - min(plan.sizes()) <= 1


class TestSynth:
    def test_shapes(self):
        recs = synth_dataset(2, 3, 6, 50.0, 60.0, seed=7)
        assert len(recs) == 6
        assert all(r.samples.shape == (3000, 6) for r in recs)

    def test_deterministic(self):
        a = synth_dataset(2, 3, 6, 50.0, 10.0, seed=7)
        b = synth_dataset(2, 3, 6, 50.0, 10.0, seed=7)
        assert all(x.samples.tobytes() == y.samples.tobytes() for x, y in zip(a, b))


class TestCanonicalCsv:
    def test_two_subjects_two_activities(self, tmp_path):
        recs = synth_dataset(2, 2, 3, 50.0, 2.0, seed=1)
        path = tmp_path / "c.csv"
        write_canonical_csv(recs, path)
        back = ingest_dataset(path, "canonical_csv")
        assert len(back) == 4
        assert all(a.same_as(b) for a, b in zip(recs, back))

    def test_round_trip_after_split(self, tmp_path):
        r = synth_dataset(1, 1, 2, 50.0, 3.0, seed=2)[0]
        _, tail = temporal_split(r, 0.4)
        write_canonical_csv([tail], tmp_path / "t.csv")
        assert read_canonical_csv(tmp_path / "t.csv")[0].same_as(tail)

    def test_duplicate_timestamp_is_error(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("subject_id,activity_id,recording_id,t_s,ch_0\n"
                     "a,0,r,0.0,1\na,0,r,0.02,2\na,0,r,0.02,3\n")
        with pytest.raises(IngestError, match="line 4"):
            read_canonical_csv(p)

    def test_malformed_row_names_line(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("subject_id,activity_id,recording_id,t_s,ch_0\na,0,r,0.0,1\na,0,r,0.02,oops\n")
        with pytest.raises(IngestError, match="line 3"):
            read_canonical_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestError, match="does not exist"):
            ingest_dataset(tmp_path / "nope.csv", "canonical_csv")


def _write_wisdm(root, subject, rows_acc, rows_gyr):
    for sensor, rows in (("accel", rows_acc), ("gyro", rows_gyr)):
        d = root / "raw" / "watch" / sensor
        d.mkdir(parents=True, exist_ok=True)
        with open(d / f"data_{subject}_{sensor}_watch.txt", "w") as fh:
            for code, ts, x, y, z in rows:
                fh.write(f"{subject},{code},{ts},{x},{y},{z};\n")


def _wisdm_rows(codes, n=60, offset=0):
    rows = []
    t = 1_000_000_000 + offset
    for code in codes:
        for i in range(n):
            rows.append((code, t, np.sin(i / 5), np.cos(i / 7), i * 0.01))
            t += 50_000_000
    return rows


class TestWisdm:
    def test_excludes_bad_subjects_and_keeps_watch_channels(self, tmp_path):
        for sid in ("1600", "1601", "1637", "1640"):
            _write_wisdm(tmp_path, sid, _wisdm_rows("AB"), _wisdm_rows("AB", offset=10_000_000))
        recs = ingest_dataset(tmp_path, "wisdm_watch")
        assert {r.subject_id for r in recs} == {"1600", "1601"}
        assert all(r.n_channels == 6 and r.sample_rate == 20.0 for r in recs)
        assert {r.activity_id for r in recs} == {0, 1}

    def test_all_51_subjects_leave_47(self, tmp_path):
        ids = [str(1600 + i) for i in range(51)]
        for sid in ids:
            _write_wisdm(tmp_path, sid, _wisdm_rows("A", n=10), _wisdm_rows("A", n=10))
        recs = ingest_dataset(tmp_path, "wisdm_watch")
        assert len({r.subject_id for r in recs}) == 47

    def test_duplicate_timestamps_error(self, tmp_path):
        rows = _wisdm_rows("A", n=10)
        rows[5] = (rows[5][0], rows[4][1]) + rows[5][2:]
        _write_wisdm(tmp_path, "1600", rows, _wisdm_rows("A", n=10))
        with pytest.raises(IngestError, match="duplicated timestamp"):
            ingest_dataset(tmp_path, "wisdm_watch")

    def test_missing_gyro_file(self, tmp_path):
        _write_wisdm(tmp_path, "1600", _wisdm_rows("A"), _wisdm_rows("A"))
        (tmp_path / "raw" / "watch" / "gyro" / "data_1600_gyro_watch.txt").unlink()
        with pytest.raises(IngestError, match="data_1600_gyro_watch.txt"):
            ingest_dataset(tmp_path, "wisdm_watch")


class TestMhealth:
    def test_runs_and_null_class(self, tmp_path):
        rng = np.random.default_rng(0)
        labels = [0] * 5 + [1] * 10 + [0] * 3 + [4] * 8
        with open(tmp_path / "mHealth_subject1.log", "w") as fh:
            for lab in labels:
                fh.write("\t".join(f"{v:.4f}" for v in rng.normal(size=23)) + f"\t{lab}\n")
        recs = ingest_dataset(tmp_path, "mhealth")
        assert [r.activity_id for r in recs] == [0, 3]
        assert [r.n_samples for r in recs] == [10, 8]
        assert recs[0].n_channels == 23

    def test_bad_row(self, tmp_path):
        (tmp_path / "mHealth_subject2.log").write_text("1 2 3\n")
        with pytest.raises(IngestError, match="line 1"):
            ingest_dataset(tmp_path, "mhealth")


class TestSpar:
    def test_csv_layout(self, tmp_path):
        rng = np.random.default_rng(0)
        for s in (1, 2):
            for side in "LR":
                for e in range(3):
                    np.savetxt(tmp_path / f"S{s}_E{e}_{side}.csv", rng.normal(size=(30, 6)), delimiter=",")
        recs = ingest_dataset(tmp_path, "spar")
        assert len(recs) == 12
        assert {r.n_channels for r in recs} == {6}
        assert len({r.subject_id for r in recs}) == 4


def test_segment_set_stacks_provenance(synth_segments):
    s = synth_segments
    assert isinstance(s, SegmentSet)
    assert s.X.shape[1:] == (200, 6)
    assert len(set(s.subjects.tolist())) == 4
    assert np.all(s.stops - s.starts == 200)
