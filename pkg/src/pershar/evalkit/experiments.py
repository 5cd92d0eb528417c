"""Subject-grouped cross-validation runners for the five experiments.

Each runner builds one FoldPlan from the run seed and reuses it for every
model kind; OOD class holdouts are drawn per fold from the same seed, so
all models see identical splits. Folds are independent and may run in
worker processes; results are merged in fold order.
"""
from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..config import RunConfig
from ..datakit import (
    SegmentSet, ingest_dataset, make_subject_folds, resample, segment, segment_split, synth_dataset,
)
from ..embedders import DeepEmbedder, FeatureEmbedder
from ..errors import DataError
from ..featkit import extract_batch, fit_scaler, gini_rank
from ..personalize import ReferenceSet, knn_predict, ood_scores, softmax_ood_scores, truncate_reference
from ..trainkit import TrainConfig, train_classifier, train_triplet
from .metrics import auroc
from .report import ExperimentReport

EXPERIMENTS = ("classification", "ood", "generalization", "refsize", "embsize")
PERSONALIZED = ("pef", "pdf", "ptn_conventional", "ptn")


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------

def load_recordings(cfg: RunConfig):
    ds = cfg.dataset
    if ds.name == "synthetic":
        s = ds.synthetic
        recs = synth_dataset(s.n_subjects, s.n_classes, s.n_channels, s.sample_rate,
                             s.seconds_per_class, s.seed, noise=s.noise,
                             subject_spread=s.subject_spread, outlier_classes=tuple(s.outlier_classes))
    else:
        recs = ingest_dataset(ds.root, ds.name)
    if not recs:
        raise DataError(f"dataset {ds.name!r} produced no recordings")
    target = cfg.preprocessing.target_hz
    recs = [r if r.sample_rate == target else resample(r, target) for r in recs]
    names = recs[0].channel_names
    for r in recs:
        if r.channel_names != names:
            raise DataError(f"recording {r.recording_id!r} has a different channel layout")
    return recs


@dataclass
class FoldData:
    fold: int
    train: SegmentSet
    refs: dict[str, SegmentSet]
    tests: dict[str, SegmentSet]
    warnings: list[str] = field(default_factory=list)


def _stack(segs, n_channels, wlen) -> SegmentSet:
    return SegmentSet.from_segments(segs, n_channels=n_channels, window_len=wlen)


def build_fold(recs, plan, fold: int, cfg: RunConfig, train_classes=None, reference_classes=None
               ) -> FoldData:
    """Window training subjects whole; split test subjects' recordings in time first."""
    wsec, ov = cfg.window_seconds, cfg.preprocessing.overlap
    n_ch = recs[0].n_channels
    wlen = int(round(wsec * cfg.preprocessing.target_hz))
    test_subjects = set(plan.fold_subjects(fold))
    train_segs, refs, tests, notes = [], {}, {}, []
    for r in recs:
        if r.subject_id in test_subjects:
            continue
        if train_classes is not None and r.activity_id not in train_classes:
            continue
        train_segs.extend(segment(r, wsec, ov, origin="train"))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for sid in sorted(test_subjects):
            ref_segs, test_segs = [], []
            for r in recs:
                if r.subject_id != sid:
                    continue
                a, b = segment_split(r, cfg.evaluation.reference_fraction, wsec, ov)
                if reference_classes is None or r.activity_id in reference_classes:
                    ref_segs.extend(a)
                test_segs.extend(b)
            refs[sid] = _stack(ref_segs, n_ch, wlen)
            tests[sid] = _stack(test_segs, n_ch, wlen)
    notes.extend(f"fold {fold}: {w.message}" for w in caught)
    data = FoldData(fold, _stack(train_segs, n_ch, wlen), refs, tests, notes)
    check_provenance(data)
    return data


def check_provenance(data: FoldData) -> None:
    """No test subject in training; reference windows never overlap test windows."""
    train_subjects = set(data.train.subjects.tolist())
    for sid in data.tests:
        if sid in train_subjects:
            raise DataError(f"fold {data.fold}: test subject {sid} appears in training data")
    if len(data.train) and set(data.train.origins.tolist()) != {"train"}:
        raise DataError(f"fold {data.fold}: non-training windows in the training set")
    for sid, ref in data.refs.items():
        test = data.tests[sid]
        if len(ref) and set(ref.origins.tolist()) != {"reference"}:
            raise DataError(f"fold {data.fold}: subject {sid} reference set has foreign windows")
        if len(test) and set(test.origins.tolist()) != {"test"}:
            raise DataError(f"fold {data.fold}: subject {sid} test set has foreign windows")
        for rec in set(ref.recordings.tolist()) & set(test.recordings.tolist()):
            if ref.stops[ref.recordings == rec].max() > test.starts[test.recordings == rec].min():
                raise DataError(f"fold {data.fold}: reference and test windows overlap in {rec}")


def _remap(segs: SegmentSet, classes: np.ndarray) -> SegmentSet:
    keep = np.isin(segs.labels, classes)
    out = segs.subset(keep)
    out.labels = np.searchsorted(classes, out.labels)
    return out


def _all_tests(data: FoldData) -> SegmentSet:
    parts = [t for t in data.tests.values() if len(t)]
    return SegmentSet.concat(parts) if parts else None


def ood_holdout(classes, cfg: RunConfig, fold: int) -> np.ndarray:
    """Classes treated as unseen in this fold; identical for every model kind."""
    classes = np.asarray(sorted(classes))
    ev = cfg.evaluation
    if ev.ood_classes is not None:
        held = np.asarray(sorted(ev.ood_classes))
        if not np.isin(held, classes).all():
            raise DataError(f"ood_classes {held.tolist()} not all in dataset classes {classes.tolist()}")
    else:
        n_in = max(2, int(math.floor((1.0 - ev.ood_class_fraction) * classes.size + 1e-9)))
        rng = np.random.default_rng([cfg.seed, fold, 0x00D])
        held = np.sort(rng.choice(classes, size=classes.size - n_in, replace=False))
    if classes.size - held.size < 2:
        raise DataError(f"holding out {held.size} of {classes.size} classes leaves fewer than 2")
    if held.size == 0:
        raise DataError(f"{classes.size} classes leave nothing to hold out")
    return held


# ---------------------------------------------------------------------------
# model fitting
# ---------------------------------------------------------------------------

def fold_seed(cfg: RunConfig, fold: int) -> int:
    return int(np.random.SeedSequence([cfg.seed, fold]).generate_state(1)[0])


def train_configs(cfg: RunConfig, seed: int, embed_dim=None) -> dict[str, TrainConfig]:
    m, t = cfg.model, cfg.training
    arch = dict(filters=tuple(m.filters), kernels=tuple(m.kernels), strides=tuple(m.strides),
                embed_dim=embed_dim if embed_dim is not None else m.embed_dim, dropout=m.dropout,
                bn_momentum=m.bn_momentum, bn_eps=m.bn_eps, batch_size=t.batch_size,
                clipnorm=t.clipnorm, beta1=t.adam_beta1, beta2=t.adam_beta2, adam_eps=t.adam_eps,
                seed=seed)
    return {
        "cce": TrainConfig.cce(epochs=t.epochs_cce, lr=t.lr_cce, **arch),
        "ptn": TrainConfig.triplet(t.subject_triplet_ratio, epochs=t.epochs_triplet,
                                   lr=t.lr_triplet, margin=t.margin, **arch),
        "ptn_conventional": TrainConfig.triplet(0.0, epochs=t.epochs_triplet, lr=t.lr_triplet,
                                                margin=t.margin, **arch),
    }


def fit_pef(train: SegmentSet, n_select=None, n_trees: int = 250, seed: int = 0) -> FeatureEmbedder:
    feats = extract_batch(train.X)
    scaler = fit_scaler(feats)
    selected = None
    if n_select is not None:
        if n_select > feats.shape[1]:
            raise DataError(f"embedding size {n_select} exceeds the {feats.shape[1]} engineered features")
        ranking = gini_rank(scaler.transform(feats), train.labels, n_trees=n_trees, seed=seed)
        selected = ranking.order[:n_select].astype(np.int64)
    return FeatureEmbedder(kind="pef", scaler=scaler, selected=selected)


def fit_models(kinds, train: SegmentSet, val: SegmentSet | None, cfg: RunConfig, seed: int,
               embed_dim=None, pef_dim=None, classes=None) -> dict[str, tuple]:
    """Fit each requested kind; returns ``kind -> (embedder, fit_seconds)``.

    FCN and PDF share one cross-entropy run: the PDF embedding is the FCN
    classifier's pooled, normalised feature layer.
    """
    tcfg = train_configs(cfg, seed, embed_dim)
    classes = np.unique(train.labels) if classes is None else np.asarray(classes)
    fitted = {}
    if {"fcn", "pdf"} & set(kinds):
        t0 = time.perf_counter()
        tr = _remap(train, classes)
        va = _remap(val, classes) if val is not None else None
        model, _ = train_classifier(tr, va, tcfg["cce"], kind="fcn")
        model.classes = classes.astype(np.int64)
        dt = time.perf_counter() - t0
        for k in ("fcn", "pdf"):
            if k in kinds:
                fitted[k] = (model, dt)
    for k in ("ptn_conventional", "ptn"):
        if k in kinds:
            t0 = time.perf_counter()
            model, _ = train_triplet(train, val, tcfg[k], kind=k)
            fitted[k] = (model, time.perf_counter() - t0)
    if "pef" in kinds:
        t0 = time.perf_counter()
        model = fit_pef(train, pef_dim, cfg.evaluation.n_trees, seed)
        fitted["pef"] = (model, time.perf_counter() - t0)
    return {k: fitted[k] for k in kinds if k in fitted}


def _model_bytes(kind: str, model) -> int:
    if isinstance(model, DeepEmbedder) and kind != "fcn":
        return sum(v.nbytes for n, v in model.core.params.items() if not n.startswith("head/"))
    return int(model.nbytes)


@dataclass
class Embedded:
    refs: dict[str, ReferenceSet]
    tests: dict[str, np.ndarray]
    seconds: float


def embed_fold(model, data: FoldData) -> Embedded:
    t0 = time.perf_counter()
    unit = isinstance(model, DeepEmbedder)
    refs, tests = {}, {}
    for sid in data.tests:
        ref = data.refs[sid]
        if len(ref):
            refs[sid] = ReferenceSet(sid, model.embed(ref.X), ref.labels, model.embedder_id, unit)
        tests[sid] = model.embed(data.tests[sid].X) if len(data.tests[sid]) else None
    return Embedded(refs, tests, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# per-fold work
# ---------------------------------------------------------------------------

class _Fold:
    def __init__(self, cfg: RunConfig, fold: int):
        self.cfg = cfg
        self.fold = fold
        self.results: list[dict] = []
        self.timing: list[dict] = []
        self.warnings: list[str] = []
        self.flags: list[dict] = []

    def add(self, model, param, subject, metric, value):
        self.results.append({"model": model, "param": param, "fold": self.fold, "subject": subject,
                             "metric": metric, "value": float(value)})

    def time(self, model, param, fit, infer, model_bytes, ref_bytes):
        keep = self.cfg.evaluation.timing
        self.timing.append({"model": model, "param": param, "fold": self.fold,
                            "fit_seconds": float(fit) if keep else None,
                            "inference_seconds": float(infer) if keep else None,
                            "model_bytes": int(model_bytes), "reference_bytes": ref_bytes})


def _ref_bytes(refs: dict[str, ReferenceSet]):
    return float(np.mean([r.nbytes for r in refs.values()])) if refs else 0.0


def _personal_accuracy(out: _Fold, kind, param, emb: Embedded, data: FoldData, k: int,
                       refs=None, metric="accuracy", label_filter=None):
    refs = emb.refs if refs is None else refs
    for sid, test in data.tests.items():
        q = emb.tests[sid]
        if q is None:
            out.warnings.append(f"fold {out.fold}: subject {sid} has no test windows; excluded")
            continue
        if sid not in refs:
            out.warnings.append(f"fold {out.fold}: subject {sid} has no reference windows; excluded")
            continue
        y = test.labels
        mask = np.ones(y.size, bool) if label_filter is None else np.isin(y, label_filter)
        if not mask.any():
            continue
        pred = knn_predict(refs[sid], q[mask], min(k, len(refs[sid])))
        out.add(kind, param, sid, metric, np.mean(pred == y[mask]))


def _classification_fold(cfg, recs, plan, fold):
    out = _Fold(cfg, fold)
    data = build_fold(recs, plan, fold, cfg)
    out.warnings.extend(data.warnings)
    k = cfg.evaluation.k_neighbors
    fitted = fit_models(cfg.model.kinds, data.train, _all_tests(data), cfg, fold_seed(cfg, fold))
    for kind, (model, fit_s) in fitted.items():
        if kind == "fcn":
            t0 = time.perf_counter()
            for sid, test in data.tests.items():
                if len(test):
                    out.add(kind, None, sid, "accuracy", np.mean(model.predict(test.X) == test.labels))
            out.time(kind, None, fit_s, time.perf_counter() - t0, _model_bytes(kind, model), 0.0)
            continue
        emb = embed_fold(model, data)
        t0 = time.perf_counter()
        _personal_accuracy(out, kind, None, emb, data, k)
        out.time(kind, None, fit_s, emb.seconds + time.perf_counter() - t0,
                 _model_bytes(kind, model), _ref_bytes(emb.refs))
    return out


def _ood_fold(cfg, recs, plan, fold, generalize=False):
    out = _Fold(cfg, fold)
    classes = sorted({r.activity_id for r in recs})
    held = ood_holdout(classes, cfg, fold)
    in_classes = np.setdiff1d(classes, held)
    data = build_fold(recs, plan, fold, cfg, train_classes=set(in_classes.tolist()),
                      reference_classes=None if generalize else set(in_classes.tolist()))
    out.warnings.extend(data.warnings)
    out.flags.append({"fold": fold, "held_out_classes": held.tolist()})
    kinds = list(cfg.model.kinds)
    if generalize and "fcn" in kinds:
        kinds.remove("fcn")
        out.warnings.append("fcn is not evaluated for generalization to new classes")
    k = cfg.evaluation.k_neighbors
    tests = _all_tests(data)
    val = tests.subset(np.isin(tests.labels, in_classes)) if tests is not None else None
    fitted = fit_models(kinds, data.train, val, cfg, fold_seed(cfg, fold), classes=in_classes)
    for kind, (model, fit_s) in fitted.items():
        if generalize:
            emb = embed_fold(model, data)
            t0 = time.perf_counter()
            _personal_accuracy(out, kind, None, emb, data, k)
            _personal_accuracy(out, kind, None, emb, data, k, metric="accuracy_heldout",
                               label_filter=held)
            out.time(kind, None, fit_s, emb.seconds + time.perf_counter() - t0,
                     _model_bytes(kind, model), _ref_bytes(emb.refs))
            continue
        t0 = time.perf_counter()
        emb = None if kind == "fcn" else embed_fold(model, data)
        for sid, test in data.tests.items():
            if not len(test):
                continue
            is_ood = np.isin(test.labels, held)
            if is_ood.all() or not is_ood.any():
                out.warnings.append(f"fold {fold}: subject {sid} lacks in- or out-of-distribution "
                                    "test windows; AUROC skipped")
                continue
            if kind == "fcn":
                scores = softmax_ood_scores(model, test.X)
            else:
                ref = emb.refs.get(sid)
                if ref is None or len(ref) < k:
                    out.warnings.append(f"fold {fold}: subject {sid} has too few reference windows")
                    continue
                scores = ood_scores(ref, emb.tests[sid], k)
            out.add(kind, None, sid, "auroc", auroc(scores, is_ood))
        refb = 0.0 if emb is None else _ref_bytes(emb.refs)
        out.time(kind, None, fit_s, time.perf_counter() - t0, _model_bytes(kind, model), refb)
    return out


def _parse_grid_value(v):
    if isinstance(v, str):
        if v.lower() == "all":
            return "all"
        v = int(v)
    if int(v) < 1:
        raise DataError(f"sweep values must be >= 1, got {v}")
    return int(v)


def _refsize_fold(cfg, recs, plan, fold, grid):
    out = _Fold(cfg, fold)
    data = build_fold(recs, plan, fold, cfg)
    out.warnings.extend(data.warnings)
    kinds = [k for k in cfg.model.kinds if k in PERSONALIZED]
    if len(kinds) < len(cfg.model.kinds):
        out.warnings.append("fcn has no reference set; skipped in the reference-size sweep")
    k = cfg.evaluation.k_neighbors
    fitted = fit_models(kinds, data.train, _all_tests(data), cfg, fold_seed(cfg, fold))
    for kind, (model, fit_s) in fitted.items():
        emb = embed_fold(model, data)
        for m in grid:
            if m == "all":
                refs = emb.refs
            else:
                refs = {}
                for sid, ref in emb.refs.items():
                    refs[sid], short = truncate_reference(ref, m)
                    if short:
                        out.flags.append({"fold": fold, "model": kind, "param": m, "subject": sid,
                                          "note": "fewer reference windows than requested; used all"})
            t0 = time.perf_counter()
            _personal_accuracy(out, kind, m, emb, data, k, refs=refs)
            out.time(kind, m, fit_s, emb.seconds + time.perf_counter() - t0,
                     _model_bytes(kind, model), _ref_bytes(refs))
    return out


def _embsize_fold(cfg, recs, plan, fold, grid):
    out = _Fold(cfg, fold)
    data = build_fold(recs, plan, fold, cfg)
    out.warnings.extend(data.warnings)
    kinds = [k for k in cfg.model.kinds if k in PERSONALIZED]
    if len(kinds) < len(cfg.model.kinds):
        out.warnings.append("fcn has no embedding to resize; skipped in the embedding-size sweep")
    n_features = 11 * data.train.X.shape[2]
    k = cfg.evaluation.k_neighbors
    val = _all_tests(data)
    seed = fold_seed(cfg, fold)
    for d in grid:
        if "pef" in kinds and d > n_features:
            raise DataError(f"embedding size {d} exceeds the {n_features} engineered features")
        fitted = fit_models(kinds, data.train, val, cfg, seed, embed_dim=d, pef_dim=d)
        for kind, (model, fit_s) in fitted.items():
            emb = embed_fold(model, data)
            t0 = time.perf_counter()
            _personal_accuracy(out, kind, d, emb, data, k)
            out.time(kind, d, fit_s, emb.seconds + time.perf_counter() - t0,
                     _model_bytes(kind, model), _ref_bytes(emb.refs))
    return out


def _run_fold(args):
    name, cfg, recs, plan, fold, grid = args
    if name == "classification":
        return _classification_fold(cfg, recs, plan, fold)
    if name == "ood":
        return _ood_fold(cfg, recs, plan, fold)
    if name == "generalization":
        return _ood_fold(cfg, recs, plan, fold, generalize=True)
    if name == "refsize":
        return _refsize_fold(cfg, recs, plan, fold, grid)
    return _embsize_fold(cfg, recs, plan, fold, grid)


def run_experiment(name: str, cfg: RunConfig, jobs: int = 1, grid=None, recordings=None,
                   folds=None) -> ExperimentReport:
    """Run one experiment over all folds (or the ``folds`` subset)."""
    if name not in EXPERIMENTS:
        raise DataError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    recs = load_recordings(cfg) if recordings is None else recordings
    subjects = sorted({r.subject_id for r in recs})
    plan = make_subject_folds(subjects, cfg.evaluation.folds, cfg.seed)
    if name == "refsize":
        grid = [_parse_grid_value(v) for v in (grid or cfg.evaluation.refsize_grid)]
    elif name == "embsize":
        grid = [_parse_grid_value(v) for v in (grid or cfg.evaluation.embsize_grid)]
        if "all" in grid:
            raise DataError("embedding-size grid needs integer sizes")
    fold_ids = list(range(plan.k)) if folds is None else list(folds)
    tasks = [(name, cfg, recs, plan, f, grid) for f in fold_ids]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_fold, tasks))
    else:
        parts = [_run_fold(t) for t in tasks]
    echo = cfg.resolved()
    echo["experiment"] = {"name": name, "grid": grid, "folds": fold_ids,
                          "fold_assignment": dict(sorted(plan.assignment.items()))}
    report = ExperimentReport(experiment=name, config=echo)
    for p in parts:
        report.results.extend(p.results)
        report.timing.extend(p.timing)
        report.warnings.extend(p.warnings)
        report.flags.extend(p.flags)
    return report


def run_classification_experiment(cfg: RunConfig, **kw) -> ExperimentReport:
    return run_experiment("classification", cfg, **kw)


def run_ood_experiment(cfg: RunConfig, **kw) -> ExperimentReport:
    return run_experiment("ood", cfg, **kw)


def run_generalization_experiment(cfg: RunConfig, **kw) -> ExperimentReport:
    return run_experiment("generalization", cfg, **kw)


def run_refsize_sweep(cfg: RunConfig, grid=None, **kw) -> ExperimentReport:
    return run_experiment("refsize", cfg, grid=grid, **kw)


def run_embsize_sweep(cfg: RunConfig, grid=None, **kw) -> ExperimentReport:
    return run_experiment("embsize", cfg, grid=grid, **kw)
