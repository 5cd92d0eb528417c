"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric or other runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np
import yaml

from .config import DATASETS, SynthSection, _build, load_config
from .datakit import (
    SegmentSet, ingest_dataset, read_canonical_csv, resample, segment, synth_dataset,
    write_canonical_csv,
)
from .embedders import DeepEmbedder, load_embedder, save_embedder
from .errors import ConfigError, DataError, NumericError, PersharError
from .evalkit import EXPERIMENTS, emit_report, load_recordings, run_experiment
from .evalkit.experiments import fit_pef, train_configs
from .personalize import ReferenceSet, knn_predict, load_references, ood_scores, save_references
from .trainkit import train_classifier, train_triplet

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add(sub, name, help_text):
    return sub.add_parser(name, help=help_text, description=help_text,
                          formatter_class=argparse.ArgumentDefaultsHelpFormatter)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pershar", description="Personalized activity recognition toolkit.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = _add(sub, "ingest", "convert a raw public dataset into canonical CSV")
    s.add_argument("--dataset", required=True, choices=[d for d in DATASETS if d != "synthetic"])
    s.add_argument("--root", required=True, help="dataset directory (or CSV file)")
    s.add_argument("--out", required=True, help="canonical CSV to write")

    s = _add(sub, "synth", "generate the seeded synthetic dataset as canonical CSV")
    s.add_argument("--spec", required=True, help="YAML file with synthetic generator settings")
    s.add_argument("--out", required=True, help="canonical CSV to write")
    s.add_argument("--seed", type=int, default=None, help="overrides the seed in the spec")

    s = _add(sub, "train", "train one model kind on the configured dataset")
    s.add_argument("--config", required=True, help="YAML run configuration (needs model.kind)")
    s.add_argument("--out", required=True, help="model container to write")
    s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    s.add_argument("--log", default=None, help="optional training-curve CSV")

    s = _add(sub, "embed", "window recordings and write their embeddings")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="inp", required=True, help="canonical CSV")
    s.add_argument("--out", required=True, help="embeddings CSV to write")
    s.add_argument("--reference-out", default=None,
                   help="also save every subject's windows as a reference container")

    s = _add(sub, "classify", "k-NN classify windows against subject reference sets")
    s.add_argument("--model", required=True)
    s.add_argument("--reference", required=True, help="reference container from 'embed'")
    s.add_argument("--in", dest="inp", required=True, help="canonical CSV")
    s.add_argument("--out", required=True, help="predictions CSV (with OOD scores)")
    s.add_argument("--k", type=int, default=3, help="neighbours for vote and OOD score")

    s = _add(sub, "evaluate", "run a cross-validated experiment and write report files")
    s.add_argument("--config", required=True)
    s.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    s.add_argument("--out", required=True, help="report directory")
    s.add_argument("--jobs", type=int, default=1, help="folds run in parallel worker processes")
    s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return p


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> None:
    recs = ingest_dataset(args.root, args.dataset)
    if not recs:
        raise DataError(f"no recordings found under {args.root}")
    write_canonical_csv(recs, args.out)
    print(f"wrote {len(recs)} recordings to {args.out}")


def cmd_synth(args) -> None:
    try:
        with open(args.spec, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        raise ConfigError(f"spec file not found: {args.spec}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{args.spec}: invalid YAML ({exc})") from None
    s = _build(SynthSection, data, "synthetic")
    seed = s.seed if args.seed is None else args.seed
    recs = synth_dataset(s.n_subjects, s.n_classes, s.n_channels, s.sample_rate,
                         s.seconds_per_class, seed, noise=s.noise, subject_spread=s.subject_spread,
                         outlier_classes=tuple(s.outlier_classes))
    write_canonical_csv(recs, args.out)
    print(f"wrote {len(recs)} recordings to {args.out}")


def _windows(recs, meta) -> SegmentSet:
    target = meta["target_hz"]
    segs = []
    for r in recs:
        r = r if r.sample_rate == target else resample(r, target)
        segs.extend(segment(r, meta["window_seconds"], meta["overlap"]))
    if not segs:
        raise DataError("no recording is long enough for one window")
    return SegmentSet.from_segments(segs)


def cmd_train(args) -> None:
    cfg = load_config(args.config, require_kind=True)
    if args.seed is not None:
        cfg.seed = args.seed
    recs = load_recordings(cfg)
    meta = {"target_hz": cfg.preprocessing.target_hz, "window_seconds": cfg.window_seconds,
            "overlap": cfg.preprocessing.overlap, "dataset": cfg.dataset.name,
            "channels": list(recs[0].channel_names)}
    train = _windows(recs, meta)
    kind = cfg.model.kind
    t0 = time.perf_counter()
    log = None
    if kind == "pef":
        model = fit_pef(train, None, cfg.evaluation.n_trees, cfg.seed)
    else:
        tcfg = train_configs(cfg, cfg.seed)
        if kind in ("fcn", "pdf"):
            classes = np.unique(train.labels)
            remapped = train.subset(np.ones(len(train), bool))
            remapped.labels = np.searchsorted(classes, train.labels)
            model, log = train_classifier(remapped, None, tcfg["cce"], kind=kind)
            model.classes = classes.astype(np.int64)
        else:
            model, log = train_triplet(train, None, tcfg[kind], kind=kind)
    seconds = time.perf_counter() - t0
    model.meta = {**meta, "seed": cfg.seed}
    if args.log:
        if log is None:
            raise ConfigError("--log needs a network model kind; pef has no training curve")
        log.to_csv(args.log)
    n = save_embedder(model, args.out)
    print(f"trained {kind} on {len(train)} windows in {seconds:.1f} s; wrote {n} bytes to {args.out}")


def _model_meta(model) -> dict:
    meta = model.meta or {}
    missing = [k for k in ("target_hz", "window_seconds", "overlap") if k not in meta]
    if missing:
        raise DataError(f"model file lacks windowing metadata {missing}")
    return meta


def cmd_embed(args) -> None:
    model = load_embedder(args.model)
    segs = _windows(read_canonical_csv(args.inp), _model_meta(model))
    emb = model.embed(segs.X)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "activity_id", "recording_id", "start_index"]
                   + [f"e{i}" for i in range(emb.shape[1])])
        for i in range(len(segs)):
            w.writerow([segs.subjects[i], int(segs.labels[i]), segs.recordings[i], int(segs.starts[i])]
                       + [repr(float(v)) for v in emb[i]])
    print(f"embedded {len(segs)} windows to {args.out}")
    if args.reference_out:
        unit = isinstance(model, DeepEmbedder)
        refs = {}
        for sid in sorted(set(segs.subjects.tolist())):
            m = segs.subjects == sid
            refs[sid] = ReferenceSet(sid, emb[m], segs.labels[m], model.embedder_id, unit)
        save_references(refs, args.reference_out)
        print(f"wrote reference sets for {len(refs)} subjects to {args.reference_out}")


def cmd_classify(args) -> None:
    model = load_embedder(args.model)
    refs = load_references(args.reference)
    ref_id = next(iter(refs.values())).embedder_id if refs else ""
    if ref_id != model.embedder_id:
        raise DataError(f"reference sets were built by embedder {ref_id or '<none>'}, "
                        f"but the model is {model.embedder_id}")
    segs = _windows(read_canonical_csv(args.inp), _model_meta(model))
    emb = model.embed(segs.X)
    pred = np.zeros(len(segs), dtype=np.int64)
    score = np.zeros(len(segs))
    for sid in sorted(set(segs.subjects.tolist())):
        if sid not in refs:
            raise DataError(f"no reference set for subject {sid}")
        m = segs.subjects == sid
        pred[m] = knn_predict(refs[sid], emb[m], args.k)
        score[m] = ood_scores(refs[sid], emb[m], args.k)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "recording_id", "start_index", "activity_id", "predicted",
                    "ood_score"])
        for i in range(len(segs)):
            w.writerow([segs.subjects[i], segs.recordings[i], int(segs.starts[i]),
                        int(segs.labels[i]), int(pred[i]), repr(float(score[i]))])
    print(f"classified {len(segs)} windows; accuracy against file labels "
          f"{np.mean(pred == segs.labels):.4f}")


def cmd_evaluate(args) -> None:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    report = run_experiment(args.experiment, cfg, jobs=args.jobs)
    paths = emit_report(report, args.out)
    for row in report.summary():
        param = "" if row["param"] is None else f" [{row['param']}]"
        print(f"{row['model']}{param} {row['metric']}: {row['mean']:.4f} +/- {row['std']:.4f} "
              f"(min {row['min']:.4f}, n={row['n']})")
    print("wrote " + ", ".join(str(p) for p in paths))


COMMANDS = {"ingest": cmd_ingest, "synth": cmd_synth, "train": cmd_train, "embed": cmd_embed,
            "classify": cmd_classify, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"pershar: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"pershar: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"pershar: numeric error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except PersharError as exc:
        print(f"pershar: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"pershar: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
