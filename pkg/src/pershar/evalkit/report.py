from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError
from .metrics import five_number

RESULT_KEYS = ("model", "param", "fold", "subject", "metric", "value")
TIMING_KEYS = ("model", "param", "fold", "fit_seconds", "inference_seconds", "model_bytes",
               "reference_bytes")


@dataclass
class ExperimentReport:
    """Everything an experiment produced, self-described by its config echo.

    ``results`` holds one row per (model, param, fold, subject, metric);
    ``param`` is the sweep value (segments per class, embedding size) or
    None. ``timing`` holds one row per (model, param, fold).
    """

    experiment: str
    config: dict
    results: list[dict] = field(default_factory=list)
    timing: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    flags: list[dict] = field(default_factory=list)

    def values(self, model: str, metric: str, param=None) -> dict[str, float]:
        return {r["subject"]: r["value"] for r in self.results
                if r["model"] == model and r["metric"] == metric and r["param"] == param}

    def groups(self) -> list[tuple]:
        seen = []
        for r in self.results:
            key = (r["model"], r["param"], r["metric"])
            if key not in seen:
                seen.append(key)
        return seen

    def summary(self) -> list[dict]:
        rows = []
        for model, param, metric in self.groups():
            vals = np.array(list(self.values(model, metric, param).values()))
            rows.append({"model": model, "param": param, "metric": metric, "n": int(vals.size),
                         "mean": float(vals.mean()), "std": float(vals.std()), **five_number(vals)})
        return rows

    def stat(self, model: str, metric: str, key: str = "mean", param=None) -> float:
        for row in self.summary():
            if row["model"] == model and row["metric"] == metric and row["param"] == param:
                return row[key]
        raise KeyError((model, metric, param))

    def timing_summary(self) -> list[dict]:
        rows = []
        keys = []
        for t in self.timing:
            if (t["model"], t["param"]) not in keys:
                keys.append((t["model"], t["param"]))
        for model, param in keys:
            sel = [t for t in self.timing if t["model"] == model and t["param"] == param]
            row = {"model": model, "param": param}
            for k in TIMING_KEYS[3:]:
                vals = [t[k] for t in sel if t[k] is not None]
                row[k] = float(np.mean(vals)) if vals else None
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "config": self.config, "results": self.results,
                "timing": self.timing, "warnings": self.warnings, "flags": self.flags,
                "summary": self.summary(), "timing_summary": self.timing_summary()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(experiment=d["experiment"], config=d["config"], results=d["results"],
                   timing=d["timing"], warnings=d["warnings"], flags=d["flags"])

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(r[k]) for k in header])


def emit_report(report: ExperimentReport, out_dir) -> list[Path]:
    """Write report.json, subjects.csv, boxplot.csv and timing.csv."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / n for n in ("report.json", "subjects.csv", "boxplot.csv", "timing.csv")]
        paths[0].write_text(report.to_json() + "\n", encoding="utf-8")
        _write_csv(paths[1], RESULT_KEYS, report.results)
        _write_csv(paths[2], ("model", "param", "metric", "n", "mean", "std", "min", "q1", "median",
                              "q3", "max"), report.summary())
        _write_csv(paths[3], ("model", "param") + TIMING_KEYS[3:], report.timing_summary())
    except OSError as exc:
        raise DataError(f"cannot write report to {exc.filename or out}: {exc.strerror}") from None
    return paths


def load_report(path) -> ExperimentReport:
    return ExperimentReport.from_json(Path(path).read_text(encoding="utf-8"))
