"""Run configuration: one YAML file with six sections.

Every key has a default except ``dataset.name`` (always required),
``dataset.root`` (required for file-backed datasets unless
``PERSHAR_DATA_ROOT`` is set) and ``model.kind`` (required by ``train``).
Unknown keys are rejected.
"""
from __future__ import annotations

import copy
import os
from dataclasses import asdict, dataclass, field, fields

import yaml

from .errors import ConfigError

DATA_ROOT_ENV = "PERSHAR_DATA_ROOT"
DATASETS = ("synthetic", "mhealth", "wisdm_watch", "spar", "canonical_csv")
MODEL_KINDS = ("fcn", "pef", "pdf", "ptn_conventional", "ptn")
DEFAULT_WINDOW = {"wisdm_watch": 10.0}


@dataclass
class SynthSection:
    n_subjects: int = 8
    n_classes: int = 5
    n_channels: int = 6
    sample_rate: float = 50.0
    seconds_per_class: float = 60.0
    seed: int = 7
    noise: float = 0.3
    subject_spread: float = 0.12
    outlier_classes: list = field(default_factory=list)


@dataclass
class DatasetSection:
    name: str = ""
    root: str | None = None
    synthetic: SynthSection = field(default_factory=SynthSection)


@dataclass
class PreprocessingSection:
    target_hz: float = 50.0
    window_seconds: float | None = None
    overlap: float = 0.8


@dataclass
class ModelSection:
    kind: str | None = None
    kinds: list = field(default_factory=lambda: list(MODEL_KINDS))
    filters: list = field(default_factory=lambda: [128, 256, 128])
    kernels: list = field(default_factory=lambda: [8, 5, 3])
    strides: list = field(default_factory=lambda: [1, 1, 1])
    embed_dim: int | None = None
    dropout: float = 0.3
    bn_momentum: float = 0.99
    bn_eps: float = 1e-3


@dataclass
class TrainingSection:
    epochs_cce: int = 150
    epochs_triplet: int = 150
    batch_size: int = 64
    lr_cce: float = 1e-3
    lr_triplet: float = 2e-4
    margin: float = 0.3
    subject_triplet_ratio: float = 0.5
    clipnorm: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-7


@dataclass
class EvaluationSection:
    folds: int = 5
    reference_fraction: float = 0.5
    k_neighbors: int = 3
    ood_class_fraction: float = 0.3
    ood_classes: list | None = None
    refsize_grid: list = field(default_factory=lambda: [1, 2, 4, 8, 16, 32, "all"])
    embsize_grid: list = field(default_factory=lambda: [2, 4, 8, 16, 32, 64, 128])
    n_trees: int = 250
    timing: bool = True


@dataclass
class OutputSection:
    dir: str | None = None


@dataclass
class RunConfig:
    dataset: DatasetSection = field(default_factory=DatasetSection)
    preprocessing: PreprocessingSection = field(default_factory=PreprocessingSection)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    output: OutputSection = field(default_factory=OutputSection)
    seed: int = 0

    @property
    def window_seconds(self) -> float:
        w = self.preprocessing.window_seconds
        return w if w is not None else DEFAULT_WINDOW.get(self.dataset.name, 4.0)

    def to_dict(self) -> dict:
        return asdict(self)

    def resolved(self) -> dict:
        d = self.to_dict()
        d["preprocessing"]["window_seconds"] = self.window_seconds
        return d

    def copy(self) -> "RunConfig":
        return copy.deepcopy(self)


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join((path + '.' if path else '') + k for k in unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _SECTIONS.get((cls, name))
        kwargs[name] = _build(sub, value, f"{path}.{name}" if path else name) if sub else value
    return cls(**kwargs)


_SECTIONS = {
    (RunConfig, "dataset"): DatasetSection,
    (RunConfig, "preprocessing"): PreprocessingSection,
    (RunConfig, "model"): ModelSection,
    (RunConfig, "training"): TrainingSection,
    (RunConfig, "evaluation"): EvaluationSection,
    (RunConfig, "output"): OutputSection,
    (DatasetSection, "synthetic"): SynthSection,
}


def config_from_dict(data: dict, require_kind: bool = False) -> RunConfig:
    cfg = _build(RunConfig, data, "")
    validate(cfg, require_kind=require_kind)
    return cfg


def load_config(path, require_kind: bool = False) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return config_from_dict(data or {}, require_kind=require_kind)


def validate(cfg: RunConfig, require_kind: bool = False) -> None:
    ds = cfg.dataset
    if not ds.name:
        raise ConfigError("missing required key: dataset.name")
    if ds.name not in DATASETS:
        raise ConfigError(f"dataset.name must be one of {DATASETS}, got {ds.name!r}")
    if ds.name != "synthetic" and not ds.root:
        env = os.environ.get(DATA_ROOT_ENV)
        if not env:
            raise ConfigError(f"missing required key: dataset.root (or set {DATA_ROOT_ENV})")
        ds.root = env
    if require_kind and not cfg.model.kind:
        raise ConfigError("missing required key: model.kind")
    if cfg.model.kind is not None and cfg.model.kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {cfg.model.kind!r}")
    bad = [k for k in cfg.model.kinds if k not in MODEL_KINDS]
    if bad:
        raise ConfigError(f"model.kinds has unknown entries {bad}; allowed {MODEL_KINDS}")
    if not 0 <= cfg.preprocessing.overlap < 1:
        raise ConfigError("preprocessing.overlap must be in [0, 1)")
    if not 0 < cfg.evaluation.reference_fraction < 1:
        raise ConfigError("evaluation.reference_fraction must be in (0, 1)")
    if cfg.evaluation.folds < 2:
        raise ConfigError("evaluation.folds must be >= 2")
    if not 0 <= cfg.training.subject_triplet_ratio <= 1:
        raise ConfigError("training.subject_triplet_ratio must be in [0, 1]")
