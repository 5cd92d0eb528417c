"""Engineered per-channel window statistics and train-set standardisation."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import DataError

FEATURE_NAMES = (
    "mean", "median", "abs_energy", "std", "var", "min", "max",
    "skewness", "kurtosis", "mean_spectral_energy", "mean_crossings",
)
N_FEATURES = len(FEATURE_NAMES)


@dataclass
class FeatureVector:
    values: np.ndarray
    feature_names: list[str]


def feature_names(channel_names) -> list[str]:
    # channel-major, feature-minor
    return [f"{ch}_{f}" for ch in channel_names for f in FEATURE_NAMES]


def _mean_crossings(centered: np.ndarray) -> np.ndarray:
    """Sign changes along axis 1; zeros inherit the preceding sign."""
    s = np.sign(centered)
    n, t, c = s.shape
    # forward-fill zeros with the last nonzero sign
    idx = np.where(s != 0, np.arange(t)[None, :, None], 0)
    np.maximum.accumulate(idx, axis=1, out=idx)
    filled = np.take_along_axis(s, idx, axis=1)
    changes = (filled[:, 1:] != filled[:, :-1]) & (filled[:, 1:] != 0) & (filled[:, :-1] != 0)
    return changes.sum(axis=1).astype(np.float64)


def extract_batch(X: np.ndarray) -> np.ndarray:
    """Features for a stack of windows ``(n, time, channels)`` -> ``(n, 11 * channels)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise DataError(f"expected (n, time, channels), got shape {X.shape}")
    if X.shape[1] < 2:
        raise DataError(f"windows need at least 2 samples, got {X.shape[1]}")
    if np.isnan(X).any():
        raise DataError("NaN in window data")
    n, t, c = X.shape
    mean = X.mean(axis=1)
    centered = X - mean[:, None, :]
    m2 = (centered ** 2).mean(axis=1)
    m3 = (centered ** 3).mean(axis=1)
    m4 = (centered ** 4).mean(axis=1)
    scale = np.maximum(1.0, np.abs(mean)) ** 2
    flat = m2 <= 1e-24 * scale
    safe = np.where(flat, 1.0, m2)
    skew = np.where(flat, 0.0, m3 / safe ** 1.5)
    kurt = np.where(flat, 0.0, m4 / safe ** 2 - 3.0)
    spec = np.abs(np.fft.rfft(X, axis=1)[:, 1:]) ** 2
    crossings = _mean_crossings(np.where(flat[:, None, :], 0.0, centered))
    feats = np.stack([
        mean,
        np.median(X, axis=1),
        (X ** 2).sum(axis=1),
        np.sqrt(m2),
        m2,
        X.min(axis=1),
        X.max(axis=1),
        skew,
        kurt,
        spec.mean(axis=1),
        crossings,
    ], axis=2)
    return feats.reshape(n, c * N_FEATURES)


def extract_engineered(segment, channel_names=None) -> FeatureVector:
    data = segment.data if hasattr(segment, "data") else np.asarray(segment)
    values = extract_batch(data[None])[0]
    if channel_names is None:
        channel_names = [f"ch_{i}" for i in range(data.shape[1])]
    return FeatureVector(values=values, feature_names=feature_names(channel_names))


@dataclass
class FeatureScaler:
    mean: np.ndarray
    std: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.std <= 1e-12 * np.maximum(1.0, np.abs(self.mean))

    def transform(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        const = self.constant
        out = (features - self.mean) / np.where(const, 1.0, self.std)
        out[..., const] = 0.0
        return out


def fit_scaler(train_features: np.ndarray) -> FeatureScaler:
    train_features = np.asarray(train_features, dtype=np.float64)
    if train_features.ndim != 2 or train_features.shape[0] < 2:
        raise DataError("fit_scaler needs at least 2 training vectors")
    return FeatureScaler(mean=train_features.mean(axis=0), std=train_features.std(axis=0))


def apply_scaler(scaler: FeatureScaler, features):
    if isinstance(features, FeatureVector):
        return FeatureVector(values=scaler.transform(features.values), feature_names=features.feature_names)
    return scaler.transform(features)


def write_feature_csv(features: np.ndarray, names, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in np.atleast_2d(features):
            w.writerow([repr(float(v)) for v in row])
