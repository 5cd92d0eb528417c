"""Personalized human activity recognition from body-worn sensor windows.

Subpackages: ``datakit`` (ingest, resample, window, split, folds),
``featkit`` (engineered features, Gini ranking), ``nncore`` (FCN core with
hand-written backprop and Adam), ``trainkit`` (cross-entropy and triplet
training), ``evalkit`` (metrics, experiments, reports). Personalized
inference lives in ``personalize``; the command line in ``cli``.
"""
from .errors import ConfigError, DataError, IngestError, NumericError, PersharError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "IngestError", "NumericError", "PersharError", "__version__"]
